#pragma once

// Softmax kernels.
//
//   reference      x -> x - max(x), e_i = exp(x_i), N accumulations, divide.
//   exaq / naive   x -> x - max(x), quantize to M-bit codes, e_i = LUT_exp[code_i],
//                  denominator = sum of LUT_sum[packed group] over ceil(N/P) groups.
//   scalar-oracle  quantize, dequantize, exp in double, sequential sum, divide.
//
// Denominators accumulate in double in every kernel; only the LUT entries are
// float. A trailing group shorter than P is summed from LUT_exp and counted as
// one accumulation step and one denominator lookup.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "exaq/lut.hpp"
#include "exaq/quantizer.hpp"
#include "exaq/tensor_io.hpp"

namespace exaq {

struct KernelCounters {
  std::uint64_t exp_calls = 0;
  std::uint64_t accum_iters = 0;
  std::uint64_t lut_lookups = 0;

  KernelCounters& operator+=(const KernelCounters& o) noexcept {
    exp_calls += o.exp_calls;
    accum_iters += o.accum_iters;
    lut_lookups += o.lut_lookups;
    return *this;
  }
  friend bool operator==(const KernelCounters&, const KernelCounters&) = default;
};

struct SoftmaxResult {
  std::vector<double> probs;
  double denom = 0.0;
  std::uint64_t exp_calls = 0;
  std::uint64_t accum_iters = 0;
  std::uint64_t lut_lookups = 0;

  KernelCounters counters() const noexcept { return {exp_calls, accum_iters, lut_lookups}; }
};

/// What an in-place kernel call reports besides the probabilities.
struct RowOutcome {
  double denom = 0.0;
  KernelCounters counters;
};

/// Scratch reused across calls so the hot path does not allocate.
struct SoftmaxWorkspace {
  std::vector<std::uint8_t> codes;
};

SoftmaxResult softmax_reference(std::span<const float> row);
SoftmaxResult softmax_exaq(std::span<const float> row, const QuantSpec& spec, const ExpLut& exp_lut,
                           const SumLut& sum_lut);
SoftmaxResult softmax_quantized_scalar(std::span<const float> row, const QuantSpec& spec);

/// In-place variants: `out` must have row.size() elements.
RowOutcome softmax_reference_into(std::span<const float> row, std::span<double> out);
RowOutcome softmax_exaq_into(std::span<const float> row, const QuantSpec& spec,
                             const ExpLut& exp_lut, const SumLut& sum_lut, std::span<double> out,
                             SoftmaxWorkspace& ws);

/// Throws Error{lut_mismatch} unless both tables were built for `spec`.
void check_lut_matches(const QuantSpec& spec, const ExpLut& exp_lut, const SumLut& sum_lut);

/// Mean squared difference; throws Error{size_mismatch} on unequal lengths.
double output_mse(std::span<const double> a, std::span<const double> b);

enum class KernelKind { reference, exaq, naive, scalar_oracle };

std::string_view to_string(KernelKind kind) noexcept;
KernelKind parse_kernel(std::string_view text);

struct BatchResult {
  TensorF32 probs;  // same dims as the input, values cast to float
  std::vector<double> denoms;
  KernelCounters counters;
};

/// Runs a kernel over every row, rows split across `threads` workers that
/// share the immutable tables. `bundle` may be null for the reference kernel.
BatchResult softmax_batch(const TensorF32& input, KernelKind kind, const LutBundle* bundle,
                          unsigned threads = 1);

}  // namespace exaq
