#include "exaq/softmax.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "exaq/error.hpp"
#include "parallel.hpp"

namespace exaq {

namespace {

void require_nonempty(std::span<const float> row) {
  if (row.empty()) throw Error(ErrorCode::empty_input, "softmax of empty row");
}

float row_max(std::span<const float> row) {
  float peak = row[0];
  for (float v : row) peak = std::max(peak, v);
  return peak;
}

SoftmaxResult to_result(std::vector<double> probs, const RowOutcome& r) {
  SoftmaxResult out;
  out.probs = std::move(probs);
  out.denom = r.denom;
  out.exp_calls = r.counters.exp_calls;
  out.accum_iters = r.counters.accum_iters;
  out.lut_lookups = r.counters.lut_lookups;
  return out;
}

}  // namespace

void check_lut_matches(const QuantSpec& spec, const ExpLut& exp_lut, const SumLut& sum_lut) {
  const bool ok = exp_lut.bits == spec.bits() && sum_lut.bits == spec.bits() &&
                  exp_lut.clip == spec.clip() && sum_lut.clip == spec.clip() &&
                  exp_lut.delta == spec.delta() && sum_lut.delta == spec.delta() &&
                  exp_lut.entries.size() == spec.num_levels() && sum_lut.pack_width >= 1 &&
                  sum_lut.entries.size() == (std::size_t{1} << sum_lut.key_bits());
  if (!ok) throw Error(ErrorCode::lut_mismatch, "lookup tables do not match the quantization spec");
}

RowOutcome softmax_reference_into(std::span<const float> row, std::span<double> out) {
  require_nonempty(row);
  if (out.size() != row.size()) throw Error(ErrorCode::size_mismatch, "output span length");
  const double peak = row_max(row);
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = std::exp(static_cast<double>(row[i]) - peak);

  // Neumaier-compensated sum: the rounded result does not depend on the
  // element order, so permuting the row permutes the output bit-for-bit.
  double sum = 0.0;
  double carry = 0.0;
  for (double e : out) {
    const double t = sum + e;
    carry += std::abs(sum) >= std::abs(e) ? (sum - t) + e : (e - t) + sum;
    sum = t;
  }
  sum += carry;

  for (double& e : out) e /= sum;
  const auto n = static_cast<std::uint64_t>(row.size());
  return {sum, {n, n, 0}};
}

RowOutcome softmax_exaq_into(std::span<const float> row, const QuantSpec& spec,
                             const ExpLut& exp_lut, const SumLut& sum_lut, std::span<double> out,
                             SoftmaxWorkspace& ws) {
  require_nonempty(row);
  if (out.size() != row.size()) throw Error(ErrorCode::size_mismatch, "output span length");
  const std::size_t n = row.size();
  ws.codes.resize(n);
  std::uint8_t* codes = ws.codes.data();
  const float* lut_exp = exp_lut.entries.data();
  const float* lut_sum = sum_lut.entries.data();

  const double peak = row_max(row);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t c = spec.code_of(static_cast<double>(row[i]) - peak);
    codes[i] = c;
    out[i] = lut_exp[c];
  }

  const int bits = spec.bits();
  const auto pack = static_cast<std::size_t>(sum_lut.pack_width);
  const std::size_t full = n / pack;
  double sum = 0.0;
  for (std::size_t g = 0; g < full; ++g) {
    const std::uint8_t* group = codes + g * pack;
    std::uint32_t key = 0;
    for (std::size_t j = 0; j < pack; ++j) key = (key << bits) | group[j];
    sum += lut_sum[key];
  }
  std::uint64_t groups = full;
  if (full * pack < n) {
    double tail = 0.0;
    for (std::size_t i = full * pack; i < n; ++i) tail += lut_exp[codes[i]];
    sum += tail;
    ++groups;
  }

  for (double& e : out) e /= sum;
  return {sum, {0, groups, static_cast<std::uint64_t>(n) + groups}};
}

SoftmaxResult softmax_reference(std::span<const float> row) {
  require_nonempty(row);
  std::vector<double> probs(row.size());
  const auto r = softmax_reference_into(row, probs);
  return to_result(std::move(probs), r);
}

SoftmaxResult softmax_exaq(std::span<const float> row, const QuantSpec& spec, const ExpLut& exp_lut,
                           const SumLut& sum_lut) {
  require_nonempty(row);
  check_lut_matches(spec, exp_lut, sum_lut);
  std::vector<double> probs(row.size());
  SoftmaxWorkspace ws;
  const auto r = softmax_exaq_into(row, spec, exp_lut, sum_lut, probs, ws);
  return to_result(std::move(probs), r);
}

SoftmaxResult softmax_quantized_scalar(std::span<const float> row, const QuantSpec& spec) {
  require_nonempty(row);
  const auto shifted = shift_by_max(row);
  const auto levels = dequantize(quantize_row(shifted, spec), spec);
  std::vector<double> probs(levels.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    probs[i] = std::exp(levels[i]);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
  const auto n = static_cast<std::uint64_t>(row.size());
  return to_result(std::move(probs), {sum, {n, n, 0}});
}

double output_mse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::size_mismatch, "output_mse lengths " + std::to_string(a.size()) + " vs " +
                                              std::to_string(b.size()));
  }
  if (a.empty()) throw Error(ErrorCode::empty_input, "output_mse of empty vectors");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

std::string_view to_string(KernelKind kind) noexcept {
  switch (kind) {
    case KernelKind::reference: return "reference";
    case KernelKind::exaq: return "exaq";
    case KernelKind::naive: return "naive";
    case KernelKind::scalar_oracle: return "scalar-oracle";
  }
  return "unknown";
}

KernelKind parse_kernel(std::string_view text) {
  for (auto k : {KernelKind::reference, KernelKind::exaq, KernelKind::naive, KernelKind::scalar_oracle}) {
    if (text == to_string(k)) return k;
  }
  throw Error(ErrorCode::invalid_argument, "unknown kernel '" + std::string(text) + "'");
}

BatchResult softmax_batch(const TensorF32& input, KernelKind kind, const LutBundle* bundle,
                          unsigned threads) {
  if (input.size() == 0) throw Error(ErrorCode::empty_input, "empty input tensor");
  if (kind != KernelKind::reference) {
    if (bundle == nullptr) throw Error(ErrorCode::invalid_argument, "kernel needs a LUT bundle");
    check_lut_matches(bundle->spec, bundle->exp_lut, bundle->sum_lut);
    if (kind == KernelKind::exaq && bundle->spec.mode() != QuantMode::exaq) {
      throw Error(ErrorCode::lut_mismatch, "exaq kernel given a naive-mode bundle");
    }
    if (kind == KernelKind::naive && bundle->spec.mode() != QuantMode::naive) {
      throw Error(ErrorCode::lut_mismatch, "naive kernel given an exaq-mode bundle");
    }
  }

  const std::size_t rows = input.rows();
  const std::size_t cols = input.cols();
  std::vector<float> probs(input.size());
  std::vector<double> denoms(rows);
  std::vector<KernelCounters> per_row(rows);

  detail::parallel_for(rows, threads, [&](std::size_t r) {
    const auto row = input.row(r);
    std::vector<double> out(cols);
    RowOutcome outcome;
    switch (kind) {
      case KernelKind::reference: outcome = softmax_reference_into(row, out); break;
      case KernelKind::exaq:
      case KernelKind::naive: {
        SoftmaxWorkspace ws;
        outcome = softmax_exaq_into(row, bundle->spec, bundle->exp_lut, bundle->sum_lut, out, ws);
        break;
      }
      case KernelKind::scalar_oracle: {
        auto res = softmax_quantized_scalar(row, bundle->spec);
        out = std::move(res.probs);
        outcome = {res.denom, res.counters()};
        break;
      }
    }
    std::transform(out.begin(), out.end(), probs.begin() + static_cast<std::ptrdiff_t>(r * cols),
                   [](double p) { return static_cast<float>(p); });
    denoms[r] = outcome.denom;
    per_row[r] = outcome.counters;
  });

  BatchResult result{TensorF32(input.dims(), std::move(probs)), std::move(denoms), {}};
  for (const auto& c : per_row) result.counters += c;
  return result;
}

}  // namespace exaq
