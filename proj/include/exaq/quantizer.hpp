#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "exaq/tensor_io.hpp"

namespace exaq {

struct LinearClipModel;

enum class QuantMode : std::uint8_t { exaq = 0, naive = 1 };

std::string_view to_string(QuantMode mode) noexcept;
QuantMode parse_quant_mode(std::string_view text);

/// Uniform M-bit quantizer over [clip, 0] with mid-bin reconstruction.
///
/// Code k covers [clip + k*delta, clip + (k+1)*delta) and dequantizes to
/// clip + (k + 0.5) * delta. The top level is -delta/2, so e^0 = 1 is never
/// reproduced exactly. In the kernel's (scale, offset, clip) terms,
/// scale = delta and offset = clip.
class QuantSpec {
 public:
  /// Throws Error{invalid_argument} for bits outside {2,3,4} or clip >= 0.
  QuantSpec(int bits, double clip, QuantMode mode);

  int bits() const noexcept { return bits_; }
  double clip() const noexcept { return clip_; }
  double delta() const noexcept { return delta_; }
  QuantMode mode() const noexcept { return mode_; }
  std::span<const double> levels() const noexcept { return levels_; }
  std::size_t num_levels() const noexcept { return levels_.size(); }

  /// floor((x - clip) / delta) clamped to [0, 2^M - 1]; no sign check.
  std::uint8_t code_of(double x) const noexcept {
    const double t = (x - clip_) / delta_;
    if (!(t >= 1.0)) return 0;
    if (t >= static_cast<double>(max_code_)) return max_code_;
    return static_cast<std::uint8_t>(t);  // t >= 1, so truncation is floor
  }

  friend bool operator==(const QuantSpec&, const QuantSpec&) = default;

 private:
  int bits_;
  double clip_;
  double delta_;
  QuantMode mode_;
  std::uint8_t max_code_;
  std::vector<double> levels_;
};

struct CalibStats {
  double sigma = 0.0;
  double mu = 0.0;
  double min_avg = 0.0;
  std::size_t n_tensors = 0;
  /// Per-tensor sigma values, kept for the histogram report.
  std::vector<double> per_tensor_sigma;
};

/// x - max(x); the output maximum is exactly 0.
std::vector<double> shift_by_max(std::span<const float> row);
std::vector<double> shift_by_max(std::span<const double> row);

/// Rows are max-shifted individually. Per tensor: sigma and mu are the means
/// of the per-row population std and mean, and the minimum is taken over all
/// shifted elements. The result averages those per-tensor values.
CalibStats calibrate(std::span<const TensorF32> tensors);

/// Clip from the linear sigma -> C* model.
QuantSpec make_spec_exaq(const CalibStats& stats, int bits, const LinearClipModel& model);
/// Clip at the averaged per-tensor minimum; the shifted maximum is always 0.
QuantSpec make_spec_naive(const CalibStats& stats, int bits);

/// Throws Error{contract_violation} on any positive input.
std::vector<std::uint8_t> quantize_row(std::span<const double> shifted, const QuantSpec& spec);
/// Throws Error{invalid_argument} on codes >= 2^M.
std::vector<double> dequantize(std::span<const std::uint8_t> codes, const QuantSpec& spec);

}  // namespace exaq
