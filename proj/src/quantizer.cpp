#include "exaq/quantizer.hpp"

#include <algorithm>
#include <string>

#include "exaq/clip_optimizer.hpp"
#include "exaq/error.hpp"

namespace exaq {

std::string_view to_string(QuantMode mode) noexcept {
  return mode == QuantMode::exaq ? "exaq" : "naive";
}

QuantMode parse_quant_mode(std::string_view text) {
  if (text == "exaq") return QuantMode::exaq;
  if (text == "naive") return QuantMode::naive;
  throw Error(ErrorCode::invalid_argument, "unknown quantization mode '" + std::string(text) + "'");
}

QuantSpec::QuantSpec(int bits, double clip, QuantMode mode) : bits_(bits), clip_(clip), mode_(mode) {
  if (bits < 2 || bits > 4) {
    throw Error(ErrorCode::invalid_argument, "bits must be in {2,3,4}, got " + std::to_string(bits));
  }
  if (!(clip < 0.0) || !std::isfinite(clip)) {
    throw Error(ErrorCode::invalid_argument, "clip must be finite and < 0, got " + std::to_string(clip));
  }
  const unsigned count = 1u << bits;
  delta_ = -clip / static_cast<double>(count);
  max_code_ = static_cast<std::uint8_t>(count - 1);
  levels_.resize(count);
  for (unsigned k = 0; k < count; ++k) levels_[k] = clip + (k + 0.5) * delta_;
}

namespace {

template <typename T>
std::vector<double> shift_impl(std::span<const T> row) {
  if (row.empty()) throw Error(ErrorCode::empty_input, "shift_by_max of empty row");
  double peak = static_cast<double>(row[0]);
  for (T v : row) {
    if (!std::isfinite(static_cast<double>(v))) throw Error(ErrorCode::non_finite, "row holds NaN/Inf");
    peak = std::max(peak, static_cast<double>(v));
  }
  std::vector<double> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = static_cast<double>(row[i]) - peak;
  return out;
}

}  // namespace

std::vector<double> shift_by_max(std::span<const float> row) { return shift_impl(row); }
std::vector<double> shift_by_max(std::span<const double> row) { return shift_impl(row); }

CalibStats calibrate(std::span<const TensorF32> tensors) {
  if (tensors.empty()) throw Error(ErrorCode::empty_input, "calibration set is empty");
  CalibStats out;
  double sigma_sum = 0.0;
  double mu_sum = 0.0;
  double min_sum = 0.0;
  for (const auto& t : tensors) {
    if (t.size() == 0) throw Error(ErrorCode::empty_input, "empty calibration tensor");
    double row_sigma = 0.0;
    double row_mu = 0.0;
    double tensor_min = 0.0;
    for (std::size_t r = 0; r < t.rows(); ++r) {
      const auto shifted = shift_by_max(t.row(r));
      const auto s = tensor_stats(std::span<const double>(shifted));
      row_sigma += s.std;
      row_mu += s.mean;
      tensor_min = std::min(tensor_min, s.min);
    }
    const double rows = static_cast<double>(t.rows());
    out.per_tensor_sigma.push_back(row_sigma / rows);
    sigma_sum += row_sigma / rows;
    mu_sum += row_mu / rows;
    min_sum += tensor_min;
  }
  const double n = static_cast<double>(tensors.size());
  out.n_tensors = tensors.size();
  out.sigma = sigma_sum / n;
  out.mu = mu_sum / n;
  out.min_avg = min_sum / n;
  return out;
}

QuantSpec make_spec_exaq(const CalibStats& stats, int bits, const LinearClipModel& model) {
  if (!(stats.sigma > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "EXAQ spec needs calibrated sigma > 0");
  }
  if (model.bits != bits) {
    throw Error(ErrorCode::invalid_argument, "clip model fitted for " + std::to_string(model.bits) +
                                                 " bits, spec wants " + std::to_string(bits));
  }
  const auto pred = predict_clip(model, stats.sigma);
  if (!(pred.clip < 0.0)) {
    throw Error(ErrorCode::invalid_argument, "model predicts nonnegative clip " + std::to_string(pred.clip));
  }
  return QuantSpec(bits, pred.clip, QuantMode::exaq);
}

QuantSpec make_spec_naive(const CalibStats& stats, int bits) {
  if (!(stats.min_avg < 0.0)) {
    throw Error(ErrorCode::invalid_argument, "NAIVE spec needs min_avg < 0");
  }
  return QuantSpec(bits, stats.min_avg, QuantMode::naive);
}

std::vector<std::uint8_t> quantize_row(std::span<const double> shifted, const QuantSpec& spec) {
  std::vector<std::uint8_t> codes(shifted.size());
  for (std::size_t i = 0; i < shifted.size(); ++i) {
    if (!(shifted[i] <= 0.0)) {
      throw Error(ErrorCode::contract_violation,
                  "quantize_row expects max-shifted input <= 0, got " + std::to_string(shifted[i]));
    }
    codes[i] = spec.code_of(shifted[i]);
  }
  return codes;
}

std::vector<double> dequantize(std::span<const std::uint8_t> codes, const QuantSpec& spec) {
  std::vector<double> out(codes.size());
  const auto levels = spec.levels();
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] >= levels.size()) {
      throw Error(ErrorCode::invalid_argument, "code " + std::to_string(codes[i]) + " out of range");
    }
    out[i] = levels[codes[i]];
  }
  return out;
}

}  // namespace exaq
