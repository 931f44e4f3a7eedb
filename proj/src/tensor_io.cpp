#include "exaq/tensor_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include "byte_io.hpp"
#include "exaq/error.hpp"

namespace exaq {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::io_failure: return "I/O failure";
    case ErrorCode::bad_magic: return "bad magic";
    case ErrorCode::bad_version: return "unsupported version";
    case ErrorCode::truncated: return "truncated payload";
    case ErrorCode::non_finite: return "non-finite value";
    case ErrorCode::size_mismatch: return "size mismatch";
    case ErrorCode::empty_input: return "empty input";
    case ErrorCode::boundary_solution: return "minimum at search boundary";
    case ErrorCode::non_convergence: return "quadrature did not converge";
    case ErrorCode::contract_violation: return "contract violation";
    case ErrorCode::lut_mismatch: return "spec/LUT mismatch";
  }
  return "unknown";
}

namespace detail {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_failure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::io_failure, "read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_failure, "cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::io_failure, "write failed: " + path.string());
}

}  // namespace detail

TensorF32::TensorF32(std::vector<std::uint64_t> dims, std::vector<float> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  if (dims_.empty() || dims_.size() > 2) {
    throw Error(ErrorCode::invalid_argument, "tensor must be 1-D or 2-D");
  }
  std::uint64_t count = 1;
  for (auto d : dims_) {
    if (d == 0) throw Error(ErrorCode::invalid_argument, "zero-sized dimension");
    count *= d;
  }
  if (count != data_.size()) {
    throw Error(ErrorCode::size_mismatch, "dims product " + std::to_string(count) +
                                              " != data length " + std::to_string(data_.size()));
  }
  for (float v : data_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::non_finite, "tensor holds NaN/Inf");
  }
}

std::size_t TensorF32::rows() const noexcept {
  if (dims_.empty()) return 0;
  return dims_.size() == 1 ? 1 : static_cast<std::size_t>(dims_[0]);
}

std::size_t TensorF32::cols() const noexcept {
  if (dims_.empty()) return 0;
  return static_cast<std::size_t>(dims_.back());
}

std::span<const float> TensorF32::row(std::size_t r) const {
  if (r >= rows()) throw Error(ErrorCode::invalid_argument, "row index out of range");
  return std::span<const float>(data_).subspan(r * cols(), cols());
}

std::vector<std::uint8_t> encode_tensor(const TensorF32& tensor) {
  if (tensor.dims().empty()) throw Error(ErrorCode::invalid_argument, "empty tensor");
  detail::ByteWriter w;
  w.bytes(kTensorMagic, sizeof(kTensorMagic));
  w.put<std::uint32_t>(kTensorVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tensor.dims().size()));
  for (auto d : tensor.dims()) w.put<std::uint64_t>(d);
  for (float v : tensor.data()) w.put<float>(v);
  return w.take();
}

TensorF32 decode_tensor(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  char magic[8];
  try {
    r.bytes(magic, sizeof(magic));
  } catch (const Error&) {
    throw Error(ErrorCode::bad_magic, "file shorter than magic header");
  }
  if (std::memcmp(magic, kTensorMagic, sizeof(magic)) != 0) {
    throw Error(ErrorCode::bad_magic, "not an EXAQTNSR file");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kTensorVersion) {
    throw Error(ErrorCode::bad_version, "tensor version " + std::to_string(version));
  }
  const auto ndim = r.get<std::uint32_t>();
  if (ndim != 1 && ndim != 2) {
    throw Error(ErrorCode::invalid_argument, "ndim must be 1 or 2, got " + std::to_string(ndim));
  }
  std::vector<std::uint64_t> dims(ndim);
  std::uint64_t count = 1;
  for (auto& d : dims) {
    d = r.get<std::uint64_t>();
    if (d == 0) throw Error(ErrorCode::invalid_argument, "zero-sized dimension");
    if (d > std::numeric_limits<std::uint64_t>::max() / count) {
      throw Error(ErrorCode::truncated, "declared dims exceed any payload");
    }
    count *= d;
  }
  if (r.remaining() / sizeof(float) < count) {
    throw Error(ErrorCode::truncated, "payload holds " + std::to_string(r.remaining() / 4) +
                                          " floats, dims need " + std::to_string(count));
  }
  if (r.remaining() != count * sizeof(float)) {
    throw Error(ErrorCode::size_mismatch, "trailing bytes after payload");
  }
  std::vector<float> data(count);
  for (auto& v : data) {
    v = r.get<float>();
    if (!std::isfinite(v)) throw Error(ErrorCode::non_finite, "payload holds NaN/Inf");
  }
  return TensorF32(std::move(dims), std::move(data));
}

TensorF32 load_tensor(const std::filesystem::path& path) {
  return decode_tensor(detail::read_file(path));
}

void save_tensor(const TensorF32& tensor, const std::filesystem::path& path) {
  detail::write_file(path, encode_tensor(tensor));
}

namespace {

class BoxMuller {
 public:
  explicit BoxMuller(std::uint64_t seed) : engine_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1], u2 in [0, 1)
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace

std::vector<double> gaussian_samples(std::size_t n, double mu, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma) || !std::isfinite(mu)) {
    throw Error(ErrorCode::invalid_argument, "sigma must be finite and >= 0");
  }
  std::vector<double> out(n);
  if (sigma == 0.0) {
    std::fill(out.begin(), out.end(), mu);
    return out;
  }
  BoxMuller gen(seed);
  for (auto& v : out) v = mu + sigma * gen.next();
  return out;
}

TensorF32 gen_gaussian_tensor(std::size_t rows, std::size_t cols, double mu, double sigma,
                              std::uint64_t seed) {
  if (rows == 0 || cols == 0) throw Error(ErrorCode::invalid_argument, "rows and cols must be > 0");
  const auto samples = gaussian_samples(rows * cols, mu, sigma, seed);
  std::vector<float> data(samples.begin(), samples.end());
  std::vector<std::uint64_t> dims = rows == 1 ? std::vector<std::uint64_t>{cols}
                                              : std::vector<std::uint64_t>{rows, cols};
  return TensorF32(std::move(dims), std::move(data));
}

namespace {

template <typename T>
TensorStats stats_impl(std::span<const T> values) {
  if (values.empty()) throw Error(ErrorCode::empty_input, "statistics of empty tensor");
  // Welford update keeps the single pass numerically stable.
  TensorStats s;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  double m2 = 0.0;
  for (T raw : values) {
    const double v = static_cast<double>(raw);
    ++s.n;
    const double d = v - s.mean;
    s.mean += d / static_cast<double>(s.n);
    m2 += d * (v - s.mean);
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  s.std = std::sqrt(std::max(0.0, m2 / static_cast<double>(s.n)));
  // Rounding in the running mean can leave it a hair outside [min, max].
  s.mean = std::clamp(s.mean, s.min, s.max);
  return s;
}

}  // namespace

TensorStats tensor_stats(std::span<const float> values) { return stats_impl(values); }
TensorStats tensor_stats(std::span<const double> values) { return stats_impl(values); }

}  // namespace exaq
