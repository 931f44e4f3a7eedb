#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace exaq {

/// 1-D or 2-D row-major float32 activation tensor.
///
/// A 1-D tensor of length n behaves as a single row of n columns.
class TensorF32 {
 public:
  TensorF32() = default;
  /// Throws Error{invalid_argument} unless dims are 1-D/2-D positive sizes,
  /// Error{size_mismatch} if their product differs from data.size(), and
  /// Error{non_finite} on NaN/Inf values.
  TensorF32(std::vector<std::uint64_t> dims, std::vector<float> data);

  const std::vector<std::uint64_t>& dims() const noexcept { return dims_; }
  std::span<const float> data() const noexcept { return data_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;
  std::span<const float> row(std::size_t r) const;

  friend bool operator==(const TensorF32&, const TensorF32&) = default;

 private:
  std::vector<std::uint64_t> dims_;
  std::vector<float> data_;
};

struct TensorStats {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // population (1/n)
  double min = 0.0;
  double max = 0.0;
};

inline constexpr char kTensorMagic[8] = {'E', 'X', 'A', 'Q', 'T', 'N', 'S', 'R'};
inline constexpr std::uint32_t kTensorVersion = 1;

TensorF32 load_tensor(const std::filesystem::path& path);
void save_tensor(const TensorF32& tensor, const std::filesystem::path& path);

/// Encode/decode the on-disk byte layout; the file functions are thin wrappers.
std::vector<std::uint8_t> encode_tensor(const TensorF32& tensor);
TensorF32 decode_tensor(std::span<const std::uint8_t> bytes);

/// Samples N(mu, sigma^2) with std::mt19937_64 seeded by `seed` and the
/// Box-Muller transform (both outputs of each pair are used). Uniforms are
/// built from the top 53 bits of each engine draw, so the stream is fully
/// specified by the standard and identical across conforming builds.
TensorF32 gen_gaussian_tensor(std::size_t rows, std::size_t cols, double mu, double sigma,
                              std::uint64_t seed);

/// Same sampler, returning 64-bit values (used by the analysis modules).
std::vector<double> gaussian_samples(std::size_t n, double mu, double sigma, std::uint64_t seed);

TensorStats tensor_stats(std::span<const float> values);
TensorStats tensor_stats(std::span<const double> values);
inline TensorStats tensor_stats(const TensorF32& t) { return tensor_stats(t.data()); }

}  // namespace exaq
