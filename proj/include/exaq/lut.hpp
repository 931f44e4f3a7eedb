#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "exaq/quantizer.hpp"

namespace exaq {

/// entries[k] = e^{levels[k]}, evaluated in double and stored as float.
struct ExpLut {
  int bits = 0;
  double clip = 0.0;
  double delta = 0.0;
  std::vector<float> entries;
};

/// entries[key] = sum over the P codes packed in key of ExpLut entries,
/// accumulated left to right in double and stored as float.
struct SumLut {
  int bits = 0;
  int pack_width = 0;
  double clip = 0.0;
  double delta = 0.0;
  std::vector<float> entries;

  int key_bits() const noexcept { return bits * pack_width; }
};

/// Largest supported P*M for the sum table (4096 entries).
inline constexpr int kMaxSumKeyBits = 12;
/// Largest P*M that pack_codes accepts.
inline constexpr int kMaxPackBits = 16;

/// Pack width used when none is given: 4 for M = 2, 3 and 2 for M = 4.
int default_pack_width(int bits);

ExpLut build_exp_lut(const QuantSpec& spec);

/// Element 0 lands in the most significant M-bit field:
/// key = sum_i codes[i] << (M * (P - 1 - i)).
std::uint32_t pack_codes(std::span<const std::uint8_t> codes, int bits);
std::vector<std::uint8_t> unpack_key(std::uint32_t key, int bits, int pack_width);

/// Throws Error{invalid_argument} when P * M > 12.
SumLut build_sum_lut(const QuantSpec& spec, int pack_width);

/// Spec plus both tables, as stored in an EXAQLUT1 file.
struct LutBundle {
  QuantSpec spec;
  ExpLut exp_lut;
  SumLut sum_lut;
};

LutBundle build_lut_bundle(const QuantSpec& spec, int pack_width);

inline constexpr char kLutMagic[8] = {'E', 'X', 'A', 'Q', 'L', 'U', 'T', '1'};
inline constexpr std::uint32_t kLutVersion = 1;

std::vector<std::uint8_t> encode_lut(const QuantSpec& spec, const ExpLut& exp_lut,
                                     const SumLut& sum_lut);
LutBundle decode_lut(std::span<const std::uint8_t> bytes);

void save_lut(const QuantSpec& spec, const ExpLut& exp_lut, const SumLut& sum_lut,
              const std::filesystem::path& path);
LutBundle load_lut(const std::filesystem::path& path);

}  // namespace exaq
