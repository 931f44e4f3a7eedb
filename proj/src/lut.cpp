#include "exaq/lut.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "byte_io.hpp"
#include "exaq/error.hpp"

namespace exaq {

int default_pack_width(int bits) {
  switch (bits) {
    case 2:
    case 3: return 4;
    case 4: return 2;
    default: throw Error(ErrorCode::invalid_argument, "bits must be in {2,3,4}");
  }
}

ExpLut build_exp_lut(const QuantSpec& spec) {
  ExpLut lut;
  lut.bits = spec.bits();
  lut.clip = spec.clip();
  lut.delta = spec.delta();
  lut.entries.reserve(spec.num_levels());
  for (double q : spec.levels()) lut.entries.push_back(static_cast<float>(std::exp(q)));
  return lut;
}

std::uint32_t pack_codes(std::span<const std::uint8_t> codes, int bits) {
  if (bits < 1 || codes.empty() || static_cast<int>(codes.size()) * bits > kMaxPackBits) {
    throw Error(ErrorCode::invalid_argument, "pack width * bits must be in [1, 16]");
  }
  const unsigned limit = 1u << bits;
  std::uint32_t key = 0;
  for (auto c : codes) {
    if (c >= limit) throw Error(ErrorCode::invalid_argument, "code " + std::to_string(c) + " out of range");
    key = (key << bits) | c;
  }
  return key;
}

std::vector<std::uint8_t> unpack_key(std::uint32_t key, int bits, int pack_width) {
  if (bits < 1 || pack_width < 1 || pack_width * bits > kMaxPackBits) {
    throw Error(ErrorCode::invalid_argument, "pack width * bits must be in [1, 16]");
  }
  if (key >> (bits * pack_width) != 0) {
    throw Error(ErrorCode::invalid_argument, "key has bits above P*M");
  }
  const std::uint32_t mask = (1u << bits) - 1;
  std::vector<std::uint8_t> codes(pack_width);
  for (int i = pack_width - 1; i >= 0; --i) {
    codes[i] = static_cast<std::uint8_t>(key & mask);
    key >>= bits;
  }
  return codes;
}

SumLut build_sum_lut(const QuantSpec& spec, int pack_width) {
  if (pack_width < 1 || pack_width * spec.bits() > kMaxSumKeyBits) {
    throw Error(ErrorCode::invalid_argument,
                "P*M = " + std::to_string(pack_width * spec.bits()) + " exceeds 12-bit sum table");
  }
  const ExpLut exp_lut = build_exp_lut(spec);
  SumLut lut;
  lut.bits = spec.bits();
  lut.pack_width = pack_width;
  lut.clip = spec.clip();
  lut.delta = spec.delta();
  const std::uint32_t size = 1u << lut.key_bits();
  lut.entries.resize(size);
  for (std::uint32_t key = 0; key < size; ++key) {
    double sum = 0.0;
    for (auto code : unpack_key(key, lut.bits, pack_width)) sum += exp_lut.entries[code];
    lut.entries[key] = static_cast<float>(sum);
  }
  return lut;
}

LutBundle build_lut_bundle(const QuantSpec& spec, int pack_width) {
  return LutBundle{spec, build_exp_lut(spec), build_sum_lut(spec, pack_width)};
}

std::vector<std::uint8_t> encode_lut(const QuantSpec& spec, const ExpLut& exp_lut,
                                     const SumLut& sum_lut) {
  if (exp_lut.bits != spec.bits() || sum_lut.bits != spec.bits() || exp_lut.clip != spec.clip() ||
      sum_lut.clip != spec.clip()) {
    throw Error(ErrorCode::lut_mismatch, "tables were not built from this spec");
  }
  detail::ByteWriter w;
  w.bytes(kLutMagic, sizeof(kLutMagic));
  w.put<std::uint32_t>(kLutVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(spec.bits()));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(sum_lut.pack_width));
  w.zeros(2);
  w.put<double>(spec.clip());
  w.put<double>(spec.delta());
  w.put<std::uint8_t>(static_cast<std::uint8_t>(spec.mode()));
  w.zeros(7);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(exp_lut.entries.size()));
  for (float v : exp_lut.entries) w.put<float>(v);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(sum_lut.entries.size()));
  for (float v : sum_lut.entries) w.put<float>(v);
  return w.take();
}

LutBundle decode_lut(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  char magic[8];
  try {
    r.bytes(magic, sizeof(magic));
  } catch (const Error&) {
    throw Error(ErrorCode::bad_magic, "file shorter than magic header");
  }
  if (std::memcmp(magic, kLutMagic, sizeof(magic)) != 0) {
    throw Error(ErrorCode::bad_magic, "not an EXAQLUT1 file");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kLutVersion) throw Error(ErrorCode::bad_version, "LUT version " + std::to_string(version));
  const int bits = r.get<std::uint8_t>();
  const int pack = r.get<std::uint8_t>();
  r.skip(2);
  const double clip = r.get<double>();
  const double delta = r.get<double>();
  const auto mode_raw = r.get<std::uint8_t>();
  r.skip(7);
  if (mode_raw > 1) throw Error(ErrorCode::invalid_argument, "unknown mode byte");

  QuantSpec spec(bits, clip, static_cast<QuantMode>(mode_raw));
  if (spec.delta() != delta) {
    throw Error(ErrorCode::lut_mismatch, "stored delta disagrees with -clip/2^M");
  }
  if (pack < 1 || pack * bits > kMaxSumKeyBits) {
    throw Error(ErrorCode::invalid_argument, "unsupported pack width " + std::to_string(pack));
  }

  LutBundle bundle{spec, {bits, clip, delta, {}}, {bits, pack, clip, delta, {}}};
  const auto exp_count = r.get<std::uint32_t>();
  if (exp_count != spec.num_levels()) {
    throw Error(ErrorCode::size_mismatch, "exp table has " + std::to_string(exp_count) +
                                              " entries, expected " + std::to_string(spec.num_levels()));
  }
  bundle.exp_lut.entries.resize(exp_count);
  for (auto& v : bundle.exp_lut.entries) v = r.get<float>();

  const auto sum_count = r.get<std::uint32_t>();
  const std::uint32_t expected_sum = 1u << (pack * bits);
  if (sum_count != expected_sum) {
    throw Error(ErrorCode::size_mismatch, "sum table has " + std::to_string(sum_count) +
                                              " entries, expected " + std::to_string(expected_sum));
  }
  bundle.sum_lut.entries.resize(sum_count);
  for (auto& v : bundle.sum_lut.entries) v = r.get<float>();
  if (r.remaining() != 0) throw Error(ErrorCode::size_mismatch, "trailing bytes after sum table");
  return bundle;
}

void save_lut(const QuantSpec& spec, const ExpLut& exp_lut, const SumLut& sum_lut,
              const std::filesystem::path& path) {
  detail::write_file(path, encode_lut(spec, exp_lut, sum_lut));
}

LutBundle load_lut(const std::filesystem::path& path) { return decode_lut(detail::read_file(path)); }

}  // namespace exaq
