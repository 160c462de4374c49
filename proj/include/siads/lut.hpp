#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "siads/error.hpp"
#include "siads/quantizer.hpp"
#include "siads/simatrix.hpp"

namespace siads {

// Persisted reference: integer counts plus what is needed to re-derive the
// self-information matrix. Layout (little-endian):
//   "SILUT1" | order u32 | min f64 | max f64 | bin_width f64 | epsilon f64 |
//   order*order counts u64 (row-major) | CRC32 u32 over everything before it
struct ReferenceLut {
  Quantizer quantizer;
  double epsilon{kDefaultEpsilon};
  TransitionCounts counts;

  SelfInfoMatrix derive() const { return derive_self_info(counts, epsilon); }

  friend bool operator==(const ReferenceLut&, const ReferenceLut&) = default;
};

inline constexpr std::string_view kLutMagic = "SILUT1";

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}
inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}
inline void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint64_t get_le(std::span<const std::uint8_t> bytes, std::size_t at, int width) {
  std::uint64_t v = 0;
  for (int k = width - 1; k >= 0; --k) v = (v << 8) | bytes[at + static_cast<std::size_t>(k)];
  return v;
}

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
    crc = ::crc32(crc, bytes.data() + done, chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_lut(const ReferenceLut& lut) {
  SelfInfoMatrix::check_epsilon(lut.epsilon);
  if (lut.counts.order() != lut.quantizer.order()) throw DataError("counts order does not match quantizer order");
  const std::size_t order = lut.counts.order();

  std::vector<std::uint8_t> out;
  out.reserve(kLutMagic.size() + 4 + 32 + order * order * 8 + 4);
  out.insert(out.end(), kLutMagic.begin(), kLutMagic.end());
  detail::put_u32(out, static_cast<std::uint32_t>(order));
  detail::put_f64(out, lut.quantizer.min_value());
  detail::put_f64(out, lut.quantizer.max_value());
  detail::put_f64(out, lut.quantizer.bin_width());
  detail::put_f64(out, lut.epsilon);
  for (auto c : lut.counts.cells()) detail::put_u64(out, c);
  detail::put_u32(out, detail::crc32_of(out));
  return out;
}

inline ReferenceLut decode_lut(std::span<const std::uint8_t> bytes) {
  using Kind = FormatError::Kind;
  constexpr std::size_t header = 6 + 4 + 4 * 8;
  if (bytes.size() < kLutMagic.size()) throw FormatError(Kind::truncated, "LUT file truncated");
  const std::string_view magic(reinterpret_cast<const char*>(bytes.data()), kLutMagic.size());
  if (magic.substr(0, 5) != kLutMagic.substr(0, 5)) throw FormatError(Kind::bad_magic, "not a LUT file");
  if (magic != kLutMagic) throw FormatError(Kind::version, "unsupported LUT version '" + std::string(magic) + "'");
  if (bytes.size() < header + 4) throw FormatError(Kind::truncated, "LUT file truncated");

  const auto order = static_cast<std::size_t>(detail::get_le(bytes, 6, 4));
  if (order == 0 || order > (1u << 16)) throw FormatError(Kind::invalid, "LUT order out of range");
  const std::size_t expected = header + order * order * 8 + 4;
  if (bytes.size() < expected) throw FormatError(Kind::truncated, "LUT file truncated");
  if (bytes.size() > expected) throw FormatError(Kind::invalid, "trailing bytes after LUT checksum");

  const auto stored = static_cast<std::uint32_t>(detail::get_le(bytes, expected - 4, 4));
  if (stored != detail::crc32_of(bytes.first(expected - 4))) throw FormatError(Kind::checksum, "LUT checksum mismatch");

  auto f64 = [&](std::size_t at) { return std::bit_cast<double>(detail::get_le(bytes, at, 8)); };
  ReferenceLut lut;
  try {
    lut.quantizer = Quantizer(f64(10), f64(18), f64(26));
    lut.epsilon = f64(34);
    SelfInfoMatrix::check_epsilon(lut.epsilon);
  } catch (const Error& e) {
    throw FormatError(Kind::invalid, std::string("LUT header invalid: ") + e.what());
  }
  if (lut.quantizer.order() != order) throw FormatError(Kind::invalid, "LUT order disagrees with quantizer");

  std::vector<std::uint64_t> cells(order * order);
  for (std::size_t k = 0; k < cells.size(); ++k) cells[k] = detail::get_le(bytes, header + 8 * k, 8);
  try {
    lut.counts = TransitionCounts::from_cells(order, std::move(cells));
  } catch (const DataError& e) {
    throw FormatError(Kind::invalid, e.what());
  }
  return lut;
}

inline void save_lut(const ReferenceLut& lut, const std::string& path) {
  const auto bytes = encode_lut(lut);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline ReferenceLut load_lut(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading '" + path + "'");
  return decode_lut(bytes);
}

}  // namespace siads
