#pragma once

// Little-endian byte packing, CRC-32 and whole-file helpers shared by the
// dataset and checkpoint formats.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace eleatt::io {

using Bytes = std::vector<unsigned char>;

template <typename U>
void put_le(Bytes& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline void put_u32(Bytes& out, std::uint32_t v) { put_le(out, v); }
inline void put_f32(Bytes& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(Bytes& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }
inline void put_text(Bytes& out, std::string_view s) { out.insert(out.end(), s.begin(), s.end()); }

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

inline std::uint32_t get_u32(const unsigned char* p) { return get_le<std::uint32_t>(p); }
inline float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_le<std::uint32_t>(p)); }
inline double get_f64(const unsigned char* p) { return std::bit_cast<double>(get_le<std::uint64_t>(p)); }

std::uint32_t crc32(const unsigned char* data, std::size_t size);
std::uint64_t fnv1a64(const unsigned char* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);

/// Appends the CRC-32 of everything already in `out`.
void seal(Bytes& out);
/// Verifies the trailer; returns the payload length (without trailer).
/// Throws IntegrityError on mismatch or when the file is too short.
std::size_t unseal(const Bytes& in, const std::string& what);

Bytes read_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename so readers never see partial files.
void write_file(const std::filesystem::path& path, const Bytes& bytes);

/// Splits "key=value" header lines up to the line equal to `end_marker`.
/// Returns the offset of the first byte after the end marker line.
struct HeaderLine {
  std::string key;
  std::string value;
};
std::size_t parse_header(const Bytes& in, std::size_t limit, std::string_view magic,
                         std::string_view end_marker, std::vector<HeaderLine>& lines,
                         const std::string& what);

std::string format_double(double v);
double parse_double(std::string_view s);
std::uint64_t parse_u64(std::string_view s);

}  // namespace eleatt::io
