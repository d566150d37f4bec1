#include "binary_io.hpp"

#include <zlib.h>

#include <charconv>
#include <fstream>
#include <iterator>
#include <system_error>

#include "eleatt/error.hpp"

namespace eleatt::io {

std::uint32_t crc32(const unsigned char* data, std::size_t size) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  while (size > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = ::crc32(crc, data, chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint64_t fnv1a64(const unsigned char* data, std::size_t size, std::uint64_t h) {
  for (std::size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

void seal(Bytes& out) { put_u32(out, crc32(out.data(), out.size())); }

std::size_t unseal(const Bytes& in, const std::string& what) {
  if (in.size() < 4) throw IntegrityError(what + ": file too short for a checksum");
  const std::size_t payload = in.size() - 4;
  if (crc32(in.data(), payload) != get_u32(in.data() + payload)) {
    throw IntegrityError(what + ": CRC-32 mismatch (file corrupt or truncated)");
  }
  return payload;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  return Bytes(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const Bytes& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::size_t parse_header(const Bytes& in, std::size_t limit, std::string_view magic,
                         std::string_view end_marker, std::vector<HeaderLine>& lines,
                         const std::string& what) {
  std::size_t pos = 0;
  bool first = true;
  while (pos < limit) {
    std::size_t eol = pos;
    while (eol < limit && in[eol] != '\n') ++eol;
    if (eol == limit) break;
    std::string_view line(reinterpret_cast<const char*>(in.data() + pos), eol - pos);
    pos = eol + 1;
    if (first) {
      if (line != magic) throw FormatError(what + ": bad magic line");
      first = false;
      continue;
    }
    if (line == end_marker) return pos;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw FormatError(what + ": malformed header line");
    lines.push_back({std::string(line.substr(0, eq)), std::string(line.substr(eq + 1))});
  }
  if (first) throw FormatError(what + ": empty or truncated file");
  throw FormatError(what + ": header not terminated");
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("not an unsigned integer: '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace eleatt::io
