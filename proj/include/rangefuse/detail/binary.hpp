#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <system_error>
#include <vector>

#include "rangefuse/error.hpp"

// Little-endian encoding helpers and whole-file I/O shared by the loaders.
namespace rangefuse::detail {

inline std::uint32_t byteswap32(std::uint32_t v) {
  return ((v & 0x000000FFu) << 24) | ((v & 0x0000FF00u) << 8) | ((v & 0x00FF0000u) >> 8) |
         ((v & 0xFF000000u) >> 24);
}

inline std::uint64_t byteswap64(std::uint64_t v) {
  return (std::uint64_t{byteswap32(static_cast<std::uint32_t>(v))} << 32) |
         byteswap32(static_cast<std::uint32_t>(v >> 32));
}

inline std::uint32_t load_u32_le(const unsigned char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, sizeof v);
  if constexpr (std::endian::native == std::endian::big) v = byteswap32(v);
  return v;
}

inline std::uint64_t load_u64_le(const unsigned char* p) {
  std::uint64_t v;
  std::memcpy(&v, p, sizeof v);
  if constexpr (std::endian::native == std::endian::big) v = byteswap64(v);
  return v;
}

inline float load_f32_le(const unsigned char* p) { return std::bit_cast<float>(load_u32_le(p)); }
inline double load_f64_le(const unsigned char* p) { return std::bit_cast<double>(load_u64_le(p)); }

inline void put_u32_le(std::vector<unsigned char>& out, std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) v = byteswap32(v);
  unsigned char b[4];
  std::memcpy(b, &v, 4);
  out.insert(out.end(), b, b + 4);
}

inline void put_u64_le(std::vector<unsigned char>& out, std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) v = byteswap64(v);
  unsigned char b[8];
  std::memcpy(b, &v, 8);
  out.insert(out.end(), b, b + 8);
}

inline void put_f32_le(std::vector<unsigned char>& out, float v) {
  put_u32_le(out, std::bit_cast<std::uint32_t>(v));
}

inline void put_f64_le(std::vector<unsigned char>& out, double v) {
  put_u64_le(out, std::bit_cast<std::uint64_t>(v));
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
  return bytes;
}

// Writes to a sibling temporary and renames it into place, so readers never
// observe a partially written file.
inline void write_file_atomic(const std::filesystem::path& path, const void* data,
                              std::size_t size) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    out.flush();
    if (!out) throw IoError("write failure on '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "'");
  }
}

inline void write_file_atomic(const std::filesystem::path& path,
                              const std::vector<unsigned char>& bytes) {
  write_file_atomic(path, bytes.data(), bytes.size());
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, text.data(), text.size());
}

}  // namespace rangefuse::detail
