#pragma once

// File helpers shared by the log readers, model serializers and the CLI.
// Paths ending in ".gz" are transparently (de)compressed with zlib.

#include <zlib.h>
#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "editcast/error.hpp"

namespace editcast::io {

inline bool is_gzip_path(const std::filesystem::path& p) { return p.extension() == ".gz"; }

inline std::string read_file(const std::filesystem::path& path) {
  if (is_gzip_path(path)) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (f == nullptr) throw ArgumentError("cannot open " + path.string());
    std::string out;
    std::array<char, 1 << 16> buf{};
    int n = 0;
    while ((n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()))) > 0) out.append(buf.data(), static_cast<std::size_t>(n));
    const bool failed = n < 0;
    gzclose(f);
    if (failed) throw IntegrityError("corrupt gzip stream in " + path.string());
    return out;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  if (is_gzip_path(path)) {
    // mtime is not stored by gzwrite, so output is reproducible.
    gzFile f = gzopen(path.c_str(), "wb9");
    if (f == nullptr) throw ArgumentError("cannot write " + path.string());
    const int n = gzwrite(f, data.data(), static_cast<unsigned>(data.size()));
    gzclose(f);
    if (n != static_cast<int>(data.size())) throw ArgumentError("short write to " + path.string());
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw ArgumentError("short write to " + path.string());
}

/// Write to a sibling temp file then rename, so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view data) {
  auto tmp = path;
  tmp += ".tmp";
  write_file(tmp, data);
  std::filesystem::rename(tmp, path);
}

inline std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw NumericalError("sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

inline std::string file_digest(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

/// Shortest decimal form that round-trips a double exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace editcast::io
