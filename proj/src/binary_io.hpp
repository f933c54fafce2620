#pragma once

// Little-endian stream helpers shared by the dataset and checkpoint formats.

#include "isfno/errors.hpp"

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace isfno::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <class T> void write_pod(std::ostream &os, T v) {
  os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <class T> T read_pod(std::istream &is, const char *what) {
  T v{};
  if (!is.read(reinterpret_cast<char *>(&v), sizeof(T)))
    throw FormatError(std::string("truncated file while reading ") + what);
  return v;
}

inline void write_doubles(std::ostream &os, const double *data, std::size_t n) {
  os.write(reinterpret_cast<const char *>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void read_doubles(std::istream &is, double *data, std::size_t n, const char *what) {
  if (!is.read(reinterpret_cast<char *>(data), static_cast<std::streamsize>(n * sizeof(double))))
    throw FormatError(std::string("truncated file while reading ") + what);
}

inline std::string read_string(std::istream &is, std::size_t n, const char *what) {
  std::string s(n, '\0');
  if (n && !is.read(s.data(), static_cast<std::streamsize>(n)))
    throw FormatError(std::string("truncated file while reading ") + what);
  return s;
}

inline void expect_magic(std::istream &is, const char (&magic)[5]) {
  char buf[4] = {};
  if (!is.read(buf, 4) || std::string(buf, 4) != std::string(magic, 4))
    throw FormatError(std::string("bad magic, expected \"") + magic + "\"");
}

} // namespace isfno::detail
