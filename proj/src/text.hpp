#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <string>

#include "nbql/error.hpp"

namespace nbql::detail {

// "%.{digits}g" rendering. 17 digits round-trips any double exactly.
inline std::string fmt_g(double v, int digits = 17) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

template <typename T>
T read_value(std::istream& in, const char* what) {
  T v{};
  if (!(in >> v)) {
    throw Error(ErrorKind::Io, std::string("malformed file: expected ") + what);
  }
  return v;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot open for writing: " + path);
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open for reading: " + path);
  return in;
}

}  // namespace nbql::detail
