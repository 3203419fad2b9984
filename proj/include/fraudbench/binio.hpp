#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace fraudbench::detail {

// Raw little-endian scalar IO for the model file formats. Reads throw on
// short files so callers never see silently zeroed tensors.

inline void write_u8(std::ostream& out, std::uint8_t v) {
  out.write(reinterpret_cast<const char*>(&v), 1);
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.write(buf, 4);
}

inline void write_f64(std::ostream& out, double v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.write(buf, 8);
}

inline std::uint8_t read_u8(std::istream& in, const char* what) {
  char c;
  if (!in.read(&c, 1))
    throw std::runtime_error(std::string("truncated model file reading ") + what);
  return static_cast<std::uint8_t>(c);
}

inline std::uint32_t read_u32(std::istream& in, const char* what) {
  char buf[4];
  if (!in.read(buf, 4))
    throw std::runtime_error(std::string("truncated model file reading ") + what);
  std::uint32_t v;
  std::memcpy(&v, buf, 4);
  return v;
}

inline double read_f64(std::istream& in, const char* what) {
  char buf[8];
  if (!in.read(buf, 8))
    throw std::runtime_error(std::string("truncated model file reading ") + what);
  double v;
  std::memcpy(&v, buf, 8);
  return v;
}

}  // namespace fraudbench::detail
