#include "cltv/format.hpp"

#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace cltv {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

double parse_double(const std::string& s) {
  if (s.empty()) throw std::runtime_error("parse_double: empty string");
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) {
    throw std::runtime_error("parse_double: trailing junk in '" + s + "'");
  }
  return v;
}

std::string hex_u64(uint64_t v) {
  char buf[23];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

uint64_t parse_hex_u64(const std::string& s) {
  if (s.rfind("0x", 0) != 0 || s.size() <= 2) {
    throw std::runtime_error("parse_hex_u64: expected 0x-prefixed hex, got '" + s + "'");
  }
  char* end = nullptr;
  unsigned long long v = std::strtoull(s.c_str() + 2, &end, 16);
  if (end != s.c_str() + s.size()) {
    throw std::runtime_error("parse_hex_u64: trailing junk in '" + s + "'");
  }
  return static_cast<uint64_t>(v);
}

}  // namespace cltv
