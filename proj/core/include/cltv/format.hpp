#ifndef CLTV_FORMAT_HPP
#define CLTV_FORMAT_HPP

#include <cstdint>
#include <string>

namespace cltv {

/// 17 significant digits: enough for doubles to round-trip exactly.
std::string format_double(double v);

/// Strict full-string double parse; throws std::runtime_error on junk.
double parse_double(const std::string& s);

std::string hex_u64(uint64_t v);
uint64_t parse_hex_u64(const std::string& s);

}  // namespace cltv

#endif  // CLTV_FORMAT_HPP
