#ifndef CLTV_DATASET_IO_HPP
#define CLTV_DATASET_IO_HPP

#include <string>

#include "cltv/mdp.hpp"

namespace cltv {

std::string domain_to_string(Domain d);
Domain domain_from_string(const std::string& s);

/**
 * JSON-lines persistence. The first line is a header object carrying the
 * role, environment fingerprint, dimensions, gamma and expected counts; each
 * following line is one transition. Rewards and gamma are written with 17
 * significant digits so a load/save round trip is lossless. The file is
 * written to a temporary name and renamed into place.
 */
void save_dataset(const Dataset& ds, const std::string& path);

/// Throws std::runtime_error naming the line for malformed records, count
/// mismatches (truncated files) and out-of-range ids.
Dataset load_dataset(const std::string& path);

}  // namespace cltv

#endif  // CLTV_DATASET_IO_HPP
