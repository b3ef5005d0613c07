// Internal JSON helpers shared by the checkpoint writers. Not installed.
#ifndef CLTV_SRC_MLP_JSON_HPP
#define CLTV_SRC_MLP_JSON_HPP

#include <json.hpp>

#include "cltv/mlp.hpp"

namespace cltv {

nlohmann::json mlp_to_json(const MlpParams& net);
MlpParams mlp_from_json(const nlohmann::json& j, const std::string& context);

/// Writes pretty JSON to path via a temporary file plus rename.
void write_json_file(const nlohmann::json& j, const std::string& path);
nlohmann::json read_json_file(const std::string& path);

/// Fetches j[key] or throws std::runtime_error naming the file and key.
const nlohmann::json& require_field(const nlohmann::json& j, const char* key,
                                    const std::string& context);

}  // namespace cltv

#endif  // CLTV_SRC_MLP_JSON_HPP
