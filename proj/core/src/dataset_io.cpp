#include "cltv/dataset_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "cltv/format.hpp"

namespace cltv {

namespace {

using nlohmann::json;

constexpr const char* kFormatTag = "cltv-dataset-v1";

[[noreturn]] void fail_line(const std::string& path, int lineno, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + what);
}

json parse_line(const std::string& path, int lineno, const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail_line(path, lineno, "malformed JSON object");
  return j;
}

template <typename T>
T get_field(const std::string& path, int lineno, const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) fail_line(path, lineno, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    fail_line(path, lineno, std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

std::string domain_to_string(Domain d) {
  return d == Domain::source ? "source" : "target";
}

Domain domain_from_string(const std::string& s) {
  if (s == "source") return Domain::source;
  if (s == "target") return Domain::target;
  throw std::runtime_error("unknown domain tag '" + s + "'");
}

void save_dataset(const Dataset& ds, const std::string& path) {
  validate_dataset(ds);
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    out << "{\"format\":\"" << kFormatTag << "\",\"role\":\"" << ds.role
        << "\",\"env_fingerprint\":\"" << hex_u64(ds.env_fingerprint)
        << "\",\"n_states\":" << ds.n_states << ",\"n_actions\":" << ds.n_actions
        << ",\"gamma\":" << format_double(ds.gamma)
        << ",\"n_trajectories\":" << ds.n_trajectories()
        << ",\"n_transitions\":" << ds.transitions.size() << "}\n";
    for (const auto& t : ds.transitions) {
      out << "{\"traj_id\":" << t.traj_id << ",\"step\":" << t.step << ",\"state\":" << t.state
          << ",\"action\":" << t.action << ",\"next_state\":" << t.next_state
          << ",\"reward\":" << format_double(t.reward) << ",\"domain\":\""
          << domain_to_string(t.domain) << "\"}\n";
    }
    if (!out) throw std::runtime_error("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file '" + path + "'");

  std::string line;
  int lineno = 0;

  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  ++lineno;
  json header = parse_line(path, lineno, line);
  if (get_field<std::string>(path, lineno, header, "format") != kFormatTag) {
    fail_line(path, lineno, "unknown format tag");
  }

  Dataset ds;
  ds.role = get_field<std::string>(path, lineno, header, "role");
  if (ds.role != "source" && ds.role != "target" && ds.role != "mixed") {
    fail_line(path, lineno, "unknown role '" + ds.role + "'");
  }
  ds.env_fingerprint = parse_hex_u64(get_field<std::string>(path, lineno, header, "env_fingerprint"));
  ds.n_states = get_field<int>(path, lineno, header, "n_states");
  ds.n_actions = get_field<int>(path, lineno, header, "n_actions");
  ds.gamma = get_field<double>(path, lineno, header, "gamma");
  const int64_t want_traj = get_field<int64_t>(path, lineno, header, "n_trajectories");
  const int64_t want_trans = get_field<int64_t>(path, lineno, header, "n_transitions");

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_line(path, lineno, line);
    Transition t;
    t.traj_id = get_field<int>(path, lineno, j, "traj_id");
    t.step = get_field<int>(path, lineno, j, "step");
    t.state = get_field<int>(path, lineno, j, "state");
    t.action = get_field<int>(path, lineno, j, "action");
    t.next_state = get_field<int>(path, lineno, j, "next_state");
    t.reward = get_field<double>(path, lineno, j, "reward");
    t.domain = domain_from_string(get_field<std::string>(path, lineno, j, "domain"));
    ds.transitions.push_back(t);
  }

  if (static_cast<int64_t>(ds.transitions.size()) != want_trans) {
    throw std::runtime_error(path + ": header promises " + std::to_string(want_trans) +
                             " transitions but file has " +
                             std::to_string(ds.transitions.size()) + " (truncated?)");
  }
  try {
    validate_dataset(ds);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  if (ds.n_trajectories() != want_traj) {
    throw std::runtime_error(path + ": header promises " + std::to_string(want_traj) +
                             " trajectories but file has " + std::to_string(ds.n_trajectories()));
  }
  return ds;
}

}  // namespace cltv
