#include <doctest.h>

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "cltv/dataset_io.hpp"
#include "cltv/mdp.hpp"
#include "test_support.hpp"

using namespace cltv;

namespace {

Dataset sample_dataset() {
  std::vector<testutil::TupleSpec> tuples = {
      {0, 1, 0, 0, 1, 1.0 / 3.0, Domain::source},
      {0, 2, 1, 1, 2, 0.1, Domain::source},
      {1, 1, 2, 0, 0, 0.0, Domain::target},
      {1, 2, 0, 1, 1, 1.0, Domain::target},
      {1, 3, 1, 0, 2, 1e-17, Domain::source},
      {2, 1, 2, 1, 2, 0.9999999999999999, Domain::target},
  };
  Dataset ds = testutil::make_dataset(3, 2, 0.99, tuples, "mixed");
  ds.env_fingerprint = 0xdeadbeefcafef00dULL;
  return ds;
}

bool same_bits(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

std::vector<std::string> file_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : lines) out << l << "\n";
}

template <typename Fn>
std::string message_of(Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE_BEGIN("dataset-io");

TEST_CASE("domain tags round trip and reject junk") {
  CHECK(domain_to_string(Domain::source) == "source");
  CHECK(domain_to_string(Domain::target) == "target");
  CHECK(domain_from_string("source") == Domain::source);
  CHECK(domain_from_string("target") == Domain::target);
  CHECK_THROWS_AS(domain_from_string("elsewhere"), std::runtime_error);
}

TEST_CASE("save and load round trip every field bit-exactly") {
  std::string dir = testutil::scratch_dir("dataset-roundtrip");
  std::string path = dir + "/data.jsonl";
  Dataset ds = sample_dataset();
  save_dataset(ds, path);
  Dataset back = load_dataset(path);

  CHECK(back.role == ds.role);
  CHECK(back.env_fingerprint == ds.env_fingerprint);
  CHECK(back.n_states == ds.n_states);
  CHECK(back.n_actions == ds.n_actions);
  CHECK(same_bits(back.gamma, ds.gamma));
  REQUIRE(back.transitions.size() == ds.transitions.size());
  for (size_t i = 0; i < ds.transitions.size(); ++i) {
    const Transition& a = ds.transitions[i];
    const Transition& b = back.transitions[i];
    CHECK(a.traj_id == b.traj_id);
    CHECK(a.step == b.step);
    CHECK(a.state == b.state);
    CHECK(a.action == b.action);
    CHECK(a.next_state == b.next_state);
    CHECK(same_bits(a.reward, b.reward));
    CHECK(a.domain == b.domain);
  }
}

TEST_CASE("load then save reproduces the file byte for byte") {
  std::string dir = testutil::scratch_dir("dataset-stable");
  std::string first = dir + "/a.jsonl";
  std::string second = dir + "/b.jsonl";
  save_dataset(sample_dataset(), first);
  save_dataset(load_dataset(first), second);
  CHECK(testutil::read_file(first) == testutil::read_file(second));
  CHECK_FALSE(testutil::read_file(first).empty());
}

TEST_CASE("generated rollouts survive persistence") {
  TabularMDP m = make_env({"gridworld", 0, 3, 3, 0.2}, 0.99);
  Dataset ds = generate_dataset(m, Policy::uniform(m.n_states, m.n_actions), 20, 15, 11,
                                Domain::target, "target");
  std::string path = testutil::scratch_dir("dataset-rollout") + "/roll.jsonl";
  save_dataset(ds, path);
  Dataset back = load_dataset(path);
  CHECK(back.env_fingerprint == m.fingerprint());
  CHECK(back.n_trajectories() == 20);
  REQUIRE(back.transitions.size() == ds.transitions.size());
  for (size_t i = 0; i < ds.transitions.size(); ++i) {
    CHECK(same_bits(back.transitions[i].reward, ds.transitions[i].reward));
  }
}

TEST_CASE("truncated files are reported") {
  std::string dir = testutil::scratch_dir("dataset-truncated");
  std::string path = dir + "/data.jsonl";
  save_dataset(sample_dataset(), path);
  auto lines = file_lines(path);
  lines.pop_back();
  write_lines(path, lines);
  std::string msg = message_of([&] { load_dataset(path); });
  CHECK(msg.find("promises") != std::string::npos);
  CHECK(msg.find("truncated") != std::string::npos);
}

TEST_CASE("malformed records name the offending line") {
  std::string dir = testutil::scratch_dir("dataset-malformed");
  std::string path = dir + "/data.jsonl";

  save_dataset(sample_dataset(), path);
  auto lines = file_lines(path);

  SUBCASE("broken json") {
    lines[2] = "{not json at all";
    write_lines(path, lines);
    std::string msg = message_of([&] { load_dataset(path); });
    CHECK(msg.find(":3:") != std::string::npos);
    CHECK(msg.find("malformed") != std::string::npos);
  }
  SUBCASE("missing field") {
    lines[1] =
        "{\"traj_id\":0,\"step\":1,\"state\":0,\"action\":0,\"next_state\":1,"
        "\"domain\":\"source\"}";
    write_lines(path, lines);
    std::string msg = message_of([&] { load_dataset(path); });
    CHECK(msg.find(":2:") != std::string::npos);
    CHECK(msg.find("missing field 'reward'") != std::string::npos);
  }
  SUBCASE("wrong field type") {
    lines[1] =
        "{\"traj_id\":0,\"step\":1,\"state\":\"zero\",\"action\":0,\"next_state\":1,"
        "\"reward\":0.5,\"domain\":\"source\"}";
    write_lines(path, lines);
    std::string msg = message_of([&] { load_dataset(path); });
    CHECK(msg.find(":2:") != std::string::npos);
    CHECK(msg.find("wrong type") != std::string::npos);
  }
  SUBCASE("out of range ids fail validation on load") {
    lines[1] =
        "{\"traj_id\":0,\"step\":1,\"state\":99,\"action\":0,\"next_state\":1,"
        "\"reward\":0.5,\"domain\":\"source\"}";
    write_lines(path, lines);
    std::string msg = message_of([&] { load_dataset(path); });
    CHECK(msg.find("state out of range") != std::string::npos);
  }
  SUBCASE("unknown domain tag") {
    lines[1] =
        "{\"traj_id\":0,\"step\":1,\"state\":0,\"action\":0,\"next_state\":1,"
        "\"reward\":0.5,\"domain\":\"sideways\"}";
    write_lines(path, lines);
    std::string msg = message_of([&] { load_dataset(path); });
    CHECK(msg.find("unknown domain tag") != std::string::npos);
  }
}

TEST_CASE("header problems are rejected") {
  std::string dir = testutil::scratch_dir("dataset-header");
  std::string path = dir + "/data.jsonl";
  save_dataset(sample_dataset(), path);
  auto lines = file_lines(path);

  SUBCASE("unknown format tag") {
    std::string h = lines[0];
    auto pos = h.find("cltv-dataset-v1");
    REQUIRE(pos != std::string::npos);
    h.replace(pos, std::strlen("cltv-dataset-v1"), "cltv-dataset-v9");
    lines[0] = h;
    write_lines(path, lines);
    std::string msg = message_of([&] { load_dataset(path); });
    CHECK(msg.find("unknown format tag") != std::string::npos);
  }
  SUBCASE("unknown role") {
    std::string h = lines[0];
    auto pos = h.find("\"mixed\"");
    REQUIRE(pos != std::string::npos);
    h.replace(pos, 7, "\"blend\"");
    lines[0] = h;
    write_lines(path, lines);
    std::string msg = message_of([&] { load_dataset(path); });
    CHECK(msg.find("unknown role") != std::string::npos);
  }
  SUBCASE("empty file") {
    write_lines(path, {});
    std::string msg = message_of([&] { load_dataset(path); });
    CHECK(msg.find("empty file") != std::string::npos);
  }
}

TEST_CASE("missing files and invalid datasets are rejected") {
  CHECK_THROWS_AS(load_dataset("/nonexistent/nowhere.jsonl"), std::runtime_error);

  Dataset bad;
  bad.role = "source";
  bad.n_states = 2;
  bad.n_actions = 2;
  bad.gamma = 0.9;
  bad.transitions.push_back({5, 1, 0, 0, 1, 0.0, Domain::source});  // ids must start at 0
  std::string path = testutil::scratch_dir("dataset-invalid") + "/bad.jsonl";
  CHECK_THROWS_AS(save_dataset(bad, path), std::runtime_error);
  CHECK_FALSE(std::ifstream(path).good());
}

TEST_SUITE_END();
