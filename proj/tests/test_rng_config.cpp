#include <doctest.h>

#include <cmath>
#include <cstring>
#include <set>

#include "cltv/config.hpp"
#include "cltv/format.hpp"
#include "cltv/rng.hpp"

using namespace cltv;

TEST_SUITE_BEGIN("rng-config");

TEST_CASE("identical seeds replay the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("named substreams are stable and distinct") {
  CHECK(derive_seed(7, "alpha") == derive_seed(7, "alpha"));
  CHECK(derive_seed(7, "alpha") != derive_seed(7, "beta"));
  CHECK(derive_seed(7, "alpha") != derive_seed(8, "alpha"));

  Rng a = substream(7, "alpha");
  Rng b = substream(7, "beta");
  bool all_equal = true;
  for (int i = 0; i < 16; ++i) all_equal = all_equal && (a.next_u64() == b.next_u64());
  CHECK_FALSE(all_equal);
}

TEST_CASE("uniform draws stay inside their ranges") {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    double v = rng.uniform(-2.0, 5.0);
    CHECK(v >= -2.0);
    CHECK(v < 5.0);
    int k = rng.uniform_int(7);
    CHECK(k >= 0);
    CHECK(k < 7);
  }
}

TEST_CASE("uniform_int covers every value") {
  Rng rng(11);
  std::set<int> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(rng.uniform_int(5));
  CHECK(seen.size() == 5);
}

TEST_CASE("bernoulli respects degenerate probabilities") {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    CHECK_FALSE(rng.bernoulli(0.0));
    CHECK(rng.bernoulli(1.0));
  }
}

TEST_CASE("normal draws have the requested moments") {
  Rng rng(17);
  double total = 0.0, total_sq = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    total += x;
    total_sq += x * x;
  }
  double mean = total / n;
  double var = total_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
  CHECK(rng.normal(10.0, 0.0) == 10.0);
}

TEST_CASE("simplex rows are distributions with the requested floor") {
  Rng rng(23);
  for (int i = 0; i < 500; ++i) {
    auto row = rng.simplex(6, 0.01);
    double total = 0.0;
    for (double v : row) {
      CHECK(v >= 0.01);
      total += v;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("double formatting round-trips bit-exactly") {
  Rng rng(29);
  for (int i = 0; i < 2000; ++i) {
    double v = (rng.uniform01() - 0.5) * std::pow(10.0, rng.uniform(-20.0, 20.0));
    double back = parse_double(format_double(v));
    CHECK(std::memcmp(&v, &back, sizeof(double)) == 0);
  }
  for (double v : {0.0, 1.0 / 3.0, 0.1, 1e-300, 2.2250738585072014e-308}) {
    double back = parse_double(format_double(v));
    CHECK(std::memcmp(&v, &back, sizeof(double)) == 0);
  }
}

TEST_CASE("parse_double rejects junk") {
  CHECK_THROWS(parse_double("banana"));
  CHECK_THROWS(parse_double("1.5x"));
  CHECK_THROWS_AS(parse_double(""), std::runtime_error);
}

TEST_CASE("hex serialization round-trips") {
  for (uint64_t v : {0ull, 1ull, 0xdeadbeefcafef00dull, ~0ull}) {
    CHECK(parse_hex_u64(hex_u64(v)) == v);
  }
}

TEST_CASE("config parses sections, comments and typed values") {
  KeyValueConfig kv = KeyValueConfig::from_string(
      "# a comment\n"
      "env.family = gridworld\n"
      "env.slip = 0.25\n"
      "cltv.epochs = 12\n"
      "ts.adam = true\n"
      "ts.hidden = 32,16\n"
      "sweep.deltas = 0.2,0.4\n");
  CHECK(kv.get_string("env.family") == "gridworld");
  CHECK(kv.get_double("env.slip", 0.0) == doctest::Approx(0.25));
  CHECK(kv.get_int("cltv.epochs", 0) == 12);
  CHECK(kv.get_bool("ts.adam", false));
  CHECK(kv.get_int_list("ts.hidden", {}) == std::vector<int>{32, 16});
  CHECK(kv.get_double_list("sweep.deltas", {}) == std::vector<double>{0.2, 0.4});
  CHECK(kv.get_int("missing.key", 41) == 41);
}

TEST_CASE("config rejects duplicate keys") {
  CHECK_THROWS_AS(KeyValueConfig::from_string("a = 1\na = 2\n"), ConfigError);
}

TEST_CASE("unread keys are reported for typo detection") {
  KeyValueConfig kv = KeyValueConfig::from_string("good.key = 1\nbad.key = 2\n");
  kv.get_int("good.key", 0);
  auto unread = kv.unread_keys();
  REQUIRE(unread.size() == 1);
  CHECK(unread[0] == "bad.key");
}

TEST_CASE("canonical text is sorted and drives the hash") {
  KeyValueConfig a = KeyValueConfig::from_string("b = 2\na = 1\n");
  KeyValueConfig b = KeyValueConfig::from_string("a = 1\n# order and comments differ\nb = 2\n");
  CHECK(a.canonical_text() == b.canonical_text());
  CHECK(a.hash_hex() == b.hash_hex());

  KeyValueConfig c = KeyValueConfig::from_string("a = 1\nb = 3\n");
  CHECK(a.hash_hex() != c.hash_hex());
}

TEST_SUITE_END();
