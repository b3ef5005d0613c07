#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "cltv/mlp.hpp"
#include "cltv/rng.hpp"
#include "test_support.hpp"

using namespace cltv;

namespace {

double bce(double p, double label) {
  return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

/// Loss of a sigmoid-head network as a function of the final pre-activation,
/// reached by shifting the last-layer bias.
double sigmoid_loss_at(MlpParams net, const std::vector<double>& x, double pre, double label) {
  ForwardCache cache;
  mlp_forward(net, x, &cache);
  net.biases.back()[0] += pre - cache.pre.back()[0];
  double p = mlp_forward(net, x)[0];
  return bce(p, label);
}

}  // namespace

TEST_SUITE_BEGIN("mlp");

TEST_CASE("initialization is deterministic with zero biases inside the fan-in bound") {
  MlpParams a = init_mlp({4, 8, 3}, Activation::tanh_act, Head::linear_vector, 42);
  MlpParams b = init_mlp({4, 8, 3}, Activation::tanh_act, Head::linear_vector, 42);
  MlpParams c = init_mlp({4, 8, 3}, Activation::tanh_act, Head::linear_vector, 43);
  CHECK(a.weights == b.weights);
  CHECK(a.biases == b.biases);
  CHECK(a.weights != c.weights);

  for (const auto& layer : a.biases) {
    for (double v : layer) CHECK(v == 0.0);
  }
  for (size_t l = 0; l < a.weights.size(); ++l) {
    double bound = 1.0 / std::sqrt(static_cast<double>(a.layer_sizes[l]));
    for (double w : a.weights[l]) CHECK(std::abs(w) <= bound);
  }
  CHECK(a.n_params() == 4 * 8 + 8 + 8 * 3 + 3);
}

TEST_CASE("initialization rejects bad shapes") {
  CHECK_THROWS_AS(init_mlp({4}, Activation::tanh_act, Head::linear_vector, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(init_mlp({4, 0, 2}, Activation::tanh_act, Head::linear_vector, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(init_mlp({4, 8, 2}, Activation::tanh_act, Head::sigmoid_scalar, 1),
                  std::invalid_argument);
}

TEST_CASE("a zero network outputs the head's neutral value") {
  MlpParams sig = init_mlp({5, 4, 1}, Activation::tanh_act, Head::sigmoid_scalar, 7);
  testutil::zero_weights(sig);
  CHECK(mlp_forward(sig, {1.0, -2.0, 0.5, 3.0, -1.0})[0] == doctest::Approx(0.5));

  MlpParams soft = init_mlp({3, 4, 5}, Activation::relu, Head::softmax_vector, 7);
  testutil::zero_weights(soft);
  for (double p : mlp_forward(soft, {0.3, -0.7, 2.0})) CHECK(p == doctest::Approx(0.2));
}

TEST_CASE("a hand-built linear layer computes the exact affine map") {
  MlpParams net = init_mlp({2, 2}, Activation::tanh_act, Head::linear_vector, 1);
  net.weights[0] = {1.0, 0.0, 0.0, 1.0};
  net.biases[0] = {0.5, -1.0};
  std::vector<double> out = mlp_forward(net, {2.0, 3.0});
  CHECK(out[0] == 2.5);
  CHECK(out[1] == 2.0);
}

TEST_CASE("softmax outputs form a distribution") {
  MlpParams net = init_mlp({4, 6, 3}, Activation::tanh_act, Head::softmax_vector, 5);
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(4);
    for (auto& v : x) v = rng.normal(0.0, 2.0);
    std::vector<double> out = mlp_forward(net, x);
    double sum = 0.0;
    for (double p : out) {
      CHECK(p > 0.0);
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("forward rejects mismatched input dimensions") {
  MlpParams net = init_mlp({3, 2}, Activation::tanh_act, Head::linear_vector, 1);
  CHECK_THROWS_AS(mlp_forward(net, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("zero output gradient backpropagates to zero parameter gradients") {
  MlpParams net = init_mlp({3, 5, 2}, Activation::tanh_act, Head::linear_vector, 9);
  ForwardCache cache;
  mlp_forward(net, {0.1, -0.2, 0.3}, &cache);
  Gradients g = mlp_backward(net, cache, {0.0, 0.0});
  CHECK(g.max_abs() == 0.0);
}

TEST_CASE("backward is linear in the output gradient") {
  for (Head head : {Head::linear_vector, Head::softmax_vector}) {
    MlpParams net = init_mlp({3, 4, 2}, Activation::tanh_act, head, 11);
    ForwardCache cache;
    mlp_forward(net, {0.4, -1.0, 0.7}, &cache);
    std::vector<double> d1 = {0.3, -0.8};
    std::vector<double> d2 = {-1.1, 0.2};
    std::vector<double> combo(2);
    for (int i = 0; i < 2; ++i) combo[i] = 2.0 * d1[i] - 0.5 * d2[i];

    std::vector<double> lhs = testutil::flatten(mlp_backward(net, cache, combo));
    Gradients g1 = mlp_backward(net, cache, d1);
    Gradients g2 = mlp_backward(net, cache, d2);
    g1.scale(2.0);
    g2.scale(-0.5);
    g1.accumulate(g2);
    std::vector<double> rhs = testutil::flatten(g1);
    REQUIRE(lhs.size() == rhs.size());
    for (size_t i = 0; i < lhs.size(); ++i) CHECK(std::abs(lhs[i] - rhs[i]) <= 1e-10);
  }
}

TEST_CASE("analytic gradients match central finite differences on random networks") {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    int n_hidden = rng.uniform_int(3);  // 0..2 hidden layers
    std::vector<int> sizes;
    sizes.push_back(1 + rng.uniform_int(8));
    if (n_hidden >= 1) sizes.push_back(1 + rng.uniform_int(16));
    if (n_hidden >= 2) sizes.push_back(1 + rng.uniform_int(8));

    Head head;
    switch (rng.uniform_int(3)) {
      case 0:
        head = Head::sigmoid_scalar;
        sizes.push_back(1);
        break;
      case 1:
        head = Head::softmax_vector;
        sizes.push_back(2 + rng.uniform_int(3));
        break;
      default:
        head = Head::linear_vector;
        sizes.push_back(1 + rng.uniform_int(3));
        break;
    }
    Activation act = rng.bernoulli(0.7) ? Activation::tanh_act : Activation::relu;
    MlpParams net = init_mlp(sizes, act, head, rng.next_u64());

    std::vector<double> x(sizes.front());
    for (auto& v : x) v = rng.normal(0.0, 1.0);
    std::vector<double> coef(sizes.back());
    for (auto& v : coef) v = rng.uniform(-1.0, 1.0);

    auto loss = [&](const MlpParams& p) {
      std::vector<double> out = mlp_forward(p, x);
      double total = 0.0;
      for (size_t i = 0; i < out.size(); ++i) total += coef[i] * out[i];
      return total;
    };

    ForwardCache cache;
    mlp_forward(net, x, &cache);
    Gradients analytic = mlp_backward(net, cache, coef);
    Gradients numeric = testutil::finite_difference(net, loss, 1e-5);
    CHECK(testutil::max_rel_error(analytic, numeric) <= 1e-4);
  }
}

TEST_CASE("reported input gradients match finite differences") {
  MlpParams net = init_mlp({4, 6, 2}, Activation::tanh_act, Head::linear_vector, 33);
  std::vector<double> x = {0.2, -0.4, 0.9, -1.3};
  std::vector<double> coef = {0.7, -0.3};

  ForwardCache cache;
  mlp_forward(net, x, &cache);
  std::vector<double> din;
  mlp_backward(net, cache, coef, &din);
  REQUIRE(din.size() == x.size());

  for (size_t i = 0; i < x.size(); ++i) {
    const double h = 1e-6;
    std::vector<double> hi = x, lo = x;
    hi[i] += h;
    lo[i] -= h;
    auto dot = [&](const std::vector<double>& out) {
      return coef[0] * out[0] + coef[1] * out[1];
    };
    double fd = (dot(mlp_forward(net, hi)) - dot(mlp_forward(net, lo))) / (2.0 * h);
    CHECK(din[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("classification loss is convex along the sigmoid pre-activation") {
  Rng rng(71);
  MlpParams net = init_mlp({3, 4, 1}, Activation::tanh_act, Head::sigmoid_scalar, 12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x = {rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1)};
    double label = rng.bernoulli(0.5) ? 1.0 : 0.0;
    double z1 = rng.uniform(-6.0, 6.0);
    double z2 = rng.uniform(-6.0, 6.0);
    double mid = sigmoid_loss_at(net, x, 0.5 * (z1 + z2), label);
    double ends = 0.5 * (sigmoid_loss_at(net, x, z1, label) + sigmoid_loss_at(net, x, z2, label));
    CHECK(mid <= ends + 1e-9);
  }
}

TEST_CASE("a confident sigmoid output drives the loss toward zero") {
  MlpParams net = init_mlp({2, 1}, Activation::tanh_act, Head::sigmoid_scalar, 1);
  testutil::zero_weights(net);
  net.biases.back()[0] = 30.0;
  double p = mlp_forward(net, {0.0, 0.0})[0];
  CHECK(bce(p, 1.0) < 1e-12);
  CHECK(p > 1.0 - 1e-12);
}

TEST_CASE("one SGD step moves parameters along the gradient") {
  MlpParams net = init_mlp({1, 1}, Activation::tanh_act, Head::linear_vector, 1);
  net.weights[0] = {1.0};
  net.biases[0] = {1.0};
  Gradients g = Gradients::zeros_like(net);
  g.weights[0] = {2.0};
  g.biases[0] = {2.0};
  OptimizerState opt = OptimizerState::sgd(0.1);

  MlpParams down = net;
  mlp_step(down, opt, g, UpdateDirection::descend);
  CHECK(down.weights[0][0] == doctest::Approx(0.8));
  CHECK(down.biases[0][0] == doctest::Approx(0.8));

  OptimizerState opt2 = OptimizerState::sgd(0.1);
  MlpParams up = net;
  mlp_step(up, opt2, g, UpdateDirection::ascend);
  CHECK(up.weights[0][0] == doctest::Approx(1.2));
}

TEST_CASE("zero gradients leave both optimizers in place") {
  MlpParams net = init_mlp({3, 4, 2}, Activation::tanh_act, Head::linear_vector, 3);
  Gradients zero = Gradients::zeros_like(net);
  MlpParams before = net;

  OptimizerState sgd = OptimizerState::sgd(0.5);
  mlp_step(net, sgd, zero, UpdateDirection::descend);
  CHECK(net.weights == before.weights);
  CHECK(net.biases == before.biases);

  OptimizerState adam = OptimizerState::adam(0.5);
  mlp_step(net, adam, zero, UpdateDirection::descend);
  CHECK(net.weights == before.weights);
  CHECK(net.biases == before.biases);
}

TEST_CASE("adam settles into unit-rate steps under a constant gradient") {
  MlpParams net = init_mlp({1, 1}, Activation::tanh_act, Head::linear_vector, 1);
  net.weights[0] = {0.0};
  net.biases[0] = {0.0};
  Gradients g = Gradients::zeros_like(net);
  g.weights[0] = {2.0};
  g.biases[0] = {-0.03};

  const double lr = 1e-3;
  OptimizerState opt = OptimizerState::adam(lr);
  double prev_w = 0.0;
  for (int step = 0; step < 1000; ++step) {
    prev_w = net.weights[0][0];
    mlp_step(net, opt, g, UpdateDirection::descend);
  }
  // With bias-corrected moments and a constant gradient, each step has
  // magnitude lr regardless of the gradient's scale, signed against it.
  CHECK(std::abs((prev_w - net.weights[0][0]) - lr) <= lr * 1e-3);
  CHECK(net.weights[0][0] == doctest::Approx(-1000.0 * lr).epsilon(0.02));
  CHECK(net.biases[0][0] == doctest::Approx(1000.0 * lr).epsilon(0.02));
}

TEST_CASE("non-finite gradients abort the step") {
  MlpParams net = init_mlp({2, 2}, Activation::tanh_act, Head::linear_vector, 1);
  Gradients g = Gradients::zeros_like(net);
  g.weights[0][1] = std::numeric_limits<double>::quiet_NaN();
  OptimizerState opt = OptimizerState::sgd(0.1);
  CHECK_THROWS_AS(mlp_step(net, opt, g, UpdateDirection::descend), std::runtime_error);

  Gradients g2 = Gradients::zeros_like(net);
  g2.biases[0][0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(mlp_step(net, opt, g2, UpdateDirection::descend), std::runtime_error);
}

TEST_CASE("checkpoints round trip bit-exactly") {
  MlpParams net = init_mlp({3, 5, 2}, Activation::relu, Head::softmax_vector, 77);
  net.biases[1][0] = 1.0 / 3.0;
  std::string path = testutil::scratch_dir("mlp-ckpt") + "/net.json";
  save_mlp(net, path);
  MlpParams back = load_mlp(path);

  CHECK(back.layer_sizes == net.layer_sizes);
  CHECK(back.activation == net.activation);
  CHECK(back.head == net.head);
  std::vector<double> a = testutil::flatten_params(net);
  std::vector<double> b = testutil::flatten_params(back);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(std::memcmp(&a[i], &b[i], sizeof(double)) == 0);
  }
}

TEST_CASE("loading rejects missing and malformed checkpoints") {
  CHECK_THROWS_AS(load_mlp("/nonexistent/net.json"), std::runtime_error);

  std::string dir = testutil::scratch_dir("mlp-bad");
  std::string path = dir + "/net.json";
  MlpParams net = init_mlp({2, 2}, Activation::tanh_act, Head::linear_vector, 1);
  save_mlp(net, path);
  std::string text = testutil::read_file(path);

  auto pos = text.find("tanh");
  REQUIRE(pos != std::string::npos);
  std::string tampered = text;
  tampered.replace(pos, 4, "sine");
  std::ofstream(path, std::ios::trunc) << tampered;
  CHECK_THROWS_AS(load_mlp(path), std::runtime_error);

  std::ofstream(path, std::ios::trunc) << "{\"format\":\"wrong\"}";
  CHECK_THROWS_AS(load_mlp(path), std::runtime_error);
}

TEST_CASE("enum names round trip and reject junk") {
  for (Activation a : {Activation::tanh_act, Activation::relu}) {
    CHECK(activation_from_string(activation_to_string(a)) == a);
  }
  for (Head h : {Head::sigmoid_scalar, Head::softmax_vector, Head::linear_vector}) {
    CHECK(head_from_string(head_to_string(h)) == h);
  }
  CHECK_THROWS_AS(activation_from_string("sine"), std::runtime_error);
  CHECK_THROWS_AS(head_from_string("identity"), std::runtime_error);
}

TEST_SUITE_END();
