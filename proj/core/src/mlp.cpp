#include "cltv/mlp.hpp"

#include <cassert>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "cltv/rng.hpp"
#include "mlp_json.hpp"

namespace cltv {

namespace {

void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double sigmoid(double z) {
  // Split on sign to avoid overflow in exp.
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

size_t MlpParams::n_params() const {
  size_t n = 0;
  for (int l = 0; l < n_layers(); ++l) {
    n += weights[l].size() + biases[l].size();
  }
  return n;
}

MlpParams init_mlp(const std::vector<int>& layer_sizes, Activation activation, Head head,
                   uint64_t seed) {
  check(layer_sizes.size() >= 2, "init_mlp: need at least input and output sizes");
  for (int s : layer_sizes) check(s >= 1, "init_mlp: layer sizes must be positive");
  check(head != Head::sigmoid_scalar || layer_sizes.back() == 1,
        "init_mlp: sigmoid_scalar head requires output dimension 1");

  MlpParams net;
  net.layer_sizes = layer_sizes;
  net.activation = activation;
  net.head = head;
  Rng rng(seed);
  for (size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    int fan_in = layer_sizes[l];
    int fan_out = layer_sizes[l + 1];
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> w(static_cast<size_t>(fan_out) * fan_in);
    for (auto& v : w) v = rng.uniform(-bound, bound);
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(fan_out, 0.0);
  }
  return net;
}

std::vector<double> mlp_forward(const MlpParams& net, const std::vector<double>& x,
                                ForwardCache* cache) {
  if (static_cast<int>(x.size()) != net.input_dim()) {
    throw std::invalid_argument("mlp_forward: input has dimension " + std::to_string(x.size()) +
                                ", network expects " + std::to_string(net.input_dim()));
  }
  if (cache) {
    cache->input = x;
    cache->pre.assign(net.n_layers(), {});
    cache->post.assign(net.n_layers(), {});
  }
  std::vector<double> a = x;
  for (int l = 0; l < net.n_layers(); ++l) {
    const int in = net.layer_sizes[l];
    const int out = net.layer_sizes[l + 1];
    std::vector<double> z(out);
    const double* w = net.weights[l].data();
    for (int i = 0; i < out; ++i) {
      double acc = net.biases[l][i];
      const double* row = w + static_cast<size_t>(i) * in;
      for (int j = 0; j < in; ++j) acc += row[j] * a[j];
      z[i] = acc;
    }
    if (cache) cache->pre[l] = z;
    const bool last = (l == net.n_layers() - 1);
    if (!last) {
      for (int i = 0; i < out; ++i) {
        z[i] = net.activation == Activation::tanh_act ? std::tanh(z[i]) : std::max(z[i], 0.0);
      }
    } else {
      switch (net.head) {
        case Head::sigmoid_scalar:
          z[0] = sigmoid(z[0]);
          break;
        case Head::softmax_vector: {
          double m = z[0];
          for (int i = 1; i < out; ++i) m = std::max(m, z[i]);
          double total = 0.0;
          for (int i = 0; i < out; ++i) {
            z[i] = std::exp(z[i] - m);
            total += z[i];
          }
          for (int i = 0; i < out; ++i) z[i] /= total;
          break;
        }
        case Head::linear_vector:
          break;
      }
    }
    if (cache) cache->post[l] = z;
    a = std::move(z);
  }
  return a;
}

Gradients Gradients::zeros_like(const MlpParams& net) {
  Gradients g;
  for (int l = 0; l < net.n_layers(); ++l) {
    g.weights.emplace_back(net.weights[l].size(), 0.0);
    g.biases.emplace_back(net.biases[l].size(), 0.0);
  }
  return g;
}

void Gradients::accumulate(const Gradients& other) {
  assert(weights.size() == other.weights.size());
  for (size_t l = 0; l < weights.size(); ++l) {
    for (size_t i = 0; i < weights[l].size(); ++i) weights[l][i] += other.weights[l][i];
    for (size_t i = 0; i < biases[l].size(); ++i) biases[l][i] += other.biases[l][i];
  }
}

void Gradients::scale(double factor) {
  for (auto& w : weights) {
    for (auto& v : w) v *= factor;
  }
  for (auto& b : biases) {
    for (auto& v : b) v *= factor;
  }
}

double Gradients::max_abs() const {
  double m = 0.0;
  for (const auto& w : weights) {
    for (double v : w) m = std::max(m, std::abs(v));
  }
  for (const auto& b : biases) {
    for (double v : b) m = std::max(m, std::abs(v));
  }
  return m;
}

Gradients mlp_backward(const MlpParams& net, const ForwardCache& cache,
                       const std::vector<double>& dloss_doutput,
                       std::vector<double>* dloss_dinput) {
  const int layers = net.n_layers();
  check(static_cast<int>(dloss_doutput.size()) == net.output_dim(),
        "mlp_backward: output gradient dimension mismatch");
  check(static_cast<int>(cache.pre.size()) == layers, "mlp_backward: cache layer mismatch");

  Gradients grads = Gradients::zeros_like(net);

  // Head Jacobian maps dL/d(post) to dL/d(pre) for the last layer.
  std::vector<double> delta;
  const std::vector<double>& out_post = cache.post[layers - 1];
  switch (net.head) {
    case Head::sigmoid_scalar: {
      double o = out_post[0];
      delta = {dloss_doutput[0] * o * (1.0 - o)};
      break;
    }
    case Head::softmax_vector: {
      double dot = 0.0;
      for (size_t i = 0; i < out_post.size(); ++i) dot += dloss_doutput[i] * out_post[i];
      delta.resize(out_post.size());
      for (size_t i = 0; i < out_post.size(); ++i) {
        delta[i] = out_post[i] * (dloss_doutput[i] - dot);
      }
      break;
    }
    case Head::linear_vector:
      delta = dloss_doutput;
      break;
  }

  for (int l = layers - 1; l >= 0; --l) {
    const int in = net.layer_sizes[l];
    const int out = net.layer_sizes[l + 1];
    const std::vector<double>& a_prev = (l == 0) ? cache.input : cache.post[l - 1];
    for (int i = 0; i < out; ++i) {
      grads.biases[l][i] = delta[i];
      double* wrow = grads.weights[l].data() + static_cast<size_t>(i) * in;
      for (int j = 0; j < in; ++j) wrow[j] = delta[i] * a_prev[j];
    }
    if (l == 0) {
      if (dloss_dinput) {
        dloss_dinput->assign(in, 0.0);
        const double* w = net.weights[l].data();
        for (int i = 0; i < out; ++i) {
          const double* row = w + static_cast<size_t>(i) * in;
          for (int j = 0; j < in; ++j) (*dloss_dinput)[j] += row[j] * delta[i];
        }
      }
      break;
    }
    // delta for the previous layer: W^T delta, gated by the activation.
    std::vector<double> prev(in, 0.0);
    const double* w = net.weights[l].data();
    for (int i = 0; i < out; ++i) {
      const double* row = w + static_cast<size_t>(i) * in;
      for (int j = 0; j < in; ++j) prev[j] += row[j] * delta[i];
    }
    for (int j = 0; j < in; ++j) {
      if (net.activation == Activation::tanh_act) {
        double a = cache.post[l - 1][j];
        prev[j] *= 1.0 - a * a;
      } else {
        prev[j] *= cache.pre[l - 1][j] > 0.0 ? 1.0 : 0.0;
      }
    }
    delta = std::move(prev);
  }
  return grads;
}

OptimizerState OptimizerState::sgd(double lr) {
  OptimizerState s;
  s.kind = Kind::sgd;
  s.lr = lr;
  return s;
}

OptimizerState OptimizerState::adam(double lr, double beta1, double beta2, double eps) {
  OptimizerState s;
  s.kind = Kind::adam;
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  return s;
}

void mlp_step(MlpParams& net, OptimizerState& opt, const Gradients& grads, UpdateDirection dir) {
  check(grads.weights.size() == net.weights.size(), "mlp_step: gradient shape mismatch");
  for (int l = 0; l < net.n_layers(); ++l) {
    check(grads.weights[l].size() == net.weights[l].size() &&
              grads.biases[l].size() == net.biases[l].size(),
          "mlp_step: gradient shape mismatch");
    for (double v : grads.weights[l]) {
      if (!std::isfinite(v)) {
        throw std::runtime_error("mlp_step: non-finite weight gradient in layer " +
                                 std::to_string(l));
      }
    }
    for (double v : grads.biases[l]) {
      if (!std::isfinite(v)) {
        throw std::runtime_error("mlp_step: non-finite bias gradient in layer " +
                                 std::to_string(l));
      }
    }
  }

  const double sign = dir == UpdateDirection::ascend ? 1.0 : -1.0;
  if (opt.kind == OptimizerState::Kind::sgd) {
    for (int l = 0; l < net.n_layers(); ++l) {
      for (size_t i = 0; i < net.weights[l].size(); ++i) {
        net.weights[l][i] += sign * opt.lr * grads.weights[l][i];
      }
      for (size_t i = 0; i < net.biases[l].size(); ++i) {
        net.biases[l][i] += sign * opt.lr * grads.biases[l][i];
      }
    }
    ++opt.step_count;
    return;
  }

  if (opt.m_w.empty()) {
    for (int l = 0; l < net.n_layers(); ++l) {
      opt.m_w.emplace_back(net.weights[l].size(), 0.0);
      opt.v_w.emplace_back(net.weights[l].size(), 0.0);
      opt.m_b.emplace_back(net.biases[l].size(), 0.0);
      opt.v_b.emplace_back(net.biases[l].size(), 0.0);
    }
  }
  ++opt.step_count;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));
  auto adam_update = [&](std::vector<double>& p, std::vector<double>& m, std::vector<double>& v,
                         const std::vector<double>& g) {
    for (size_t i = 0; i < p.size(); ++i) {
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p[i] += sign * opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
    }
  };
  for (int l = 0; l < net.n_layers(); ++l) {
    adam_update(net.weights[l], opt.m_w[l], opt.v_w[l], grads.weights[l]);
    adam_update(net.biases[l], opt.m_b[l], opt.v_b[l], grads.biases[l]);
  }
}

std::string activation_to_string(Activation a) {
  return a == Activation::tanh_act ? "tanh" : "relu";
}

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::tanh_act;
  if (s == "relu") return Activation::relu;
  throw std::runtime_error("unknown activation '" + s + "'");
}

std::string head_to_string(Head h) {
  switch (h) {
    case Head::sigmoid_scalar:
      return "sigmoid_scalar";
    case Head::softmax_vector:
      return "softmax_vector";
    case Head::linear_vector:
      return "linear_vector";
  }
  return "linear_vector";
}

Head head_from_string(const std::string& s) {
  if (s == "sigmoid_scalar") return Head::sigmoid_scalar;
  if (s == "softmax_vector") return Head::softmax_vector;
  if (s == "linear_vector") return Head::linear_vector;
  throw std::runtime_error("unknown head '" + s + "'");
}

nlohmann::json mlp_to_json(const MlpParams& net) {
  nlohmann::json j;
  j["layer_sizes"] = net.layer_sizes;
  j["activation"] = activation_to_string(net.activation);
  j["head"] = head_to_string(net.head);
  j["weights"] = net.weights;
  j["biases"] = net.biases;
  return j;
}

MlpParams mlp_from_json(const nlohmann::json& j, const std::string& context) {
  MlpParams net;
  try {
    net.layer_sizes = require_field(j, "layer_sizes", context).get<std::vector<int>>();
    net.activation = activation_from_string(require_field(j, "activation", context).get<std::string>());
    net.head = head_from_string(require_field(j, "head", context).get<std::string>());
    net.weights = require_field(j, "weights", context).get<std::vector<std::vector<double>>>();
    net.biases = require_field(j, "biases", context).get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(context + ": malformed network record: " + e.what());
  }
  if (net.layer_sizes.size() < 2) throw std::runtime_error(context + ": too few layers");
  size_t layers = net.layer_sizes.size() - 1;
  if (net.weights.size() != layers || net.biases.size() != layers) {
    throw std::runtime_error(context + ": layer count mismatch");
  }
  for (size_t l = 0; l < layers; ++l) {
    size_t in = static_cast<size_t>(net.layer_sizes[l]);
    size_t out = static_cast<size_t>(net.layer_sizes[l + 1]);
    if (net.weights[l].size() != in * out || net.biases[l].size() != out) {
      throw std::runtime_error(context + ": weight shape mismatch in layer " + std::to_string(l));
    }
  }
  return net;
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    out << j.dump(1) << "\n";
    if (!out) throw std::runtime_error("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw std::runtime_error(path + ": malformed JSON");
  return j;
}

const nlohmann::json& require_field(const nlohmann::json& j, const char* key,
                                    const std::string& context) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw std::runtime_error(context + ": missing field '" + key + "'");
  }
  return *it;
}

void save_mlp(const MlpParams& net, const std::string& path) {
  nlohmann::json j = mlp_to_json(net);
  j["format"] = "cltv-mlp-v1";
  write_json_file(j, path);
}

MlpParams load_mlp(const std::string& path) {
  nlohmann::json j = read_json_file(path);
  if (require_field(j, "format", path).get<std::string>() != "cltv-mlp-v1") {
    throw std::runtime_error(path + ": unknown checkpoint format");
  }
  return mlp_from_json(j, path);
}

}  // namespace cltv
