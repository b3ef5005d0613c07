#ifndef CLTV_MLP_HPP
#define CLTV_MLP_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace cltv {

enum class Activation { tanh_act, relu };
enum class Head { sigmoid_scalar, softmax_vector, linear_vector };
enum class UpdateDirection { ascend, descend };

/**
 * Fully connected network with explicit parameters and hand-written
 * backpropagation. Weight matrices are row-major (fan_out x fan_in).
 * The head determines the output nonlinearity; sigmoid_scalar requires an
 * output dimension of exactly 1.
 */
struct MlpParams {
  std::vector<int> layer_sizes;  // [input, hidden..., output]
  Activation activation = Activation::tanh_act;
  Head head = Head::linear_vector;
  std::vector<std::vector<double>> weights;  // one row-major matrix per layer
  std::vector<std::vector<double>> biases;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int n_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
  size_t n_params() const;
};

/// Weights ~ Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
/// Deterministic for a fixed seed.
MlpParams init_mlp(const std::vector<int>& layer_sizes, Activation activation, Head head,
                   uint64_t seed);

/// Intermediate values needed by the backward pass.
struct ForwardCache {
  std::vector<double> input;
  std::vector<std::vector<double>> pre;   // pre-activations per layer
  std::vector<std::vector<double>> post;  // activations per layer (head applied on the last)
};

/// Evaluates the network; fills `cache` when non-null. Throws on input
/// dimension mismatch.
std::vector<double> mlp_forward(const MlpParams& net, const std::vector<double>& x,
                                ForwardCache* cache = nullptr);

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static Gradients zeros_like(const MlpParams& net);
  void accumulate(const Gradients& other);
  void scale(double factor);
  double max_abs() const;
};

/**
 * Backpropagates dloss/doutput through the cached forward pass. The head
 * Jacobian is applied internally, so the caller always differentiates with
 * respect to the post-head output. Optionally reports dloss/dinput.
 */
Gradients mlp_backward(const MlpParams& net, const ForwardCache& cache,
                       const std::vector<double>& dloss_doutput,
                       std::vector<double>* dloss_dinput = nullptr);

/**
 * SGD or Adam with bias-corrected moments. The moment buffers are lazily
 * sized on first use and must not be shared between networks.
 */
struct OptimizerState {
  enum class Kind { sgd, adam };
  Kind kind = Kind::sgd;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step_count = 0;
  std::vector<std::vector<double>> m_w, v_w, m_b, v_b;

  static OptimizerState sgd(double lr);
  static OptimizerState adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                             double eps = 1e-8);
};

/// Applies one update in the given direction. Throws std::runtime_error with
/// a diagnostic if any gradient entry is non-finite.
void mlp_step(MlpParams& net, OptimizerState& opt, const Gradients& grads, UpdateDirection dir);

/// JSON checkpoint of layer sizes plus row-major weight/bias arrays;
/// round-trips bit-exactly. Loading validates shapes and enum tags.
void save_mlp(const MlpParams& net, const std::string& path);
MlpParams load_mlp(const std::string& path);

std::string activation_to_string(Activation a);
Activation activation_from_string(const std::string& s);
std::string head_to_string(Head h);
Head head_from_string(const std::string& s);

}  // namespace cltv

#endif  // CLTV_MLP_HPP
