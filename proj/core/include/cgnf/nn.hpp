#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace cgnf {

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

/// Exponential linear unit shifted up by one; strictly positive everywhere.
inline double elu_plus(double x) { return x > 0.0 ? x + 1.0 : std::exp(x); }

enum class OutputActivation { Identity, EluPlus };

/// Fully connected net: ReLU hidden layers, configurable output activation.
/// weights[l] has shape (layer_sizes[l+1] x layer_sizes[l]); biases match.
struct DenseNet {
  std::vector<int> layer_sizes;
  OutputActivation output_activation = OutputActivation::Identity;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  std::size_t layer_count() const { return weights.size(); }
  std::size_t parameter_count() const;
};

/// Weights uniform on +/- sqrt(6 / fan_in), biases zero; reproducible per
/// seed. Throws InvalidArchitecture for fewer than two layers or a zero size.
DenseNet init_network(const std::vector<int>& layer_sizes,
                      OutputActivation output_activation, std::uint64_t seed);

/// Per-layer pre-activations plus the input, enough to run backward.
struct ForwardCache {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre;
};

/// Column-batched forward: input is (input_size x cols), result is
/// (output_size x cols). Pass a cache to enable backward.
Eigen::MatrixXd forward(const DenseNet& net, const Eigen::MatrixXd& input,
                        ForwardCache* cache = nullptr);

struct NetGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  void set_zero();
  void scale(double factor);
  void add_scaled(const NetGradients& other, double scale);
};

NetGradients zero_gradients(const DenseNet& net);

/// Exact reverse-mode gradients of sum_cols(output . output_grad) w.r.t. all
/// parameters (accumulated into grads) and the input (returned).
Eigen::MatrixXd backward(const DenseNet& net, const ForwardCache& cache,
                         const Eigen::MatrixXd& output_grad,
                         NetGradients& grads);

enum class OptimizerKind { Sgd, Adam };

/// Mutable view over one parameter tensor, paired with its gradient.
struct ParamGrad {
  double* param;
  const double* grad;
  std::size_t size;
};

std::vector<ParamGrad> param_grads(DenseNet& net, const NetGradients& grads);

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  Eigen::VectorXd first_moment;   // Adam only, lazily sized
  Eigen::VectorXd second_moment;  // Adam only, lazily sized
};

/// Applies one SGD or Adam update in place. Blocks must be passed in a
/// stable order; Adam moments are laid out to match.
void optimizer_step(OptimizerState& state, const std::vector<ParamGrad>& blocks);

}  // namespace cgnf
