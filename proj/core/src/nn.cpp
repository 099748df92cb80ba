#include "cgnf/nn.hpp"

#include <cmath>

#include "cgnf/errors.hpp"
#include "cgnf/rng.hpp"

namespace cgnf {

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += static_cast<std::size_t>(weights[l].size()) + biases[l].size();
  return n;
}

DenseNet init_network(const std::vector<int>& layer_sizes,
                      OutputActivation output_activation, std::uint64_t seed) {
  if (layer_sizes.size() < 2)
    throw InvalidArchitecture("need at least input and output layers");
  for (int s : layer_sizes)
    if (s <= 0) throw InvalidArchitecture("zero-sized layer");

  DenseNet net;
  net.layer_sizes = layer_sizes;
  net.output_activation = output_activation;
  Rng rng = make_rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l];
    const int fan_out = layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / fan_in);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i)
      for (int j = 0; j < fan_in; ++j)
        w(i, j) = bound * (2.0 * rng.uniform01() - 1.0);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return net;
}

namespace {

void apply_relu(Eigen::MatrixXd& m) { m = m.cwiseMax(0.0); }

void apply_elu_plus(Eigen::MatrixXd& m) {
  double* p = m.data();
  const std::ptrdiff_t n = m.size();
  for (std::ptrdiff_t i = 0; i < n; ++i) p[i] = elu_plus(p[i]);
}

}  // namespace

Eigen::MatrixXd forward(const DenseNet& net, const Eigen::MatrixXd& input,
                        ForwardCache* cache) {
  if (input.rows() != net.input_size())
    throw ShapeMismatch("forward: input has " + std::to_string(input.rows()) +
                        " rows, net expects " +
                        std::to_string(net.input_size()));
  if (cache) {
    cache->input = input;
    cache->pre.resize(net.layer_count());
  }
  Eigen::MatrixXd act = input;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    Eigen::MatrixXd pre = (net.weights[l] * act).colwise() + net.biases[l];
    if (cache) cache->pre[l] = pre;
    const bool last = (l + 1 == net.layer_count());
    if (!last) {
      apply_relu(pre);
    } else if (net.output_activation == OutputActivation::EluPlus) {
      apply_elu_plus(pre);
    }
    act = std::move(pre);
  }
  return act;
}

void NetGradients::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

void NetGradients::scale(double factor) {
  for (auto& w : weights) w *= factor;
  for (auto& b : biases) b *= factor;
}

void NetGradients::add_scaled(const NetGradients& other, double scale) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += scale * other.weights[l];
    biases[l] += scale * other.biases[l];
  }
}

NetGradients zero_gradients(const DenseNet& net) {
  NetGradients g;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(),
                                              net.weights[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
  return g;
}

Eigen::MatrixXd backward(const DenseNet& net, const ForwardCache& cache,
                         const Eigen::MatrixXd& output_grad,
                         NetGradients& grads) {
  const std::size_t layers = net.layer_count();
  if (cache.pre.size() != layers)
    throw ShapeMismatch("backward: cache does not match net");
  if (output_grad.rows() != net.output_size() ||
      output_grad.cols() != cache.pre.back().cols())
    throw ShapeMismatch("backward: output gradient shape mismatch");

  Eigen::MatrixXd delta = output_grad;
  if (net.output_activation == OutputActivation::EluPlus) {
    const Eigen::MatrixXd& pre = cache.pre.back();
    double* d = delta.data();
    const double* z = pre.data();
    const std::ptrdiff_t n = delta.size();
    for (std::ptrdiff_t i = 0; i < n; ++i)
      d[i] *= z[i] > 0.0 ? 1.0 : std::exp(z[i]);
  }

  for (std::size_t li = layers; li-- > 0;) {
    // Activation feeding this layer (recomputed from the cached
    // pre-activation; cheaper than caching both).
    if (li == 0) {
      grads.weights[0].noalias() += delta * cache.input.transpose();
    } else {
      Eigen::MatrixXd prev_act = cache.pre[li - 1].cwiseMax(0.0);
      grads.weights[li].noalias() += delta * prev_act.transpose();
    }
    grads.biases[li] += delta.rowwise().sum();
    Eigen::MatrixXd prev_delta = net.weights[li].transpose() * delta;
    if (li == 0) return prev_delta;
    // ReLU mask of the previous layer.
    const Eigen::MatrixXd& pre = cache.pre[li - 1];
    double* d = prev_delta.data();
    const double* z = pre.data();
    const std::ptrdiff_t n = prev_delta.size();
    for (std::ptrdiff_t i = 0; i < n; ++i)
      if (z[i] <= 0.0) d[i] = 0.0;
    delta = std::move(prev_delta);
  }
  return {};  // unreachable
}

std::vector<ParamGrad> param_grads(DenseNet& net, const NetGradients& grads) {
  std::vector<ParamGrad> blocks;
  blocks.reserve(2 * net.layer_count());
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    blocks.push_back({net.weights[l].data(), grads.weights[l].data(),
                      static_cast<std::size_t>(net.weights[l].size())});
    blocks.push_back({net.biases[l].data(), grads.biases[l].data(),
                      static_cast<std::size_t>(net.biases[l].size())});
  }
  return blocks;
}

void optimizer_step(OptimizerState& state, const std::vector<ParamGrad>& blocks) {
  std::size_t total = 0;
  for (const auto& b : blocks) total += b.size;

  if (state.kind == OptimizerKind::Sgd) {
    for (const auto& b : blocks)
      for (std::size_t i = 0; i < b.size; ++i)
        b.param[i] -= state.learning_rate * b.grad[i];
    ++state.step;
    return;
  }

  if (state.first_moment.size() != static_cast<Eigen::Index>(total)) {
    if (state.first_moment.size() != 0)
      throw ShapeMismatch("optimizer state does not match parameter count");
    state.first_moment = Eigen::VectorXd::Zero(total);
    state.second_moment = Eigen::VectorXd::Zero(total);
  }
  ++state.step;
  const double b1 = state.beta1, b2 = state.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  std::size_t off = 0;
  for (const auto& blk : blocks) {
    double* m = state.first_moment.data() + off;
    double* v = state.second_moment.data() + off;
    for (std::size_t i = 0; i < blk.size; ++i) {
      const double g = blk.grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double m_hat = m[i] / corr1;
      const double v_hat = v[i] / corr2;
      blk.param[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    off += blk.size;
  }
}

}  // namespace cgnf
