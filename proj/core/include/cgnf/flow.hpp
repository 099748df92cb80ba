#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "cgnf/graph.hpp"
#include "cgnf/nn.hpp"
#include "cgnf/quadrature.hpp"

namespace cgnf {

/// Architecture shared by every normalizer in a flow.
struct FlowConfig {
  std::vector<int> embedding_hidden = {100, 90, 80, 70, 60};
  int embedding_width = 10;
  std::vector<int> integrand_hidden = {60, 50, 40, 30, 20};
  int quadrature_nodes = 32;
};

/// Monotone map z = integral_0^v beta(t; c(parents)) dt + alpha(c(parents)).
/// beta is the integrand net (strictly positive via its EluPlus head), c the
/// embedding net, alpha an affine head on the embedding output. Root
/// variables carry a learnable constant embedding instead of a net.
struct Normalizer {
  std::optional<DenseNet> embedding;
  Eigen::VectorXd constant_embedding;
  DenseNet integrand;
  Eigen::VectorXd offset_weight;
  double offset_bias = 0.0;
  QuadratureRule rule;

  int embedding_width() const {
    return embedding ? embedding->output_size()
                     : static_cast<int>(constant_embedding.size());
  }
  int parent_count() const { return embedding ? embedding->input_size() : 0; }
};

/// Per-variable standardization constants and dequantization flags, stored in
/// DAG declaration order. Values entering the flow are standardized; samples
/// leaving it get de-standardized (and discrete columns requantized).
struct PreprocessInfo {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<bool> discrete;
  std::vector<std::vector<long>> support;

  static PreprocessInfo identity(std::size_t k) {
    return {std::vector<double>(k, 0.0), std::vector<double>(k, 1.0),
            std::vector<bool>(k, false),
            std::vector<std::vector<long>>(k)};
  }
  double to_internal(std::size_t var, double data_value) const {
    return (data_value - mean[var]) / stddev[var];
  }
  double to_data(std::size_t var, double internal_value) const {
    return internal_value * stddev[var] + mean[var];
  }
};

struct Cgnf {
  Dag dag;
  std::vector<Normalizer> normalizers;  // one per variable, topo order
  Eigen::MatrixXd sigma_z;              // k x k correlation of the base
  PreprocessInfo preprocess;
  FlowConfig config;

  // Derived index maps. Rows handed to the flow are in DAG declaration
  // order; normalizers run in topo order.
  std::vector<int> topo_to_var;                  // topo pos -> declaration idx
  std::vector<std::vector<int>> parent_indices;  // per topo pos, sorted

  std::size_t variable_count() const { return dag.size(); }
};

/// Fresh flow with randomly initialized networks (seed-deterministic) and an
/// identity base covariance unless one is supplied.
Cgnf make_cgnf(const Dag& dag, const FlowConfig& config, std::uint64_t seed,
               std::optional<Eigen::MatrixXd> sigma_z = std::nullopt);

/// All networks zeroed: beta = 1 and alpha = 0, so z = v and log-deriv = 0.
/// Test and diagnostic helper.
Cgnf make_identity_cgnf(const Dag& dag, int quadrature_nodes = 32);

/// z and ln beta(v) for one variable given its parent values.
std::pair<double, double> normalizer_forward(const Normalizer& norm, double v,
                                             const Eigen::VectorXd& parent_values);

/// Batched: values is 1 x B aligned with columns of parents (p x B).
void normalizer_forward_batch(const Normalizer& norm,
                              const Eigen::RowVectorXd& values,
                              const Eigen::MatrixXd& parents,
                              Eigen::RowVectorXd& z_out,
                              Eigen::RowVectorXd& log_deriv_out);

/// Applies every normalizer in topo order. row is in preprocessed space,
/// DAG declaration order; outputs use the same order.
std::pair<Eigen::VectorXd, Eigen::VectorXd> flow_forward(
    const Cgnf& cgnf, const Eigen::VectorXd& row);

/// Column-batched flow_forward: rows is k x B.
void flow_forward_batch(const Cgnf& cgnf, const Eigen::MatrixXd& rows,
                        Eigen::MatrixXd& z_out, Eigen::MatrixXd& log_derivs_out);

struct LossBreakdown {
  double total = 0.0;
  double base_logdensity = 0.0;
  double logdet_jacobian = 0.0;
};

/// Negative log-likelihood of a batch (columns = observations, preprocessed
/// space). Uses N(0, sigma_z) for the base; sigma_z = I reduces to the
/// independent-normal form. Throws SigmaNotPositiveDefinite.
LossBreakdown nll(const Cgnf& cgnf, const Eigen::MatrixXd& batch);

struct NormalizerGradients {
  std::optional<NetGradients> embedding;
  Eigen::VectorXd constant_embedding;
  NetGradients integrand;
  Eigen::VectorXd offset_weight;
  double offset_bias = 0.0;

  void set_zero();
  void scale(double factor);
};

struct CgnfGradients {
  std::vector<NormalizerGradients> normalizers;  // topo order
};

CgnfGradients zero_gradients(const Cgnf& cgnf);

/// Exact reverse-mode gradient of nll(...).total for every parameter.
/// Work is split across `workers` by variable; results are deterministic.
LossBreakdown loss_gradients(const Cgnf& cgnf, const Eigen::MatrixXd& batch,
                             CgnfGradients& grads, std::size_t workers = 1);

/// Parameter/gradient blocks of one normalizer in a stable order, for the
/// optimizer.
std::vector<ParamGrad> param_grads(Normalizer& norm, NormalizerGradients& grads);

/// Solves normalizer_forward(v) = z by geometric bracket expansion from
/// [-1, 1] followed by bisection to interval width 1e-8. Guarantees
/// |forward(v) - z| <= 1e-6 for monotone normalizers; throws BracketNotFound
/// after 200 doublings.
double invert_normalizer(const Normalizer& norm, double z,
                         const Eigen::VectorXd& parent_values);

struct InversionStats {
  /// Targets beyond the map's numerically reachable range (the integrand
  /// underflows in the tail, so the integral saturates short of z). Such
  /// samples are pinned at the saturation boundary instead of failing.
  std::size_t clamped = 0;
};

/// Batched inversion; z_targets is length J, parents is p x J. Without
/// stats, unreachable targets raise BracketNotFound (the single-value
/// contract); with stats they are clamped and counted.
Eigen::VectorXd invert_normalizer_batch(const Normalizer& norm,
                                        const Eigen::VectorXd& z_targets,
                                        const Eigen::MatrixXd& parents,
                                        InversionStats* stats = nullptr);

/// 64-bit FNV-1a content hash of the serialized model (see io.hpp).
std::uint64_t model_hash(const Cgnf& cgnf);

}  // namespace cgnf
