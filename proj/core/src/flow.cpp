#include "cgnf/flow.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "cgnf/errors.hpp"
#include "cgnf/parallel.hpp"
#include "cgnf/rng.hpp"

namespace cgnf {

namespace {

// ln beta is clamped below here so the loss stays finite when the EluPlus
// head underflows.
constexpr double kBetaFloor = 1e-12;
constexpr double kLogTwoPi = 1.8378770664093454836;

void validate_sigma(std::size_t k, const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != static_cast<Eigen::Index>(k) ||
      sigma.cols() != static_cast<Eigen::Index>(k))
    throw SigmaNotPositiveDefinite("sigma_z has wrong shape");
  for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
    if (std::abs(sigma(i, i) - 1.0) > 1e-9)
      throw SigmaNotPositiveDefinite("sigma_z diagonal must be 1");
    for (Eigen::Index j = 0; j < i; ++j)
      if (std::abs(sigma(i, j) - sigma(j, i)) > 1e-9)
        throw SigmaNotPositiveDefinite("sigma_z must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw SigmaNotPositiveDefinite("sigma_z is not positive definite");
}

Eigen::MatrixXd embed_forward(const Normalizer& norm,
                              const Eigen::MatrixXd& parents,
                              ForwardCache* cache) {
  if (norm.embedding) return forward(*norm.embedding, parents, cache);
  return norm.constant_embedding.replicate(1, parents.cols());
}

struct BatchCache {
  Eigen::MatrixXd parents;
  ForwardCache embed_cache;
  Eigen::MatrixXd embedding;
  Eigen::RowVectorXd values;
  ForwardCache integrand_cache;
  Eigen::MatrixXd beta;  // 1 x B*(Q+1); last column per sample is beta(v)
};

// z_b = (v_b/2) sum_q w_q beta(t_bq) + alpha_b with t_bq the rule's nodes
// mapped onto [0, v_b]; one extra integrand column per sample at t = v_b
// yields the log-derivative.
void normalizer_forward_impl(const Normalizer& norm,
                             const Eigen::RowVectorXd& values,
                             const Eigen::MatrixXd& parents,
                             BatchCache* cache, Eigen::RowVectorXd& z_out,
                             Eigen::RowVectorXd& log_deriv_out) {
  const Eigen::Index b_count = values.size();
  if (parents.cols() != b_count)
    throw ShapeMismatch("normalizer: parents/value count mismatch");
  if (parents.rows() != norm.parent_count())
    throw ShapeMismatch("normalizer: expected " +
                        std::to_string(norm.parent_count()) + " parents, got " +
                        std::to_string(parents.rows()));
  const int q_count = norm.rule.n;
  const int e = norm.embedding_width();

  Eigen::MatrixXd embedding =
      embed_forward(norm, parents, cache ? &cache->embed_cache : nullptr);
  Eigen::RowVectorXd alpha =
      (norm.offset_weight.transpose() * embedding).array() + norm.offset_bias;

  Eigen::MatrixXd input(e + 1, b_count * (q_count + 1));
  for (Eigen::Index b = 0; b < b_count; ++b) {
    const double half = 0.5 * values[b];
    const Eigen::Index base = b * (q_count + 1);
    for (int q = 0; q < q_count; ++q) {
      input(0, base + q) = half * (norm.rule.nodes[q] + 1.0);
      input.block(1, base + q, e, 1) = embedding.col(b);
    }
    input(0, base + q_count) = values[b];
    input.block(1, base + q_count, e, 1) = embedding.col(b);
  }

  Eigen::MatrixXd beta = forward(norm.integrand, input,
                                 cache ? &cache->integrand_cache : nullptr);

  z_out.resize(b_count);
  log_deriv_out.resize(b_count);
  for (Eigen::Index b = 0; b < b_count; ++b) {
    const double half = 0.5 * values[b];
    const Eigen::Index base = b * (q_count + 1);
    double acc = 0.0;
    for (int q = 0; q < q_count; ++q)
      acc += norm.rule.weights[q] * beta(0, base + q);
    z_out[b] = half * acc + alpha[b];
    log_deriv_out[b] = std::log(std::max(beta(0, base + q_count), kBetaFloor));
    if (!std::isfinite(z_out[b]) || !std::isfinite(log_deriv_out[b]))
      throw NonFiniteEvaluation("normalizer produced a non-finite value");
  }

  if (cache) {
    cache->parents = parents;
    cache->embedding = std::move(embedding);
    cache->values = values;
    cache->beta = std::move(beta);
  }
}

// Reverse pass matching normalizer_forward_impl: dz and dlog_deriv are the
// loss gradients w.r.t. this variable's z and ln beta(v).
void normalizer_backward_impl(const Normalizer& norm, const BatchCache& cache,
                              const Eigen::RowVectorXd& dz,
                              const Eigen::RowVectorXd& dlog_deriv,
                              NormalizerGradients& grads) {
  const Eigen::Index b_count = cache.values.size();
  const int q_count = norm.rule.n;
  const int e = norm.embedding_width();

  Eigen::MatrixXd dbeta(1, b_count * (q_count + 1));
  for (Eigen::Index b = 0; b < b_count; ++b) {
    const double half = 0.5 * cache.values[b];
    const Eigen::Index base = b * (q_count + 1);
    for (int q = 0; q < q_count; ++q)
      dbeta(0, base + q) = dz[b] * half * norm.rule.weights[q];
    const double beta_v = cache.beta(0, base + q_count);
    dbeta(0, base + q_count) =
        beta_v > kBetaFloor ? dlog_deriv[b] / beta_v : 0.0;
  }

  Eigen::MatrixXd input_grad =
      backward(norm.integrand, cache.integrand_cache, dbeta, grads.integrand);

  Eigen::MatrixXd d_embedding(e, b_count);
  for (Eigen::Index b = 0; b < b_count; ++b) {
    const Eigen::Index base = b * (q_count + 1);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(e);
    for (int q = 0; q <= q_count; ++q) acc += input_grad.block(1, base + q, e, 1);
    d_embedding.col(b) = acc + dz[b] * norm.offset_weight;
  }

  grads.offset_weight.noalias() += cache.embedding * dz.transpose();
  grads.offset_bias += dz.sum();

  if (norm.embedding) {
    backward(*norm.embedding, cache.embed_cache, d_embedding, *grads.embedding);
  } else {
    grads.constant_embedding += d_embedding.rowwise().sum();
  }
}

}  // namespace

Cgnf make_cgnf(const Dag& dag, const FlowConfig& config, std::uint64_t seed,
               std::optional<Eigen::MatrixXd> sigma_z) {
  const std::size_t k = dag.size();
  Cgnf cgnf;
  cgnf.dag = dag;
  cgnf.config = config;
  cgnf.sigma_z = sigma_z ? *sigma_z
                         : Eigen::MatrixXd::Identity(k, k).eval();
  validate_sigma(k, cgnf.sigma_z);
  cgnf.preprocess = PreprocessInfo::identity(k);

  const QuadratureRule rule = clenshaw_curtis(config.quadrature_nodes);
  const int e = config.embedding_width;
  for (std::size_t t = 0; t < k; ++t) {
    const std::string& name = dag.topo_order()[t];
    cgnf.topo_to_var.push_back(static_cast<int>(dag.index_of(name)));
    std::vector<int> pidx;
    for (const auto& p : dag.parents(name))
      pidx.push_back(static_cast<int>(dag.index_of(p)));
    std::sort(pidx.begin(), pidx.end());
    cgnf.parent_indices.push_back(pidx);

    Normalizer norm;
    norm.rule = rule;
    const std::uint64_t emb_seed = Rng::splitmix(seed ^ (2 * t + 1));
    const std::uint64_t int_seed = Rng::splitmix(seed ^ (2 * t + 2));
    if (!pidx.empty()) {
      std::vector<int> sizes{static_cast<int>(pidx.size())};
      sizes.insert(sizes.end(), config.embedding_hidden.begin(),
                   config.embedding_hidden.end());
      sizes.push_back(e);
      norm.embedding = init_network(sizes, OutputActivation::Identity, emb_seed);
    } else {
      // Random like any other weight. A zero vector would park the t=0
      // quadrature column exactly on every ReLU kink of the integrand.
      Rng emb_rng(emb_seed);
      norm.constant_embedding = Eigen::VectorXd(e);
      for (int i = 0; i < e; ++i)
        norm.constant_embedding[i] = emb_rng.uniform01() - 0.5;
    }
    std::vector<int> isizes{e + 1};
    isizes.insert(isizes.end(), config.integrand_hidden.begin(),
                  config.integrand_hidden.end());
    isizes.push_back(1);
    norm.integrand = init_network(isizes, OutputActivation::EluPlus, int_seed);
    norm.offset_weight = Eigen::VectorXd::Zero(e);
    norm.offset_bias = 0.0;
    cgnf.normalizers.push_back(std::move(norm));
  }
  return cgnf;
}

Cgnf make_identity_cgnf(const Dag& dag, int quadrature_nodes) {
  FlowConfig config;
  config.embedding_hidden = {4};
  config.embedding_width = 2;
  config.integrand_hidden = {4};
  config.quadrature_nodes = quadrature_nodes;
  Cgnf cgnf = make_cgnf(dag, config, 0);
  for (auto& norm : cgnf.normalizers) {
    if (norm.embedding)
      for (auto& w : norm.embedding->weights) w.setZero();
    for (auto& w : norm.integrand.weights) w.setZero();
    for (auto& b : norm.integrand.biases) b.setZero();
    norm.offset_weight.setZero();
    norm.offset_bias = 0.0;
  }
  return cgnf;
}

std::pair<double, double> normalizer_forward(const Normalizer& norm, double v,
                                             const Eigen::VectorXd& parent_values) {
  Eigen::RowVectorXd values(1);
  values[0] = v;
  Eigen::MatrixXd parents = parent_values;
  Eigen::RowVectorXd z, ld;
  normalizer_forward_impl(norm, values, parents, nullptr, z, ld);
  return {z[0], ld[0]};
}

void normalizer_forward_batch(const Normalizer& norm,
                              const Eigen::RowVectorXd& values,
                              const Eigen::MatrixXd& parents,
                              Eigen::RowVectorXd& z_out,
                              Eigen::RowVectorXd& log_deriv_out) {
  normalizer_forward_impl(norm, values, parents, nullptr, z_out, log_deriv_out);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> flow_forward(
    const Cgnf& cgnf, const Eigen::VectorXd& row) {
  if (row.size() != static_cast<Eigen::Index>(cgnf.variable_count()))
    throw ShapeMismatch("flow_forward: row length does not match variables");
  Eigen::MatrixXd rows = row;
  Eigen::MatrixXd z, ld;
  flow_forward_batch(cgnf, rows, z, ld);
  return {z.col(0), ld.col(0)};
}

void flow_forward_batch(const Cgnf& cgnf, const Eigen::MatrixXd& rows,
                        Eigen::MatrixXd& z_out, Eigen::MatrixXd& log_derivs_out) {
  const std::size_t k = cgnf.variable_count();
  if (rows.rows() != static_cast<Eigen::Index>(k))
    throw ShapeMismatch("flow_forward_batch: rows/variables mismatch");
  z_out.resize(k, rows.cols());
  log_derivs_out.resize(k, rows.cols());
  for (std::size_t t = 0; t < k; ++t) {
    const int var = cgnf.topo_to_var[t];
    const auto& pidx = cgnf.parent_indices[t];
    Eigen::MatrixXd parents(pidx.size(), rows.cols());
    for (std::size_t p = 0; p < pidx.size(); ++p)
      parents.row(p) = rows.row(pidx[p]);
    Eigen::RowVectorXd z, ld;
    normalizer_forward_impl(cgnf.normalizers[t], rows.row(var), parents,
                            nullptr, z, ld);
    z_out.row(var) = z;
    log_derivs_out.row(var) = ld;
  }
}

namespace {

struct BaseDensity {
  bool identity = true;
  Eigen::LLT<Eigen::MatrixXd> llt;
  double log_det = 0.0;

  explicit BaseDensity(const Eigen::MatrixXd& sigma) {
    identity = sigma.isIdentity(0.0);
    if (!identity) {
      llt.compute(sigma);
      if (llt.info() != Eigen::Success)
        throw SigmaNotPositiveDefinite("sigma_z is not positive definite");
      log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    }
  }

  // Returns sigma^{-1} Z and accumulates the per-column log-densities.
  Eigen::MatrixXd solve_and_logdensity(const Eigen::MatrixXd& z,
                                       Eigen::RowVectorXd& log_density) const {
    const double k = static_cast<double>(z.rows());
    Eigen::MatrixXd y = identity ? z : llt.solve(z).eval();
    Eigen::RowVectorXd quad = (z.cwiseProduct(y)).colwise().sum();
    log_density = (-0.5 * (k * kLogTwoPi + log_det)) - 0.5 * quad.array();
    return y;
  }
};

}  // namespace

LossBreakdown nll(const Cgnf& cgnf, const Eigen::MatrixXd& batch) {
  if (batch.cols() == 0) throw Error("nll: empty batch");
  const BaseDensity base(cgnf.sigma_z);
  LossBreakdown out;
  const Eigen::Index chunk = 1024;
  for (Eigen::Index start = 0; start < batch.cols(); start += chunk) {
    const Eigen::Index len = std::min(chunk, batch.cols() - start);
    Eigen::MatrixXd z, ld;
    flow_forward_batch(cgnf, batch.middleCols(start, len), z, ld);
    Eigen::RowVectorXd log_density;
    base.solve_and_logdensity(z, log_density);
    out.base_logdensity += log_density.sum();
    out.logdet_jacobian += ld.sum();
  }
  out.total = -(out.base_logdensity + out.logdet_jacobian);
  return out;
}

void NormalizerGradients::set_zero() {
  if (embedding) embedding->set_zero();
  if (constant_embedding.size()) constant_embedding.setZero();
  integrand.set_zero();
  offset_weight.setZero();
  offset_bias = 0.0;
}

void NormalizerGradients::scale(double factor) {
  if (embedding) embedding->scale(factor);
  if (constant_embedding.size()) constant_embedding *= factor;
  integrand.scale(factor);
  offset_weight *= factor;
  offset_bias *= factor;
}

CgnfGradients zero_gradients(const Cgnf& cgnf) {
  CgnfGradients grads;
  for (const auto& norm : cgnf.normalizers) {
    NormalizerGradients g;
    if (norm.embedding) {
      g.embedding = zero_gradients(*norm.embedding);
      g.constant_embedding = Eigen::VectorXd();
    } else {
      g.constant_embedding = Eigen::VectorXd::Zero(norm.embedding_width());
    }
    g.integrand = zero_gradients(norm.integrand);
    g.offset_weight = Eigen::VectorXd::Zero(norm.embedding_width());
    g.offset_bias = 0.0;
    grads.normalizers.push_back(std::move(g));
  }
  return grads;
}

LossBreakdown loss_gradients(const Cgnf& cgnf, const Eigen::MatrixXd& batch,
                             CgnfGradients& grads, std::size_t workers) {
  const std::size_t k = cgnf.variable_count();
  if (batch.cols() == 0) throw Error("loss_gradients: empty batch");
  if (batch.rows() != static_cast<Eigen::Index>(k))
    throw ShapeMismatch("loss_gradients: rows/variables mismatch");

  std::vector<BatchCache> caches(k);
  Eigen::MatrixXd z(k, batch.cols());
  Eigen::MatrixXd ld(k, batch.cols());

  parallel_for(
      k,
      [&](std::size_t t) {
        const int var = cgnf.topo_to_var[t];
        const auto& pidx = cgnf.parent_indices[t];
        Eigen::MatrixXd parents(pidx.size(), batch.cols());
        for (std::size_t p = 0; p < pidx.size(); ++p)
          parents.row(p) = batch.row(pidx[p]);
        Eigen::RowVectorXd zr, ldr;
        normalizer_forward_impl(cgnf.normalizers[t], batch.row(var), parents,
                                &caches[t], zr, ldr);
        z.row(var) = zr;
        ld.row(var) = ldr;
      },
      workers);

  const BaseDensity base(cgnf.sigma_z);
  Eigen::RowVectorXd log_density;
  Eigen::MatrixXd dz = base.solve_and_logdensity(z, log_density);

  LossBreakdown out;
  out.base_logdensity = log_density.sum();
  out.logdet_jacobian = ld.sum();
  out.total = -(out.base_logdensity + out.logdet_jacobian);

  const Eigen::RowVectorXd dld =
      Eigen::RowVectorXd::Constant(batch.cols(), -1.0);
  parallel_for(
      k,
      [&](std::size_t t) {
        const int var = cgnf.topo_to_var[t];
        normalizer_backward_impl(cgnf.normalizers[t], caches[t], dz.row(var),
                                 dld, grads.normalizers[t]);
      },
      workers);
  return out;
}

std::vector<ParamGrad> param_grads(Normalizer& norm, NormalizerGradients& grads) {
  std::vector<ParamGrad> blocks;
  if (norm.embedding) {
    blocks = param_grads(*norm.embedding, *grads.embedding);
  } else {
    blocks.push_back({norm.constant_embedding.data(),
                      grads.constant_embedding.data(),
                      static_cast<std::size_t>(norm.constant_embedding.size())});
  }
  auto integrand_blocks = param_grads(norm.integrand, grads.integrand);
  blocks.insert(blocks.end(), integrand_blocks.begin(), integrand_blocks.end());
  blocks.push_back({norm.offset_weight.data(), grads.offset_weight.data(),
                    static_cast<std::size_t>(norm.offset_weight.size())});
  blocks.push_back({&norm.offset_bias, &grads.offset_bias, 1});
  return blocks;
}

namespace {

// Integral evaluator for inversion. The embedding is fixed per sample, so
// the first integrand layer is split into a per-sample premix plus the
// t-dependent rank-one part; only t varies across bisection iterations.
// Layer activations ping-pong between two preallocated buffers.
class IntegralEvaluator {
 public:
  IntegralEvaluator(const Normalizer& norm, const Eigen::MatrixXd& embedding)
      : norm_(norm), q_count_(norm.rule.n) {
    const auto& w1 = norm.integrand.weights[0];
    t_weight_ = w1.col(0);
    premix_ = w1.rightCols(w1.cols() - 1) * embedding;
    premix_.colwise() += norm.integrand.biases[0];
    scaled_nodes_.resize(q_count_);
    for (int q = 0; q < q_count_; ++q)
      scaled_nodes_[q] = 0.5 * (norm.rule.nodes[q] + 1.0);
    int max_width = 1;
    for (int s : norm.integrand.layer_sizes) max_width = std::max(max_width, s);
    const std::size_t cols =
        static_cast<std::size_t>(embedding.cols()) * q_count_;
    buffer_a_.resize(static_cast<std::size_t>(max_width) * cols);
    buffer_b_.resize(static_cast<std::size_t>(max_width) * cols);
  }

  // I[s] = integral of beta over [0, v[s]] for the selected samples.
  void eval(const Eigen::VectorXd& v, const std::vector<int>& idx,
            Eigen::VectorXd& out) {
    const std::size_t a_count = idx.size();
    if (a_count == 0) return;
    const std::size_t layers = norm_.integrand.layer_count();
    const Eigen::Index cols = static_cast<Eigen::Index>(a_count) * q_count_;
    const Eigen::Index h1 = premix_.rows();

    Eigen::Map<Eigen::MatrixXd> act(buffer_a_.data(), h1, cols);
    for (std::size_t a = 0; a < a_count; ++a) {
      const int s = idx[a];
      for (int q = 0; q < q_count_; ++q)
        act.col(a * q_count_ + q).noalias() =
            premix_.col(s) + (v[s] * scaled_nodes_[q]) * t_weight_;
    }
    auto activate = [](Eigen::Map<Eigen::MatrixXd>& m, bool output_layer) {
      double* p = m.data();
      const Eigen::Index n = m.size();
      if (!output_layer) {
        for (Eigen::Index i = 0; i < n; ++i) p[i] = p[i] > 0.0 ? p[i] : 0.0;
      } else {
        for (Eigen::Index i = 0; i < n; ++i) p[i] = elu_plus(p[i]);
      }
    };
    activate(act, layers == 1);
    double* cur = buffer_a_.data();
    double* next = buffer_b_.data();
    Eigen::Index cur_rows = h1;
    for (std::size_t l = 1; l < layers; ++l) {
      const auto& w = norm_.integrand.weights[l];
      Eigen::Map<Eigen::MatrixXd> src(cur, cur_rows, cols);
      Eigen::Map<Eigen::MatrixXd> dst(next, w.rows(), cols);
      dst.noalias() = w * src;
      dst.colwise() += norm_.integrand.biases[l];
      activate(dst, l + 1 == layers);
      std::swap(cur, next);
      cur_rows = w.rows();
    }
    Eigen::Map<Eigen::MatrixXd> beta(cur, cur_rows, cols);
    for (std::size_t a = 0; a < a_count; ++a) {
      const int s = idx[a];
      double acc = 0.0;
      for (int q = 0; q < q_count_; ++q)
        acc += norm_.rule.weights[q] * beta(0, a * q_count_ + q);
      out[s] = 0.5 * v[s] * acc;
    }
  }

 private:
  const Normalizer& norm_;
  int q_count_;
  Eigen::VectorXd t_weight_;
  Eigen::MatrixXd premix_;
  std::vector<double> scaled_nodes_;
  std::vector<double> buffer_a_, buffer_b_;
};

}  // namespace

Eigen::VectorXd invert_normalizer_batch(const Normalizer& norm,
                                        const Eigen::VectorXd& z_targets,
                                        const Eigen::MatrixXd& parents,
                                        InversionStats* stats) {
  const Eigen::Index total = z_targets.size();
  Eigen::VectorXd result(total);
  const Eigen::Index chunk = 128;

  for (Eigen::Index start = 0; start < total; start += chunk) {
    const Eigen::Index len = std::min(chunk, total - start);
    Eigen::MatrixXd embedding = embed_forward(
        norm, parents.middleCols(start, len), nullptr);
    Eigen::VectorXd alpha =
        (norm.offset_weight.transpose() * embedding).transpose().array() +
        norm.offset_bias;
    Eigen::VectorXd residual = z_targets.segment(start, len) - alpha;
    for (Eigen::Index s = 0; s < len; ++s)
      if (!std::isfinite(residual[s]))
        throw BracketNotFound("target z is not finite");

    IntegralEvaluator evaluator(norm, embedding);
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(len, -1.0);
    Eigen::VectorXd hi = Eigen::VectorXd::Constant(len, 1.0);
    Eigen::VectorXd integral_lo(len), integral_hi(len), integral_mid(len);

    std::vector<int> all(len);
    for (Eigen::Index s = 0; s < len; ++s) all[s] = static_cast<int>(s);
    evaluator.eval(lo, all, integral_lo);
    evaluator.eval(hi, all, integral_hi);

    // Geometric expansion: double both ends until the target lies inside.
    // When the integral stops moving on the deficient side the integrand
    // has underflowed there and the target is unreachable.
    std::vector<char> clamped(len, 0);
    auto bracketed = [&](Eigen::Index s) {
      return integral_lo[s] <= residual[s] && residual[s] <= integral_hi[s];
    };
    std::vector<int> active;
    for (int iter = 0; iter < 200; ++iter) {
      active.clear();
      for (Eigen::Index s = 0; s < len; ++s)
        if (!clamped[s] && !bracketed(s)) active.push_back(static_cast<int>(s));
      if (active.empty()) break;
      Eigen::VectorXd prev_lo = integral_lo, prev_hi = integral_hi;
      for (int s : active) {
        lo[s] *= 2.0;
        hi[s] *= 2.0;
      }
      evaluator.eval(lo, active, integral_lo);
      evaluator.eval(hi, active, integral_hi);
      for (int s : active) {
        const bool hi_stuck =
            residual[s] > integral_hi[s] && integral_hi[s] == prev_hi[s];
        const bool lo_stuck =
            residual[s] < integral_lo[s] && integral_lo[s] == prev_lo[s];
        if (hi_stuck || lo_stuck) {
          if (!stats)
            throw BracketNotFound(
                "target z lies beyond the normalizer's reachable range");
          clamped[s] = 1;
          const double pin = hi_stuck ? hi[s] / 2.0 : lo[s] / 2.0;
          lo[s] = pin;
          hi[s] = pin;
          ++stats->clamped;
        }
      }
    }
    for (Eigen::Index s = 0; s < len; ++s) {
      if (clamped[s] || bracketed(s)) continue;
      if (!stats)
        throw BracketNotFound(
            "no bracket after 200 doublings (pathological normalizer or "
            "non-finite target)");
      const double pin = residual[s] > integral_hi[s] ? hi[s] : lo[s];
      lo[s] = pin;
      hi[s] = pin;
      clamped[s] = 1;
      ++stats->clamped;
    }

    // Bisection to interval width 1e-8.
    for (int iter = 0; iter < 400; ++iter) {
      active.clear();
      for (Eigen::Index s = 0; s < len; ++s)
        if (hi[s] - lo[s] > 1e-8) active.push_back(static_cast<int>(s));
      if (active.empty()) break;
      Eigen::VectorXd mid = 0.5 * (lo + hi);
      evaluator.eval(mid, active, integral_mid);
      for (int s : active) {
        if (integral_mid[s] < residual[s])
          lo[s] = mid[s];
        else
          hi[s] = mid[s];
      }
    }

    Eigen::VectorXd v = 0.5 * (lo + hi);
    // The width bound already implies |h(v) - z| <= 1e-6 unless the slope is
    // extreme; verify once and keep halving for any stragglers.
    evaluator.eval(v, all, integral_mid);
    for (int extra = 0; extra < 60; ++extra) {
      active.clear();
      for (Eigen::Index s = 0; s < len; ++s)
        if (std::abs(integral_mid[s] - residual[s]) > 1e-6 &&
            hi[s] - lo[s] > 1e-15)
          active.push_back(static_cast<int>(s));
      if (active.empty()) break;
      for (int s : active) {
        if (integral_mid[s] < residual[s])
          lo[s] = v[s];
        else
          hi[s] = v[s];
        v[s] = 0.5 * (lo[s] + hi[s]);
      }
      evaluator.eval(v, active, integral_mid);
    }
    result.segment(start, len) = v;
  }
  return result;
}

double invert_normalizer(const Normalizer& norm, double z,
                         const Eigen::VectorXd& parent_values) {
  Eigen::VectorXd targets(1);
  targets[0] = z;
  Eigen::MatrixXd parents = parent_values;
  return invert_normalizer_batch(norm, targets, parents)[0];
}

}  // namespace cgnf
