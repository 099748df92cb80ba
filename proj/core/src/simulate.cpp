#include "cgnf/simulate.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>

#include "cgnf/errors.hpp"
#include "cgnf/parallel.hpp"
#include "cgnf/rng.hpp"
#include "cgnf/train.hpp"

namespace cgnf {

const Eigen::MatrixXd& SampleSet::regime(const std::string& label) const {
  auto it = samples.find(label);
  if (it == samples.end())
    throw RegimeReferenceError("no regime labelled '" + label + "'");
  return it->second;
}

Eigen::VectorXd SampleSet::column(const std::string& label,
                                  const std::string& variable) const {
  const auto& m = regime(label);
  for (std::size_t i = 0; i < variables.size(); ++i)
    if (variables[i] == variable) return m.col(i);
  throw UnknownVariable(variable);
}

Eigen::MatrixXd sample_base(std::size_t sample_count, std::size_t k,
                            const Eigen::MatrixXd& sigma, std::uint64_t seed) {
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (sigma.rows() != static_cast<Eigen::Index>(k) ||
      sigma.cols() != static_cast<Eigen::Index>(k) ||
      llt.info() != Eigen::Success)
    throw SigmaNotPositiveDefinite("sample_base: bad sigma");
  const bool identity = sigma.isIdentity(0.0);
  const Eigen::MatrixXd chol = identity
                                   ? Eigen::MatrixXd()
                                   : llt.matrixL().toDenseMatrix();

  constexpr std::size_t kBlock = 65536;
  Eigen::MatrixXd draws(sample_count, k);
  Rng root = make_rng(seed).derive("base-draws");
  Eigen::VectorXd g(k);
  for (std::size_t start = 0; start < sample_count; start += kBlock) {
    const std::size_t len = std::min(kBlock, sample_count - start);
    Rng rng = root.derive(start / kBlock);
    for (std::size_t j = 0; j < len; ++j) {
      for (std::size_t i = 0; i < k; ++i) g[i] = rng.normal();
      if (identity)
        draws.row(start + j) = g.transpose();
      else
        draws.row(start + j) = (chol * g).transpose();
    }
  }
  return draws;
}

namespace {

void validate_plan(const Cgnf& cgnf, const SamplePlan& plan) {
  if (plan.sample_count < 1) throw Error("sample_count must be >= 1");
  std::set<std::string> seen;
  for (const auto& [label, regime] : plan.regimes) {
    if (!seen.insert(label).second)
      throw RegimeReferenceError("duplicate regime label '" + label + "'");
    for (const auto& [var, assign] : regime.assignments) {
      const std::size_t idx = cgnf.dag.index_of(var);  // throws UnknownVariable
      if (assign.kind == Assignment::Kind::FromRegime) {
        if (!seen.count(assign.regime_ref) || assign.regime_ref == label)
          throw RegimeReferenceError(
              "regime '" + label + "' references '" + assign.regime_ref +
              "', which is not an earlier regime");
      }
      if (assign.kind == Assignment::Kind::Fixed &&
          cgnf.preprocess.discrete[idx]) {
        const auto& support = cgnf.preprocess.support[idx];
        const long rounded = static_cast<long>(std::nearbyint(assign.value));
        if (std::abs(assign.value - rounded) > 1e-9 ||
            !std::binary_search(support.begin(), support.end(), rounded))
          throw Error("fixed value " + std::to_string(assign.value) + " for '" +
                      var + "' is outside its discrete support");
      }
    }
  }
}

}  // namespace

SampleSet sample_regimes(const Cgnf& cgnf, const SamplePlan& plan,
                         std::size_t workers) {
  validate_plan(cgnf, plan);
  const std::size_t k = cgnf.variable_count();
  const std::size_t j_count = plan.sample_count;
  const Eigen::MatrixXd& sigma =
      plan.sigma_override ? *plan.sigma_override : cgnf.sigma_z;
  Eigen::MatrixXd base = sample_base(j_count, k, sigma, plan.seed);

  // Resolve needed sets into closures: parents within a regime (Natural
  // assignments), nothing for Fixed, and the source regime's column for
  // FromRegime. Regimes are processed in reverse so cross-regime pulls land
  // on not-yet-processed (earlier) regimes.
  const std::size_t r_count = plan.regimes.size();
  std::vector<std::vector<bool>> wanted(r_count, std::vector<bool>(k, false));
  const bool restrict_global = !plan.needed.empty();
  const bool restrict_by_regime = !plan.needed_by_regime.empty();
  if (!restrict_global && !restrict_by_regime) {
    for (auto& w : wanted) w.assign(k, true);
  } else {
    std::vector<std::set<std::string>> pending(r_count);
    for (std::size_t r = 0; r < r_count; ++r) {
      if (restrict_by_regime) {
        auto it = plan.needed_by_regime.find(plan.regimes[r].first);
        if (it != plan.needed_by_regime.end()) pending[r] = it->second;
      } else {
        pending[r] = plan.needed;
      }
    }
    for (std::size_t ri = r_count; ri-- > 0;) {
      const auto& regime = plan.regimes[ri].second;
      std::vector<std::string> stack(pending[ri].begin(), pending[ri].end());
      while (!stack.empty()) {
        const std::string name = stack.back();
        stack.pop_back();
        const std::size_t idx = cgnf.dag.index_of(name);
        if (wanted[ri][idx]) continue;
        const Assignment assign = regime.assignment_for(name);
        if (assign.kind == Assignment::Kind::FromRegime) {
          wanted[ri][idx] = true;
          for (std::size_t src = 0; src < ri; ++src)
            if (plan.regimes[src].first == assign.regime_ref)
              pending[src].insert(name);
          continue;
        }
        wanted[ri][idx] = true;
        if (assign.kind == Assignment::Kind::Natural)
          for (const auto& p : cgnf.dag.parents(name)) stack.push_back(p);
      }
    }
  }

  SampleSet out;
  out.base_draws = base;
  for (const auto& v : cgnf.dag.variables()) out.variables.push_back(v.name);

  // Internal (standardized) columns per regime, k x J.
  std::vector<Eigen::MatrixXd> internal;
  std::vector<std::vector<char>> natural_flag;  // per regime/var: inverted naturally

  for (std::size_t r = 0; r < plan.regimes.size(); ++r) {
    const auto& [label, regime] = plan.regimes[r];
    internal.emplace_back(Eigen::MatrixXd::Constant(
        k, j_count, std::numeric_limits<double>::quiet_NaN()));
    natural_flag.emplace_back(k, 0);
    Eigen::MatrixXd& cur = internal.back();

    for (std::size_t t = 0; t < k; ++t) {
      const int var = cgnf.topo_to_var[t];
      const std::string& name = cgnf.dag.variables()[var].name;
      if (!wanted[r][var]) continue;
      const Assignment assign = regime.assignment_for(name);
      switch (assign.kind) {
        case Assignment::Kind::Fixed:
          cur.row(var).setConstant(cgnf.preprocess.to_internal(var, assign.value));
          break;
        case Assignment::Kind::FromRegime: {
          std::size_t src = 0;
          for (; src < r; ++src)
            if (plan.regimes[src].first == assign.regime_ref) break;
          cur.row(var) = internal[src].row(var);
          natural_flag.back()[var] = natural_flag[src][var];
          break;
        }
        case Assignment::Kind::Natural: {
          const auto& pidx = cgnf.parent_indices[t];
          Eigen::MatrixXd parents(pidx.size(), j_count);
          for (std::size_t p = 0; p < pidx.size(); ++p)
            parents.row(p) = cur.row(pidx[p]);
          // Common random numbers make regimes with identical conditioner
          // inputs produce identical columns; reuse instead of re-inverting.
          bool reused = false;
          for (std::size_t src = 0; src < r && !reused; ++src) {
            if (!natural_flag[src][var]) continue;
            bool same = true;
            for (std::size_t p = 0; p < pidx.size() && same; ++p)
              same = (internal[src].row(pidx[p]).array() ==
                      cur.row(pidx[p]).array())
                         .all();
            if (same) {
              cur.row(var) = internal[src].row(var);
              reused = true;
            }
          }
          if (!reused) {
            const Eigen::VectorXd z = base.col(var);
            Eigen::VectorXd inverted(j_count);
            const std::size_t block = 16384;
            const std::size_t blocks = (j_count + block - 1) / block;
            std::vector<InversionStats> stats(blocks);
            parallel_for(
                blocks,
                [&](std::size_t b) {
                  const std::size_t start = b * block;
                  const std::size_t len = std::min(block, j_count - start);
                  inverted.segment(start, len) = invert_normalizer_batch(
                      cgnf.normalizers[t], z.segment(start, len),
                      parents.middleCols(start, len), &stats[b]);
                },
                workers);
            for (const auto& s : stats) out.clamped_samples += s.clamped;
            cur.row(var) = inverted.transpose();
          }
          natural_flag.back()[var] = 1;
          break;
        }
      }
    }

    // Externalize: de-standardize, requantize discrete columns, and write
    // Fixed values through exactly.
    Eigen::MatrixXd external(j_count, k);
    for (std::size_t v = 0; v < k; ++v) {
      if (!wanted[r][v]) {
        external.col(v).setConstant(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      const Assignment assign = regime.assignment_for(cgnf.dag.variables()[v].name);
      if (assign.kind == Assignment::Kind::Fixed) {
        external.col(v).setConstant(assign.value);
        continue;
      }
      Eigen::VectorXd col = cur.row(v).transpose();
      for (Eigen::Index j = 0; j < col.size(); ++j)
        col[j] = cgnf.preprocess.to_data(v, col[j]);
      if (cgnf.preprocess.discrete[v] && !cgnf.preprocess.support[v].empty())
        col = requantize(col, cgnf.preprocess.support[v]);
      external.col(v) = col;
    }
    out.labels.push_back(label);
    out.samples.emplace(label, std::move(external));
  }
  return out;
}

Eigen::MatrixXd sample_observational(const Cgnf& cgnf, std::size_t sample_count,
                                     std::uint64_t seed, std::size_t workers) {
  SamplePlan plan;
  plan.regimes.push_back({"natural", Regime{}});
  plan.sample_count = sample_count;
  plan.seed = seed;
  return sample_regimes(cgnf, plan, workers).regime("natural");
}

}  // namespace cgnf
