#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cgnf/flow.hpp"
#include "cgnf/graph.hpp"

namespace cgnf {

/// An ordered set of interventional worlds sharing one stream of base draws
/// (common random numbers). FromRegime assignments may only reference
/// earlier labels.
struct SamplePlan {
  std::vector<std::pair<std::string, Regime>> regimes;
  std::size_t sample_count = 1;
  std::uint64_t seed = 0;
  std::optional<Eigen::MatrixXd> sigma_override;
  /// When non-empty, only these variables (expanded to their ancestor
  /// closure internally) get sampled; the rest stay NaN. Cuts the cost of
  /// estimand runs that never read downstream columns.
  std::set<std::string> needed;
  /// Finer-grained variant: per regime label. Takes precedence over
  /// `needed` when non-empty; regimes without an entry compute nothing
  /// beyond what later regimes pull from them. Closures (ancestors within a
  /// regime, cross-regime FromRegime sources) are resolved internally.
  std::map<std::string, std::set<std::string>> needed_by_regime;
};

struct SampleSet {
  std::vector<std::string> labels;
  std::vector<std::string> variables;  // DAG declaration order
  /// Per regime label: J x k samples on the data scale, discrete columns
  /// requantized.
  std::map<std::string, Eigen::MatrixXd> samples;
  /// The shared standard-normal (or sigma-correlated) draws, J x k.
  Eigen::MatrixXd base_draws;
  /// Base draws that fell beyond a normalizer's numerically reachable range
  /// and were pinned at the saturation boundary (see InversionStats).
  std::size_t clamped_samples = 0;

  const Eigen::MatrixXd& regime(const std::string& label) const;
  Eigen::VectorXd column(const std::string& label,
                         const std::string& variable) const;
};

/// J x k rows i.i.d. N(0, sigma) via the lower-triangular factor of sigma.
/// Draws come in fixed-size blocks with per-block derived seeds, so the
/// result does not depend on worker count.
Eigen::MatrixXd sample_base(std::size_t sample_count, std::size_t k,
                            const Eigen::MatrixXd& sigma, std::uint64_t seed);

/// Simulates every regime in plan order, variables in topo order: Natural
/// inverts the normalizer on the shared base draw, Fixed substitutes a
/// constant (consuming no draw), FromRegime copies the referenced regime's
/// column sample-by-sample.
SampleSet sample_regimes(const Cgnf& cgnf, const SamplePlan& plan,
                         std::size_t workers = 1);

/// Convenience wrapper: one all-Natural regime; returns its J x k samples.
Eigen::MatrixXd sample_observational(const Cgnf& cgnf, std::size_t sample_count,
                                     std::uint64_t seed,
                                     std::size_t workers = 1);

}  // namespace cgnf
