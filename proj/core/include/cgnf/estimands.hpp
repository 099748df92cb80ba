#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cgnf/flow.hpp"
#include "cgnf/simulate.hpp"
#include "cgnf/train.hpp"

namespace cgnf {

enum class EstimandKind { ATE, CATE, AJE, NDE, NIE, PSE };

std::string estimand_kind_name(EstimandKind kind);

/// CATE conditioning clause: a discrete level or a continuous interval
/// [lo, hi).
struct Conditioning {
  std::string variable;
  std::optional<double> value;
  std::optional<std::pair<double, double>> interval;
};

struct EstimandSpec {
  EstimandKind kind = EstimandKind::ATE;
  std::vector<std::string> treatments;  // exactly one, except AJE
  std::string outcome;
  std::vector<double> treated_values;  // a* per treatment, data scale
  std::vector<double> control_values;  // a per treatment, data scale
  /// Mediators between treatment and outcome in causal order (NDE/NIE/PSE).
  std::vector<std::string> mediators;
  /// PSE only: name of the mediator whose path bundle is requested; empty
  /// selects the direct path.
  std::string pse_via;
  std::optional<Conditioning> given;

  std::string name() const;
};

struct EstimateResult {
  std::string estimand;
  double point = 0.0;
  double mc_se = 0.0;
  std::size_t sample_count = 0;
  std::size_t conditioned_count = 0;  // CATE: samples satisfying the clause
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  double level = 0.0;
  std::vector<double> replicates;
  std::size_t failed_replicates = 0;
  std::vector<std::string> warnings;
};

/// Expands a named estimand into the regime ladder it needs (shared-draw
/// cross-world construction for mediation kinds). sample_count/seed are left
/// for the caller.
SamplePlan plan_for(const EstimandSpec& spec, const Dag& dag);

/// Runs all specs on ONE merged sample plan so every contrast shares base
/// draws; identical regimes are computed once.
std::vector<EstimateResult> estimate_many(const Cgnf& cgnf,
                                          const std::vector<EstimandSpec>& specs,
                                          std::size_t sample_count,
                                          std::uint64_t seed,
                                          std::size_t workers = 1);

EstimateResult estimate(const Cgnf& cgnf, const EstimandSpec& spec,
                        std::size_t sample_count, std::uint64_t seed,
                        std::size_t workers = 1);

struct DecomposeReport {
  EstimateResult ate;
  std::vector<EstimateResult> parts;  // direct PSE, then one per mediator
  double sum_of_parts = 0.0;
  double residual = 0.0;   // sum_of_parts - ate
  double tolerance = 0.0;  // 3 combined MC standard errors
  bool within_tolerance = true;
};

/// Verifies the telescoping identity ATE = PSE_direct + sum of
/// mediator-stage PSEs on shared draws (NDE + NIE = ATE when there is a
/// single mediator).
DecomposeReport decompose_check(const Cgnf& cgnf, const std::string& treatment,
                                const std::string& outcome,
                                const std::vector<std::string>& mediators,
                                double a_star, double a,
                                std::size_t sample_count, std::uint64_t seed,
                                std::size_t workers = 1);

struct BootstrapConfig {
  std::size_t replicates = 200;
  double level = 0.90;
  std::size_t sample_count = 100000;  // J per estimate
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

/// Full nonparametric bootstrap: B resamples with replacement, fresh
/// initialization and retraining per replicate, percentile CI. The returned
/// point estimate comes from the original data.
std::vector<EstimateResult> bootstrap_many(const Dataset& dataset, const Dag& dag,
                                           const std::vector<EstimandSpec>& specs,
                                           const FlowConfig& flow_config,
                                           const TrainConfig& train_config,
                                           const BootstrapConfig& config);

EstimateResult bootstrap(const Dataset& dataset, const Dag& dag,
                         const EstimandSpec& spec, const FlowConfig& flow_config,
                         const TrainConfig& train_config,
                         const BootstrapConfig& config);

struct SensitivityPair {
  std::string var_a;
  std::string var_b;
  std::vector<double> grid;  // correlations of the normalized disturbances
};

struct SensitivityPoint {
  std::vector<double> rho;  // one value per pair
  EstimateResult estimate;
};

/// Retrains with the sigma-aware loss and estimates with correlated base
/// draws at every grid point. Pairs are swept in lockstep, so all grids must
/// have equal length. Throws SigmaNotPositiveDefinite naming the grid point.
std::vector<SensitivityPoint> sensitivity_sweep(
    const Dataset& dataset, const Dag& dag, const EstimandSpec& spec,
    const FlowConfig& flow_config, const TrainConfig& train_config,
    const std::vector<SensitivityPair>& pairs, std::size_t sample_count,
    std::uint64_t seed, std::size_t workers = 1);

/// Identity correlation matrix with the pair entries set; validated PD.
Eigen::MatrixXd build_sigma(const Dag& dag,
                            const std::vector<SensitivityPair>& pairs,
                            const std::vector<double>& rho);

}  // namespace cgnf
