#pragma once

#include <string>
#include <vector>

#include "cgnf/estimands.hpp"
#include "cgnf/train.hpp"

namespace cgnf {

/// The three data-generating models of the appendix experiments. All share
/// the 5-variable structure C -> A -> {L, M, Y} with every earlier variable
/// feeding every later one.
enum class DgmKind { LinearGaussian, DiscreteNonAdditive, NonlinearHeteroskedastic };

DgmKind dgm_kind_from_string(const std::string& name);
std::string dgm_kind_name(DgmKind kind);

/// The DAG shared by the three models (variables C, A, L, M, Y).
Dag dgm_dag();

/// Exact draw from the chosen structural equations.
Dataset simulate_dgm(DgmKind kind, std::size_t n, std::uint64_t seed);

/// The seven benchmark estimands, all contrasting a* = 1 with a = 0.
enum class BenchEstimand {
  AteAtoY,
  PseDirectAtoY,
  PseViaLtoY,
  PseViaMtoY,
  AteAtoM,
  NdeAtoM,
  NieAtoLtoM,
};

std::vector<BenchEstimand> all_bench_estimands();
std::string bench_estimand_name(BenchEstimand e);
EstimandSpec bench_estimand_spec(BenchEstimand e);

enum class TruthSource { Analytic, Enumeration, McOracle };
std::string truth_source_name(TruthSource source);

struct GroundTruth {
  double value = 0.0;
  TruthSource source = TruthSource::Analytic;
};

/// Linear model: path-tracing. Discrete model: exact enumeration of the
/// identification formula over the finite joint support. Nonlinear model:
/// Monte Carlo from mutilated models with shared disturbances
/// (mc_oracle_draws defaults to 1e8; the reference experiments used 1e10).
GroundTruth ground_truth(DgmKind kind, BenchEstimand estimand,
                         std::size_t mc_oracle_draws = 100000000,
                         std::uint64_t seed = 20240001,
                         std::size_t workers = 1);

/// Cross-check oracle: estimates any of the seven estimands for any DGM by
/// simulating mutilated structural equations directly (no flow involved).
double mc_oracle(DgmKind kind, BenchEstimand estimand, std::size_t draws,
                 std::uint64_t seed, std::size_t workers = 1);

struct MceCell {
  std::string estimand;
  std::size_t n = 0;
  double bias = 0.0;
  double sd = 0.0;  // NaN when replications < 2
  std::size_t replications = 0;
  double truth = 0.0;
  TruthSource truth_source = TruthSource::Analytic;
};

struct MceReport {
  DgmKind kind = DgmKind::LinearGaussian;
  std::vector<MceCell> cells;
  std::size_t failed_replications = 0;
};

struct MceConfig {
  FlowConfig flow;
  TrainConfig train;
  std::size_t sample_count = 100000;  // J per estimate
  std::size_t mc_oracle_draws = 100000000;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
};

/// Simulate -> fit -> estimate all seven estimands, repeated per sample size;
/// aggregates bias and SD against ground_truth. Failed replications are
/// excluded and counted.
MceReport run_mce(DgmKind kind, const std::vector<std::size_t>& sample_sizes,
                  std::size_t replications, const MceConfig& config);

void write_mce_csv(const MceReport& report, const std::string& path,
                   const std::string& config_echo);
void write_mce_plot_data(const MceReport& report, const std::string& path,
                         const std::string& config_echo);

struct CoverageInterval {
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool covered = false;
};

struct CoverageReport {
  double truth = 0.2;
  double level = 0.9;
  std::size_t covered = 0;
  std::size_t total = 0;
  double rate = 0.0;
  std::vector<CoverageInterval> intervals;
  std::size_t failed_datasets = 0;
};

struct CoverageConfig {
  FlowConfig flow;
  TrainConfig train;
  std::size_t bootstrap_replicates = 100;
  std::size_t sample_count = 100000;  // J per estimate
  double level = 0.9;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
};

/// Bootstrap-coverage experiment on the 3-variable model C ~ Bern(0.6),
/// A ~ Bern(0.4 + 0.2C), Y ~ N(0.2A + 0.4C, 1); the percentile CI should
/// cover the true ATE of 0.2 at roughly the nominal rate.
CoverageReport run_coverage(std::size_t n_datasets, std::size_t n,
                            const CoverageConfig& config);

Dag coverage_dag();
Dataset simulate_coverage_dgm(std::size_t n, std::uint64_t seed);

struct HyperVariant {
  std::string name;
  FlowConfig flow;
  TrainConfig train;
};

/// Named architecture/hyper-parameter variants of a default configuration.
/// Recognized names: "default", "default - one hidden layer",
/// "default - 1/4 of nodes", "batch size of 512", "learning rate of 0.001".
HyperVariant make_variant(const std::string& name, const FlowConfig& flow,
                          const TrainConfig& train);

std::vector<std::pair<std::string, MceReport>> run_hyper_sweep(
    DgmKind kind, const std::vector<std::string>& variants, std::size_t n,
    std::size_t replications, const MceConfig& config);

}  // namespace cgnf
