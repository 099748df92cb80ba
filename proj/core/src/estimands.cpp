#include "cgnf/estimands.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "cgnf/errors.hpp"
#include "cgnf/parallel.hpp"
#include "cgnf/rng.hpp"

namespace cgnf {

std::string estimand_kind_name(EstimandKind kind) {
  switch (kind) {
    case EstimandKind::ATE: return "ATE";
    case EstimandKind::CATE: return "CATE";
    case EstimandKind::AJE: return "AJE";
    case EstimandKind::NDE: return "NDE";
    case EstimandKind::NIE: return "NIE";
    case EstimandKind::PSE: return "PSE";
  }
  return "?";
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::string EstimandSpec::name() const {
  std::ostringstream os;
  os << estimand_kind_name(kind) << ' ';
  for (std::size_t i = 0; i < treatments.size(); ++i)
    os << (i ? "," : "") << treatments[i];
  if (kind == EstimandKind::PSE) {
    os << "->" << (pse_via.empty() ? "" : pse_via + "~>");
  } else if (!mediators.empty()) {
    os << "->";
    for (const auto& m : mediators) os << m << "->";
  } else {
    os << "->";
  }
  os << outcome;
  os << " (";
  for (std::size_t i = 0; i < treated_values.size(); ++i)
    os << (i ? "," : "") << fmt(treated_values[i]);
  os << " vs ";
  for (std::size_t i = 0; i < control_values.size(); ++i)
    os << (i ? "," : "") << fmt(control_values[i]);
  os << ')';
  if (given) {
    os << " | " << given->variable << '=';
    if (given->value)
      os << fmt(*given->value);
    else if (given->interval)
      os << '[' << fmt(given->interval->first) << ',' << fmt(given->interval->second) << ')';
  }
  return os.str();
}

namespace {

std::string fixed_label(const std::vector<std::string>& vars,
                        const std::vector<double>& values) {
  std::vector<std::pair<std::string, double>> items;
  for (std::size_t i = 0; i < vars.size(); ++i) items.push_back({vars[i], values[i]});
  std::sort(items.begin(), items.end());
  std::ostringstream os;
  os << "fix";
  for (const auto& [v, x] : items) os << ' ' << v << '=' << fmt(x);
  return os.str();
}

Regime fixed_regime(const std::vector<std::string>& vars,
                    const std::vector<double>& values) {
  Regime regime;
  for (std::size_t i = 0; i < vars.size(); ++i)
    regime.assignments[vars[i]] = Assignment::fixed(values[i]);
  return regime;
}

// The mediation ladder: rung s fixes the treatment at a* and copies the
// first s mediators from the all-control world.
std::string ladder_label(const std::string& star_label,
                         const std::vector<std::string>& mediators,
                         std::size_t s, const std::string& world_a_label) {
  if (s == 0) return star_label;
  std::ostringstream os;
  os << star_label << " |";
  for (std::size_t i = 0; i < s; ++i) os << ' ' << mediators[i];
  os << " from(" << world_a_label << ')';
  return os.str();
}

struct ContrastPlan {
  std::vector<std::pair<std::string, Regime>> regimes;  // sources first
  std::string minuend;
  std::string subtrahend;
  std::string filter_regime;  // CATE: regime whose column is filtered on
};

void validate_spec(const EstimandSpec& spec, const Dag& dag) {
  if (spec.treatments.empty()) throw Error("estimand needs a treatment");
  if (spec.kind != EstimandKind::AJE && spec.treatments.size() != 1)
    throw Error("only AJE takes multiple treatments");
  if (spec.treated_values.size() != spec.treatments.size() ||
      spec.control_values.size() != spec.treatments.size())
    throw Error("contrast values must match the treatment list");
  for (const auto& t : spec.treatments) dag.index_of(t);
  dag.index_of(spec.outcome);
  if (spec.given) dag.index_of(spec.given->variable);

  const bool mediation = spec.kind == EstimandKind::NDE ||
                         spec.kind == EstimandKind::NIE ||
                         spec.kind == EstimandKind::PSE;
  if (mediation) {
    if (spec.mediators.empty())
      throw InvalidMediatorOrder("mediation estimand needs mediators");
    const auto& topo = dag.topo_order();
    auto pos = [&](const std::string& n) {
      return std::find(topo.begin(), topo.end(), n) - topo.begin();
    };
    const auto t_pos = pos(spec.treatments[0]);
    const auto y_pos = pos(spec.outcome);
    long prev = t_pos;
    for (const auto& m : spec.mediators) {
      dag.index_of(m);
      const long m_pos = pos(m);
      if (m_pos <= prev || m_pos >= y_pos)
        throw InvalidMediatorOrder(
            "mediators must lie strictly between treatment and outcome in "
            "causal order: " + m);
      if (!dag.is_ancestor(spec.treatments[0], m) ||
          !dag.is_ancestor(m, spec.outcome))
        throw InvalidMediatorOrder(
            "mediator must descend from the treatment and precede the "
            "outcome: " + m);
      prev = m_pos;
    }
    if (spec.kind == EstimandKind::PSE && !spec.pse_via.empty()) {
      if (std::find(spec.mediators.begin(), spec.mediators.end(),
                    spec.pse_via) == spec.mediators.end())
        throw InvalidMediatorOrder("pse_via must be one of the mediators");
    }
  }
}

ContrastPlan contrast_plan(const EstimandSpec& spec, const Dag& dag) {
  validate_spec(spec, dag);
  ContrastPlan plan;
  const std::string star = fixed_label(spec.treatments, spec.treated_values);
  const std::string base = fixed_label(spec.treatments, spec.control_values);
  const Regime star_regime = fixed_regime(spec.treatments, spec.treated_values);
  const Regime base_regime = fixed_regime(spec.treatments, spec.control_values);

  switch (spec.kind) {
    case EstimandKind::ATE:
    case EstimandKind::AJE:
      plan.regimes = {{star, star_regime}, {base, base_regime}};
      plan.minuend = star;
      plan.subtrahend = base;
      break;
    case EstimandKind::CATE:
      plan.regimes = {{"natural", Regime{}}, {star, star_regime}, {base, base_regime}};
      plan.minuend = star;
      plan.subtrahend = base;
      plan.filter_regime = "natural";
      break;
    case EstimandKind::NDE:
    case EstimandKind::NIE:
    case EstimandKind::PSE: {
      const std::size_t m = spec.mediators.size();
      // Position s in 0..m: ladder rung copying the first s mediators from
      // the control world.
      auto rung = [&](std::size_t s) {
        std::string label = ladder_label(star, spec.mediators, s, base);
        Regime regime = star_regime;
        for (std::size_t i = 0; i < s; ++i)
          regime.assignments[spec.mediators[i]] =
              Assignment::from_regime(base);
        return std::make_pair(label, regime);
      };
      plan.regimes.push_back({base, base_regime});
      if (spec.kind == EstimandKind::NDE) {
        auto [l, r] = rung(m);
        plan.regimes.push_back({l, r});
        plan.minuend = l;
        plan.subtrahend = base;
      } else if (spec.kind == EstimandKind::NIE) {
        auto [l0, r0] = rung(0);
        auto [lm, rm] = rung(m);
        plan.regimes.push_back({l0, r0});
        plan.regimes.push_back({lm, rm});
        plan.minuend = l0;
        plan.subtrahend = lm;
      } else {
        if (spec.pse_via.empty()) {
          auto [lm, rm] = rung(m);
          plan.regimes.push_back({lm, rm});
          plan.minuend = lm;
          plan.subtrahend = base;
        } else {
          const std::size_t p =
              std::find(spec.mediators.begin(), spec.mediators.end(),
                        spec.pse_via) -
              spec.mediators.begin();
          auto [l_before, r_before] = rung(p);
          auto [l_after, r_after] = rung(p + 1);
          plan.regimes.push_back({l_before, r_before});
          plan.regimes.push_back({l_after, r_after});
          plan.minuend = l_before;
          plan.subtrahend = l_after;
        }
      }
      break;
    }
  }
  return plan;
}

}  // namespace

namespace {

// Record which columns each regime must deliver for one contrast.
void mark_needed(SamplePlan& plan, const EstimandSpec& spec,
                 const ContrastPlan& cp) {
  plan.needed.insert(spec.outcome);
  plan.needed_by_regime[cp.minuend].insert(spec.outcome);
  plan.needed_by_regime[cp.subtrahend].insert(spec.outcome);
  if (spec.given) {
    plan.needed.insert(spec.given->variable);
    plan.needed_by_regime[cp.filter_regime].insert(spec.given->variable);
  }
}

}  // namespace

SamplePlan plan_for(const EstimandSpec& spec, const Dag& dag) {
  const ContrastPlan cp = contrast_plan(spec, dag);
  SamplePlan plan;
  plan.regimes = cp.regimes;
  mark_needed(plan, spec, cp);
  return plan;
}

namespace {

struct PreparedContrasts {
  SamplePlan plan;
  std::vector<ContrastPlan> per_spec;
};

PreparedContrasts merge_plans(const std::vector<EstimandSpec>& specs,
                              const Dag& dag) {
  PreparedContrasts prepared;
  std::set<std::string> have;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    ContrastPlan cp = contrast_plan(specs[i], dag);
    for (auto& [label, regime] : cp.regimes)
      if (have.insert(label).second)
        prepared.plan.regimes.push_back({label, regime});
    mark_needed(prepared.plan, specs[i], cp);
    prepared.per_spec.push_back(std::move(cp));
  }
  return prepared;
}

EstimateResult contrast_result(const EstimandSpec& spec, const ContrastPlan& cp,
                               const SampleSet& samples, const Cgnf& cgnf) {
  EstimateResult result;
  result.estimand = spec.name();
  const Eigen::VectorXd minuend = samples.column(cp.minuend, spec.outcome);
  const Eigen::VectorXd subtrahend = samples.column(cp.subtrahend, spec.outcome);
  const Eigen::VectorXd contrast = minuend - subtrahend;
  const std::size_t j_count = contrast.size();
  result.sample_count = j_count;

  std::vector<char> keep(j_count, 1);
  std::size_t kept = j_count;
  if (spec.given) {
    const Eigen::VectorXd cond =
        samples.column(cp.filter_regime, spec.given->variable);
    const std::size_t var = cgnf.dag.index_of(spec.given->variable);
    kept = 0;
    for (std::size_t j = 0; j < j_count; ++j) {
      bool ok = false;
      if (spec.given->value) {
        double observed = cond[j];
        if (cgnf.preprocess.discrete[var] &&
            !cgnf.preprocess.support[var].empty())
          observed = static_cast<double>(
              requantize_value(observed, cgnf.preprocess.support[var]));
        ok = observed == *spec.given->value;
      } else if (spec.given->interval) {
        ok = cond[j] >= spec.given->interval->first &&
             cond[j] < spec.given->interval->second;
      }
      keep[j] = ok ? 1 : 0;
      kept += ok;
    }
    if (kept == 0)
      throw EmptyConditioningSet("no Monte Carlo samples satisfy " +
                                 spec.given->variable + " condition");
    result.conditioned_count = kept;
  }

  double sum = 0.0;
  for (std::size_t j = 0; j < j_count; ++j)
    if (keep[j]) sum += contrast[j];
  const double mean = sum / static_cast<double>(kept);
  double ss = 0.0;
  for (std::size_t j = 0; j < j_count; ++j)
    if (keep[j]) ss += (contrast[j] - mean) * (contrast[j] - mean);
  const double var = kept > 1 ? ss / static_cast<double>(kept - 1) : 0.0;
  result.point = mean;
  result.mc_se = std::sqrt(var / static_cast<double>(kept));
  if (samples.clamped_samples > 0)
    result.warnings.push_back(
        std::to_string(samples.clamped_samples) +
        " base draws fell beyond the invertible range and were pinned at "
        "the tail");
  return result;
}

}  // namespace

std::vector<EstimateResult> estimate_many(const Cgnf& cgnf,
                                          const std::vector<EstimandSpec>& specs,
                                          std::size_t sample_count,
                                          std::uint64_t seed,
                                          std::size_t workers) {
  PreparedContrasts prepared = merge_plans(specs, cgnf.dag);
  prepared.plan.sample_count = sample_count;
  prepared.plan.seed = seed;
  const SampleSet samples = sample_regimes(cgnf, prepared.plan, workers);
  std::vector<EstimateResult> results;
  for (std::size_t i = 0; i < specs.size(); ++i)
    results.push_back(
        contrast_result(specs[i], prepared.per_spec[i], samples, cgnf));
  return results;
}

EstimateResult estimate(const Cgnf& cgnf, const EstimandSpec& spec,
                        std::size_t sample_count, std::uint64_t seed,
                        std::size_t workers) {
  return estimate_many(cgnf, {spec}, sample_count, seed, workers)[0];
}

DecomposeReport decompose_check(const Cgnf& cgnf, const std::string& treatment,
                                const std::string& outcome,
                                const std::vector<std::string>& mediators,
                                double a_star, double a,
                                std::size_t sample_count, std::uint64_t seed,
                                std::size_t workers) {
  std::vector<EstimandSpec> specs;
  EstimandSpec ate;
  ate.kind = EstimandKind::ATE;
  ate.treatments = {treatment};
  ate.outcome = outcome;
  ate.treated_values = {a_star};
  ate.control_values = {a};
  specs.push_back(ate);
  if (!mediators.empty()) {
    EstimandSpec direct = ate;
    direct.kind = EstimandKind::PSE;
    direct.mediators = mediators;
    direct.pse_via = "";
    specs.push_back(direct);
    for (const auto& m : mediators) {
      EstimandSpec via = direct;
      via.pse_via = m;
      specs.push_back(via);
    }
  }

  auto results = estimate_many(cgnf, specs, sample_count, seed, workers);
  DecomposeReport report;
  report.ate = results[0];
  double se_sq = results[0].mc_se * results[0].mc_se;
  for (std::size_t i = 1; i < results.size(); ++i) {
    report.sum_of_parts += results[i].point;
    se_sq += results[i].mc_se * results[i].mc_se;
    report.parts.push_back(results[i]);
  }
  if (mediators.empty()) report.sum_of_parts = report.ate.point;
  report.residual = report.sum_of_parts - report.ate.point;
  report.tolerance = 3.0 * std::sqrt(se_sq);
  report.within_tolerance = std::abs(report.residual) <= report.tolerance;
  return report;
}

namespace {

Dataset resample_rows(const Dataset& dataset, Rng& rng) {
  const std::size_t n = dataset.row_count();
  Eigen::MatrixXd values(n, dataset.column_count());
  for (std::size_t r = 0; r < n; ++r) {
    const auto pick = static_cast<Eigen::Index>(rng.uniform01() * n);
    values.row(r) = dataset.values.row(pick);
  }
  Dataset out = dataset;
  out.values = std::move(values);
  return out;
}

void percentile_ci(EstimateResult& result, double level) {
  auto sorted = result.replicates;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t b = sorted.size();
  if (b == 0) return;
  const double alpha = (1.0 - level) / 2.0;
  // Nearest-rank percentiles: B=200 at level .90 picks the 10th and 190th
  // order statistics; B=2 degenerates to min/max.
  auto rank = [&](double q) {
    std::size_t r = static_cast<std::size_t>(std::ceil(q * b));
    r = std::max<std::size_t>(1, std::min(r, b));
    return sorted[r - 1];
  };
  result.ci_low = rank(alpha);
  result.ci_high = rank(1.0 - alpha);
  result.level = level;
  if (*result.ci_low > result.point || *result.ci_high < result.point)
    result.warnings.push_back(
        "percentile interval does not contain the point estimate");
}

}  // namespace

std::vector<EstimateResult> bootstrap_many(const Dataset& dataset, const Dag& dag,
                                           const std::vector<EstimandSpec>& specs,
                                           const FlowConfig& flow_config,
                                           const TrainConfig& train_config,
                                           const BootstrapConfig& config) {
  if (config.replicates < 2) throw Error("bootstrap needs B >= 2");
  Rng root = make_rng(config.seed);

  // Point estimate from the original sample.
  TrainConfig point_train = train_config;
  point_train.workers = config.workers;
  Cgnf init = make_cgnf(dag, flow_config, root.derive("init").next_u64());
  auto [model, history] = fit(init, dataset, point_train);
  std::vector<EstimateResult> results = estimate_many(
      model, specs, config.sample_count, root.derive("sample").next_u64(),
      config.workers);

  const std::size_t b_count = config.replicates;
  std::vector<std::vector<double>> replicate_values(
      specs.size(), std::vector<double>(b_count, 0.0));
  std::vector<char> failed(b_count, 0);

  parallel_for(
      b_count,
      [&](std::size_t b) {
        try {
          Rng rep = root.derive("replicate").derive(b);
          Dataset resampled = resample_rows(dataset, rep);
          TrainConfig tc = train_config;
          tc.seed = rep.derive("train").next_u64();
          tc.workers = 1;
          tc.log = nullptr;
          Cgnf rep_init =
              make_cgnf(dag, flow_config, rep.derive("init").next_u64());
          auto [rep_model, rep_history] = fit(rep_init, resampled, tc);
          auto rep_results =
              estimate_many(rep_model, specs, config.sample_count,
                            rep.derive("sample").next_u64(), 1);
          for (std::size_t s = 0; s < specs.size(); ++s)
            replicate_values[s][b] = rep_results[s].point;
        } catch (const std::exception&) {
          failed[b] = 1;
        }
      },
      config.workers);

  std::size_t failures = 0;
  for (char f : failed) failures += f;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    auto& result = results[s];
    result.failed_replicates = failures;
    for (std::size_t b = 0; b < b_count; ++b)
      if (!failed[b]) result.replicates.push_back(replicate_values[s][b]);
    if (failures * 20 > b_count)  // more than 5%
      result.warnings.push_back(std::to_string(failures) + " of " +
                                std::to_string(b_count) +
                                " bootstrap replicates failed");
    percentile_ci(result, config.level);
  }
  return results;
}

EstimateResult bootstrap(const Dataset& dataset, const Dag& dag,
                         const EstimandSpec& spec, const FlowConfig& flow_config,
                         const TrainConfig& train_config,
                         const BootstrapConfig& config) {
  return bootstrap_many(dataset, dag, {spec}, flow_config, train_config,
                        config)[0];
}

Eigen::MatrixXd build_sigma(const Dag& dag,
                            const std::vector<SensitivityPair>& pairs,
                            const std::vector<double>& rho) {
  const std::size_t k = dag.size();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(k, k);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const std::size_t a = dag.index_of(pairs[p].var_a);
    const std::size_t b = dag.index_of(pairs[p].var_b);
    if (a == b) throw Error("sensitivity pair must name two distinct variables");
    sigma(a, b) = rho[p];
    sigma(b, a) = rho[p];
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    std::ostringstream os;
    os << "sigma_z not positive definite at rho = (";
    for (std::size_t p = 0; p < rho.size(); ++p) os << (p ? "," : "") << rho[p];
    os << ")";
    throw SigmaNotPositiveDefinite(os.str());
  }
  return sigma;
}

std::vector<SensitivityPoint> sensitivity_sweep(
    const Dataset& dataset, const Dag& dag, const EstimandSpec& spec,
    const FlowConfig& flow_config, const TrainConfig& train_config,
    const std::vector<SensitivityPair>& pairs, std::size_t sample_count,
    std::uint64_t seed, std::size_t workers) {
  if (pairs.empty()) throw Error("sensitivity sweep needs at least one pair");
  const std::size_t grid_n = pairs[0].grid.size();
  for (const auto& p : pairs)
    if (p.grid.size() != grid_n)
      throw Error("sensitivity grids must have equal length (pairs are swept "
                  "in lockstep)");

  // Validate every grid point up front so a bad point fails fast by name.
  for (std::size_t g = 0; g < grid_n; ++g) {
    std::vector<double> rho;
    for (const auto& p : pairs) rho.push_back(p.grid[g]);
    build_sigma(dag, pairs, rho);
  }

  std::vector<SensitivityPoint> points(grid_n);
  Rng root = make_rng(seed);
  parallel_for(
      grid_n,
      [&](std::size_t g) {
        std::vector<double> rho;
        for (const auto& p : pairs) rho.push_back(p.grid[g]);
        const Eigen::MatrixXd sigma = build_sigma(dag, pairs, rho);
        Rng point_rng = root.derive("sensitivity").derive(g);
        TrainConfig tc = train_config;
        tc.seed = point_rng.derive("train").next_u64();
        tc.workers = 1;
        tc.log = nullptr;
        Cgnf init =
            make_cgnf(dag, flow_config, point_rng.derive("init").next_u64(), sigma);
        auto [model, history] = fit(init, dataset, tc);
        auto result = estimate(model, spec, sample_count,
                               point_rng.derive("sample").next_u64(), 1);
        points[g] = {rho, std::move(result)};
      },
      workers);
  return points;
}

}  // namespace cgnf
