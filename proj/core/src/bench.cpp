#include "cgnf/bench.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "cgnf/errors.hpp"
#include "cgnf/parallel.hpp"
#include "cgnf/rng.hpp"

namespace cgnf {

DgmKind dgm_kind_from_string(const std::string& name) {
  if (name == "linear" || name == "LinearGaussian") return DgmKind::LinearGaussian;
  if (name == "discrete" || name == "DiscreteNonAdditive")
    return DgmKind::DiscreteNonAdditive;
  if (name == "nonlinear" || name == "NonlinearHeteroskedastic")
    return DgmKind::NonlinearHeteroskedastic;
  throw Error("unknown data-generating model: " + name);
}

std::string dgm_kind_name(DgmKind kind) {
  switch (kind) {
    case DgmKind::LinearGaussian: return "linear";
    case DgmKind::DiscreteNonAdditive: return "discrete";
    case DgmKind::NonlinearHeteroskedastic: return "nonlinear";
  }
  return "?";
}

Dag dgm_dag() {
  return parse_dag(
      "C -> A, C -> L, C -> M, C -> Y\n"
      "A -> L, A -> M, A -> Y\n"
      "L -> M, L -> Y\n"
      "M -> Y\n",
      DagFormat::EdgeList);
}

namespace {

double inv_logit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double laplace_quantile(double u) {
  return u < 0.5 ? std::log(2.0 * u) : -std::log(2.0 * (1.0 - u));
}

// Generalized lambda in quantile form, scale 1: Q(u) = mu + u^a - (1-u)^b.
double tukey_lambda_quantile(double u, double mu, double a, double b) {
  return mu + std::pow(u, a) - std::pow(1.0 - u, b);
}

// One observation's worth of primitive randomness, drawn in a fixed order so
// counterfactual worlds share disturbances.
struct DgmNoise {
  double u_c, u_a, u_l, u_m, u_y;
  double n_c, n_a, n_l, n_m, n_y;
  double t_m;  // Student's t(10)
};

DgmNoise draw_noise(Rng& rng) {
  DgmNoise n;
  n.u_c = rng.uniform_open();
  n.u_a = rng.uniform_open();
  n.u_l = rng.uniform_open();
  n.u_m = rng.uniform_open();
  n.u_y = rng.uniform_open();
  n.n_c = rng.normal();
  n.n_a = rng.normal();
  n.n_l = rng.normal();
  n.n_m = rng.normal();
  n.n_y = rng.normal();
  const double z = rng.normal();
  double chi2 = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double g = rng.normal();
    chi2 += g * g;
  }
  n.t_m = z / std::sqrt(chi2 / 10.0);
  return n;
}

int multinomial_level(double u, const std::array<double, 3>& probs) {
  double acc = 0.0;
  for (int i = 0; i < 3; ++i) {
    acc += probs[i];
    if (u < acc) return i + 1;
  }
  return 3;
}

double f_c(DgmKind kind, const DgmNoise& e) {
  switch (kind) {
    case DgmKind::LinearGaussian: return e.n_c;
    case DgmKind::DiscreteNonAdditive:
      return multinomial_level(e.u_c, {0.3, 0.5, 0.2});
    case DgmKind::NonlinearHeteroskedastic: return laplace_quantile(e.u_c);
  }
  return 0;
}

double f_a(DgmKind kind, double c, const DgmNoise& e) {
  switch (kind) {
    case DgmKind::LinearGaussian: return 0.1 * c + e.n_a;
    case DgmKind::DiscreteNonAdditive: return e.u_a < 0.3 + 0.1 * c ? 1.0 : 0.0;
    case DgmKind::NonlinearHeteroskedastic:
      return e.u_a < inv_logit(0.1 * c) ? 1.0 : 0.0;
  }
  return 0;
}

double f_l(DgmKind kind, double a, double c, const DgmNoise& e) {
  switch (kind) {
    case DgmKind::LinearGaussian: return 0.2 * a + 0.2 * c + e.n_l;
    case DgmKind::DiscreteNonAdditive: {
      std::array<double, 3> probs{0.6, 0.2, 0.2};
      if (a == 1.0) {
        if (c == 1.0) probs = {0.5, 0.3, 0.2};
        else if (c == 2.0) probs = {0.3, 0.5, 0.2};
        else probs = {0.2, 0.3, 0.5};
      }
      return multinomial_level(e.u_l, probs);
    }
    case DgmKind::NonlinearHeteroskedastic:
      return tukey_lambda_quantile(e.u_l, 0.2 * a + 0.2 * c + 0.1 * a * c, 0.3, 0.7);
  }
  return 0;
}

double f_m(DgmKind kind, double a, double c, double l, const DgmNoise& e) {
  switch (kind) {
    case DgmKind::LinearGaussian:
      return 0.1 * a + 0.2 * c + 0.25 * l + e.n_m;
    case DgmKind::DiscreteNonAdditive:
      return e.u_m < inv_logit(-0.5 + 0.4 * a + 0.2 * c + 0.3 * l) ? 1.0 : 0.0;
    case DgmKind::NonlinearHeteroskedastic:
      return e.t_m + 0.1 * a + 0.2 * c * c + 0.25 * l + 0.15 * a * l;
  }
  return 0;
}

double f_y(DgmKind kind, double a, double c, double l, double m,
           const DgmNoise& e) {
  switch (kind) {
    case DgmKind::LinearGaussian:
      return 0.1 * a + 0.1 * c + 0.25 * m + 0.25 * l + e.n_y;
    case DgmKind::DiscreteNonAdditive:
      return e.u_y < inv_logit(-0.5 + 0.3 * a + 0.1 * c + 0.3 * m +
                               0.3 * a * m + 0.3 * l)
                 ? 1.0
                 : 0.0;
    case DgmKind::NonlinearHeteroskedastic:
      return e.n_y * std::abs(c) +
             0.1 * a + 0.1 * c * c + 0.2 * m + 0.2 * a * m + 0.25 * l * l;
  }
  return 0;
}

}  // namespace

Dataset simulate_dgm(DgmKind kind, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw Error("simulate_dgm: n must be >= 1");
  Eigen::MatrixXd values(n, 5);
  Rng rng = make_rng(seed).derive("dgm").derive(dgm_kind_name(kind));
  for (std::size_t r = 0; r < n; ++r) {
    const DgmNoise e = draw_noise(rng);
    const double c = f_c(kind, e);
    const double a = f_a(kind, c, e);
    const double l = f_l(kind, a, c, e);
    const double m = f_m(kind, a, c, l, e);
    const double y = f_y(kind, a, c, l, m, e);
    values.row(r) << c, a, l, m, y;
  }
  return dataset_from_matrix({"C", "A", "L", "M", "Y"}, std::move(values));
}

std::vector<BenchEstimand> all_bench_estimands() {
  return {BenchEstimand::AteAtoY,  BenchEstimand::PseDirectAtoY,
          BenchEstimand::PseViaLtoY, BenchEstimand::PseViaMtoY,
          BenchEstimand::AteAtoM,  BenchEstimand::NdeAtoM,
          BenchEstimand::NieAtoLtoM};
}

std::string bench_estimand_name(BenchEstimand e) {
  switch (e) {
    case BenchEstimand::AteAtoY: return "ATE_A_Y";
    case BenchEstimand::PseDirectAtoY: return "PSE_A_Y";
    case BenchEstimand::PseViaLtoY: return "PSE_A_L_Y";
    case BenchEstimand::PseViaMtoY: return "PSE_A_M_Y";
    case BenchEstimand::AteAtoM: return "ATE_A_M";
    case BenchEstimand::NdeAtoM: return "NDE_A_M";
    case BenchEstimand::NieAtoLtoM: return "NIE_A_L_M";
  }
  return "?";
}

EstimandSpec bench_estimand_spec(BenchEstimand e) {
  EstimandSpec spec;
  spec.treatments = {"A"};
  spec.treated_values = {1.0};
  spec.control_values = {0.0};
  switch (e) {
    case BenchEstimand::AteAtoY:
      spec.kind = EstimandKind::ATE;
      spec.outcome = "Y";
      break;
    case BenchEstimand::PseDirectAtoY:
      spec.kind = EstimandKind::PSE;
      spec.outcome = "Y";
      spec.mediators = {"L", "M"};
      spec.pse_via = "";
      break;
    case BenchEstimand::PseViaLtoY:
      spec.kind = EstimandKind::PSE;
      spec.outcome = "Y";
      spec.mediators = {"L", "M"};
      spec.pse_via = "L";
      break;
    case BenchEstimand::PseViaMtoY:
      spec.kind = EstimandKind::PSE;
      spec.outcome = "Y";
      spec.mediators = {"L", "M"};
      spec.pse_via = "M";
      break;
    case BenchEstimand::AteAtoM:
      spec.kind = EstimandKind::ATE;
      spec.outcome = "M";
      break;
    case BenchEstimand::NdeAtoM:
      spec.kind = EstimandKind::NDE;
      spec.outcome = "M";
      spec.mediators = {"L"};
      break;
    case BenchEstimand::NieAtoLtoM:
      spec.kind = EstimandKind::NIE;
      spec.outcome = "M";
      spec.mediators = {"L"};
      break;
  }
  return spec;
}

std::string truth_source_name(TruthSource source) {
  switch (source) {
    case TruthSource::Analytic: return "analytic";
    case TruthSource::Enumeration: return "enumeration";
    case TruthSource::McOracle: return "mc_oracle";
  }
  return "?";
}

namespace {

// ---- Linear model: path tracing -------------------------------------------

// Edge coefficients of the linear SEM, child <- parent.
double linear_coef(const std::string& child, const std::string& parent) {
  if (child == "A") return parent == "C" ? 0.1 : 0.0;
  if (child == "L") return parent == "A" ? 0.2 : parent == "C" ? 0.2 : 0.0;
  if (child == "M")
    return parent == "A" ? 0.1 : parent == "C" ? 0.2 : parent == "L" ? 0.25 : 0.0;
  if (child == "Y")
    return parent == "A"   ? 0.1
           : parent == "C" ? 0.1
           : parent == "M" ? 0.25
           : parent == "L" ? 0.25
                           : 0.0;
  return 0.0;
}

const std::vector<std::string> kDgmOrder{"C", "A", "L", "M", "Y"};

// Sum of path products A -> ... -> outcome whose first hop matches `first`
// (the outcome itself selects the direct path).
double linear_path_sum(const std::string& outcome, const std::string& first) {
  double total = 0.0;
  // Depth-first over the (tiny) DAG in causal order.
  std::vector<std::pair<std::string, double>> stack{{first, linear_coef(first, "A")}};
  while (!stack.empty()) {
    auto [node, product] = stack.back();
    stack.pop_back();
    if (product == 0.0) continue;
    if (node == outcome) {
      total += product;
      continue;
    }
    for (const auto& next : kDgmOrder) {
      const double c = linear_coef(next, node);
      if (c != 0.0) stack.push_back({next, product * c});
    }
  }
  return total;
}

double linear_truth(BenchEstimand e) {
  switch (e) {
    case BenchEstimand::AteAtoY:
      return linear_path_sum("Y", "Y") + linear_path_sum("Y", "L") +
             linear_path_sum("Y", "M");
    case BenchEstimand::PseDirectAtoY: return linear_path_sum("Y", "Y");
    case BenchEstimand::PseViaLtoY: return linear_path_sum("Y", "L");
    case BenchEstimand::PseViaMtoY: return linear_path_sum("Y", "M");
    case BenchEstimand::AteAtoM:
      return linear_path_sum("M", "M") + linear_path_sum("M", "L");
    case BenchEstimand::NdeAtoM: return linear_path_sum("M", "M");
    case BenchEstimand::NieAtoLtoM: return linear_path_sum("M", "L");
  }
  return 0.0;
}

// ---- Discrete model: exact enumeration -------------------------------------

double disc_p_c(int c) { return c == 1 ? 0.3 : c == 2 ? 0.5 : 0.2; }

double disc_p_l(int l, double a, int c) {
  std::array<double, 3> probs{0.6, 0.2, 0.2};
  if (a == 1.0) {
    if (c == 1) probs = {0.5, 0.3, 0.2};
    else if (c == 2) probs = {0.3, 0.5, 0.2};
    else probs = {0.2, 0.3, 0.5};
  }
  return probs[l - 1];
}

double disc_p_m1(double a, int c, int l) {
  return inv_logit(-0.5 + 0.4 * a + 0.2 * c + 0.3 * l);
}

double disc_p_y1(double a, int c, int l, int m) {
  return inv_logit(-0.5 + 0.3 * a + 0.1 * c + 0.3 * m + 0.3 * a * m + 0.3 * l);
}

// E[Y(a_y, L(a_l), M(a_m, L(a_l)))]: mediator laws under their own treatment
// values, outcome law under a_y.
double disc_mean_y(double a_y, double a_l, double a_m) {
  double total = 0.0;
  for (int c = 1; c <= 3; ++c)
    for (int l = 1; l <= 3; ++l) {
      const double w = disc_p_c(c) * disc_p_l(l, a_l, c);
      const double pm1 = disc_p_m1(a_m, c, l);
      total += w * ((1.0 - pm1) * disc_p_y1(a_y, c, l, 0) +
                    pm1 * disc_p_y1(a_y, c, l, 1));
    }
  return total;
}

double disc_mean_m(double a_m, double a_l) {
  double total = 0.0;
  for (int c = 1; c <= 3; ++c)
    for (int l = 1; l <= 3; ++l)
      total += disc_p_c(c) * disc_p_l(l, a_l, c) * disc_p_m1(a_m, c, l);
  return total;
}

double discrete_truth(BenchEstimand e) {
  switch (e) {
    case BenchEstimand::AteAtoY: return disc_mean_y(1, 1, 1) - disc_mean_y(0, 0, 0);
    case BenchEstimand::PseViaLtoY:
      return disc_mean_y(1, 1, 1) - disc_mean_y(1, 0, 1);
    case BenchEstimand::PseViaMtoY:
      return disc_mean_y(1, 0, 1) - disc_mean_y(1, 0, 0);
    case BenchEstimand::PseDirectAtoY:
      return disc_mean_y(1, 0, 0) - disc_mean_y(0, 0, 0);
    case BenchEstimand::AteAtoM: return disc_mean_m(1, 1) - disc_mean_m(0, 0);
    case BenchEstimand::NdeAtoM: return disc_mean_m(1, 0) - disc_mean_m(0, 0);
    case BenchEstimand::NieAtoLtoM: return disc_mean_m(1, 1) - disc_mean_m(1, 0);
  }
  return 0.0;
}

// ---- Monte Carlo oracle (any model) ----------------------------------------

// All seven estimands from one pass of shared-disturbance counterfactuals.
std::array<double, 7> oracle_all(DgmKind kind, std::size_t draws,
                                 std::uint64_t seed, std::size_t workers) {
  constexpr std::size_t kBlock = 1 << 20;
  const std::size_t blocks = (draws + kBlock - 1) / kBlock;
  std::vector<std::array<double, 7>> partial(blocks);
  Rng root = make_rng(seed).derive("mc-oracle").derive(dgm_kind_name(kind));

  parallel_for(
      blocks,
      [&](std::size_t b) {
        Rng rng = root.derive(b);
        const std::size_t start = b * kBlock;
        const std::size_t len = std::min(kBlock, draws - start);
        std::array<double, 7> acc{};
        for (std::size_t i = 0; i < len; ++i) {
          const DgmNoise e = draw_noise(rng);
          const double c = f_c(kind, e);
          const double l0 = f_l(kind, 0, c, e);
          const double l1 = f_l(kind, 1, c, e);
          const double m00 = f_m(kind, 0, c, l0, e);
          const double m11 = f_m(kind, 1, c, l1, e);
          const double m10 = f_m(kind, 1, c, l0, e);  // A=1, L from the 0-world
          const double y_base = f_y(kind, 0, c, l0, m00, e);
          const double y_all1 = f_y(kind, 1, c, l1, m11, e);
          const double y_l0 = f_y(kind, 1, c, l0, m10, e);
          const double y_l0m0 = f_y(kind, 1, c, l0, m00, e);
          acc[0] += y_all1 - y_base;   // ATE A->Y
          acc[1] += y_l0m0 - y_base;   // PSE direct
          acc[2] += y_all1 - y_l0;     // PSE via L
          acc[3] += y_l0 - y_l0m0;     // PSE via M
          acc[4] += m11 - m00;         // ATE A->M
          acc[5] += m10 - m00;         // NDE A->M
          acc[6] += m11 - m10;         // NIE A->L->M
        }
        partial[b] = acc;
      },
      workers);

  std::array<double, 7> total{};
  for (const auto& acc : partial)
    for (int i = 0; i < 7; ++i) total[i] += acc[i];
  for (int i = 0; i < 7; ++i) total[i] /= static_cast<double>(draws);
  return total;
}

int bench_estimand_index(BenchEstimand e) {
  switch (e) {
    case BenchEstimand::AteAtoY: return 0;
    case BenchEstimand::PseDirectAtoY: return 1;
    case BenchEstimand::PseViaLtoY: return 2;
    case BenchEstimand::PseViaMtoY: return 3;
    case BenchEstimand::AteAtoM: return 4;
    case BenchEstimand::NdeAtoM: return 5;
    case BenchEstimand::NieAtoLtoM: return 6;
  }
  return 0;
}

}  // namespace

double mc_oracle(DgmKind kind, BenchEstimand estimand, std::size_t draws,
                 std::uint64_t seed, std::size_t workers) {
  return oracle_all(kind, draws, seed, workers)[bench_estimand_index(estimand)];
}

GroundTruth ground_truth(DgmKind kind, BenchEstimand estimand,
                         std::size_t mc_oracle_draws, std::uint64_t seed,
                         std::size_t workers) {
  switch (kind) {
    case DgmKind::LinearGaussian:
      return {linear_truth(estimand), TruthSource::Analytic};
    case DgmKind::DiscreteNonAdditive:
      return {discrete_truth(estimand), TruthSource::Enumeration};
    case DgmKind::NonlinearHeteroskedastic:
      return {mc_oracle(kind, estimand, mc_oracle_draws, seed, workers),
              TruthSource::McOracle};
  }
  throw UnsupportedEstimand("unknown model");
}

MceReport run_mce(DgmKind kind, const std::vector<std::size_t>& sample_sizes,
                  std::size_t replications, const MceConfig& config) {
  if (replications < 1) throw Error("run_mce: need at least one replication");
  const auto estimands = all_bench_estimands();

  // Ground truths once per estimand (the nonlinear oracle is expensive).
  std::vector<GroundTruth> truths;
  if (kind == DgmKind::NonlinearHeteroskedastic) {
    const auto all = oracle_all(kind, config.mc_oracle_draws, 20240001,
                                config.workers);
    for (const auto& e : estimands)
      truths.push_back({all[bench_estimand_index(e)], TruthSource::McOracle});
  } else {
    for (const auto& e : estimands) truths.push_back(ground_truth(kind, e));
  }

  std::vector<EstimandSpec> specs;
  for (const auto& e : estimands) specs.push_back(bench_estimand_spec(e));

  const Dag dag = dgm_dag();
  Rng root = make_rng(config.seed).derive("mce");

  MceReport report;
  report.kind = kind;
  const std::size_t jobs = sample_sizes.size() * replications;
  std::vector<std::vector<double>> points(jobs);  // 7 values per job
  std::vector<char> failed(jobs, 0);

  parallel_for(
      jobs,
      [&](std::size_t job) {
        const std::size_t size_idx = job / replications;
        const std::size_t rep = job % replications;
        try {
          Rng job_rng = root.derive(size_idx).derive(rep);
          Dataset data = simulate_dgm(kind, sample_sizes[size_idx],
                                      job_rng.derive("data").next_u64());
          TrainConfig tc = config.train;
          tc.seed = job_rng.derive("train").next_u64();
          tc.workers = 1;
          tc.log = nullptr;
          Cgnf init =
              make_cgnf(dag, config.flow, job_rng.derive("init").next_u64());
          auto [model, history] = fit(init, data, tc);
          auto results = estimate_many(model, specs, config.sample_count,
                                       job_rng.derive("sample").next_u64(), 1);
          for (const auto& r : results) points[job].push_back(r.point);
        } catch (const std::exception&) {
          failed[job] = 1;
        }
      },
      config.workers);

  for (std::size_t size_idx = 0; size_idx < sample_sizes.size(); ++size_idx) {
    for (std::size_t e = 0; e < estimands.size(); ++e) {
      MceCell cell;
      cell.estimand = bench_estimand_name(estimands[e]);
      cell.n = sample_sizes[size_idx];
      cell.truth = truths[e].value;
      cell.truth_source = truths[e].source;
      std::vector<double> values;
      for (std::size_t rep = 0; rep < replications; ++rep) {
        const std::size_t job = size_idx * replications + rep;
        if (!failed[job]) values.push_back(points[job][e]);
      }
      cell.replications = values.size();
      if (!values.empty()) {
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        cell.bias = mean - cell.truth;
        if (values.size() > 1) {
          double ss = 0.0;
          for (double v : values) ss += (v - mean) * (v - mean);
          cell.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
        } else {
          cell.sd = std::numeric_limits<double>::quiet_NaN();
        }
      }
      report.cells.push_back(std::move(cell));
    }
  }
  std::size_t failures = 0;
  for (char f : failed) failures += f;
  report.failed_replications = failures;
  return report;
}

void write_mce_csv(const MceReport& report, const std::string& path,
                   const std::string& config_echo) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << "# dgm=" << dgm_kind_name(report.kind)
      << " failed_replications=" << report.failed_replications << "\n";
  if (!config_echo.empty()) out << "# config: " << config_echo << "\n";
  out << "estimand,n,bias,sd,replications,truth,truth_source\n";
  for (const auto& c : report.cells)
    out << c.estimand << ',' << c.n << ',' << c.bias << ',' << c.sd << ','
        << c.replications << ',' << c.truth << ','
        << truth_source_name(c.truth_source) << "\n";
}

void write_mce_plot_data(const MceReport& report, const std::string& path,
                         const std::string& config_echo) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << "# plot data: x = n, y = |bias| and sd per estimand (dgm="
      << dgm_kind_name(report.kind) << ")\n";
  if (!config_echo.empty()) out << "# config: " << config_echo << "\n";
  out << "estimand,n,abs_bias,sd\n";
  for (const auto& c : report.cells)
    out << c.estimand << ',' << c.n << ',' << std::abs(c.bias) << ',' << c.sd
        << "\n";
}

Dag coverage_dag() {
  return parse_dag("C -> A, C -> Y, A -> Y", DagFormat::EdgeList);
}

Dataset simulate_coverage_dgm(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw Error("simulate_coverage_dgm: n must be >= 1");
  Eigen::MatrixXd values(n, 3);
  Rng rng = make_rng(seed).derive("coverage-dgm");
  for (std::size_t r = 0; r < n; ++r) {
    const double c = rng.uniform_open() < 0.6 ? 1.0 : 0.0;
    const double a = rng.uniform_open() < 0.4 + 0.2 * c ? 1.0 : 0.0;
    const double y = 0.2 * a + 0.4 * c + rng.normal();
    values.row(r) << c, a, y;
  }
  return dataset_from_matrix({"C", "A", "Y"}, std::move(values));
}

CoverageReport run_coverage(std::size_t n_datasets, std::size_t n,
                            const CoverageConfig& config) {
  CoverageReport report;
  report.truth = 0.2;
  report.level = config.level;
  report.intervals.resize(n_datasets);

  EstimandSpec spec;
  spec.kind = EstimandKind::ATE;
  spec.treatments = {"A"};
  spec.outcome = "Y";
  spec.treated_values = {1.0};
  spec.control_values = {0.0};

  const Dag dag = coverage_dag();
  Rng root = make_rng(config.seed).derive("coverage");
  std::vector<char> failed(n_datasets, 0);

  parallel_for(
      n_datasets,
      [&](std::size_t d) {
        try {
          Rng ds_rng = root.derive(d);
          Dataset data = simulate_coverage_dgm(n, ds_rng.derive("data").next_u64());
          BootstrapConfig bc;
          bc.replicates = config.bootstrap_replicates;
          bc.level = config.level;
          bc.sample_count = config.sample_count;
          bc.seed = ds_rng.derive("bootstrap").next_u64();
          bc.workers = 1;
          auto result =
              bootstrap(data, dag, spec, config.flow, config.train, bc);
          CoverageInterval ci;
          ci.ci_low = result.ci_low.value_or(0.0);
          ci.ci_high = result.ci_high.value_or(0.0);
          ci.covered = ci.ci_low <= report.truth && report.truth <= ci.ci_high;
          report.intervals[d] = ci;
        } catch (const std::exception&) {
          failed[d] = 1;
        }
      },
      config.workers);

  for (std::size_t d = 0; d < n_datasets; ++d) {
    if (failed[d]) {
      ++report.failed_datasets;
      continue;
    }
    ++report.total;
    if (report.intervals[d].covered) ++report.covered;
  }
  report.rate = report.total
                    ? static_cast<double>(report.covered) / report.total
                    : 0.0;
  return report;
}

HyperVariant make_variant(const std::string& name, const FlowConfig& flow,
                          const TrainConfig& train) {
  HyperVariant v{name, flow, train};
  if (name == "default") return v;
  if (name == "default - one hidden layer") {
    if (!v.flow.embedding_hidden.empty()) v.flow.embedding_hidden.pop_back();
    if (!v.flow.integrand_hidden.empty()) v.flow.integrand_hidden.pop_back();
    return v;
  }
  if (name == "default - 1/4 of nodes") {
    for (auto& s : v.flow.embedding_hidden)
      s = std::max(1, static_cast<int>(std::lround(s * 0.75)));
    for (auto& s : v.flow.integrand_hidden)
      s = std::max(1, static_cast<int>(std::lround(s * 0.75)));
    return v;
  }
  if (name == "batch size of 512") {
    v.train.batch_size = 512;
    return v;
  }
  if (name == "learning rate of 0.001") {
    v.train.learning_rate = 0.001;
    return v;
  }
  throw Error("unknown hyper-sweep variant: " + name);
}

std::vector<std::pair<std::string, MceReport>> run_hyper_sweep(
    DgmKind kind, const std::vector<std::string>& variants, std::size_t n,
    std::size_t replications, const MceConfig& config) {
  std::vector<std::string> names = variants;
  if (names.empty()) names = {"default"};
  std::vector<std::pair<std::string, MceReport>> out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const HyperVariant v = make_variant(names[i], config.flow, config.train);
    MceConfig variant_config = config;
    variant_config.flow = v.flow;
    variant_config.train = v.train;
    variant_config.seed = make_rng(config.seed).derive("hyper").derive(i).next_u64();
    out.push_back({names[i], run_mce(kind, {n}, replications, variant_config)});
  }
  return out;
}

}  // namespace cgnf
