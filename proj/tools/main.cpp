// cgnf: train causal-graphical normalizing flows on tabular data and
// estimate causal effects by Monte Carlo sampling from truncated flows.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "cgnf/bench.hpp"
#include "cgnf/errors.hpp"
#include "cgnf/estimands.hpp"
#include "cgnf/io.hpp"
#include "cgnf/parallel.hpp"
#include "cgnf/rng.hpp"
#include "cgnf/simulate.hpp"
#include "cgnf/train.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::size_t workers = cgnf::default_workers();
  std::optional<std::string> out_dir;
  bool paper_scale = false;
};

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw cgnf::FileNotFound(path);
  json config;
  try {
    in >> config;
  } catch (const json::exception& e) {
    throw cgnf::Error(std::string("config parse error: ") + e.what());
  }
  return config;
}

std::string out_dir(const json& config, const CliOverrides& cli) {
  std::string dir = cli.out_dir.value_or(
      config.value("output", json::object()).value("dir", "out"));
  fs::create_directories(dir);
  return dir;
}

cgnf::Dag load_dag(const json& config) {
  const auto& dag_section = config.at("dag");
  const std::string path = dag_section.at("path");
  const std::string format = dag_section.value("format", "edgelist");
  std::ifstream in(path);
  if (!in) throw cgnf::FileNotFound(path);
  std::stringstream text;
  text << in.rdbuf();
  return cgnf::parse_dag(text.str(), format == "adjacency"
                                         ? cgnf::DagFormat::AdjacencyMatrix
                                         : cgnf::DagFormat::EdgeList);
}

cgnf::Dataset load_data(const json& config) {
  const auto& data_section = config.at("data");
  cgnf::CsvOptions options;
  options.max_discrete_levels = data_section.value("max_discrete_levels", 10);
  if (data_section.contains("force_continuous"))
    options.force_continuous =
        data_section["force_continuous"].get<std::vector<std::string>>();
  if (data_section.contains("force_discrete"))
    options.force_discrete =
        data_section["force_discrete"].get<std::vector<std::string>>();
  return cgnf::load_csv(data_section.at("path"), options);
}

cgnf::FlowConfig flow_config(const json& config) {
  cgnf::FlowConfig flow;
  const json train = config.value("train", json::object());
  if (train.contains("embedding_hidden"))
    flow.embedding_hidden = train["embedding_hidden"].get<std::vector<int>>();
  flow.embedding_width = train.value("embedding_width", flow.embedding_width);
  if (train.contains("integrand_hidden"))
    flow.integrand_hidden = train["integrand_hidden"].get<std::vector<int>>();
  flow.quadrature_nodes = train.value("quadrature_nodes", flow.quadrature_nodes);
  return flow;
}

cgnf::TrainConfig train_config(const json& config, const CliOverrides& cli) {
  cgnf::TrainConfig tc;
  const json train = config.value("train", json::object());
  tc.batch_size = train.value("batch_size", tc.batch_size);
  tc.learning_rate = train.value("learning_rate", tc.learning_rate);
  tc.patience_epochs = train.value("patience_epochs", tc.patience_epochs);
  tc.validation_fraction =
      train.value("validation_fraction", tc.validation_fraction);
  tc.max_epochs = train.value("max_epochs", tc.max_epochs);
  tc.seed = cli.seed.value_or(train.value("seed", std::uint64_t{1}));
  const std::string optimizer = train.value("optimizer", "adam");
  if (optimizer == "adam")
    tc.optimizer = cgnf::OptimizerKind::Adam;
  else if (optimizer == "sgd")
    tc.optimizer = cgnf::OptimizerKind::Sgd;
  else
    throw cgnf::Error("unknown optimizer: " + optimizer);
  tc.workers = cli.workers;
  return tc;
}

cgnf::EstimandSpec parse_estimand(const json& e) {
  cgnf::EstimandSpec spec;
  const std::string kind = e.at("kind");
  if (kind == "ATE") spec.kind = cgnf::EstimandKind::ATE;
  else if (kind == "CATE") spec.kind = cgnf::EstimandKind::CATE;
  else if (kind == "AJE") spec.kind = cgnf::EstimandKind::AJE;
  else if (kind == "NDE") spec.kind = cgnf::EstimandKind::NDE;
  else if (kind == "NIE") spec.kind = cgnf::EstimandKind::NIE;
  else if (kind == "PSE") spec.kind = cgnf::EstimandKind::PSE;
  else throw cgnf::Error("unknown estimand kind: " + kind);

  if (e.contains("treatments"))
    spec.treatments = e["treatments"].get<std::vector<std::string>>();
  else
    spec.treatments = {e.at("treatment").get<std::string>()};
  spec.outcome = e.at("outcome");
  auto values = [&](const char* key) {
    std::vector<double> out;
    if (!e.contains(key)) return out;
    if (e[key].is_array())
      out = e[key].get<std::vector<double>>();
    else
      out.push_back(e[key].get<double>());
    return out;
  };
  spec.treated_values = values("treated");
  spec.control_values = values("control");
  if (spec.treated_values.empty()) spec.treated_values = {1.0};
  if (spec.control_values.empty()) spec.control_values = {0.0};
  if (e.contains("mediators"))
    spec.mediators = e["mediators"].get<std::vector<std::string>>();
  spec.pse_via = e.value("via", "");
  if (e.contains("given")) {
    cgnf::Conditioning cond;
    cond.variable = e["given"].at("variable");
    if (e["given"].contains("value"))
      cond.value = e["given"]["value"].get<double>();
    if (e["given"].contains("interval")) {
      auto iv = e["given"]["interval"].get<std::vector<double>>();
      if (iv.size() != 2) throw cgnf::Error("interval needs [lo, hi]");
      cond.interval = std::make_pair(iv[0], iv[1]);
    }
    spec.given = cond;
  }
  return spec;
}

std::vector<cgnf::EstimandSpec> parse_estimands(const json& config) {
  std::vector<cgnf::EstimandSpec> specs;
  for (const auto& e : config.value("estimands", json::array()))
    specs.push_back(parse_estimand(e));
  return specs;
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json result_record(const cgnf::EstimateResult& result, const json& echo,
                   std::uint64_t model_hash, std::uint64_t data_hash) {
  json record;
  record["estimand"] = result.estimand;
  record["point"] = result.point;
  record["mc_se"] = result.mc_se;
  record["J"] = result.sample_count;
  if (result.conditioned_count) record["J_conditioned"] = result.conditioned_count;
  if (result.ci_low) {
    record["ci"] = {*result.ci_low, *result.ci_high};
    record["level"] = result.level;
    record["B"] = result.replicates.size() + result.failed_replicates;
    record["replicates"] = result.replicates;
    record["failed_replicates"] = result.failed_replicates;
  }
  if (!result.warnings.empty()) record["warnings"] = result.warnings;
  record["model_hash"] = hex64(model_hash);
  record["data_hash"] = hex64(data_hash);
  record["config"] = echo;
  return record;
}

void write_jsonl(const std::string& path, const std::vector<json>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw cgnf::Error("cannot write " + path);
  for (const auto& r : records) out << r.dump() << "\n";
}

void write_error(const std::exception& e, const std::string& type) {
  json record;
  record["error"] = type;
  record["message"] = e.what();
  std::cerr << record.dump() << "\n";
}

// 0 = success, 1 = numerical failure, 2 = user/input error.
int classify_and_report(const std::exception& e) {
  if (dynamic_cast<const cgnf::NonFiniteLoss*>(&e)) { write_error(e, "NonFiniteLoss"); return 1; }
  if (dynamic_cast<const cgnf::NonFiniteEvaluation*>(&e)) { write_error(e, "NonFiniteEvaluation"); return 1; }
  if (dynamic_cast<const cgnf::BracketNotFound*>(&e)) { write_error(e, "BracketNotFound"); return 1; }
  if (dynamic_cast<const cgnf::SigmaNotPositiveDefinite*>(&e)) { write_error(e, "SigmaNotPositiveDefinite"); return 1; }
  if (dynamic_cast<const cgnf::EmptyConditioningSet*>(&e)) { write_error(e, "EmptyConditioningSet"); return 1; }
  if (dynamic_cast<const cgnf::CycleDetected*>(&e)) { write_error(e, "CycleDetected"); return 2; }
  if (dynamic_cast<const cgnf::UnknownVariable*>(&e)) { write_error(e, "UnknownVariable"); return 2; }
  if (dynamic_cast<const cgnf::DuplicateVariable*>(&e)) { write_error(e, "DuplicateVariable"); return 2; }
  if (dynamic_cast<const cgnf::MalformedLine*>(&e)) { write_error(e, "MalformedLine"); return 2; }
  if (dynamic_cast<const cgnf::ParseError*>(&e)) { write_error(e, "ParseError"); return 2; }
  if (dynamic_cast<const cgnf::NonNumericCell*>(&e)) { write_error(e, "NonNumericCell"); return 2; }
  if (dynamic_cast<const cgnf::MissingColumn*>(&e)) { write_error(e, "MissingColumn"); return 2; }
  if (dynamic_cast<const cgnf::DegenerateColumn*>(&e)) { write_error(e, "DegenerateColumn"); return 2; }
  if (dynamic_cast<const cgnf::SchemaMismatch*>(&e)) { write_error(e, "SchemaMismatch"); return 2; }
  if (dynamic_cast<const cgnf::FileNotFound*>(&e)) { write_error(e, "FileNotFound"); return 2; }
  if (dynamic_cast<const cgnf::InvalidMediatorOrder*>(&e)) { write_error(e, "InvalidMediatorOrder"); return 2; }
  if (dynamic_cast<const cgnf::UnsupportedEstimand*>(&e)) { write_error(e, "UnsupportedEstimand"); return 2; }
  if (dynamic_cast<const cgnf::InvalidArchitecture*>(&e)) { write_error(e, "InvalidArchitecture"); return 2; }
  if (dynamic_cast<const cgnf::RegimeReferenceError*>(&e)) { write_error(e, "RegimeReferenceError"); return 2; }
  if (dynamic_cast<const cgnf::Error*>(&e)) { write_error(e, "Error"); return 2; }
  write_error(e, "Unexpected");
  return 1;
}

int cmd_train(const std::string& config_path, const CliOverrides& cli) {
  json config = load_config(config_path);
  const std::string dir = out_dir(config, cli);
  cgnf::Dag dag = load_dag(config);
  cgnf::Dataset data = load_data(config);
  cgnf::TrainConfig tc = train_config(config, cli);
  cgnf::FlowConfig flow = flow_config(config);

  std::ofstream log(dir + "/training_log.csv", std::ios::trunc);
  log << "epoch,train_loss,valid_loss\n";
  tc.log = &log;

  cgnf::Cgnf init = cgnf::make_cgnf(
      dag, flow, cgnf::Rng(tc.seed).derive("init").next_u64());
  auto [model, history] = cgnf::fit(init, data, tc);
  for (const auto& w : history.warnings) std::cerr << "warning: " << w << "\n";

  const std::uint64_t data_hash =
      cgnf::hash_file(config.at("data").at("path"));
  const std::string model_path = dir + "/model.cgnf";
  cgnf::save_model(model, model_path, data_hash, config.dump());

  json summary;
  summary["model"] = model_path;
  summary["epochs"] = history.train_loss.size();
  summary["best_epoch"] = history.best_epoch;
  summary["best_valid_loss"] = history.best_valid_loss;
  summary["stop_reason"] = history.stop_reason;
  summary["model_hash"] = hex64(cgnf::model_hash(model));
  summary["data_hash"] = hex64(data_hash);
  summary["config"] = config;
  std::ofstream out(dir + "/train_summary.json", std::ios::trunc);
  out << summary.dump(2) << "\n";
  std::cout << summary.dump() << "\n";
  return 0;
}

cgnf::LoadedModel load_checked_model(const json& config,
                                     const std::string& model_path) {
  cgnf::LoadedModel loaded = cgnf::load_model(model_path);
  if (config.contains("data")) {
    const std::uint64_t data_hash =
        cgnf::hash_file(config.at("data").at("path"));
    if (data_hash != loaded.data_hash)
      throw cgnf::SchemaMismatch(
          "data file hash does not match the hash stored in the model");
  }
  if (config.contains("dag")) {
    cgnf::Dag dag = load_dag(config);
    if (dag.topo_order() != loaded.cgnf.dag.topo_order())
      throw cgnf::SchemaMismatch("DAG does not match the trained model");
    for (const auto& v : dag.variables())
      if (dag.parents(v.name) != loaded.cgnf.dag.parents(v.name))
        throw cgnf::SchemaMismatch("DAG does not match the trained model");
  }
  return loaded;
}

int cmd_estimate(const std::string& config_path, const std::string& model_path,
                 const CliOverrides& cli) {
  json config = load_config(config_path);
  const std::string dir = out_dir(config, cli);
  cgnf::LoadedModel loaded = load_checked_model(config, model_path);

  const json sample = config.value("sample", json::object());
  const std::size_t j_count = sample.value("count", std::size_t{1000000});
  const std::uint64_t seed = cli.seed.value_or(sample.value("seed", std::uint64_t{2}));

  auto specs = parse_estimands(config);
  auto results =
      cgnf::estimate_many(loaded.cgnf, specs, j_count, seed, cli.workers);

  std::vector<json> records;
  const std::uint64_t mhash = cgnf::model_hash(loaded.cgnf);
  for (const auto& r : results)
    records.push_back(result_record(r, config, mhash, loaded.data_hash));
  write_jsonl(dir + "/estimates.jsonl", records);
  for (const auto& r : records) std::cout << r.dump() << "\n";
  return 0;
}

int cmd_bootstrap(const std::string& config_path, const CliOverrides& cli) {
  json config = load_config(config_path);
  const std::string dir = out_dir(config, cli);
  cgnf::Dag dag = load_dag(config);
  cgnf::Dataset data = load_data(config);
  cgnf::TrainConfig tc = train_config(config, cli);
  tc.log = nullptr;
  cgnf::FlowConfig flow = flow_config(config);

  const json boot = config.value("bootstrap", json::object());
  cgnf::BootstrapConfig bc;
  bc.replicates = boot.value("replicates", std::size_t{200});
  bc.level = boot.value("level", 0.9);
  bc.sample_count = boot.value("sample_count",
                               config.value("sample", json::object())
                                   .value("count", std::size_t{100000}));
  bc.seed = cli.seed.value_or(boot.value("seed", std::uint64_t{3}));
  bc.workers = cli.workers;

  auto specs = parse_estimands(config);
  auto results = cgnf::bootstrap_many(data, dag, specs, flow, tc, bc);

  const std::uint64_t data_hash = cgnf::hash_file(config.at("data").at("path"));
  std::vector<json> records;
  for (const auto& r : results)
    records.push_back(result_record(r, config, 0, data_hash));
  write_jsonl(dir + "/bootstrap.jsonl", records);
  for (const auto& r : records) std::cout << r.dump() << "\n";
  return 0;
}

int cmd_sensitivity(const std::string& config_path, const CliOverrides& cli) {
  json config = load_config(config_path);
  const std::string dir = out_dir(config, cli);
  cgnf::Dag dag = load_dag(config);
  cgnf::Dataset data = load_data(config);
  cgnf::TrainConfig tc = train_config(config, cli);
  tc.log = nullptr;
  cgnf::FlowConfig flow = flow_config(config);

  const json sens = config.at("sensitivity");
  std::vector<cgnf::SensitivityPair> pairs;
  for (const auto& p : sens.at("pairs"))
    pairs.push_back({p.at("a"), p.at("b"), p.at("grid").get<std::vector<double>>()});
  const std::size_t j_count = config.value("sample", json::object())
                                  .value("count", std::size_t{100000});
  const std::uint64_t seed = cli.seed.value_or(sens.value("seed", std::uint64_t{4}));

  auto specs = parse_estimands(config);
  if (specs.size() != 1)
    throw cgnf::Error("sensitivity sweep expects exactly one estimand");
  auto points = cgnf::sensitivity_sweep(data, dag, specs[0], flow, tc, pairs,
                                        j_count, seed, cli.workers);

  const std::uint64_t data_hash = cgnf::hash_file(config.at("data").at("path"));
  std::vector<json> records;
  for (const auto& point : points) {
    json record = result_record(point.estimate, config, 0, data_hash);
    record["rho"] = point.rho;
    records.push_back(record);
  }
  write_jsonl(dir + "/sensitivity.jsonl", records);
  for (const auto& r : records) std::cout << r.dump() << "\n";
  return 0;
}

int cmd_sample(const std::string& config_path, const std::string& model_path,
               const CliOverrides& cli) {
  json config = load_config(config_path);
  const std::string dir = out_dir(config, cli);
  cgnf::LoadedModel loaded = load_checked_model(config, model_path);

  const json sample = config.value("sample", json::object());
  cgnf::SamplePlan plan;
  plan.sample_count = sample.value("count", std::size_t{100000});
  plan.seed = cli.seed.value_or(sample.value("seed", std::uint64_t{2}));
  if (sample.contains("regimes")) {
    for (const auto& r : sample["regimes"]) {
      cgnf::Regime regime;
      for (const auto& [var, value] : r.value("fixed", json::object()).items())
        regime.assignments[var] = cgnf::Assignment::fixed(value.get<double>());
      for (const auto& [var, ref] : r.value("from", json::object()).items())
        regime.assignments[var] =
            cgnf::Assignment::from_regime(ref.get<std::string>());
      plan.regimes.push_back({r.at("label"), regime});
    }
  } else {
    plan.regimes.push_back({"natural", cgnf::Regime{}});
  }

  cgnf::SampleSet samples = cgnf::sample_regimes(loaded.cgnf, plan, cli.workers);
  json manifest;
  manifest["model_hash"] = hex64(cgnf::model_hash(loaded.cgnf));
  manifest["seed"] = plan.seed;
  manifest["count"] = plan.sample_count;
  manifest["clamped_samples"] = samples.clamped_samples;
  manifest["config"] = config;
  json plan_echo = json::array();
  for (const auto& [label, regime] : plan.regimes) {
    json r;
    r["label"] = label;
    for (const auto& [var, assignment] : regime.assignments) {
      if (assignment.kind == cgnf::Assignment::Kind::Fixed)
        r["fixed"][var] = assignment.value;
      else if (assignment.kind == cgnf::Assignment::Kind::FromRegime)
        r["from"][var] = assignment.regime_ref;
    }
    plan_echo.push_back(r);
  }
  manifest["plan"] = plan_echo;

  for (std::size_t i = 0; i < samples.labels.size(); ++i) {
    const auto& label = samples.labels[i];
    std::string name = label;
    for (auto& c : name)
      if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
    std::ofstream out(dir + "/samples_" + name + ".csv", std::ios::trunc);
    for (std::size_t v = 0; v < samples.variables.size(); ++v)
      out << (v ? "," : "") << samples.variables[v];
    out << "\n";
    const auto& m = samples.regime(label);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        out << (c ? "," : "") << m(r, c);
      out << "\n";
    }
  }
  std::ofstream mout(dir + "/samples_manifest.json", std::ios::trunc);
  mout << manifest.dump(2) << "\n";
  std::cout << manifest.dump() << "\n";
  return 0;
}

int cmd_simulate(const std::string& kind_name, std::size_t n,
                 const CliOverrides& cli, const std::string& dir_flag) {
  const cgnf::DgmKind kind = cgnf::dgm_kind_from_string(kind_name);
  const std::uint64_t seed = cli.seed.value_or(1);
  cgnf::Dataset data = cgnf::simulate_dgm(kind, n, seed);
  fs::create_directories(dir_flag);
  const std::string path = dir_flag + "/" + cgnf::dgm_kind_name(kind) + "_" +
                           std::to_string(n) + ".csv";
  std::ofstream out(path, std::ios::trunc);
  for (std::size_t c = 0; c < data.columns.size(); ++c)
    out << (c ? "," : "") << data.columns[c];
  out << "\n";
  for (Eigen::Index r = 0; r < data.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.values.cols(); ++c)
      out << (c ? "," : "") << data.values(r, c);
    out << "\n";
  }
  json summary;
  summary["path"] = path;
  summary["rows"] = n;
  summary["dgm"] = cgnf::dgm_kind_name(kind);
  summary["seed"] = seed;
  std::cout << summary.dump() << "\n";
  return 0;
}

cgnf::MceConfig mce_config(const json& config, const CliOverrides& cli) {
  cgnf::MceConfig mce;
  mce.flow = flow_config(config);
  mce.train = train_config(config, cli);
  mce.train.workers = 1;
  const json section = config.value("mce", json::object());
  mce.sample_count = section.value("sample_count", std::size_t{100000});
  mce.mc_oracle_draws =
      section.value("mc_oracle_draws", std::size_t{100000000});
  mce.seed = cli.seed.value_or(section.value("seed", std::uint64_t{5}));
  mce.workers = cli.workers;
  return mce;
}

int cmd_mce(const std::string& config_path, const std::string& kind_name,
            const CliOverrides& cli) {
  json config = load_config(config_path);
  const std::string dir = out_dir(config, cli);
  const cgnf::DgmKind kind = cgnf::dgm_kind_from_string(kind_name);
  const json section = config.value("mce", json::object());

  std::vector<std::size_t> sizes;
  if (section.contains("sample_sizes"))
    sizes = section["sample_sizes"].get<std::vector<std::size_t>>();
  else if (cli.paper_scale)
    sizes = {2000, 4000, 8000, 16000, 32000, 64000, 128000};
  else
    sizes = {2000, 8000, 16000};
  std::size_t replications =
      section.value("replications",
                    std::size_t{cli.paper_scale ? std::size_t{400} : std::size_t{20}});

  const cgnf::MceConfig mce = mce_config(config, cli);
  std::cerr << "mce: " << sizes.size() * replications << " train+estimate jobs ("
            << replications << " replications x " << sizes.size()
            << " sample sizes)\n";
  cgnf::MceReport report = cgnf::run_mce(kind, sizes, replications, mce);
  cgnf::write_mce_csv(report, dir + "/mce_" + cgnf::dgm_kind_name(kind) + ".csv",
                      config.dump());
  cgnf::write_mce_plot_data(
      report, dir + "/mce_" + cgnf::dgm_kind_name(kind) + "_plot.csv",
      config.dump());
  json summary;
  summary["cells"] = report.cells.size();
  summary["failed_replications"] = report.failed_replications;
  summary["csv"] = dir + "/mce_" + cgnf::dgm_kind_name(kind) + ".csv";
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_coverage(const std::string& config_path, const CliOverrides& cli) {
  json config = load_config(config_path);
  const std::string dir = out_dir(config, cli);
  const json section = config.value("coverage", json::object());

  cgnf::CoverageConfig cc;
  cc.flow = flow_config(config);
  cc.train = train_config(config, cli);
  cc.train.workers = 1;
  cc.bootstrap_replicates =
      section.value("bootstrap_replicates",
                    std::size_t{cli.paper_scale ? std::size_t{200} : std::size_t{100}});
  cc.sample_count = section.value("sample_count", std::size_t{20000});
  cc.level = section.value("level", 0.9);
  cc.seed = cli.seed.value_or(section.value("seed", std::uint64_t{6}));
  cc.workers = cli.workers;
  const std::size_t datasets =
      section.value("datasets",
                    std::size_t{cli.paper_scale ? std::size_t{100} : std::size_t{50}});
  const std::size_t n =
      section.value("n", std::size_t{cli.paper_scale ? std::size_t{8000} : std::size_t{2000}});

  std::cerr << "coverage: " << datasets << " datasets x "
            << (cc.bootstrap_replicates + 1) << " fits\n";
  cgnf::CoverageReport report = cgnf::run_coverage(datasets, n, cc);

  json summary;
  summary["covered"] = report.covered;
  summary["total"] = report.total;
  summary["rate"] = report.rate;
  summary["truth"] = report.truth;
  summary["level"] = report.level;
  summary["failed_datasets"] = report.failed_datasets;
  summary["config"] = config;
  std::ofstream out(dir + "/coverage.json", std::ios::trunc);
  out << summary.dump(2) << "\n";
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_hyper_sweep(const std::string& config_path, const std::string& kind_name,
                    const CliOverrides& cli) {
  json config = load_config(config_path);
  const std::string dir = out_dir(config, cli);
  const cgnf::DgmKind kind = cgnf::dgm_kind_from_string(kind_name);
  const json section = config.value("hyper_sweep", json::object());
  std::vector<std::string> variants =
      section.value("variants", std::vector<std::string>{
                                    "default", "default - one hidden layer",
                                    "default - 1/4 of nodes", "batch size of 512",
                                    "learning rate of 0.001"});
  const std::size_t n = section.value("n", std::size_t{4000});
  const std::size_t replications =
      section.value("replications",
                    std::size_t{cli.paper_scale ? std::size_t{400} : std::size_t{5}});

  const cgnf::MceConfig mce = mce_config(config, cli);
  auto reports = cgnf::run_hyper_sweep(kind, variants, n, replications, mce);
  for (const auto& [name, report] : reports) {
    std::string file = name;
    for (auto& c : file)
      if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
    cgnf::write_mce_csv(report, dir + "/hyper_" + file + ".csv", config.dump());
  }
  json summary;
  summary["variants"] = variants;
  std::cout << summary.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"causal-graphical normalizing flows"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  CliOverrides cli;
  std::string config_path, model_path, kind_name = "linear", sim_out = "out";
  std::size_t sim_n = 1000;

  app.add_option("--workers", cli.workers, "worker threads");
  std::uint64_t seed_flag = 0;
  auto* seed_opt = app.add_option("--seed", seed_flag, "override every seed");
  std::string out_flag;
  auto* out_opt = app.add_option("--out", out_flag, "output directory");
  app.add_flag("--paper-scale", cli.paper_scale,
               "full-scale experiment sizes (hours to days of compute)");

  auto* train = app.add_subcommand("train", "fit a flow to data");
  train->add_option("--config", config_path)->required();

  auto* estimate = app.add_subcommand("estimate", "estimate configured effects");
  estimate->add_option("--config", config_path)->required();
  estimate->add_option("--model", model_path)->required();

  auto* boot = app.add_subcommand("bootstrap", "percentile confidence intervals");
  boot->add_option("--config", config_path)->required();

  auto* sens = app.add_subcommand("sensitivity", "unobserved-confounding sweep");
  sens->add_option("--config", config_path)->required();

  auto* sample = app.add_subcommand("sample", "export Monte Carlo samples");
  sample->add_option("--config", config_path)->required();
  sample->add_option("--model", model_path)->required();

  auto* simulate = app.add_subcommand("simulate", "write benchmark DGM data");
  simulate->add_option("--kind", kind_name, "linear|discrete|nonlinear")->required();
  simulate->add_option("--n", sim_n)->required();
  simulate->add_option("--dir", sim_out);

  auto* mce = app.add_subcommand("mce", "bias/SD experiment harness");
  mce->add_option("--config", config_path)->required();
  mce->add_option("--kind", kind_name)->required();

  auto* coverage = app.add_subcommand("coverage", "bootstrap coverage experiment");
  coverage->add_option("--config", config_path)->required();

  auto* hyper = app.add_subcommand("hyper-sweep", "architecture variants");
  hyper->add_option("--config", config_path)->required();
  hyper->add_option("--kind", kind_name)->required();

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) cli.seed = seed_flag;
  if (*out_opt) cli.out_dir = out_flag;

  try {
    if (*train) return cmd_train(config_path, cli);
    if (*estimate) return cmd_estimate(config_path, model_path, cli);
    if (*boot) return cmd_bootstrap(config_path, cli);
    if (*sens) return cmd_sensitivity(config_path, cli);
    if (*sample) return cmd_sample(config_path, model_path, cli);
    if (*simulate) return cmd_simulate(kind_name, sim_n, cli, sim_out);
    if (*mce) return cmd_mce(config_path, kind_name, cli);
    if (*coverage) return cmd_coverage(config_path, cli);
    if (*hyper) return cmd_hyper_sweep(config_path, kind_name, cli);
  } catch (const std::exception& e) {
    return classify_and_report(e);
  }
  return 2;
}
