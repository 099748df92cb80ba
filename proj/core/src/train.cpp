#include "cgnf/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "cgnf/errors.hpp"
#include "cgnf/rng.hpp"

namespace cgnf {

std::size_t Dataset::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw MissingColumn(name);
}

namespace {

void infer_kinds(Dataset& ds, const CsvOptions& options) {
  const auto forced_cont = std::set<std::string>(options.force_continuous.begin(),
                                                 options.force_continuous.end());
  const auto forced_disc = std::set<std::string>(options.force_discrete.begin(),
                                                 options.force_discrete.end());
  ds.specs.clear();
  for (std::size_t c = 0; c < ds.column_count(); ++c) {
    VariableSpec spec;
    spec.name = ds.columns[c];
    std::set<long> levels;
    bool integral = true;
    for (Eigen::Index r = 0; r < ds.values.rows(); ++r) {
      const double x = ds.values(r, c);
      const double rounded = std::nearbyint(x);
      if (std::abs(x - rounded) > 1e-9) {
        integral = false;
        break;
      }
      levels.insert(static_cast<long>(rounded));
      if (levels.size() > static_cast<std::size_t>(options.max_discrete_levels) &&
          !forced_disc.count(spec.name)) {
        integral = false;
        break;
      }
    }
    const bool discrete =
        forced_disc.count(spec.name) ||
        (integral && !forced_cont.count(spec.name) && !levels.empty());
    if (discrete) {
      spec.kind = VariableKind::Discrete;
      spec.support.assign(levels.begin(), levels.end());
    } else {
      spec.kind = VariableKind::Continuous;
    }
    ds.specs.push_back(std::move(spec));
  }
}

}  // namespace

Dataset dataset_from_matrix(std::vector<std::string> columns,
                            Eigen::MatrixXd values, const CsvOptions& options) {
  Dataset ds;
  ds.columns = std::move(columns);
  ds.values = std::move(values);
  for (Eigen::Index r = 0; r < ds.values.rows(); ++r)
    for (Eigen::Index c = 0; c < ds.values.cols(); ++c)
      if (!std::isfinite(ds.values(r, c)))
        throw ParseError(static_cast<std::size_t>(r) + 2,
                         static_cast<std::size_t>(c) + 1, "non-finite cell");
  infer_kinds(ds, options);
  return ds;
}

Dataset load_csv(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw FileNotFound(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, 1, "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> columns;
  {
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      columns.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
  }
  if (columns.empty()) throw ParseError(1, 1, "no header columns");

  std::vector<double> cells;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(row, cell, ',')) {
      if (col >= columns.size())
        throw ParseError(line_no, col + 1, "too many cells");
      char* endp = nullptr;
      const double v = std::strtod(cell.c_str(), &endp);
      while (endp && *endp == ' ') ++endp;
      if (endp == cell.c_str() || (endp && *endp != '\0'))
        throw NonNumericCell(line_no, col + 1, cell);
      if (!std::isfinite(v)) throw NonNumericCell(line_no, col + 1, cell);
      cells.push_back(v);
      ++col;
    }
    if (col != columns.size())
      throw ParseError(line_no, col + 1, "expected " +
                                             std::to_string(columns.size()) +
                                             " cells, got " + std::to_string(col));
    ++rows;
  }

  Dataset ds;
  ds.columns = std::move(columns);
  ds.values.resize(rows, ds.columns.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < ds.columns.size(); ++c)
      ds.values(r, c) = cells[r * ds.columns.size() + c];
  infer_kinds(ds, options);
  return ds;
}

Eigen::VectorXd dequantize(const Eigen::VectorXd& column, std::uint64_t seed,
                           std::size_t column_index) {
  Rng rng = make_rng(seed).derive("dequantize").derive(column_index);
  Eigen::VectorXd out(column.size());
  const double sd = 1.0 / 6.0;  // variance 1/36
  for (Eigen::Index r = 0; r < column.size(); ++r)
    out[r] = column[r] + sd * rng.normal();
  return out;
}

long requantize_value(double value, const std::vector<long>& support) {
  const long rounded = static_cast<long>(std::nearbyint(value));
  auto it = std::lower_bound(support.begin(), support.end(), rounded);
  if (it == support.end()) return support.back();
  if (it == support.begin()) return support.front();
  const long above = *it;
  const long below = *(it - 1);
  return (rounded - below) <= (above - rounded) ? below : above;
}

Eigen::VectorXd requantize(const Eigen::VectorXd& column,
                           const std::vector<long>& support) {
  if (support.empty()) throw Error("requantize: empty support");
  Eigen::VectorXd out(column.size());
  for (Eigen::Index r = 0; r < column.size(); ++r)
    out[r] = static_cast<double>(requantize_value(column[r], support));
  return out;
}

PreprocessInfo standardize(Eigen::MatrixXd& columns_by_row,
                           const std::vector<std::string>& names) {
  const Eigen::Index n = columns_by_row.rows();
  const Eigen::Index k = columns_by_row.cols();
  PreprocessInfo info = PreprocessInfo::identity(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const double mean = columns_by_row.col(c).mean();
    const double var =
        (columns_by_row.col(c).array() - mean).square().sum() / n;
    const double sd = std::sqrt(var);
    if (!(sd > 0.0)) throw DegenerateColumn(names[c]);
    info.mean[c] = mean;
    info.stddev[c] = sd;
    columns_by_row.col(c) = (columns_by_row.col(c).array() - mean) / sd;
  }
  return info;
}

namespace {

// Dataset -> (k x n matrix in DAG declaration order, specs aligned to DAG).
std::pair<Eigen::MatrixXd, std::vector<VariableSpec>> align_to_dag(
    const Dataset& dataset, const Dag& dag) {
  const std::size_t k = dag.size();
  Eigen::MatrixXd aligned(dataset.row_count(), k);
  std::vector<VariableSpec> specs(k);
  for (std::size_t v = 0; v < k; ++v) {
    const auto& name = dag.variables()[v].name;
    const std::size_t c = dataset.column_index(name);  // throws MissingColumn
    aligned.col(v) = dataset.values.col(c);
    specs[v] = dataset.specs[c];
    // A Discrete declaration on the DAG side wins; support comes from the
    // data when not declared.
    if (dag.variables()[v].kind == VariableKind::Discrete) {
      specs[v].kind = VariableKind::Discrete;
      if (!dag.variables()[v].support.empty())
        specs[v].support = dag.variables()[v].support;
    }
  }
  return {std::move(aligned), std::move(specs)};
}

}  // namespace

std::pair<Eigen::MatrixXd, PreprocessInfo> preprocess_for_flow(
    const Dataset& dataset, const Dag& dag, std::uint64_t seed) {
  auto [aligned, specs] = align_to_dag(dataset, dag);
  const std::size_t k = dag.size();
  for (std::size_t v = 0; v < k; ++v)
    if (specs[v].kind == VariableKind::Discrete)
      aligned.col(v) = dequantize(aligned.col(v), seed, v);
  std::vector<std::string> names;
  names.reserve(k);
  for (const auto& v : dag.variables()) names.push_back(v.name);
  PreprocessInfo info = standardize(aligned, names);
  for (std::size_t v = 0; v < k; ++v) {
    info.discrete[v] = specs[v].kind == VariableKind::Discrete;
    info.support[v] = specs[v].support;
  }
  return {aligned.transpose(), info};
}

std::pair<Cgnf, TrainHistory> fit(const Cgnf& cgnf, const Dataset& dataset,
                                  const TrainConfig& config) {
  TrainHistory history;
  if (!(config.validation_fraction > 0.0 && config.validation_fraction < 1.0))
    throw Error("validation_fraction must be in (0, 1)");
  if (config.batch_size < 1) throw Error("batch_size must be positive");
  if (config.batch_size < 64 || config.batch_size > 512)
    history.warnings.push_back("batch_size outside the recommended 64..512");
  if (config.learning_rate > 0.001)
    history.warnings.push_back("learning_rate above the recommended 0.001");

  auto [matrix, info] =
      preprocess_for_flow(dataset, cgnf.dag, config.seed);
  const Eigen::Index n = matrix.cols();
  if (n < 2) throw Error("need at least 2 observations");

  Cgnf model = cgnf;
  model.preprocess = info;

  // Random train/validation partition.
  Rng split_rng = make_rng(config.seed).derive("split");
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(split_rng.uniform01() * (i + 1));
    std::swap(order[i], order[j]);
  }
  Eigen::Index valid_n = static_cast<Eigen::Index>(
      std::llround(config.validation_fraction * static_cast<double>(n)));
  valid_n = std::max<Eigen::Index>(1, std::min(valid_n, n - 1));
  const Eigen::Index train_n = n - valid_n;

  Eigen::MatrixXd train_set(matrix.rows(), train_n);
  Eigen::MatrixXd valid_set(matrix.rows(), valid_n);
  for (Eigen::Index i = 0; i < train_n; ++i)
    train_set.col(i) = matrix.col(order[i]);
  for (Eigen::Index i = 0; i < valid_n; ++i)
    valid_set.col(i) = matrix.col(order[train_n + i]);

  std::vector<OptimizerState> optimizers(model.normalizers.size());
  for (auto& opt : optimizers) {
    opt.kind = config.optimizer;
    opt.learning_rate = config.learning_rate;
  }
  CgnfGradients grads = zero_gradients(model);

  Cgnf best_model = model;
  double best_valid = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  int stagnant = 0;

  Rng shuffle_rng = make_rng(config.seed).derive("batches");
  std::vector<Eigen::Index> train_order(train_n);
  std::iota(train_order.begin(), train_order.end(), 0);

  for (long epoch = 0; epoch < config.max_epochs; ++epoch) {
    for (Eigen::Index i = train_n - 1; i > 0; --i) {
      const auto j =
          static_cast<Eigen::Index>(shuffle_rng.uniform01() * (i + 1));
      std::swap(train_order[i], train_order[j]);
    }
    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (Eigen::Index start = 0; start < train_n;
         start += config.batch_size, ++batch_index) {
      const Eigen::Index len =
          std::min<Eigen::Index>(config.batch_size, train_n - start);
      Eigen::MatrixXd batch(matrix.rows(), len);
      for (Eigen::Index i = 0; i < len; ++i)
        batch.col(i) = train_set.col(train_order[start + i]);
      LossBreakdown loss;
      try {
        for (auto& g : grads.normalizers) g.set_zero();
        loss = loss_gradients(model, batch, grads, config.workers);
      } catch (const NonFiniteEvaluation&) {
        throw NonFiniteLoss(static_cast<std::size_t>(epoch), batch_index);
      }
      if (!std::isfinite(loss.total))
        throw NonFiniteLoss(static_cast<std::size_t>(epoch), batch_index);
      epoch_loss += loss.total;
      // Mean-per-observation gradient so the learning rate is batch-size
      // agnostic.
      const double inv = 1.0 / static_cast<double>(len);
      for (std::size_t t = 0; t < model.normalizers.size(); ++t) {
        grads.normalizers[t].scale(inv);
        optimizer_step(optimizers[t],
                       param_grads(model.normalizers[t], grads.normalizers[t]));
      }
    }
    const double train_loss = epoch_loss / static_cast<double>(train_n);
    const double valid_loss =
        nll(model, valid_set).total / static_cast<double>(valid_n);
    if (!std::isfinite(valid_loss))
      throw NonFiniteLoss(static_cast<std::size_t>(epoch), 0);
    history.train_loss.push_back(train_loss);
    history.valid_loss.push_back(valid_loss);
    if (config.log)
      (*config.log) << epoch << ',' << train_loss << ',' << valid_loss << '\n';

    if (valid_loss < best_valid) {
      best_valid = valid_loss;
      best_epoch = static_cast<std::size_t>(epoch);
      best_model = model;
      stagnant = 0;
    } else {
      ++stagnant;
      if (stagnant >= config.patience_epochs) {
        history.stop_reason = "patience";
        break;
      }
    }
  }
  if (history.stop_reason.empty()) history.stop_reason = "max_epochs";
  history.best_epoch = best_epoch;
  history.best_valid_loss = best_valid;
  best_model.preprocess = info;
  return {std::move(best_model), std::move(history)};
}

}  // namespace cgnf
