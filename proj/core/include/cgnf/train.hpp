#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "cgnf/flow.hpp"
#include "cgnf/graph.hpp"
#include "cgnf/nn.hpp"

namespace cgnf {

struct Dataset {
  std::vector<std::string> columns;
  Eigen::MatrixXd values;  // n rows x k columns
  std::vector<VariableSpec> specs;

  std::size_t row_count() const { return values.rows(); }
  std::size_t column_count() const { return values.cols(); }
  std::size_t column_index(const std::string& name) const;
};

struct CsvOptions {
  /// Integer-valued columns with at most this many distinct levels are
  /// treated as Discrete unless overridden.
  int max_discrete_levels = 10;
  std::vector<std::string> force_continuous;
  std::vector<std::string> force_discrete;
};

Dataset load_csv(const std::string& path, const CsvOptions& options = {});
Dataset dataset_from_matrix(std::vector<std::string> columns,
                            Eigen::MatrixXd values,
                            const CsvOptions& options = {});

/// Adds N(0, 1/36) noise to every cell; the stream is derived from
/// (seed, column_index) and advances by row, so noise is reproducible
/// cell-by-cell.
Eigen::VectorXd dequantize(const Eigen::VectorXd& column, std::uint64_t seed,
                           std::size_t column_index);

/// Rounds to the nearest integer, then clamps to the nearest support level
/// (ties toward the lower level).
Eigen::VectorXd requantize(const Eigen::VectorXd& column,
                           const std::vector<long>& support);
long requantize_value(double value, const std::vector<long>& support);

/// Z-scores every column in place and returns the constants; throws
/// DegenerateColumn on zero spread.
PreprocessInfo standardize(Eigen::MatrixXd& columns_by_row,
                           const std::vector<std::string>& names);

struct TrainConfig {
  int batch_size = 128;
  double learning_rate = 1e-4;
  int patience_epochs = 50;
  double validation_fraction = 0.2;
  long max_epochs = 50000;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::size_t workers = 1;
  std::ostream* log = nullptr;  // one "epoch,train_loss,valid_loss" line per epoch
};

struct TrainHistory {
  std::vector<double> train_loss;  // mean per observation
  std::vector<double> valid_loss;
  std::size_t best_epoch = 0;
  double best_valid_loss = 0.0;
  std::string stop_reason;
  std::vector<std::string> warnings;
};

/// Full training pipeline: aligns the dataset to the DAG, dequantizes
/// discrete columns, standardizes, splits off a validation fraction, runs
/// mini-batch gradient descent, and returns the weights of the best
/// validation epoch.
std::pair<Cgnf, TrainHistory> fit(const Cgnf& cgnf, const Dataset& dataset,
                                  const TrainConfig& config);

/// The preprocessing stage of fit() on its own: k x n matrix in DAG
/// declaration order (columns are observations), standardized, discrete
/// columns dequantized.
std::pair<Eigen::MatrixXd, PreprocessInfo> preprocess_for_flow(
    const Dataset& dataset, const Dag& dag, std::uint64_t seed);

}  // namespace cgnf
