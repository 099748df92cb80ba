#pragma once

#include <stdexcept>
#include <string>

namespace cgnf {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CycleDetected : Error {
  explicit CycleDetected(const std::string& cycle)
      : Error("cycle detected: " + cycle), cycle_text(cycle) {}
  std::string cycle_text;
};

struct UnknownVariable : Error {
  explicit UnknownVariable(const std::string& name)
      : Error("unknown variable: " + name), name(name) {}
  std::string name;
};

struct DuplicateVariable : Error {
  explicit DuplicateVariable(const std::string& name)
      : Error("duplicate variable: " + name), name(name) {}
  std::string name;
};

struct MalformedLine : Error {
  MalformedLine(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};

struct InvalidArchitecture : Error {
  using Error::Error;
};

struct ShapeMismatch : Error {
  using Error::Error;
};

struct InvalidNodeCount : Error {
  using Error::Error;
};

struct NonFiniteEvaluation : Error {
  using Error::Error;
};

struct SigmaNotPositiveDefinite : Error {
  using Error::Error;
};

struct BracketNotFound : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(std::size_t row, std::size_t col, const std::string& what)
      : Error("row " + std::to_string(row) + ", col " + std::to_string(col) +
              ": " + what),
        row(row),
        col(col) {}
  std::size_t row, col;
};

struct MissingColumn : Error {
  explicit MissingColumn(const std::string& name)
      : Error("data is missing column: " + name), name(name) {}
  std::string name;
};

struct NonNumericCell : Error {
  NonNumericCell(std::size_t row, std::size_t col, const std::string& cell)
      : Error("non-numeric cell at row " + std::to_string(row) + ", col " +
              std::to_string(col) + ": '" + cell + "'"),
        row(row),
        col(col) {}
  std::size_t row, col;
};

struct DegenerateColumn : Error {
  explicit DegenerateColumn(const std::string& name)
      : Error("column has zero variance: " + name), name(name) {}
  std::string name;
};

struct NonFiniteLoss : Error {
  NonFiniteLoss(std::size_t epoch, std::size_t batch)
      : Error("non-finite loss at epoch " + std::to_string(epoch) +
              ", batch " + std::to_string(batch)),
        epoch(epoch),
        batch(batch) {}
  std::size_t epoch, batch;
};

struct RegimeReferenceError : Error {
  using Error::Error;
};

struct InvalidMediatorOrder : Error {
  using Error::Error;
};

struct EmptyConditioningSet : Error {
  using Error::Error;
};

struct UnsupportedEstimand : Error {
  using Error::Error;
};

struct SchemaMismatch : Error {
  using Error::Error;
};

struct FileNotFound : Error {
  explicit FileNotFound(const std::string& path)
      : Error("file not found: " + path), path(path) {}
  std::string path;
};

}  // namespace cgnf
