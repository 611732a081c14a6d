#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace emf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;
using MatrixRef = Eigen::Ref<const Eigen::MatrixXd>;

// Every failure the library can raise, so callers (and the CLI exit-code
// mapping) can distinguish them without string matching.
enum class ErrorCode {
  InvalidArity,
  ArityMismatch,
  InvalidQuantifier,
  EmptyBand,
  TooShort,
  InsufficientData,
  NumericalFailure,
  DimensionMismatch,
  SplitError,
  MissingFile,
  RaggedData,
  UnknownLabel,
  InvalidValue,
  CorruptBundle,
  VersionMismatch,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace emf
