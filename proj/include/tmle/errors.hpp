#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tmle {

// Root of the library's exception hierarchy. kind() is a stable machine-readable
// code that the CLI copies into its error JSON.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

// Bad arguments, malformed data or configuration. Maps to CLI exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "input_error"; }
};

class DimensionError : public InputError {
 public:
  using InputError::InputError;
  const char* kind() const noexcept override { return "dimension_mismatch"; }
};

class ConfigError : public InputError {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : InputError(join(violations)), violations_(std::move(violations)) {}
  const char* kind() const noexcept override { return "invalid_config"; }
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "invalid configuration:";
    for (const auto& s : v) out += " " + s + ";";
    return out;
  }
  std::vector<std::string> violations_;
};

class UnsupportedError : public InputError {
 public:
  using InputError::InputError;
  const char* kind() const noexcept override { return "unsupported"; }
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "insufficient_data"; }
};

class FoldDegeneracyError : public InsufficientDataError {
 public:
  FoldDegeneracyError(std::size_t fold, const std::string& why)
      : InsufficientDataError("fold " + std::to_string(fold) + " cannot be trained: " + why),
        fold_(fold) {}
  const char* kind() const noexcept override { return "fold_degeneracy"; }
  std::size_t fold() const noexcept { return fold_; }

 private:
  std::size_t fold_;
};

class DegenerateOutcomeError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "degenerate_outcome"; }
};

class GlmError : public Error {
 public:
  using Error::Error;
};

class SingularDesignError : public GlmError {
 public:
  using GlmError::GlmError;
  const char* kind() const noexcept override { return "singular_design"; }
};

class SeparationError : public GlmError {
 public:
  using GlmError::GlmError;
  const char* kind() const noexcept override { return "separation"; }
};

class NonConvergenceError : public GlmError {
 public:
  NonConvergenceError(const std::string& what, std::vector<double> last_coefficients,
                      std::vector<double> score_residuals, int iterations)
      : GlmError(what),
        last_coefficients_(std::move(last_coefficients)),
        score_residuals_(std::move(score_residuals)),
        iterations_(iterations) {}
  const char* kind() const noexcept override { return "non_convergence"; }
  const std::vector<double>& last_coefficients() const noexcept { return last_coefficients_; }
  const std::vector<double>& score_residuals() const noexcept { return score_residuals_; }
  int iterations() const noexcept { return iterations_; }

 private:
  std::vector<double> last_coefficients_;
  std::vector<double> score_residuals_;
  int iterations_;
};

// A lower-level failure re-raised with the estimator or algorithm step that hit it.
// cause_kind() preserves the original kind() code.
class EstimationError : public Error {
 public:
  EstimationError(const std::string& context, const Error& cause)
      : Error(context + ": " + cause.what()), context_(context), cause_kind_(cause.kind()) {}
  EstimationError(const std::string& context, const std::string& cause_kind, const std::string& what)
      : Error(context + ": " + what), context_(context), cause_kind_(cause_kind) {}
  const char* kind() const noexcept override { return "estimation_failure"; }
  const std::string& context() const noexcept { return context_; }
  const std::string& cause_kind() const noexcept { return cause_kind_; }

 private:
  std::string context_;
  std::string cause_kind_;
};

}  // namespace tmle
