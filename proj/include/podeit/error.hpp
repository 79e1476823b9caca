#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace podeit {

enum class ErrorKind {
  dimension_mismatch,
  geometry_infeasible,
  generation_failed,
  nonpositive_conductivity,
  nonpositive_impedance,
  singular_system,
  invalid_protocol,
  factorization_failed,
  eigensolve_failed,
  degenerate_ensemble,
  asymmetric_configuration,
  indefinite_reduced_system,
  ensemble_too_small,
  model_mismatch,
  diverged,
  not_converged,
  invalid_argument,
  io_error,
  cache_conflict,
  missing_artifact,
};

std::string_view to_string(ErrorKind kind);

/// Exception carrying a machine-readable kind; the CLI maps kinds to exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// True for failures caused by user input or configuration rather than numerics.
  bool is_user_error() const noexcept;

 private:
  ErrorKind kind_;
};

}  // namespace podeit
