#include "podeit/error.hpp"

namespace podeit {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension_mismatch: return "dimension-mismatch";
    case ErrorKind::geometry_infeasible: return "geometry-infeasible";
    case ErrorKind::generation_failed: return "generation-failed";
    case ErrorKind::nonpositive_conductivity: return "nonpositive-conductivity";
    case ErrorKind::nonpositive_impedance: return "nonpositive-impedance";
    case ErrorKind::singular_system: return "singular-system";
    case ErrorKind::invalid_protocol: return "invalid-protocol";
    case ErrorKind::factorization_failed: return "factorization-failed";
    case ErrorKind::eigensolve_failed: return "eigensolve-failed";
    case ErrorKind::degenerate_ensemble: return "degenerate-ensemble";
    case ErrorKind::asymmetric_configuration: return "asymmetric-configuration";
    case ErrorKind::indefinite_reduced_system: return "indefinite-reduced-system";
    case ErrorKind::ensemble_too_small: return "ensemble-too-small";
    case ErrorKind::model_mismatch: return "model-mismatch";
    case ErrorKind::diverged: return "diverged";
    case ErrorKind::not_converged: return "not-converged";
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::io_error: return "io-error";
    case ErrorKind::cache_conflict: return "cache-conflict";
    case ErrorKind::missing_artifact: return "missing-artifact";
  }
  return "unknown";
}

bool Error::is_user_error() const noexcept {
  switch (kind_) {
    case ErrorKind::dimension_mismatch:
    case ErrorKind::geometry_infeasible:
    case ErrorKind::nonpositive_impedance:
    case ErrorKind::invalid_protocol:
    case ErrorKind::asymmetric_configuration:
    case ErrorKind::ensemble_too_small:
    case ErrorKind::model_mismatch:
    case ErrorKind::invalid_argument:
    case ErrorKind::io_error:
    case ErrorKind::cache_conflict:
    case ErrorKind::missing_artifact:
      return true;
    default:
      return false;
  }
}

}  // namespace podeit
