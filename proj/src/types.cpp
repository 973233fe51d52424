#include "tstokes/types.hpp"

namespace tstokes {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::singular_evaluation: return "singular-evaluation";
    case ErrorCode::invalid_parameter: return "invalid-parameter";
    case ErrorCode::order_overflow: return "order-overflow";
    case ErrorCode::empty_cloud: return "empty-cloud";
    case ErrorCode::blow_up: return "blow-up";
    case ErrorCode::incomparable_measures: return "incomparable-measures";
    case ErrorCode::ill_conditioned_probe: return "ill-conditioned-probe";
    case ErrorCode::singular_configuration: return "singular-configuration";
    case ErrorCode::radius_exceeded: return "radius-exceeded";
    case ErrorCode::degenerate_geometry: return "degenerate-geometry";
    case ErrorCode::target_inside_blob: return "target-inside-blob";
    case ErrorCode::curve_enters_region: return "curve-enters-region";
    case ErrorCode::covering_insufficient: return "covering-insufficient";
    case ErrorCode::degenerate_pair: return "degenerate-pair";
    case ErrorCode::config_invalid: return "config-invalid";
  }
  return "unknown";
}

double spectral_norm_symmetric(const Mat3& m) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_norm(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m);
  return svd.singularValues()(0);
}

}  // namespace tstokes
