#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace tstokes {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

// Every failure mode named by the library. Callers match on the code; the
// message carries the human-readable detail.
enum class ErrorCode {
  singular_evaluation,
  invalid_parameter,
  order_overflow,
  empty_cloud,
  blow_up,
  incomparable_measures,
  ill_conditioned_probe,
  singular_configuration,
  radius_exceeded,
  degenerate_geometry,
  target_inside_blob,
  curve_enters_region,
  covering_insufficient,
  degenerate_pair,
  config_invalid,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

// Largest absolute eigenvalue of a symmetric 3x3 matrix (its spectral norm).
double spectral_norm_symmetric(const Mat3& m);

// Operator 2-norm for a general 3x3 matrix.
double spectral_norm(const Mat3& m);

}  // namespace tstokes
