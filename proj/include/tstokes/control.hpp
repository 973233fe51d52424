#pragma once

#include "tstokes/cloud.hpp"
#include "tstokes/integrator.hpp"
#include "tstokes/velocity.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tstokes {

struct Ball {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;

  bool contains(const Vec3& x) const { return (x - center).norm() <= radius; }
};

// Ball in which point forces may be applied.
struct ControlRegion {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;

  void validate() const;
  bool contains(const Vec3& x) const { return (x - center).norm() <= radius; }
};

// Force F at alpha such that U(x - alpha) F = a:
//   F = 8 pi |d| (I - d d^T / (2 |d|^2)) a,  d = x - alpha.
// Throws degenerate_geometry when x = alpha.
Vec3 point_force_for_velocity(const Vec3& alpha, const Vec3& x, const Vec3& a);

// Same for the regularized blob U_eps; reduces to the point formula at eps = 0.
Vec3 blob_force_for_velocity(const Vec3& alpha, const Vec3& x, const Vec3& a, double eps);

// Velocity at x of the force F spread uniformly over B(alpha, eps), by a
// fixed tensor-product Gauss rule over the ball. Throws target_inside_blob
// when |x - alpha| <= eps and invalid_parameter when eps <= 0.
Vec3 mollified_force_velocity(const Vec3& alpha, double eps, const Vec3& F, const Vec3& x);

// C-infinity step: 0 for s <= 0, 1 for s >= 1, all derivatives vanish at both ends.
double smooth_step(double s);

// Polyline through waypoints on [t0, t1]; every leg is traversed with a
// smooth step so the curve is stationary at each waypoint, and the first and
// last pad fraction of the interval are stationary.
class Curve {
 public:
  Curve(std::vector<Vec3> waypoints, double t0, double t1, double pad = 0.1);

  static Curve line(const Vec3& a, const Vec3& b, double t0, double t1, double pad = 0.1) {
    return Curve({a, b}, t0, t1, pad);
  }

  Vec3 operator()(double t) const;
  double t0() const { return t0_; }
  double t1() const { return t1_; }
  double length() const;
  const std::vector<Vec3>& waypoints() const { return pts_; }

 private:
  std::vector<Vec3> pts_;
  double t0_, t1_, pad_;
};

// Velocity of a blob force F at alpha with width eps (singular Stokeslet at eps = 0).
inline Vec3 control_velocity(const Vec3& x, const Vec3& alpha, const Vec3& F, double eps) {
  const Mat3 u = eps > 0.0 ? oseen_regularized(x - alpha, eps) : oseen(x - alpha);
  return u * F;
}

struct FollowResult {
  std::vector<double> times;   // step boundaries
  std::vector<Vec3> markers;   // marker at each boundary
  std::vector<Vec3> forces;    // force held on [times[m], times[m+1])
  double max_deviation = 0.0;  // max_m |marker(t_m) - gamma(t_m)|
};

// Closed-loop tracking: on every step the force at the region center is
// solved so that the marker's velocity equals the secant
// (gamma(t + dt) - marker) / dt minus the background velocity; the force is
// held over an RK4 step of the marker. Throws curve_enters_region when the
// curve touches the closed region.
FollowResult follow_curve(const Vec3& marker, const Curve& gamma, const ControlRegion& region,
                          const VelocityField* background, double dt, double eps = 0.0);

// ---------------------------------------------------------------------------
// Staged transport

// Greedy covering: particles in index order; each particle not yet covered
// becomes the center of a new ball.
std::vector<Ball> greedy_covering(const ParticleCloud& cloud, double radius);

struct ForceSample {
  double t = 0.0;  // start of the interval on which the force is held
  Vec3 location = Vec3::Zero();
  Vec3 force = Vec3::Zero();
  double eps = 0.0;
};

struct ControlStage {
  int index = 0;
  // t_i, t_{i+1/4}, t_{i+1/2}, t_{i+1}
  double t_begin = 0.0, t_quarter = 0.0, t_half = 0.0, t_end = 0.0;
  Ball ball;
  int region = -1;  // -1: no forces (ball already in the target)
  std::vector<ForceSample> schedule;  // piecewise constant; the last one ends at t_end

  // Force at time t (zero outside the schedule).
  const ForceSample* sample_at(double t) const;
};

struct ControlPlan {
  double horizon = 0.0;
  double t0 = 0.0;
  Ball target;  // B(0, 2 delta)
  std::vector<ControlRegion> regions;
  std::vector<ControlStage> stages;

  // Time-compressed plan: u^s(t, x) = u(t / s, x) / s.
  ControlPlan time_scaled(double s) const;
  std::string to_json() const;
};

struct PlanOptions {
  double eps = 0.0;              // blob width of the forces
  std::size_t steps_per_leg = 200;  // tracking steps over [t_i, t_{i+1/4}]
  double pad = 0.1;
};

// Stage i (1..L) moves ball i's center into the target during
// [t_i, t_{i+1/4}], holds it there until t_{i+1/2} and replays the forward
// schedule time-mirrored with opposite sign until t_{i+1}, which resets the
// flow to the identity. t_0 = T / 4 and t_i = t_0 + i T / (4 (L + 1)).
ControlPlan staged_transport_plan(const ParticleCloud& cloud, const std::vector<Ball>& covering,
                                  const Ball& target, double horizon,
                                  const std::vector<ControlRegion>& regions,
                                  const PlanOptions& options = {});

struct AbsorptionEvent {
  double t = 0.0;
  std::size_t particle = 0;  // index in the initial cloud
  Vec3 position = Vec3::Zero();
  double weight = 0.0;
};

struct LedgerRow {
  double t = 0.0;
  double remaining_mass = 0.0;
};

struct ExecutionResult {
  ParticleCloud final_cloud;
  std::vector<std::size_t> final_ids;     // initial index of every surviving particle
  std::vector<double> boundary_times;     // t_0, t_1, ..., t_{L+1}
  std::vector<ParticleCloud> boundary_snapshots;
  std::vector<std::vector<std::size_t>> boundary_ids;
  std::vector<AbsorptionEvent> events;
  std::vector<LedgerRow> ledger;
  double absorbed_mass = 0.0;
  double remaining_mass = 0.0;
  std::size_t blob_collisions = 0;  // particle steps spent inside a force blob
  std::vector<std::string> warnings;
};

struct ExecuteOptions {
  bool absorb = true;
  bool self_induction = false;
  double dt = 1e-2;  // step outside the force schedules
  FlowModel model;   // self-induced field
};

// Advances the cloud under the plan's forces (plus its own field with
// self_induction). With absorb, particles inside the target during any
// stage's absorption window (t_{i+1/4}, t_{i+1/2}] are removed.
ExecutionResult execute_control(const ParticleCloud& cloud, const ControlPlan& plan,
                                const ExecuteOptions& options);

void write_ledger_csv(const std::string& path, const std::vector<LedgerRow>& ledger);

}  // namespace tstokes
