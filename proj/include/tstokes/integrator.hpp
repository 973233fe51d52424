#pragma once

#include "tstokes/cloud.hpp"
#include "tstokes/kernel.hpp"
#include "tstokes/velocity.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tstokes {

// Kernel plus summation backend: everything needed to turn a cloud into its
// velocity field.
struct FlowModel {
  KernelConfig kernel;
  BackendConfig backend;

  VelocityField field(const ParticleCloud& cloud) const { return {cloud, kernel, backend}; }
};

// Velocity of every particle of the cloud under its own field.
std::vector<Vec3> particle_velocities(const ParticleCloud& cloud, const FlowModel& model);

// One classical RK4 step of dX_i/dt = u[X](X_i); the field is re-summed at
// every stage. Tracers (weightless markers) ride along if given.
ParticleCloud step_rk4(const ParticleCloud& cloud, double dt, const FlowModel& model,
                       std::vector<Vec3>* tracers = nullptr);

using VelocityFn = std::function<std::vector<Vec3>(std::span<const Vec3>)>;

// Classical RK4 step of the autonomous system x' = velocity(x).
std::vector<Vec3> rk4_step(std::span<const Vec3> positions, double dt, const VelocityFn& velocity);

// ---------------------------------------------------------------------------
// Taylor / jet stepping

// Time Taylor coefficients c_k = d^k X_i / dt^k / k! of every particle about
// base_time; coeffs[i][k] for k = 0..order.
struct TrajectoryJets {
  double base_time = 0.0;
  int order = 0;
  std::vector<double> weights;
  std::vector<std::vector<Vec3>> coeffs;

  std::size_t size() const { return coeffs.size(); }
};

// Jet recursion c_{k+1} = [t^k] sum_j w_j U_eps(X_i(t) - X_j(t)) (-e3) / (k+1),
// composed by truncated-series arithmetic. Direct summation. Throws
// singular_configuration for coincident particles with the singular kernel.
TrajectoryJets taylor_coefficients(const ParticleCloud& cloud, int order, const KernelConfig& kernel);

inline constexpr double kTaylorAcceptance = 1e-10;

struct TaylorStep {
  ParticleCloud cloud;
  double truncation_estimate = 0.0;  // max_i |c_n| dt^n
};

// Positions sum_k c_k dt^k. Throws radius_exceeded when
// |c_n| dt^n > kTaylorAcceptance (1 + |c_0|) for some particle.
TaylorStep step_taylor(const TrajectoryJets& jets, double dt);

// binom(1/2, k)
double binomial_half(int k);

struct AnalyticityReport {
  // r[i][k] = |c_k^i|^{1/k}, k = 1..order (index 0 unused, set to 0).
  std::vector<std::vector<double>> r_particle;
  // Same with |c_k| replaced by its maximum over particles.
  std::vector<double> r_sup;
  double radius = 0.0;  // 1 / max_{k >= order/2} r_sup[k]; infinite for a still cloud
  // max over k in [order/2, order-1] of |r_sup[k+1] / r_sup[k] - 1|
  double ratio_spread = 0.0;
  bool fitted = false;
  double c0 = 0.0, c1 = 0.0;
  bool bound_holds = true;  // |c_k| <= |binom(1/2,k)| C0^k C1^(k-1) for all k, particles
};

// Needs order >= 4. With fit, (C0, C1) are chosen as the smallest pair with
// C0 = 2 max|c_1| that satisfies the coefficient bound.
AnalyticityReport analyticity_report(const TrajectoryJets& jets, bool fit);

// Worst |r_sup[k+1] / r_sup[k] - 1| over k in [k_lo, k_hi - 1].
double ratio_spread(const std::vector<double>& r_sup, int k_lo, int k_hi);

// ---------------------------------------------------------------------------
// Trajectories

struct StepperConfig {
  enum class Kind { rk4, taylor };
  Kind kind = Kind::rk4;
  double dt = 1e-2;
  int order = 8;  // taylor only

  static StepperConfig rk4(double dt) { return {Kind::rk4, dt, 0}; }
  static StepperConfig taylor(double dt, int order) { return {Kind::taylor, dt, order}; }
};

struct DiagnosticRow {
  double t = 0.0;
  double mass = 0.0;
  std::optional<double> l3_est;
  std::optional<double> lip_mod;
  std::optional<double> loglip_mod;
  std::optional<double> w1_vs_ref;
};

struct DiagnosticsConfig {
  bool l3 = false;
  std::optional<double> l3_bandwidth;  // default: chosen once from the initial cloud
  bool moduli = false;
  std::size_t modulus_pairs = 2000;
  double modulus_r_min = 1e-3;
  double modulus_r_max = 1.0;
  std::uint64_t seed = 0;
  std::function<ParticleCloud(double)> reference;  // W1 target at time t
};

struct SimulateOptions {
  std::size_t snapshot_stride = 1;  // keep every stride-th grid point (and the last)
  std::vector<Vec3> tracers;        // weightless markers, RK4 only
  DiagnosticsConfig diagnostics;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<ParticleCloud> snapshots;
  std::vector<DiagnosticRow> diagnostics;  // one per snapshot
  std::vector<std::vector<Vec3>> tracers;  // one set per snapshot
  std::size_t taylor_halvings = 0;
};

// Grid t_k = k dt (last point clamped to t_final).
std::vector<double> time_grid(double t_final, double dt);

Trajectory simulate(const ParticleCloud& cloud0, double t_final, const StepperConfig& stepper,
                    const FlowModel& model, const SimulateOptions& options = {});

// Fixed-step jet integration to time t with step halving on radius_exceeded.
ParticleCloud advance_taylor(const ParticleCloud& cloud, double t, double dt, int order,
                             const KernelConfig& kernel, std::size_t* halvings = nullptr);

// "t,mass,l3_est,lip_mod,loglip_mod,w1_vs_ref"; absent values print as nan.
void write_diagnostics_csv(const std::string& path, const std::vector<DiagnosticRow>& rows);

// ---------------------------------------------------------------------------
// Picard iteration

struct PicardResult {
  std::vector<double> times;
  std::vector<std::vector<ParticleCloud>> iterates;  // iterates[k][m]: rho^k at times[m]
  std::vector<double> distances;                     // d_k = sup_m W1(rho^{k-1}, rho^k), k >= 1
  std::vector<double> ratios;                        // d_{k+1} / d_k
};

// rho^0 is the initial cloud frozen in time; rho^k transports the initial
// cloud through the field of rho^{k-1}, held constant on each grid interval.
PicardResult picard_iterate(const ParticleCloud& cloud0, double t_final, double dt, int n_iters,
                            const FlowModel& model);

// ---------------------------------------------------------------------------
// Stability

struct StabilityOptions {
  double tolerance = 0.1;          // envelope slack
  double solver_tolerance = 1e-12; // W1 values below 10x this are left out of the fit
  std::size_t modulus_pairs = 4000;
  double modulus_r_min = 1e-3;
  double modulus_r_max = 0.5;
  std::uint64_t seed = 0;
};

struct StabilityResult {
  std::vector<double> times;
  std::vector<double> w1;
  double fitted_rate = 0.0;  // slope of log W1 against t
  double lipschitz = 0.0;    // max measured Lipschitz modulus of the A field
  bool envelope_holds = true;
  double worst_envelope_ratio = 0.0;  // max_t W1(t) / (W1(0) e^{lip t})
};

StabilityResult two_cloud_stability(const ParticleCloud& a, const ParticleCloud& b, double t_final,
                                    double dt, const FlowModel& model,
                                    const StabilityOptions& options = {});

// Least-squares slope of y against x.
double fit_slope(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// Hoelder flow probe

// Tracer pairs (p, p + delta u) around base points drawn from the cloud, one
// pair per (base, delta). Layout: tracers[2 m], tracers[2 m + 1].
struct PairSeeds {
  std::vector<Vec3> tracers;
  std::vector<double> initial_separation;
};

PairSeeds seed_pairs(const ParticleCloud& cloud, std::size_t n_bases, std::span<const double> deltas,
                     std::uint64_t seed);

// Slope of log |separation(t)| against log |separation(0)| over all pairs.
// Throws degenerate_pair if a pair has collapsed to zero separation.
double holder_exponent(const PairSeeds& seeds, std::span<const Vec3> tracers_at_t);

}  // namespace tstokes
