#include "tstokes/integrator.hpp"

#include "tstokes/jet.hpp"
#include "tstokes/rng.hpp"
#include "tstokes/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>

namespace tstokes {

namespace {

void check_finite(const std::vector<Vec3>& xs, const char* what) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!all_finite(xs[i])) {
      throw Error(ErrorCode::blow_up, std::string(what) + " " + std::to_string(i) + " became non-finite");
    }
  }
}

std::vector<Vec3> axpy(std::span<const Vec3> x, double h, const std::vector<Vec3>& k) {
  std::vector<Vec3> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + h * k[i];
  return out;
}

std::vector<Vec3> rk4_combine(std::span<const Vec3> x, double dt, const std::vector<Vec3>& k1,
                              const std::vector<Vec3>& k2, const std::vector<Vec3>& k3,
                              const std::vector<Vec3>& k4) {
  std::vector<Vec3> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return out;
}

}  // namespace

std::vector<Vec3> particle_velocities(const ParticleCloud& cloud, const FlowModel& model) {
  return model.field(cloud).at_sources();
}

ParticleCloud step_rk4(const ParticleCloud& cloud, double dt, const FlowModel& model,
                       std::vector<Vec3>* tracers) {
  if (!(dt > 0.0)) throw Error(ErrorCode::invalid_parameter, "dt must be positive");
  const bool with_tracers = tracers != nullptr && !tracers->empty();
  ParticleCloud stage = cloud;
  std::vector<Vec3> tstage = with_tracers ? *tracers : std::vector<Vec3>{};

  std::array<std::vector<Vec3>, 4> k, kt;
  constexpr std::array<double, 4> offset = {0.0, 0.5, 0.5, 1.0};
  for (std::size_t s = 0; s < 4; ++s) {
    if (s > 0) {
      stage.positions = axpy(cloud.positions, offset[s] * dt, k[s - 1]);
      if (with_tracers) tstage = axpy(*tracers, offset[s] * dt, kt[s - 1]);
    }
    const VelocityField field = model.field(stage);
    k[s] = field.at_sources();
    if (with_tracers) kt[s] = field.eval_batch(tstage, Exclusion::none);
  }
  ParticleCloud out = cloud;
  out.positions = rk4_combine(cloud.positions, dt, k[0], k[1], k[2], k[3]);
  check_finite(out.positions, "particle");
  if (with_tracers) {
    *tracers = rk4_combine(*tracers, dt, kt[0], kt[1], kt[2], kt[3]);
    check_finite(*tracers, "tracer");
  }
  return out;
}

std::vector<Vec3> rk4_step(std::span<const Vec3> positions, double dt, const VelocityFn& velocity) {
  const auto k1 = velocity(positions);
  const auto k2 = velocity(axpy(positions, 0.5 * dt, k1));
  const auto k3 = velocity(axpy(positions, 0.5 * dt, k2));
  const auto k4 = velocity(axpy(positions, dt, k3));
  auto out = rk4_combine(positions, dt, k1, k2, k3, k4);
  check_finite(out, "particle");
  return out;
}

// ---------------------------------------------------------------------------
// Taylor / jet stepping

namespace {

// Coefficient k of U_eps(d(t)) (-e3) given the first k + 1 coefficients of
// each component of d(t).
Vec3 pair_series_coefficient(const jet::Series& dx, const jet::Series& dy, const jet::Series& dz,
                             double eps2, std::size_t k) {
  const std::size_t n = k + 1;
  std::vector<double> s(n), b(n), sb(n), bz(n);
  for (std::size_t m = 0; m < n; ++m) {
    s[m] = jet::mul_coeff(dx.coeffs(), dx.coeffs(), m) + jet::mul_coeff(dy.coeffs(), dy.coeffs(), m) +
           jet::mul_coeff(dz.coeffs(), dz.coeffs(), m);
  }
  s[0] += eps2;
  jet::pow(s, -1.5, b);  // B = s^{-3/2}
  jet::mul(s, b, sb);    // s^{-1/2}
  jet::mul(b, dz.coeffs().first(n), bz);
  // U_eps(d)(-e3) = -(A e3 + B d d_z) / (8 pi), A = s^{-1/2} + eps^2 s^{-3/2}
  const double a_k = sb[k] + eps2 * b[k];
  constexpr double c = -1.0 / (8.0 * kPi);
  return {c * jet::mul_coeff(bz, dx.coeffs(), k), c * jet::mul_coeff(bz, dy.coeffs(), k),
          c * (a_k + jet::mul_coeff(bz, dz.coeffs(), k))};
}

}  // namespace

TrajectoryJets taylor_coefficients(const ParticleCloud& cloud, int order, const KernelConfig& kernel) {
  if (order < 1) throw Error(ErrorCode::invalid_parameter, "jet order must be >= 1");
  kernel.validate();
  const std::size_t n = cloud.size();
  const double eps2 = kernel.regularization_epsilon * kernel.regularization_epsilon;
  const bool singular = kernel.singular();
  if (singular) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (cloud.positions[i] == cloud.positions[j]) {
          throw Error(ErrorCode::singular_configuration,
                      "particles " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
        }
  }
  TrajectoryJets jets;
  jets.order = order;
  jets.weights = cloud.weights;
  jets.coeffs.assign(n, std::vector<Vec3>(static_cast<std::size_t>(order) + 1, Vec3::Zero()));
  for (std::size_t i = 0; i < n; ++i) jets.coeffs[i][0] = cloud.positions[i];

  // The blob's self term is a constant -w / (4 pi eps) e3 and only enters c_1.
  const double self = singular ? 0.0 : -1.0 / (4.0 * kPi * kernel.regularization_epsilon);

  for (std::size_t k = 0; k < static_cast<std::size_t>(order); ++k) {
    std::vector<Vec3> next(n);
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      jet::Series dx(k), dy(k), dz(k);
      Vec3 acc = Vec3::Zero();
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        for (std::size_t m = 0; m <= k; ++m) {
          const Vec3 d = jets.coeffs[i][m] - jets.coeffs[j][m];
          dx[m] = d.x();
          dy[m] = d.y();
          dz[m] = d.z();
        }
        acc += cloud.weights[j] * pair_series_coefficient(dx, dy, dz, eps2, k);
      }
      if (k == 0) acc.z() += cloud.weights[i] * self;
      next[i] = acc / static_cast<double>(k + 1);
    }
    for (std::size_t i = 0; i < n; ++i) jets.coeffs[i][k + 1] = next[i];
  }
  return jets;
}

TaylorStep step_taylor(const TrajectoryJets& jets, double dt) {
  if (!(dt >= 0.0)) throw Error(ErrorCode::invalid_parameter, "dt must be >= 0");
  TaylorStep out;
  out.cloud.weights = jets.weights;
  out.cloud.positions.resize(jets.size());
  const auto n = static_cast<std::size_t>(jets.order);
  const double dtn = std::pow(dt, static_cast<double>(n));
  for (std::size_t i = 0; i < jets.size(); ++i) {
    const auto& c = jets.coeffs[i];
    const double tail = c[n].norm() * dtn;
    if (tail > kTaylorAcceptance * (1.0 + c[0].norm())) {
      throw Error(ErrorCode::radius_exceeded,
                  "last jet term too large for particle " + std::to_string(i));
    }
    out.truncation_estimate = std::max(out.truncation_estimate, tail);
    Vec3 x = c[n];
    for (std::size_t k = n; k-- > 0;) x = c[k] + dt * x;
    if (!all_finite(x)) throw Error(ErrorCode::blow_up, "jet step produced a non-finite position");
    out.cloud.positions[i] = x;
  }
  return out;
}

double binomial_half(int k) {
  double b = 1.0;
  for (int j = 0; j < k; ++j) b *= (0.5 - j) / (j + 1);
  return b;
}

double ratio_spread(const std::vector<double>& r_sup, int k_lo, int k_hi) {
  double worst = 0.0;
  for (int k = k_lo; k < k_hi; ++k) {
    const double a = r_sup[static_cast<std::size_t>(k)];
    const double b = r_sup[static_cast<std::size_t>(k) + 1];
    if (a == 0.0 && b == 0.0) continue;
    worst = std::max(worst, a == 0.0 ? std::numeric_limits<double>::infinity() : std::abs(b / a - 1.0));
  }
  return worst;
}

AnalyticityReport analyticity_report(const TrajectoryJets& jets, bool fit) {
  if (jets.order < 4) throw Error(ErrorCode::invalid_parameter, "analyticity needs jets of order >= 4");
  const auto n = static_cast<std::size_t>(jets.order);
  AnalyticityReport rep;
  rep.r_particle.assign(jets.size(), std::vector<double>(n + 1, 0.0));
  std::vector<double> sup(n + 1, 0.0);
  for (std::size_t i = 0; i < jets.size(); ++i) {
    for (std::size_t k = 1; k <= n; ++k) {
      const double m = jets.coeffs[i][k].norm();
      rep.r_particle[i][k] = std::pow(m, 1.0 / static_cast<double>(k));
      sup[k] = std::max(sup[k], m);
    }
  }
  rep.r_sup.assign(n + 1, 0.0);
  for (std::size_t k = 1; k <= n; ++k) rep.r_sup[k] = std::pow(sup[k], 1.0 / static_cast<double>(k));

  double tail = 0.0;
  for (std::size_t k = n / 2; k <= n; ++k) tail = std::max(tail, rep.r_sup[k]);
  rep.radius = tail > 0.0 ? 1.0 / tail : std::numeric_limits<double>::infinity();
  rep.ratio_spread = ratio_spread(rep.r_sup, static_cast<int>(n / 2), static_cast<int>(n));

  if (fit) {
    rep.fitted = true;
    rep.c0 = 2.0 * sup[1];
    double c1 = 0.0;
    if (rep.c0 > 0.0) {
      for (std::size_t k = 2; k <= n; ++k) {
        const double scale = std::abs(binomial_half(static_cast<int>(k))) *
                             std::pow(rep.c0, static_cast<double>(k));
        c1 = std::max(c1, std::pow(sup[k] / scale, 1.0 / static_cast<double>(k - 1)));
      }
    }
    // One ulp-scale margin so the bound is not lost to rounding in pow.
    rep.c1 = c1 * (1.0 + 1e-12);
    for (std::size_t i = 0; i < jets.size() && rep.bound_holds; ++i) {
      for (std::size_t k = 1; k <= n; ++k) {
        const double bound = std::abs(binomial_half(static_cast<int>(k))) *
                             std::pow(rep.c0, static_cast<double>(k)) *
                             std::pow(rep.c1, static_cast<double>(k - 1));
        if (jets.coeffs[i][k].norm() > bound * (1.0 + 1e-12)) {
          rep.bound_holds = false;
          break;
        }
      }
    }
  }
  return rep;
}

ParticleCloud advance_taylor(const ParticleCloud& cloud, double t, double dt, int order,
                             const KernelConfig& kernel, std::size_t* halvings) {
  if (!(dt > 0.0)) throw Error(ErrorCode::invalid_parameter, "dt must be positive");
  ParticleCloud cur = cloud;
  double remaining = t;
  double step = dt;
  while (remaining > 0.0) {
    const TrajectoryJets jets = taylor_coefficients(cur, order, kernel);
    for (;;) {
      const double h = std::min(step, remaining);
      try {
        TaylorStep s = step_taylor(jets, h);
        s.cloud.generation_seed = cur.generation_seed;
        cur = std::move(s.cloud);
        remaining = h == remaining ? 0.0 : remaining - h;
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::radius_exceeded) throw;
        step *= 0.5;
        if (halvings) ++*halvings;
        if (step < dt * 1e-12) throw Error(ErrorCode::blow_up, "jet step size underflow");
      }
    }
  }
  return cur;
}

// ---------------------------------------------------------------------------
// Trajectories

std::vector<double> time_grid(double t_final, double dt) {
  if (!(t_final > 0.0) || !(dt > 0.0)) {
    throw Error(ErrorCode::invalid_parameter, "t_final and dt must be positive");
  }
  const double steps = t_final / dt;
  auto n = static_cast<std::size_t>(std::llround(steps));
  if (std::abs(steps - static_cast<double>(n)) > 1e-9 * std::max(1.0, steps)) {
    n = static_cast<std::size_t>(std::ceil(steps));
  }
  n = std::max<std::size_t>(n, 1);
  std::vector<double> t(n + 1);
  for (std::size_t k = 0; k <= n; ++k) t[k] = std::min(static_cast<double>(k) * dt, t_final);
  t[n] = t_final;
  return t;
}

namespace {

DiagnosticRow diagnose(const ParticleCloud& cloud, double t, const FlowModel& model,
                       const DiagnosticsConfig& cfg, const std::optional<DensityReconstruction>& recon,
                       std::size_t index) {
  DiagnosticRow row;
  row.t = t;
  row.mass = cloud.total_mass();
  if (recon) row.l3_est = lp_norm_estimate(cloud, 3.0, *recon);
  if (cfg.moduli) {
    const VelocityField f = model.field(cloud);
    const std::uint64_t s = derive_seed(cfg.seed, "diagnostics.moduli", index);
    row.lip_mod = modulus_estimate(f, ModulusMode::lipschitz, cfg.modulus_pairs, s,
                                   cfg.modulus_r_min, cfg.modulus_r_max);
    row.loglip_mod = modulus_estimate(f, ModulusMode::log_lipschitz, cfg.modulus_pairs, s,
                                      cfg.modulus_r_min, cfg.modulus_r_max);
  }
  if (cfg.reference) row.w1_vs_ref = wasserstein1(cloud, cfg.reference(t)).value;
  return row;
}

}  // namespace

Trajectory simulate(const ParticleCloud& cloud0, double t_final, const StepperConfig& stepper,
                    const FlowModel& model, const SimulateOptions& options) {
  const auto grid = time_grid(t_final, stepper.dt);
  if (stepper.kind == StepperConfig::Kind::taylor && !options.tracers.empty()) {
    throw Error(ErrorCode::invalid_parameter, "tracers need the rk4 stepper");
  }
  const std::size_t stride = std::max<std::size_t>(options.snapshot_stride, 1);
  const auto& dcfg = options.diagnostics;
  std::optional<DensityReconstruction> recon;
  if (dcfg.l3) {
    recon = dcfg.l3_bandwidth ? DensityReconstruction{*dcfg.l3_bandwidth}
                              : DensityReconstruction::default_for(cloud0);
  }

  Trajectory traj;
  ParticleCloud cur = cloud0;
  std::vector<Vec3> tracers = options.tracers;
  auto record = [&](std::size_t k) {
    traj.times.push_back(grid[k]);
    traj.diagnostics.push_back(diagnose(cur, grid[k], model, dcfg, recon, k));
    traj.snapshots.push_back(cur);
    traj.tracers.push_back(tracers);
  };
  record(0);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double h = grid[k] - grid[k - 1];
    if (stepper.kind == StepperConfig::Kind::rk4) {
      cur = step_rk4(cur, h, model, &tracers);
    } else {
      cur = advance_taylor(cur, h, h, stepper.order, model.kernel, &traj.taylor_halvings);
    }
    if (k % stride == 0 || k + 1 == grid.size()) record(k);
  }
  return traj;
}

void write_diagnostics_csv(const std::string& path, const std::vector<DiagnosticRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "t,mass,l3_est,lip_mod,loglip_mod,w1_vs_ref\n";
  auto field = [](const std::optional<double>& v) {
    char buf[32];
    if (!v) return std::string("nan");
    std::snprintf(buf, sizeof buf, "%.17g", *v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    os << field(r.t) << ',' << field(r.mass) << ',' << field(r.l3_est) << ',' << field(r.lip_mod)
       << ',' << field(r.loglip_mod) << ',' << field(r.w1_vs_ref) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Picard iteration

PicardResult picard_iterate(const ParticleCloud& cloud0, double t_final, double dt, int n_iters,
                            const FlowModel& model) {
  if (n_iters < 2) throw Error(ErrorCode::invalid_parameter, "Picard needs at least 2 iterations");
  PicardResult res;
  res.times = time_grid(t_final, dt);
  const std::size_t m_count = res.times.size();
  const Exclusion exclusion = model.kernel.singular() ? Exclusion::self : Exclusion::none;

  res.iterates.emplace_back(m_count, cloud0);
  for (int k = 1; k <= n_iters; ++k) {
    const auto& prev = res.iterates.back();
    std::vector<ParticleCloud> next;
    next.reserve(m_count);
    next.push_back(cloud0);
    for (std::size_t m = 1; m < m_count; ++m) {
      const VelocityField field = model.field(prev[m - 1]);
      ParticleCloud c = next.back();
      c.positions = rk4_step(c.positions, res.times[m] - res.times[m - 1],
                                    [&](std::span<const Vec3> x) { return field.eval_batch(x, exclusion); });
      next.push_back(std::move(c));
    }
    double d = 0.0;
    for (std::size_t m = 0; m < m_count; ++m) d = std::max(d, wasserstein1(prev[m], next[m]).value);
    res.distances.push_back(d);
    res.iterates.push_back(std::move(next));
  }
  for (std::size_t k = 0; k + 1 < res.distances.size(); ++k) {
    res.ratios.push_back(res.distances[k] > 0.0 ? res.distances[k + 1] / res.distances[k] : 0.0);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Stability

double fit_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

StabilityResult two_cloud_stability(const ParticleCloud& a, const ParticleCloud& b, double t_final,
                                    double dt, const FlowModel& model, const StabilityOptions& options) {
  const Trajectory ta = simulate(a, t_final, StepperConfig::rk4(dt), model);
  const Trajectory tb = simulate(b, t_final, StepperConfig::rk4(dt), model);
  StabilityResult res;
  res.times = ta.times;
  for (std::size_t m = 0; m < ta.times.size(); ++m) {
    res.w1.push_back(wasserstein1(ta.snapshots[m], tb.snapshots[m]).value);
    const VelocityField f = model.field(ta.snapshots[m]);
    res.lipschitz = std::max(
        res.lipschitz, modulus_estimate(f, ModulusMode::lipschitz, options.modulus_pairs,
                                        derive_seed(options.seed, "stability.modulus", m),
                                        options.modulus_r_min, options.modulus_r_max));
  }
  std::vector<double> fx, fy;
  for (std::size_t m = 0; m < res.times.size(); ++m) {
    if (res.w1[m] > 10.0 * options.solver_tolerance) {
      fx.push_back(res.times[m]);
      fy.push_back(std::log(res.w1[m]));
    }
  }
  res.fitted_rate = fit_slope(fx, fy);
  const double w0 = res.w1.front();
  for (std::size_t m = 0; m < res.times.size(); ++m) {
    const double env = w0 * std::exp(res.lipschitz * res.times[m]);
    if (env > 0.0) res.worst_envelope_ratio = std::max(res.worst_envelope_ratio, res.w1[m] / env);
    if (res.w1[m] > env * (1.0 + options.tolerance)) res.envelope_holds = false;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Hoelder flow probe

PairSeeds seed_pairs(const ParticleCloud& cloud, std::size_t n_bases, std::span<const double> deltas,
                     std::uint64_t seed) {
  Engine eng = make_engine(seed, "holder.pairs");
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const Vec3 c = cloud.centroid();
  const double radius = cloud.support_radius();
  PairSeeds out;
  for (std::size_t b = 0; b < n_bases; ++b) {
    Vec3 p;
    do {
      p = Vec3(unit(eng), unit(eng), unit(eng));
    } while (p.squaredNorm() > 1.0);
    p = c + radius * p;
    Vec3 u(normal(eng), normal(eng), normal(eng));
    u.normalize();
    for (double d : deltas) {
      out.tracers.push_back(p);
      out.tracers.push_back(p + d * u);
      out.initial_separation.push_back(d);
    }
  }
  return out;
}

double holder_exponent(const PairSeeds& seeds, std::span<const Vec3> tracers_at_t) {
  const std::size_t n = seeds.initial_separation.size();
  if (tracers_at_t.size() != 2 * n) {
    throw Error(ErrorCode::invalid_parameter, "tracer count does not match the pair seeds");
  }
  std::vector<double> x(n), y(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double sep = (tracers_at_t[2 * m + 1] - tracers_at_t[2 * m]).norm();
    if (!(sep > 0.0) || !std::isfinite(sep)) {
      throw Error(ErrorCode::degenerate_pair, "tracer pair " + std::to_string(m) + " collapsed");
    }
    x[m] = std::log(seeds.initial_separation[m]);
    y[m] = std::log(sep);
  }
  return fit_slope(x, y);
}

}  // namespace tstokes
