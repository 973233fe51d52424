#include "tstokes/scenario.hpp"

#include "tstokes/rng.hpp"
#include "tstokes/wasserstein.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

namespace tstokes {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Report

Report::Report(const ScenarioConfig& config) {
  data_["scenario"] = config.scenario;
  data_["seed"] = config.seed;
  data_["n"] = config.cloud.n;
  data_["eps"] = config.kernel.regularization_epsilon;
  data_["mu"] = config.mu();
  data_["measurements"] = nlohmann::json::object();
  data_["assertions"] = nlohmann::json::array();
}

bool Report::record(const std::string& name, double value, const char* relation, double limit,
                    bool ok, bool soft) {
  nlohmann::json a;
  a["name"] = name;
  a["value"] = std::isfinite(value) ? nlohmann::json(value) : nlohmann::json(nullptr);
  a["relation"] = relation;
  a["limit"] = limit;
  a["passed"] = ok;
  a["soft"] = soft;
  data_["assertions"].push_back(std::move(a));
  return ok;
}

bool Report::at_most(const std::string& name, double value, double limit, bool soft) {
  return record(name, value, "<=", limit, value <= limit, soft);
}

bool Report::at_least(const std::string& name, double value, double limit, bool soft) {
  return record(name, value, ">=", limit, value >= limit, soft);
}

bool Report::holds(const std::string& name, bool condition, bool soft) {
  return record(name, condition ? 1.0 : 0.0, "==", 1.0, condition, soft);
}

bool Report::passed() const {
  bool any = false;
  for (const auto& a : data_["assertions"]) {
    if (a["soft"].get<bool>()) continue;
    any = true;
    if (!a["passed"].get<bool>()) return false;
  }
  return any;
}

bool Report::assertion_passed(const std::string& name) const {
  for (const auto& a : data_["assertions"]) {
    if (a["name"] == name) return a["passed"].get<bool>();
  }
  throw Error(ErrorCode::invalid_parameter, "no assertion named " + name);
}

void Report::write(const fs::path& path) const {
  nlohmann::json j = data_;
  j["passed"] = passed();
  std::ofstream os(path);
  os << std::setw(2) << j << '\n';
}

// ---------------------------------------------------------------------------
// Helpers

namespace {

std::ofstream open_csv(const fs::path& path, const char* header) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::invalid_parameter, "cannot write " + path.string());
  os << std::setprecision(17) << header << '\n';
  return os;
}

std::string snapshot_name(std::size_t m) {
  std::ostringstream ss;
  ss << "snapshot_" << std::setw(5) << std::setfill('0') << m << ".csv";
  return ss.str();
}

nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vec3 uniform_in_ball(Engine& eng, const Vec3& c, double r) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Vec3 p;
  do {
    p = Vec3(unit(eng), unit(eng), unit(eng));
  } while (p.squaredNorm() > 1.0);
  return c + r * p;
}

Vec3 uniform_on_sphere(Engine& eng) {
  std::normal_distribution<double> normal;
  Vec3 n;
  do {
    n = Vec3(normal(eng), normal(eng), normal(eng));
  } while (n.squaredNorm() < 1e-24);
  return n.normalized();
}

double max_displacement(const ParticleCloud& a, const ParticleCloud& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, (a.positions[i] - b.positions[i]).norm());
  return worst;
}

}  // namespace

// ---------------------------------------------------------------------------
// simulate

Report scenario_simulate(const ScenarioConfig& cfg, const fs::path& out) {
  Report rep(cfg);
  auto& m = rep.measurements();
  const ParticleCloud cloud = cfg.sample_cloud();
  const FlowModel model = cfg.model();
  const auto& params = cfg.simulate;

  SimulateOptions opts;
  opts.snapshot_stride = params.snapshot_stride;
  opts.diagnostics.l3 = params.l3;
  opts.diagnostics.moduli = params.moduli;
  opts.diagnostics.modulus_pairs = cfg.stability.modulus_pairs;
  opts.diagnostics.modulus_r_min = cfg.stability.r_min;
  opts.diagnostics.modulus_r_max = cfg.stability.r_max;
  opts.diagnostics.seed = cfg.seed;
  const Trajectory traj = simulate(cloud, cfg.t_final, cfg.stepper, model, opts);

  if (params.write_snapshots) {
    for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
      write_cloud_csv((out / snapshot_name(k)).string(), traj.snapshots[k]);
    }
  }
  write_diagnostics_csv((out / "diagnostics.csv").string(), traj.diagnostics);

  const std::size_t steps = time_grid(cfg.t_final, cfg.stepper.dt).size() - 1;
  m["steps"] = steps;
  m["snapshots"] = traj.snapshots.size();
  m["taylor_halvings"] = traj.taylor_halvings;
  const double mass0 = cloud.total_mass();
  double mass_drift = 0.0;
  for (const auto& row : traj.diagnostics) mass_drift = std::max(mass_drift, std::abs(row.mass - mass0));
  m["mass_drift"] = mass_drift;
  m["centroid_shift"] = vec_json(traj.snapshots.back().centroid() - cloud.centroid());
  rep.at_most("mass_conserved", mass_drift, 0.0);

  if (params.l3) {
    const double l30 = *traj.diagnostics.front().l3_est;
    double drift = 0.0;
    for (const auto& row : traj.diagnostics) drift = std::max(drift, std::abs(*row.l3_est / l30 - 1.0));
    m["l3_initial"] = l30;
    m["l3_final"] = *traj.diagnostics.back().l3_est;
    m["l3_drift"] = drift;
    rep.at_most("l3_drift", drift, params.l3_tolerance);
  }

  if (params.divergence_probes > 0) {
    const VelocityField field = model.field(cloud);
    const double lip = modulus_estimate(field, ModulusMode::lipschitz, cfg.stability.modulus_pairs,
                                        derive_seed(cfg.seed, "simulate.lipschitz"), cfg.stability.r_min,
                                        cfg.stability.r_max);
    // Probes keep half a mean particle spacing (and at least 10 h) from every source.
    const double spacing = cloud.support_radius() * std::cbrt(4.0 * kPi / 3.0 / static_cast<double>(cloud.size()));
    const double clearance = std::max(10.0 * params.divergence_h, 0.5 * spacing);
    Engine eng = make_engine(cfg.seed, "simulate.divergence");
    const Vec3 c = cloud.centroid();
    const double r = 1.25 * std::max(cloud.support_radius(), 1e-12);
    double worst = 0.0;
    std::size_t placed = 0;
    for (std::size_t tries = 0; placed < params.divergence_probes && tries < 1000 * params.divergence_probes; ++tries) {
      const Vec3 x = uniform_in_ball(eng, c, r);
      bool clear = true;
      for (const auto& p : cloud.positions) {
        if ((x - p).norm() < clearance) {
          clear = false;
          break;
        }
      }
      if (!clear) continue;
      worst = std::max(worst, std::abs(divergence_probe(field, x, params.divergence_h)));
      ++placed;
    }
    m["lipschitz"] = lip;
    m["divergence_max"] = worst;
    m["divergence_probes"] = placed;
    m["divergence_clearance"] = clearance;
    rep.holds("divergence_probes_placed", placed == params.divergence_probes);
    rep.at_most("divergence_free", worst, params.divergence_tolerance * lip);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// stability (translated clouds plus the pair-separation probe)

Report scenario_stability(const ScenarioConfig& cfg, const fs::path& out) {
  Report rep(cfg);
  auto& m = rep.measurements();
  const auto& params = cfg.stability;
  const FlowModel model = cfg.model();
  const ParticleCloud a = cfg.sample_cloud();
  const ParticleCloud b = translated(a, params.perturbation);

  StabilityOptions so;
  so.tolerance = params.tolerance;
  so.modulus_pairs = params.modulus_pairs;
  so.modulus_r_min = params.r_min;
  so.modulus_r_max = params.r_max;
  so.seed = derive_seed(cfg.seed, "stability.lipschitz");
  const StabilityResult res = two_cloud_stability(a, b, cfg.t_final, cfg.stepper.dt, model, so);
  {
    auto os = open_csv(out / "stability.csv", "t,w1,envelope");
    for (std::size_t k = 0; k < res.times.size(); ++k) {
      os << res.times[k] << ',' << res.w1[k] << ',' << res.w1.front() * std::exp(res.lipschitz * res.times[k])
         << '\n';
    }
  }
  m["w1_initial"] = res.w1.front();
  m["w1_final"] = res.w1.back();
  m["lipschitz"] = res.lipschitz;
  m["fitted_rate"] = res.fitted_rate;
  m["worst_envelope_ratio"] = res.worst_envelope_ratio;
  rep.at_most("w1_envelope", res.worst_envelope_ratio, 1.0 + params.tolerance);
  rep.at_most("fitted_rate", res.fitted_rate, res.lipschitz * (1.0 + params.tolerance));

  if (params.holder) {
    const ParticleCloud hc =
        sample_uniform_ball(cfg.cloud.center, cfg.cloud.radius, params.holder_n, derive_seed(cfg.seed, "holder.cloud"));
    const FlowModel hmodel{KernelConfig{params.holder_epsilon, cfg.kernel.derivative_constant_K}, cfg.backend};
    std::vector<double> deltas;
    for (int k = params.holder_min_power; k <= params.holder_max_power; ++k) deltas.push_back(std::ldexp(1.0, -k));
    const PairSeeds seeds = seed_pairs(hc, params.holder_bases, deltas, cfg.seed);
    SimulateOptions opts;
    opts.tracers = seeds.tracers;
    const Trajectory traj = simulate(hc, cfg.t_final, StepperConfig::rk4(params.holder_dt), hmodel, opts);

    // Log-Lipschitz modulus: largest over the initial and final fields.
    const auto loglip_of = [&](const ParticleCloud& c, const char* stream) {
      return modulus_estimate(hmodel.field(c), ModulusMode::log_lipschitz, params.modulus_pairs,
                              derive_seed(cfg.seed, stream), params.r_min, params.r_max);
    };
    const double c_ll = std::max(loglip_of(traj.snapshots.front(), "holder.loglip.initial"),
                                 loglip_of(traj.snapshots.back(), "holder.loglip.final"));
    double worst_margin = std::numeric_limits<double>::infinity();
    double stretch_min = 1.0, stretch_max = 1.0;
    double r0 = 0.0;
    auto os = open_csv(out / "holder.csv", "t,exponent,envelope,stretch_min,stretch_max");
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
      const double t = traj.times[k];
      const double r = holder_exponent(seeds, traj.tracers[k]);
      const double env = std::exp(-c_ll * t) - 0.1;
      if (k == 0) r0 = r;
      worst_margin = std::min(worst_margin, r - env);
      double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
      for (std::size_t p = 0; p < seeds.initial_separation.size(); ++p) {
        const double q = (traj.tracers[k][2 * p + 1] - traj.tracers[k][2 * p]).norm() / seeds.initial_separation[p];
        lo = std::min(lo, q);
        hi = std::max(hi, q);
      }
      stretch_min = std::min(stretch_min, lo);
      stretch_max = std::max(stretch_max, hi);
      os << t << ',' << r << ',' << env << ',' << lo << ',' << hi << '\n';
    }
    m["holder_loglip"] = c_ll;
    m["holder_exponent_initial"] = r0;
    m["holder_envelope_margin"] = worst_margin;
    m["holder_stretch_min"] = stretch_min;
    m["holder_stretch_max"] = stretch_max;
    rep.at_most("holder_initial_exponent", std::abs(r0 - 1.0), 0.02);
    rep.at_least("holder_envelope", worst_margin, 0.0);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// analyticity

Report scenario_analyticity(const ScenarioConfig& cfg, const fs::path& out) {
  Report rep(cfg);
  auto& m = rep.measurements();
  const auto& params = cfg.analyticity;
  const ParticleCloud cloud = cfg.sample_cloud();
  const TrajectoryJets jets = taylor_coefficients(cloud, params.order, cfg.kernel);
  const AnalyticityReport ar = analyticity_report(jets, true);

  {
    auto os = open_csv(out / "coefficients.csv", "k,max_abs_ck,r_sup,bound");
    for (int k = 1; k <= params.order; ++k) {
      double cmax = 0.0;
      for (const auto& c : jets.coeffs) cmax = std::max(cmax, c[k].norm());
      const double bound =
          std::abs(binomial_half(k)) * std::pow(ar.c0, k) * std::pow(ar.c1, k - 1);
      os << k << ',' << cmax << ',' << ar.r_sup[k] << ',' << bound << '\n';
    }
  }

  std::size_t halvings = 0;
  const ParticleCloud taylor = advance_taylor(cloud, params.t_check, cfg.stepper.dt, params.order, cfg.kernel, &halvings);
  SimulateOptions opts;
  opts.snapshot_stride = std::numeric_limits<std::size_t>::max();
  const Trajectory fine = simulate(cloud, params.t_check, StepperConfig::rk4(params.rk4_dt),
                                   FlowModel{cfg.kernel, BackendConfig::direct()}, opts);
  const double mismatch = max_displacement(taylor, fine.snapshots.back());
  const double spread = ratio_spread(ar.r_sup, params.k_lo, params.k_hi);

  m["taylor_vs_rk4"] = mismatch;
  m["taylor_halvings"] = halvings;
  m["ratio_spread"] = spread;
  m["radius"] = ar.radius;
  m["c0"] = ar.c0;
  m["c1"] = ar.c1;
  m["derivative_constant_K"] = cfg.kernel.derivative_constant();
  rep.at_most("taylor_matches_rk4", mismatch, params.match_tolerance);
  rep.at_most("root_ratio_spread", spread, params.spread_max);
  rep.holds("coefficient_bound", ar.fitted && ar.bound_holds);
  return rep;
}

// ---------------------------------------------------------------------------
// picard

Report scenario_picard(const ScenarioConfig& cfg, const fs::path& out) {
  Report rep(cfg);
  auto& m = rep.measurements();
  const auto& params = cfg.picard;
  const ParticleCloud cloud = cfg.sample_cloud();
  const FlowModel model = cfg.model();

  std::vector<double> sweep = params.t_sweep;
  std::sort(sweep.begin(), sweep.end());
  auto os = open_csv(out / "picard.csv", "t_final,k,d_k,ratio");
  std::vector<double> worst_ratio;
  std::vector<std::vector<double>> all_ratios;
  nlohmann::json rows = nlohmann::json::array();
  for (double t : sweep) {
    const PicardResult pr = picard_iterate(cloud, t, cfg.stepper.dt, params.iterations, model);
    for (std::size_t k = 0; k < pr.distances.size(); ++k) {
      os << t << ',' << k + 1 << ',' << pr.distances[k] << ',';
      if (k < pr.ratios.size()) {
        os << pr.ratios[k];
      } else {
        os << "nan";
      }
      os << '\n';
    }
    worst_ratio.push_back(*std::max_element(pr.ratios.begin(), pr.ratios.end()));
    all_ratios.push_back(pr.ratios);
    rows.push_back({{"t_final", t}, {"distances", pr.distances}, {"ratios", pr.ratios}});
  }
  m["sweep"] = rows;

  // Threshold: the longest horizon at which every ratio is below one.
  std::optional<std::size_t> star;
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    if (worst_ratio[i] < 1.0) star = i;
  }
  std::size_t decreases = 0;
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    if (worst_ratio[i] < worst_ratio[i - 1]) ++decreases;
  }
  m["worst_ratio"] = worst_ratio;
  m["sweep_decreases"] = decreases;
  rep.holds("contraction_threshold_found", star.has_value());
  rep.at_most("ratio_increases_with_horizon", static_cast<double>(decreases), 0.0);
  if (star) {
    m["t_threshold"] = sweep[*star];
    const auto& ratios = all_ratios[*star];
    for (std::size_t k = 0; k < ratios.size(); ++k) {
      rep.at_most("d" + std::to_string(k + 2) + "_over_d" + std::to_string(k + 1), ratios[k],
                  std::nextafter(1.0, 0.0));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// hadamard

Report scenario_hadamard(const ScenarioConfig& cfg, const fs::path& out) {
  Report rep(cfg);
  auto& m = rep.measurements();
  const auto& params = cfg.hadamard;
  const FlowModel model = cfg.model();
  const ParticleCloud cloud = cfg.sample_cloud();
  const VelocityField field = model.field(cloud);
  const Vec3 center = cfg.cloud.center;
  const double radius = cfg.cloud.radius;

  // Least-squares translation speed from the boundary-normal condition.
  Engine eng = make_engine(cfg.seed, "hadamard.boundary");
  std::vector<Vec3> normals(params.boundary_points), points(params.boundary_points);
  for (std::size_t k = 0; k < normals.size(); ++k) {
    normals[k] = uniform_on_sphere(eng);
    points[k] = center + radius * normals[k];
  }
  const std::vector<Vec3> u = field.eval_batch(points, Exclusion::none);
  Mat3 a = Mat3::Zero();
  Vec3 rhs = Vec3::Zero();
  for (std::size_t k = 0; k < normals.size(); ++k) {
    a += normals[k] * normals[k].transpose();
    rhs += normals[k] * u[k].dot(normals[k]);
  }
  const Vec3 v = a.ldlt().solve(rhs);
  double rss = 0.0;
  for (std::size_t k = 0; k < normals.size(); ++k) {
    const double r = (u[k] - v).dot(normals[k]);
    rss += r * r;
  }
  const double residual = std::sqrt(rss / static_cast<double>(normals.size())) / v.norm();
  m["v_hat"] = vec_json(v);
  m["speed"] = v.norm();
  m["normal_residual"] = residual;
  rep.at_most("normal_residual", residual, params.residual_tolerance);

  // Shape drift over the time needed to settle one radius.
  const double t_settle = radius / v.norm();
  SimulateOptions opts;
  opts.snapshot_stride = std::numeric_limits<std::size_t>::max();
  const Trajectory traj = simulate(cloud, t_settle, cfg.stepper, model, opts);
  const ParticleCloud& last = traj.snapshots.back();
  const double drift = wasserstein1(last, translated(cloud, v * t_settle)).value;
  const double drift_centroid = wasserstein1(last, translated(cloud, last.centroid() - cloud.centroid())).value;
  write_cloud_csv((out / "settled.csv").string(), last);
  m["t_settle"] = t_settle;
  m["shape_drift"] = drift;
  m["shape_drift_centroid_aligned"] = drift_centroid;
  m["centroid_lag"] = (last.centroid() - cloud.centroid() - v * t_settle).norm();
  // W1 between two independent samples of the same ball: the distance a full
  // internal reshuffle of the particles would produce.
  const ParticleCloud resample =
      sample_uniform_ball(center, radius, cloud.size(), derive_seed(cfg.seed, "hadamard.resample"));
  m["shape_drift_resample_floor"] = wasserstein1(cloud, resample).value;
  rep.at_most("shape_drift", drift, params.drift_tolerance * radius);

  // Center velocity of fresh samples as eps shrinks; the mean-field value is -e3 / (4 pi).
  const double ideal = 1.0 / (4.0 * kPi);
  const ParticleCloud big = sample_uniform_ball(center, radius, params.center_n, derive_seed(cfg.seed, "hadamard.center"));
  auto os = open_csv(out / "hadamard.csv", "eps,n,center_vz,rel_err");
  double last_err = std::numeric_limits<double>::infinity();
  nlohmann::json sweep = nlohmann::json::array();
  for (double e : params.center_eps) {
    const VelocityField f(big, KernelConfig{e, cfg.kernel.derivative_constant_K}, BackendConfig::direct());
    const Vec3 uc = f.eval(center);
    // Scaled to a unit-radius ball: u ~ 1 / radius.
    const double vz = uc.z() * radius;
    last_err = (uc * radius + Vec3(0.0, 0.0, ideal)).norm() / ideal;
    os << e << ',' << big.size() << ',' << vz << ',' << last_err << '\n';
    sweep.push_back({{"eps", e}, {"center_vz", vz}, {"rel_err", last_err}});
  }
  m["center_sweep"] = sweep;
  m["center_ideal"] = -ideal;
  rep.at_most("center_velocity", last_err, params.center_tolerance);
  return rep;
}

// ---------------------------------------------------------------------------
// control

Report scenario_control(const ScenarioConfig& cfg, const fs::path& out) {
  Report rep(cfg);
  auto& m = rep.measurements();
  const auto& params = cfg.control;
  const ParticleCloud cloud = cfg.sample_cloud();

  // Curve following across the cloud, clear of the first region.
  {
    const Vec3 c = cfg.cloud.center;
    const double r = cfg.cloud.radius;
    const Curve gamma({c + Vec3(0.0, -0.5 * r, 0.0), c + Vec3(0.0, 0.0, 0.5 * r), c + Vec3(0.0, 0.5 * r, 0.0)}, 0.0, 1.0);
    const FollowResult free = follow_curve(gamma(0.0), gamma, params.regions.front(), nullptr, params.follow_dt);
    const double rel = free.max_deviation / gamma.length();
    const ParticleCloud bg = sample_uniform_ball(c, r, params.background_n, derive_seed(cfg.seed, "control.background"));
    const VelocityField bg_field = cfg.model().field(bg);
    const FollowResult with_bg = follow_curve(gamma(0.0), gamma, params.regions.front(), &bg_field, params.follow_dt);
    m["follow_path_length"] = gamma.length();
    m["follow_deviation"] = rel;
    m["follow_deviation_background"] = with_bg.max_deviation / gamma.length();
    rep.at_most("curve_following", rel, params.follow_tolerance);
  }

  const Ball target{Vec3::Zero(), 2.0 * params.target_delta};
  const auto covering = greedy_covering(cloud, params.covering_radius);
  PlanOptions po;
  po.eps = params.blob_epsilon;
  po.steps_per_leg = params.steps_per_leg;
  const ControlPlan plan = staged_transport_plan(cloud, covering, target, params.horizon, params.regions, po);
  {
    std::ofstream os(out / "plan.json");
    os << plan.to_json() << '\n';
  }
  m["stages"] = plan.stages.size();

  std::size_t outside = 0;
  for (const auto& st : plan.stages) {
    for (const auto& f : st.schedule) {
      if (f.force.isZero(0.0)) continue;
      const bool inside = std::any_of(params.regions.begin(), params.regions.end(),
                                      [&](const ControlRegion& r) { return r.contains(f.location); });
      if (!inside) ++outside;
    }
  }
  m["forces_outside_regions"] = outside;
  rep.at_most("forces_inside_regions", static_cast<double>(outside), 0.0);

  ExecuteOptions eo;
  eo.dt = params.dt;
  eo.model = cfg.model();

  eo.absorb = false;
  const ExecutionResult rev = execute_control(cloud, plan, eo);
  double worst = 0.0;
  for (const auto& snap : rev.boundary_snapshots) worst = std::max(worst, max_displacement(snap, cloud));
  m["reversibility"] = worst / params.covering_radius;
  rep.at_most("reversibility", worst / params.covering_radius, params.reversibility_tolerance);

  eo.absorb = true;
  const ExecutionResult kin = execute_control(cloud, plan, eo);
  write_ledger_csv((out / "ledger.csv").string(), kin.ledger);
  std::size_t stray = 0;
  for (const auto& e : kin.events) {
    if (!target.contains(e.position)) ++stray;
  }
  bool monotone = true;
  for (std::size_t k = 1; k < kin.ledger.size(); ++k) {
    if (kin.ledger[k].remaining_mass > kin.ledger[k - 1].remaining_mass) monotone = false;
  }
  m["kinematic_remaining"] = kin.remaining_mass;
  m["kinematic_absorbed"] = kin.absorbed_mass;
  m["kinematic_blob_collisions"] = kin.blob_collisions;
  m["warnings"] = kin.warnings;
  rep.at_most("kinematic_remaining", kin.remaining_mass, params.kinematic_tolerance);
  rep.at_most("absorptions_inside_target", static_cast<double>(stray), 0.0);
  rep.holds("ledger_monotone", monotone);
  rep.at_most("mass_balance", std::abs(kin.remaining_mass + kin.absorbed_mass - cloud.total_mass()), 0.0);

  // Self-induced sedimentation under time-compressed plans.
  eo.self_induction = true;
  auto os = open_csv(out / "control_sweep.csv", "scale,remaining_mass,absorbed_mass,blob_collisions");
  std::vector<double> scales = params.time_scales;
  std::sort(scales.begin(), scales.end(), std::greater<>());
  double smallest_remaining = std::numeric_limits<double>::infinity();
  std::optional<double> threshold;
  nlohmann::json sweep = nlohmann::json::array();
  for (double s : scales) {
    eo.dt = params.dt * s;
    const ExecutionResult r = execute_control(cloud, plan.time_scaled(s), eo);
    os << s << ',' << r.remaining_mass << ',' << r.absorbed_mass << ',' << r.blob_collisions << '\n';
    sweep.push_back({{"scale", s}, {"remaining_mass", r.remaining_mass}});
    smallest_remaining = r.remaining_mass;
    if (r.remaining_mass <= params.self_induced_tolerance && !threshold) threshold = s;
    if (s == scales.back()) write_ledger_csv((out / "ledger_self_induced.csv").string(), r.ledger);
  }
  m["self_induced_sweep"] = sweep;
  m["self_induced_threshold_scale"] = threshold ? nlohmann::json(*threshold) : nlohmann::json(nullptr);
  if (!scales.empty()) rep.at_most("self_induced_remaining", smallest_remaining, params.self_induced_tolerance);
  return rep;
}

// ---------------------------------------------------------------------------
// bench

Report scenario_bench(const ScenarioConfig& cfg, const fs::path& out) {
  Report rep(cfg);
  auto& m = rep.measurements();
  const auto& params = cfg.bench;
  const BackendConfig tree =
      BackendConfig::treecode(cfg.backend.theta, cfg.backend.leaf_size, cfg.backend.quadrupole);
  auto os = open_csv(out / "bench.csv", "N,backend,theta,seconds,rel_err");

  std::vector<double> log_n, log_direct;
  double worst_err = 0.0, speedup = 0.0, first_seconds = 0.0;
  std::size_t largest = 0;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t n : params.sizes) {
    const ParticleCloud cloud =
        sample_uniform_ball(cfg.cloud.center, cfg.cloud.radius, n, derive_seed(cfg.seed, "bench", n));
    auto t0 = std::chrono::steady_clock::now();
    const std::vector<Vec3> ud = VelocityField(cloud, cfg.kernel, BackendConfig::direct()).at_sources();
    const double td = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const std::vector<Vec3> ut = VelocityField(cloud, cfg.kernel, tree).at_sources();
    const double tt = seconds_since(t0);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      num += (ut[i] - ud[i]).squaredNorm();
      den += ud[i].squaredNorm();
    }
    const double err = std::sqrt(num / den);
    os << n << ",direct,0," << td << ",0\n";
    os << n << ",treecode," << tree.theta << ',' << tt << ',' << err << '\n';
    rows.push_back({{"n", n}, {"direct_seconds", td}, {"treecode_seconds", tt}, {"rel_err", err}});
    worst_err = std::max(worst_err, err);
    if (n >= largest) {
      largest = n;
      speedup = td / tt;
    }
    if (first_seconds == 0.0) first_seconds = td + tt;
    log_n.push_back(std::log(static_cast<double>(n)));
    log_direct.push_back(std::log(td));
  }
  const double slope = fit_slope(log_n, log_direct);
  m["sizes"] = rows;
  m["rel_err_max"] = worst_err;
  m["speedup_largest"] = speedup;
  m["direct_loglog_slope"] = slope;
  rep.at_most("rel_err", worst_err, params.rel_err_max);
  rep.at_least("speedup_floor", speedup, params.speedup_floor);
  rep.at_least("speedup_target", speedup, params.speedup_soft, true);
  rep.at_most("smallest_size_runtime", first_seconds, 60.0, true);
  rep.at_most("direct_scaling_slope_error", std::abs(slope - 2.0), 0.3, true);
  return rep;
}

// ---------------------------------------------------------------------------

Report run_scenario(const ScenarioConfig& cfg, const fs::path& out) {
  cfg.validate();
  fs::create_directories(out);
  Report rep = [&] {
    if (cfg.scenario == "simulate") return scenario_simulate(cfg, out);
    if (cfg.scenario == "stability") return scenario_stability(cfg, out);
    if (cfg.scenario == "analyticity") return scenario_analyticity(cfg, out);
    if (cfg.scenario == "picard") return scenario_picard(cfg, out);
    if (cfg.scenario == "hadamard") return scenario_hadamard(cfg, out);
    if (cfg.scenario == "control") return scenario_control(cfg, out);
    return scenario_bench(cfg, out);
  }();
  rep.write(out / "report.json");
  return rep;
}

}  // namespace tstokes
