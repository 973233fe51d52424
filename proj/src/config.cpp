#include "tstokes/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace tstokes {

namespace {

const std::set<std::string> kScenarios = {"simulate", "stability", "analyticity", "picard",
                                          "hadamard", "control",   "bench"};

[[noreturn]] void fail(const std::string& origin, const YAML::Mark& mark, const std::string& msg) {
  std::string where = origin;
  if (!mark.is_null()) where += ":" + std::to_string(mark.line + 1);
  throw Error(ErrorCode::config_invalid, where + ": " + msg);
}

template <class T>
T convert(const YAML::Node& n) {
  return n.as<T>();
}

template <>
Vec3 convert<Vec3>(const YAML::Node& n) {
  if (!n.IsSequence() || n.size() != 3) throw YAML::BadConversion(n.Mark());
  return {n[0].as<double>(), n[1].as<double>(), n[2].as<double>()};
}

template <>
std::vector<ControlRegion> convert<std::vector<ControlRegion>>(const YAML::Node& n) {
  if (!n.IsSequence()) throw YAML::BadConversion(n.Mark());
  std::vector<ControlRegion> out;
  for (const auto& r : n) {
    if (!r.IsMap() || r.size() != 2 || !r["center"] || !r["radius"]) throw YAML::BadConversion(r.Mark());
    out.push_back({convert<Vec3>(r["center"]), r["radius"].as<double>()});
  }
  return out;
}

// A mapping whose keys must all be consumed.
class Section {
 public:
  Section(YAML::Node node, std::string path, const std::string& origin)
      : node_(std::move(node)), path_(std::move(path)), origin_(origin) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) fail(origin_, node_.Mark(), "'" + path_ + "' must be a mapping");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!node_ || node_.IsNull()) return;
    const YAML::Node v = node_[key];
    if (!v) return;
    try {
      out = convert<T>(v);
    } catch (const YAML::Exception&) {
      fail(origin_, v.Mark(), "bad value for key '" + qualified(key) + "'");
    }
  }

  Section sub(const std::string& key) {
    seen_.insert(key);
    YAML::Node v = node_ && node_.IsMap() ? node_[key] : YAML::Node();
    return Section(v, qualified(key), origin_);
  }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) fail(origin_, kv.first.Mark(), "unknown key '" + qualified(key) + "'");
    }
  }

 private:
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  YAML::Node node_;
  std::string path_;
  const std::string& origin_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorCode::config_invalid, msg);
}

}  // namespace

ParticleCloud ScenarioConfig::sample_cloud() const {
  return sample_uniform_ball(cloud.center, cloud.radius, cloud.n, seed);
}

void ScenarioConfig::validate() const {
  require(kScenarios.count(scenario) == 1, "scenario must be one of simulate, stability, analyticity, "
                                           "picard, hadamard, control, bench (got '" + scenario + "')");
  require(cloud.sampler == "uniform_ball", "cloud.sampler must be uniform_ball");
  require(cloud.n >= 1, "cloud.n must be >= 1");
  require(cloud.radius > 0.0, "cloud.radius must be positive");
  require(kernel.regularization_epsilon >= 0.0, "kernel.eps must be >= 0");
  require(kernel.derivative_constant_K >= 0.0, "kernel.K must be >= 0");
  require(backend.kind == BackendKind::direct || (backend.theta > 0.0 && backend.theta < 1.0),
          "backend.theta must lie in (0, 1)");
  require(backend.leaf_size >= 1, "backend.leaf_size must be >= 1");
  require(stepper.dt > 0.0, "stepper.dt must be positive");
  require(stepper.kind == StepperConfig::Kind::rk4 || (stepper.order >= 1 && stepper.order <= 40),
          "stepper.order must lie in [1, 40]");
  require(t_final > 0.0, "t_final must be positive");
  require(lp_exponent >= 1.0, "lp_exponent must be >= 1");
  require(simulate.snapshot_stride >= 1, "simulate.snapshot_stride must be >= 1");
  require(simulate.divergence_h > 0.0, "simulate.divergence_h must be positive");
  require(stability.r_min > 0.0 && stability.r_max > stability.r_min, "stability needs 0 < r_min < r_max");
  require(stability.holder_min_power >= 1 && stability.holder_max_power > stability.holder_min_power,
          "stability.holder powers must satisfy 1 <= min < max");
  require(stability.holder_dt > 0.0, "stability.holder_dt must be positive");
  require(analyticity.order >= 4 && analyticity.order <= 30, "analyticity.order must lie in [4, 30]");
  require(analyticity.k_lo >= 1 && analyticity.k_hi <= analyticity.order && analyticity.k_lo < analyticity.k_hi,
          "analyticity needs 1 <= k_lo < k_hi <= order");
  require(analyticity.t_check > 0.0 && analyticity.rk4_dt > 0.0, "analyticity times must be positive");
  require(picard.iterations >= 2, "picard.iterations must be >= 2");
  require(!picard.t_sweep.empty(), "picard.t_sweep must not be empty");
  for (double t : picard.t_sweep) require(t > 0.0, "picard.t_sweep entries must be positive");
  require(hadamard.boundary_points >= 3, "hadamard.boundary_points must be >= 3");
  require(!hadamard.center_eps.empty(), "hadamard.center_eps must not be empty");
  for (double e : hadamard.center_eps) require(e > 0.0, "hadamard.center_eps entries must be positive");
  require(control.target_delta > 0.0 && control.covering_radius > 0.0 && control.horizon > 0.0,
          "control.target_delta, covering_radius and horizon must be positive");
  require(!control.regions.empty(), "control.regions must not be empty");
  for (const auto& r : control.regions) require(r.radius > 0.0, "control.regions radii must be positive");
  require(control.blob_epsilon >= 0.0, "control.blob_epsilon must be >= 0");
  require(control.dt > 0.0 && control.follow_dt > 0.0, "control time steps must be positive");
  require(control.steps_per_leg >= 1, "control.steps_per_leg must be >= 1");
  for (double s : control.time_scales) require(s > 0.0, "control.time_scales entries must be positive");
  require(!bench.sizes.empty(), "bench.sizes must not be empty");
}

ScenarioConfig parse_config(const std::string& text, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    fail(origin, e.mark, "syntax error: " + e.msg);
  }
  if (!root.IsMap()) fail(origin, root.Mark(), "top level must be a mapping");

  ScenarioConfig c;
  Section top(root, "", origin);
  top.get("scenario", c.scenario);
  top.get("seed", c.seed);
  top.get("output_dir", c.output_dir);
  top.get("lp_exponent", c.lp_exponent);
  top.get("t_final", c.t_final);

  Section cloud = top.sub("cloud");
  cloud.get("sampler", c.cloud.sampler);
  cloud.get("n", c.cloud.n);
  cloud.get("radius", c.cloud.radius);
  cloud.get("center", c.cloud.center);
  cloud.finish();

  Section kernel = top.sub("kernel");
  kernel.get("eps", c.kernel.regularization_epsilon);
  kernel.get("K", c.kernel.derivative_constant_K);
  kernel.finish();

  Section backend = top.sub("backend");
  std::string kind = "direct";
  backend.get("kind", kind);
  if (kind == "direct") {
    c.backend.kind = BackendKind::direct;
  } else if (kind == "treecode") {
    c.backend.kind = BackendKind::treecode;
  } else {
    fail(origin, root["backend"]["kind"].Mark(), "backend.kind must be direct or treecode");
  }
  backend.get("theta", c.backend.theta);
  backend.get("leaf_size", c.backend.leaf_size);
  backend.get("quadrupole", c.backend.quadrupole);
  backend.finish();

  Section stepper = top.sub("stepper");
  std::string skind = "rk4";
  stepper.get("kind", skind);
  if (skind == "rk4") {
    c.stepper.kind = StepperConfig::Kind::rk4;
  } else if (skind == "taylor") {
    c.stepper.kind = StepperConfig::Kind::taylor;
  } else {
    fail(origin, root["stepper"]["kind"].Mark(), "stepper.kind must be rk4 or taylor");
  }
  stepper.get("dt", c.stepper.dt);
  stepper.get("order", c.stepper.order);
  stepper.finish();

  Section sim = top.sub("simulate");
  sim.get("l3", c.simulate.l3);
  sim.get("l3_tolerance", c.simulate.l3_tolerance);
  sim.get("moduli", c.simulate.moduli);
  sim.get("snapshot_stride", c.simulate.snapshot_stride);
  sim.get("write_snapshots", c.simulate.write_snapshots);
  sim.get("divergence_probes", c.simulate.divergence_probes);
  sim.get("divergence_h", c.simulate.divergence_h);
  sim.get("divergence_tolerance", c.simulate.divergence_tolerance);
  sim.finish();

  Section st = top.sub("stability");
  st.get("perturbation", c.stability.perturbation);
  st.get("tolerance", c.stability.tolerance);
  st.get("modulus_pairs", c.stability.modulus_pairs);
  st.get("r_min", c.stability.r_min);
  st.get("r_max", c.stability.r_max);
  st.get("holder", c.stability.holder);
  st.get("holder_bases", c.stability.holder_bases);
  st.get("holder_min_power", c.stability.holder_min_power);
  st.get("holder_max_power", c.stability.holder_max_power);
  st.get("holder_eps", c.stability.holder_epsilon);
  st.get("holder_n", c.stability.holder_n);
  st.get("holder_dt", c.stability.holder_dt);
  st.finish();

  Section an = top.sub("analyticity");
  an.get("order", c.analyticity.order);
  an.get("t_check", c.analyticity.t_check);
  an.get("rk4_dt", c.analyticity.rk4_dt);
  an.get("match_tolerance", c.analyticity.match_tolerance);
  an.get("k_lo", c.analyticity.k_lo);
  an.get("k_hi", c.analyticity.k_hi);
  an.get("spread_max", c.analyticity.spread_max);
  an.finish();

  Section pi = top.sub("picard");
  pi.get("iterations", c.picard.iterations);
  pi.get("t_sweep", c.picard.t_sweep);
  pi.finish();

  Section ha = top.sub("hadamard");
  ha.get("boundary_points", c.hadamard.boundary_points);
  ha.get("residual_tolerance", c.hadamard.residual_tolerance);
  ha.get("drift_tolerance", c.hadamard.drift_tolerance);
  ha.get("center_n", c.hadamard.center_n);
  ha.get("center_eps", c.hadamard.center_eps);
  ha.get("center_tolerance", c.hadamard.center_tolerance);
  ha.finish();

  Section co = top.sub("control");
  co.get("target_delta", c.control.target_delta);
  co.get("covering_radius", c.control.covering_radius);
  co.get("regions", c.control.regions);
  co.get("horizon", c.control.horizon);
  co.get("blob_eps", c.control.blob_epsilon);
  co.get("steps_per_leg", c.control.steps_per_leg);
  co.get("dt", c.control.dt);
  co.get("kinematic_tolerance", c.control.kinematic_tolerance);
  co.get("self_induced_tolerance", c.control.self_induced_tolerance);
  co.get("reversibility_tolerance", c.control.reversibility_tolerance);
  co.get("time_scales", c.control.time_scales);
  co.get("follow_dt", c.control.follow_dt);
  co.get("follow_tolerance", c.control.follow_tolerance);
  co.get("background_n", c.control.background_n);
  co.finish();

  Section be = top.sub("bench");
  be.get("sizes", c.bench.sizes);
  be.get("rel_err_max", c.bench.rel_err_max);
  be.get("speedup_soft", c.bench.speedup_soft);
  be.get("speedup_floor", c.bench.speedup_floor);
  be.finish();

  top.finish();
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::config_invalid, origin + ": " + e.what());
  }
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::config_invalid, "cannot open config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace tstokes
