#pragma once

#include "tstokes/control.hpp"
#include "tstokes/integrator.hpp"
#include "tstokes/kernel.hpp"
#include "tstokes/velocity.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tstokes {

struct CloudSettings {
  std::string sampler = "uniform_ball";
  std::size_t n = 256;
  double radius = 1.0;
  Vec3 center = Vec3::Zero();
};

struct SimulateSettings {
  bool l3 = true;
  double l3_tolerance = 0.02;
  bool moduli = false;
  std::size_t snapshot_stride = 1;
  bool write_snapshots = true;
  std::size_t divergence_probes = 100;
  double divergence_h = 1e-3;
  double divergence_tolerance = 1e-4;  // times the Lipschitz modulus
};

struct StabilitySettings {
  Vec3 perturbation{1e-3, 0.0, 0.0};
  double tolerance = 0.1;
  std::size_t modulus_pairs = 4000;
  double r_min = 1e-3;
  double r_max = 0.5;
  // Hoelder pair probe
  bool holder = true;
  std::size_t holder_bases = 16;
  int holder_min_power = 3;   // separations 2^-min .. 2^-max
  int holder_max_power = 10;
  double holder_epsilon = 0.0;  // kernel used for the probe
  std::size_t holder_n = 512;
  double holder_dt = 0.01;
};

struct AnalyticitySettings {
  int order = 10;
  double t_check = 0.1;
  double rk4_dt = 1e-4;
  double match_tolerance = 1e-8;
  int k_lo = 5;
  int k_hi = 10;
  double spread_max = 0.2;
};

struct PicardSettings {
  int iterations = 4;
  std::vector<double> t_sweep{0.5, 1.0, 2.0, 4.0, 8.0};
};

struct HadamardSettings {
  std::size_t boundary_points = 2000;
  double residual_tolerance = 0.05;
  double drift_tolerance = 0.05;  // times the radius
  std::size_t center_n = 10000;
  std::vector<double> center_eps{0.2, 0.1, 0.05, 0.025};
  double center_tolerance = 0.05;
};

struct ControlSettings {
  double target_delta = 0.25;  // target ball B(0, 2 delta)
  double covering_radius = 0.3;
  std::vector<ControlRegion> regions{{Vec3(3.0, 0.0, 0.0), 0.5}, {Vec3(-3.0, 0.0, 0.0), 0.5}};
  double horizon = 4.0;
  double blob_epsilon = 0.05;
  std::size_t steps_per_leg = 100;
  double dt = 0.05;
  double kinematic_tolerance = 0.01;
  double self_induced_tolerance = 0.05;
  double reversibility_tolerance = 1e-2;  // times the covering radius
  std::vector<double> time_scales{1.0, 0.3, 0.1, 0.03};
  // curve-following probe
  double follow_dt = 1e-3;
  double follow_tolerance = 1e-3;  // times the path length
  std::size_t background_n = 64;
};

struct BenchSettings {
  std::vector<std::size_t> sizes{1000, 4000, 20000, 100000};
  double rel_err_max = 1e-3;
  double speedup_soft = 10.0;
  double speedup_floor = 3.0;
};

struct ScenarioConfig {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  double lp_exponent = 3.0;  // p of the L^p assumption on the density
  CloudSettings cloud;
  KernelConfig kernel;
  BackendConfig backend;
  StepperConfig stepper = StepperConfig::rk4(1e-2);
  double t_final = 1.0;
  SimulateSettings simulate;
  StabilitySettings stability;
  AnalyticitySettings analyticity;
  PicardSettings picard;
  HadamardSettings hadamard;
  ControlSettings control;
  BenchSettings bench;

  FlowModel model() const { return {kernel, backend}; }
  ParticleCloud sample_cloud() const;
  // Hoelder exponent of the velocity for rho in L^1 and L^p: mu = 1 - 3/p.
  double mu() const { return 1.0 - 3.0 / lp_exponent; }
  void validate() const;
};

// Strict YAML reader: unknown keys, wrong types and out-of-range values all
// raise config_invalid with "<origin>:<line>:" and the offending key.
ScenarioConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ScenarioConfig load_config(const std::string& path);

}  // namespace tstokes
