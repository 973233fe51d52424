#include "tstokes/scenario.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace tstokes;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const char* kMinimal = R"(scenario: simulate
seed: 1
t_final: 0.1
cloud:
  n: 8
kernel:
  eps: 0.05
stepper:
  kind: rk4
  dt: 0.01
simulate:
  l3: false
  divergence_probes: 0
)";

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "cfg.yaml");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config_invalid);
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_config(kMinimal);
  CHECK(c.scenario == "simulate");
  CHECK(c.cloud.n == 8);
  CHECK(c.kernel.regularization_epsilon == 0.05);
  CHECK(c.stepper.dt == 0.01);
  CHECK(c.mu() == doctest::Approx(0.0));

  const std::string unknown = error_of("scenario: simulate\nstepper:\n  dt: 0.1\n  dtt: 0.2\n");
  CHECK(unknown.find("cfg.yaml:4") != std::string::npos);
  CHECK(unknown.find("stepper.dtt") != std::string::npos);
  CHECK(error_of("scenario: simulate\nbogus: 1\n").find("bogus") != std::string::npos);
  CHECK(error_of("scenario: simulate\ncloud:\n  n: many\n").find("cloud.n") != std::string::npos);
  CHECK(error_of("scenario: simulate\nstepper:\n  dt: -1\n").find("stepper.dt") != std::string::npos);
  CHECK(error_of("scenario: dance\n").find("scenario") != std::string::npos);
  CHECK(error_of("scenario: simulate\nbackend:\n  kind: fmm\n").find("backend.kind") != std::string::npos);
  CHECK(error_of("scenario: [\n").find("cfg.yaml") != std::string::npos);
  CHECK(error_of("scenario: control\ncontrol:\n  regions: [{center: [1, 2], radius: 1}]\n")
            .find("control.regions") != std::string::npos);
}

TEST_CASE("minimal simulate run writes every snapshot and is reproducible") {
  const auto cfg = parse_config(kMinimal);
  const fs::path a = fs::temp_directory_path() / "tstokes_unit_a";
  const fs::path b = fs::temp_directory_path() / "tstokes_unit_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const Report ra = run_scenario(cfg, a);
  run_scenario(cfg, b);
  CHECK(ra.passed());
  std::size_t snapshots = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    const auto name = e.path().filename().string();
    if (name.rfind("snapshot_", 0) == 0) ++snapshots;
    CHECK(slurp(e.path()) == slurp(b / name));
  }
  CHECK(snapshots == 11);
  CHECK(fs::exists(a / "diagnostics.csv"));
  CHECK(slurp(a / "diagnostics.csv").rfind("t,mass,l3_est,lip_mod,loglip_mod,w1_vs_ref\n", 0) == 0);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("report assertions") {
  const auto cfg = parse_config(kMinimal);
  Report r(cfg);
  CHECK_FALSE(r.passed());
  r.at_most("small", 1.0, 2.0);
  r.at_least("soft_miss", 1.0, 2.0, true);
  CHECK(r.passed());
  CHECK_FALSE(r.assertion_passed("soft_miss"));
  r.holds("broken", false);
  CHECK_FALSE(r.passed());
  CHECK_THROWS_AS(r.assertion_passed("absent"), Error);
}
