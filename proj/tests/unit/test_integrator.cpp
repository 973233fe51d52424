#include "tstokes/integrator.hpp"
#include "tstokes/wasserstein.hpp"

#include <doctest.h>

#include <cmath>

using namespace tstokes;

namespace {

const FlowModel kBlob{KernelConfig{0.1}, BackendConfig::direct()};

double max_gap(const ParticleCloud& a, const ParticleCloud& b) {
  double w = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) w = std::max(w, (a.positions[i] - b.positions[i]).norm());
  return w;
}

ParticleCloud run_rk4(const ParticleCloud& c, double t, double dt, const FlowModel& m) {
  SimulateOptions o;
  o.snapshot_stride = std::numeric_limits<std::size_t>::max();
  return simulate(c, t, StepperConfig::rk4(dt), m, o).snapshots.back();
}

}  // namespace

TEST_CASE("rk4 is fourth order") {
  const auto c = sample_uniform_ball(Vec3::Zero(), 0.5, 5, 1);
  const auto ref = run_rk4(c, 1.0, 1e-3, kBlob);
  const double e1 = max_gap(run_rk4(c, 1.0, 0.2, kBlob), ref);
  const double e2 = max_gap(run_rk4(c, 1.0, 0.1, kBlob), ref);
  CHECK(e1 / e2 > 12.0);
  CHECK(e1 / e2 < 20.0);
}

TEST_CASE("simulate grid and conservation") {
  const auto c = sample_uniform_ball(Vec3::Zero(), 1.0, 16, 2);
  const auto one = simulate(c, 0.05, StepperConfig::rk4(0.05), kBlob);
  CHECK(one.snapshots.size() == 2);
  CHECK(one.snapshots[1].positions == step_rk4(c, 0.05, kBlob).positions);

  SimulateOptions o;
  o.snapshot_stride = 100;
  const auto long_run = simulate(c, 1.0, StepperConfig::rk4(1e-3), kBlob, o);
  for (const auto& s : long_run.snapshots) CHECK(s.weights == c.weights);
  for (const auto& d : long_run.diagnostics) CHECK(d.mass == c.total_mass());
}

TEST_CASE("flow composition") {
  const auto c = sample_uniform_ball(Vec3::Zero(), 1.0, 32, 3);
  const auto whole = run_rk4(c, 0.4, 0.05, kBlob);
  const auto half = run_rk4(run_rk4(c, 0.2, 0.05, kBlob), 0.2, 0.05, kBlob);
  CHECK(max_gap(whole, half) <= 1e-15);
}

TEST_CASE("taylor jets") {
  const auto c = sample_uniform_ball(Vec3::Zero(), 1.0, 24, 4);
  const auto jets = taylor_coefficients(c, 10, kBlob.kernel);
  const auto v = particle_velocities(c, kBlob);

  SUBCASE("first coefficient is the velocity") {
    for (std::size_t i = 0; i < c.size(); ++i) CHECK((jets.coeffs[i][1] - v[i]).norm() <= 1e-15);
  }
  SUBCASE("second coefficient from the kernel gradient") {
    for (std::size_t i = 0; i < c.size(); ++i) {
      Vec3 want = Vec3::Zero();
      for (std::size_t j = 0; j < c.size(); ++j) {
        const Vec3 d = c.positions[i] - c.positions[j];
        const Vec3 dv = v[i] - v[j];
        for (int a = 0; a < 3; ++a) {
          jet::MultiIndex alpha{0, 0, 0};
          alpha[a] = 1;
          want += c.weights[j] * dv[a] * (oseen_derivative(d, alpha, 0.1) * Vec3(0, 0, -1));
        }
      }
      want *= 0.5;
      CHECK((jets.coeffs[i][2] - want).norm() <= 1e-13);
    }
  }
  SUBCASE("c1 scales linearly with the weights") {
    auto heavy = c;
    for (auto& w : heavy.weights) w *= 3.0;
    const auto hj = taylor_coefficients(heavy, 2, kBlob.kernel);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK((hj.coeffs[i][1] - 3.0 * jets.coeffs[i][1]).norm() <= 1e-15);
  }
  SUBCASE("taylor step against fine rk4") {
    const auto tay = step_taylor(jets, 0.05);
    CHECK(max_gap(tay.cloud, run_rk4(c, 0.05, 1e-4, kBlob)) <= 1e-12);
    std::size_t halvings = 0;
    const auto adv = advance_taylor(c, 0.2, 0.1, 10, kBlob.kernel, &halvings);
    CHECK(max_gap(adv, run_rk4(c, 0.2, 1e-4, kBlob)) <= 1e-10);
  }
  SUBCASE("oversized steps are rejected") { CHECK_THROWS_AS(step_taylor(jets, 50.0), Error); }
  SUBCASE("coincident particles with the singular kernel") {
    auto dup = c;
    dup.positions[1] = dup.positions[0];
    CHECK_THROWS_AS(taylor_coefficients(dup, 4, KernelConfig{}), Error);
  }
}

TEST_CASE("analyticity report") {
  CHECK(binomial_half(0) == 1.0);
  CHECK(binomial_half(1) == 0.5);
  CHECK(binomial_half(2) == -0.125);
  CHECK(binomial_half(3) == 0.0625);
  const auto c = sample_uniform_ball(Vec3::Zero(), 1.0, 32, 5);
  const auto rep = analyticity_report(taylor_coefficients(c, 8, kBlob.kernel), true);
  CHECK(rep.fitted);
  CHECK(rep.bound_holds);
  CHECK(rep.radius > 0.0);
}

TEST_CASE("picard iteration contracts at short horizons") {
  const auto c = sample_uniform_ball(Vec3::Zero(), 1.0, 64, 6);
  const auto r = picard_iterate(c, 0.5, 0.1, 4, kBlob);
  REQUIRE(r.distances.size() == 4);
  for (double d : r.distances) CHECK(std::isfinite(d));
  for (double q : r.ratios) CHECK(q < 1.0);
  // The second iterate is the plain simulation when the field is frozen per interval.
  CHECK_THROWS_AS(picard_iterate(c, 0.5, 0.1, 1, kBlob), Error);
  const auto longer = picard_iterate(c, 4.0, 0.1, 4, kBlob);
  CHECK(longer.ratios[0] > r.ratios[0]);
}

TEST_CASE("two-cloud stability") {
  const auto a = sample_uniform_ball(Vec3::Zero(), 1.0, 64, 7);
  const auto same = two_cloud_stability(a, a, 0.5, 0.1, kBlob);
  for (double w : same.w1) CHECK(w == 0.0);
  const auto b = translated(a, Vec3(1e-3, 0, 0));
  const auto ab = two_cloud_stability(a, b, 0.5, 0.1, kBlob);
  const auto ba = two_cloud_stability(b, a, 0.5, 0.1, kBlob);
  for (std::size_t k = 0; k < ab.w1.size(); ++k) CHECK(std::abs(ab.w1[k] - ba.w1[k]) <= 1e-15);
  CHECK(ab.envelope_holds);
}

TEST_CASE("pair separation exponent") {
  const auto c = sample_uniform_ball(Vec3::Zero(), 1.0, 64, 8);
  const std::vector<double> deltas = {0.125, 0.0625, 0.03125};
  const auto seeds = seed_pairs(c, 4, deltas, 1);
  CHECK(seeds.tracers.size() == 2 * 4 * deltas.size());
  CHECK(holder_exponent(seeds, seeds.tracers) == doctest::Approx(1.0).epsilon(1e-12));
  auto collapsed = seeds.tracers;
  collapsed[1] = collapsed[0];
  CHECK_THROWS_AS(holder_exponent(seeds, collapsed), Error);
}
