#include "tstokes/control.hpp"

#include <doctest.h>

#include <random>

using namespace tstokes;

namespace {

Vec3 random_vec(std::mt19937_64& g, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return Vec3(u(g), u(g), u(g));
}

}  // namespace

TEST_CASE("point force reaches any velocity") {
  std::mt19937_64 g(1);
  for (int k = 0; k < 1000; ++k) {
    const Vec3 alpha = random_vec(g, 3.0), x = random_vec(g, 3.0), a = random_vec(g, 1.0);
    if ((x - alpha).norm() < 1e-3) continue;
    const Vec3 f = point_force_for_velocity(alpha, x, a);
    CHECK((oseen(x - alpha) * f - a).norm() <= 1e-12 * a.norm());
    // Inverse check against a generic solver.
    CHECK((f - oseen(x - alpha).inverse() * a).norm() <= 1e-10 * f.norm());
  }
  const Vec3 alpha(1, 0, 0), x(0, 1, 0), a1(1, 2, 3), a2(-0.5, 0.1, 2);
  CHECK((point_force_for_velocity(alpha, x, a1 + a2) - point_force_for_velocity(alpha, x, a1) -
         point_force_for_velocity(alpha, x, a2)).norm() <= 1e-13);
  CHECK_THROWS_AS(point_force_for_velocity(x, x, a1), Error);
}

TEST_CASE("blob force reaches any velocity") {
  std::mt19937_64 g(2);
  for (int k = 0; k < 200; ++k) {
    const Vec3 alpha = random_vec(g, 2.0), x = random_vec(g, 2.0), a = random_vec(g, 1.0);
    const Vec3 f = blob_force_for_velocity(alpha, x, a, 0.1);
    CHECK((oseen_regularized(x - alpha, 0.1) * f - a).norm() <= 1e-12 * a.norm());
  }
  CHECK((blob_force_for_velocity(Vec3::Zero(), Vec3(1, 2, 0), Vec3(0, 0, 1), 0.0) -
         point_force_for_velocity(Vec3::Zero(), Vec3(1, 2, 0), Vec3(0, 0, 1))).norm() <= 1e-12);
}

TEST_CASE("mollified force obeys the biharmonic mean-value formula") {
  // U is biharmonic off the origin, so its ball average is U + (eps^2 / 10) Laplacian U,
  // with Laplacian U(x) = (I - 3 xhat xhat^T) / (4 pi r^3).
  std::mt19937_64 g(3);
  for (int k = 0; k < 20; ++k) {
    const Vec3 alpha = random_vec(g, 1.0), F = random_vec(g, 1.0);
    const double eps = 0.2;
    Vec3 x = random_vec(g, 2.0);
    if ((x - alpha).norm() < 2 * eps) x = alpha + Vec3(0.6, 0.1, 0.0);
    const Vec3 d = x - alpha;
    const double r = d.norm();
    const Mat3 lap = (Mat3::Identity() - 3.0 * d * d.transpose() / (r * r)) / (4 * kPi * r * r * r);
    const Vec3 want = (oseen(d) + eps * eps / 10.0 * lap) * F;
    CHECK((mollified_force_velocity(alpha, eps, F, x) - want).norm() <= 1e-9 * want.norm());
  }
  CHECK_THROWS_AS(mollified_force_velocity(Vec3::Zero(), 0.5, Vec3(1, 0, 0), Vec3(0.2, 0, 0)), Error);
  CHECK_THROWS_AS(mollified_force_velocity(Vec3::Zero(), 0.0, Vec3(1, 0, 0), Vec3(1, 0, 0)), Error);
}

TEST_CASE("smooth step and curves") {
  CHECK(smooth_step(-1.0) == 0.0);
  CHECK(smooth_step(0.0) == 0.0);
  CHECK(smooth_step(1.0) == 1.0);
  CHECK(smooth_step(0.5) == doctest::Approx(0.5));
  const Curve c({Vec3::Zero(), Vec3(1, 0, 0), Vec3(1, 1, 0)}, 0.0, 2.0);
  CHECK(c(0.0) == Vec3::Zero());
  CHECK(c(2.0) == Vec3(1, 1, 0));
  CHECK(c.length() == doctest::Approx(2.0));
  // Stationary ends.
  CHECK((c(0.05) - c(0.0)).norm() == 0.0);
}

TEST_CASE("curve following") {
  const ControlRegion region{Vec3(3, 0, 0), 0.5};
  const Curve gamma = Curve::line(Vec3(0, -0.5, 0), Vec3(0, 0.5, 0.5), 0.0, 1.0);
  const auto r = follow_curve(gamma(0.0), gamma, region, nullptr, 1e-3);
  CHECK(r.max_deviation <= 1e-3 * gamma.length());
  for (const auto& m : r.markers) CHECK_FALSE(region.contains(m));
  const Curve bad = Curve::line(Vec3(0, 0, 0), Vec3(3, 0, 0), 0.0, 1.0);
  CHECK_THROWS_AS(follow_curve(bad(0.0), bad, region, nullptr, 1e-3), Error);
}

TEST_CASE("staged transport") {
  const auto cloud = sample_uniform_ball(Vec3::Zero(), 1.0, 64, 4);
  const auto covering = greedy_covering(cloud, 0.4);
  for (const auto& p : cloud.positions) {
    CHECK(std::any_of(covering.begin(), covering.end(), [&](const Ball& b) { return b.contains(p); }));
  }
  const Ball target{Vec3::Zero(), 0.5};
  const std::vector<ControlRegion> regions = {{Vec3(3, 0, 0), 0.5}, {Vec3(-3, 0, 0), 0.5}};
  PlanOptions po;
  po.eps = 0.05;
  po.steps_per_leg = 50;
  const auto plan = staged_transport_plan(cloud, covering, target, 4.0, regions, po);
  CHECK(plan.stages.size() == covering.size());
  for (const auto& st : plan.stages) {
    CHECK(st.t_begin < st.t_quarter);
    CHECK(st.t_quarter < st.t_half);
    CHECK(st.t_half < st.t_end);
    for (const auto& f : st.schedule) {
      CHECK(std::any_of(regions.begin(), regions.end(), [&](const ControlRegion& r) { return r.contains(f.location); }));
    }
  }

  ExecuteOptions eo;
  eo.dt = 0.05;
  eo.absorb = true;
  const auto r = execute_control(cloud, plan, eo);
  CHECK(r.remaining_mass <= 0.01);
  CHECK(r.remaining_mass + r.absorbed_mass == doctest::Approx(1.0).epsilon(1e-15));
  for (std::size_t k = 1; k < r.ledger.size(); ++k) CHECK(r.ledger[k].remaining_mass <= r.ledger[k - 1].remaining_mass);
  for (const auto& e : r.events) CHECK(target.contains(e.position));

  eo.absorb = false;
  const auto rev = execute_control(cloud, plan, eo);
  for (const auto& snap : rev.boundary_snapshots) {
    for (std::size_t i = 0; i < cloud.size(); ++i) CHECK((snap.positions[i] - cloud.positions[i]).norm() <= 1e-2 * 0.4);
  }
}

TEST_CASE("empty plan is plain sedimentation") {
  const auto cloud = sample_uniform_ball(Vec3::Zero(), 1.0, 32, 5);
  ControlPlan plan;
  plan.horizon = 1.0;
  plan.target = Ball{Vec3::Zero(), 0.5};
  ExecuteOptions eo;
  eo.absorb = false;
  eo.self_induction = true;
  eo.dt = 0.05;
  eo.model = FlowModel{KernelConfig{0.05}, BackendConfig::direct()};
  const auto r = execute_control(cloud, plan, eo);
  CHECK(r.final_cloud.total_mass() == doctest::Approx(1.0).epsilon(1e-15));
  SimulateOptions o;
  o.snapshot_stride = 1000;
  const auto sim = simulate(cloud, 1.0, StepperConfig::rk4(0.05), eo.model, o);
  double gap = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) gap = std::max(gap, (r.final_cloud.positions[i] - sim.snapshots.back().positions[i]).norm());
  CHECK(gap <= 1e-12);
}
