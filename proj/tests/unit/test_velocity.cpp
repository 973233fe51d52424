#include "tstokes/velocity.hpp"

#include <doctest.h>

#include <random>

using namespace tstokes;

namespace {

ParticleCloud cloud_of(std::vector<Vec3> pts, std::vector<double> w) {
  ParticleCloud c;
  c.positions = std::move(pts);
  c.weights = std::move(w);
  return c;
}

}  // namespace

TEST_CASE("single and paired particles") {
  const double d = 0.7;
  const VelocityField one(cloud_of({Vec3::Zero()}, {1.0}), KernelConfig{});
  CHECK((one.eval(Vec3(d, 0, 0)) - Vec3(0, 0, -1.0 / (8 * kPi * d))).norm() <= 1e-16);
  CHECK_THROWS_AS(one.eval(Vec3::Zero()), Error);

  const VelocityField two(cloud_of({Vec3::Zero(), Vec3(d, 0, 0)}, {0.5, 0.5}), KernelConfig{});
  const Vec3 want(0, 0, -1.0 / (16 * kPi * d));
  CHECK((two.eval(Vec3::Zero(), 0) - want).norm() <= 1e-16);
  const auto both = two.eval_batch(two.source().positions, Exclusion::self);
  CHECK((both[0] - want).norm() <= 1e-16);
  CHECK((both[1] - want).norm() <= 1e-16);
}

TEST_CASE("far field is the monopole") {
  const auto c = sample_uniform_ball(Vec3::Zero(), 0.5, 200, 1);
  const VelocityField f(c, KernelConfig{});
  std::mt19937_64 g(2);
  std::normal_distribution<double> n;
  for (int k = 0; k < 20; ++k) {
    const Vec3 x = Vec3(n(g), n(g), n(g)).normalized() * 1e3;
    const Vec3 mono = oseen(x - c.centroid()) * Vec3(0, 0, -1);
    // The dipole vanishes about the centroid, so the error is second order.
    CHECK((f.eval(x) - mono).norm() <= mono.norm() * 1e-5);
  }
}

TEST_CASE("batch evaluation is element-wise") {
  const auto c = sample_uniform_ball(Vec3::Zero(), 1.0, 300, 3);
  for (const BackendConfig& b : {BackendConfig::direct(), BackendConfig::treecode(0.4, 8)}) {
    const VelocityField f(c, KernelConfig{0.05}, b);
    std::vector<Vec3> targets = {Vec3(0.1, 0.2, 0.3), Vec3(2, 0, 0), Vec3(-0.5, 0.5, 0)};
    const auto u = f.eval_batch(targets, Exclusion::none);
    for (std::size_t i = 0; i < targets.size(); ++i) CHECK(u[i] == f.eval(targets[i]));
    std::swap(targets[0], targets[2]);
    const auto v = f.eval_batch(targets, Exclusion::none);
    CHECK(v[0] == u[2]);
    CHECK(v[2] == u[0]);
  }
}

TEST_CASE("octree structure") {
  const auto c = sample_uniform_ball(Vec3::Zero(), 1.0, 5000, 4);
  const Octree t = Octree::build(c, 0.4, 16);
  std::vector<int> seen(c.size(), 0);
  for (const auto& node : t.nodes()) {
    if (node.leaf()) {
      CHECK(node.end - node.begin <= 16);
      for (std::size_t k = node.begin; k < node.end; ++k) ++seen[t.order()[k]];
    } else {
      double w = 0.0;
      for (std::uint32_t ch = 0; ch < node.child_count; ++ch) w += t.nodes()[node.first_child + ch].weight;
      CHECK(w == doctest::Approx(node.weight).epsilon(1e-14));
    }
  }
  for (int s : seen) CHECK(s == 1);
  CHECK(t.depth() >= 3);
  CHECK(t.depth() <= 10);
  // A cluster sitting in one octant is still split.
  auto tight = sample_uniform_ball(Vec3(0.5, 0.5, 0.5), 0.01, 200, 5);
  tight.positions.push_back(Vec3(-1, -1, -1));
  tight.weights.assign(tight.positions.size(), 1.0 / tight.positions.size());
  for (const auto& node : Octree::build(tight, 0.4, 16).nodes()) {
    if (node.leaf()) CHECK(node.end - node.begin <= 16);
  }
}

TEST_CASE("treecode accuracy") {
  const auto c = sample_uniform_ball(Vec3::Zero(), 1.0, 4000, 6);
  const VelocityField direct(c, KernelConfig{});
  const auto targets = sample_uniform_ball(Vec3::Zero(), 1.2, 300, 7).positions;
  const auto ud = direct.eval_batch(targets, Exclusion::none);
  for (bool quad : {false, true}) {
    const VelocityField tree(c, KernelConfig{}, BackendConfig::treecode(0.4, 32, quad));
    const auto ut = tree.eval_batch(targets, Exclusion::none);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < ud.size(); ++i) {
      num += (ut[i] - ud[i]).squaredNorm();
      den += ud[i].squaredNorm();
    }
    CHECK(std::sqrt(num / den) <= (quad ? 1e-3 : 1e-2));
  }
  // Self exclusion through the tree.
  const VelocityField tree(c, KernelConfig{}, BackendConfig::treecode(0.4, 32));
  const auto a = tree.at_sources();
  const auto b = direct.at_sources();
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]).squaredNorm();
    den += b[i].squaredNorm();
  }
  CHECK(std::sqrt(num / den) <= 1e-3);
}

TEST_CASE("backend validation") {
  CHECK_THROWS_AS(BackendConfig::treecode(1.0).validate(), Error);
  CHECK_THROWS_AS(BackendConfig::treecode(0.4, 0).validate(), Error);
}

TEST_CASE("moduli and divergence") {
  const auto c = sample_uniform_ball(Vec3::Zero(), 1.0, 500, 8);
  const VelocityField f(c, KernelConfig{0.05});
  const double lip = modulus_estimate(f, ModulusMode::lipschitz, 2000, 1, 1e-3, 0.5);
  const double ll = modulus_estimate(f, ModulusMode::log_lipschitz, 2000, 1, 1e-3, 0.5);
  CHECK(lip > 0.0);
  CHECK(ll <= lip);
  std::mt19937_64 g(9);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 20; ++k) CHECK(std::abs(divergence_probe(f, Vec3(u(g), u(g), u(g)), 1e-3)) <= 1e-4 * lip);
}
