#include "tstokes/cloud.hpp"
#include "tstokes/wasserstein.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

using namespace tstokes;

namespace {

ParticleCloud uniform_weights(std::vector<Vec3> pts) {
  ParticleCloud c;
  c.weights.assign(pts.size(), 1.0 / static_cast<double>(pts.size()));
  c.positions = std::move(pts);
  return c;
}

// Minimum over all permutations of the mean matched distance.
double brute_force_w1(const ParticleCloud& a, const ParticleCloud& b) {
  std::vector<std::size_t> p(a.size());
  std::iota(p.begin(), p.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += (a.positions[i] - b.positions[p[i]]).norm();
    best = std::min(best, s / static_cast<double>(p.size()));
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

ParticleCloud random_cloud(std::mt19937_64& g, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = Vec3(u(g), u(g), u(g));
  return uniform_weights(pts);
}

}  // namespace

TEST_CASE("uniform ball sampler") {
  SUBCASE("degenerate radius") {
    const auto c = sample_uniform_ball(Vec3(1, 2, 3), 0.0, 5, 1);
    for (const auto& p : c.positions) CHECK(p == Vec3(1, 2, 3));
  }
  SUBCASE("weights and centroid") {
    const std::size_t n = 10000;
    const auto c = sample_uniform_ball(Vec3::Zero(), 1.0, n, 2);
    for (double w : c.weights) CHECK(w == 1.0 / static_cast<double>(n));
    for (const auto& p : c.positions) CHECK(p.norm() <= 1.0);
    // Per-coordinate variance r^2 / 5.
    const double bound = 3.0 / std::sqrt(double(n)) * std::sqrt(1.0 / 5.0) * std::sqrt(3.0);
    CHECK(c.centroid().norm() <= bound);
  }
  SUBCASE("deterministic given the seed") {
    CHECK(sample_uniform_ball(Vec3::Zero(), 1.0, 50, 9).positions ==
          sample_uniform_ball(Vec3::Zero(), 1.0, 50, 9).positions);
  }
  SUBCASE("empty") { CHECK_THROWS_AS(sample_uniform_ball(Vec3::Zero(), 1.0, 0, 1), Error); }
}

TEST_CASE("push forward") {
  const auto c = sample_uniform_ball(Vec3::Zero(), 1.0, 100, 3);
  const auto id = push_forward(c, [](const Vec3& x) { return x; });
  CHECK(id.positions == c.positions);
  CHECK(id.weights == c.weights);
  const Vec3 v(0.3, -0.1, 0.2);
  CHECK(std::abs(wasserstein1(c, translated(c, v)).value - v.norm()) <= 1e-12);
  const auto three = uniform_weights({Vec3(1, 0, 0), Vec3(0, 2, 0), Vec3(0, 0, 3)});
  const auto scaled = push_forward(three, [](const Vec3& x) { return Vec3(2 * x); });
  CHECK(scaled.positions[2] == Vec3(0, 0, 6));
  CHECK(scaled.weights == three.weights);
  // Composition.
  const auto f = [](const Vec3& x) { return Vec3(x * 1.5); };
  const auto g = [](const Vec3& x) { return Vec3(x + Vec3(1, 0, 0)); };
  CHECK(push_forward(push_forward(c, f), g).positions ==
        push_forward(c, [&](const Vec3& x) { return g(f(x)); }).positions);
  CHECK_THROWS_AS(push_forward(c, [](const Vec3&) { return Vec3(NAN, 0, 0); }), Error);
}

TEST_CASE("Lp norm estimate") {
  const auto c = sample_uniform_ball(Vec3::Zero(), 1.0, 10000, 4);
  const auto recon = DensityReconstruction::default_for(c);
  CHECK(lp_norm_estimate(c, 1.0, recon) == c.total_mass());
  // Exact L3 norm of the uniform density 3/(4 pi) on the unit ball.
  const double exact = std::pow(3.0 / (4.0 * kPi), 2.0 / 3.0);
  CHECK(std::abs(lp_norm_estimate(c, 3.0, recon) / exact - 1.0) <= 0.1);
  const auto two = uniform_weights({Vec3::Zero(), Vec3(0.1, 0, 0)});
  for (double h : {0.05, 0.1, 0.2, 0.4}) CHECK(std::isfinite(lp_norm_estimate(two, 3.0, DensityReconstruction{h})));
  CHECK_THROWS_AS(lp_norm_estimate(two, 3.0, DensityReconstruction{0.0}), Error);
}

TEST_CASE("Wasserstein-1") {
  SUBCASE("hand example") {
    const auto a = uniform_weights({Vec3(0, 0, 0), Vec3(1, 0, 0)});
    const auto b = uniform_weights({Vec3(0, 0, 1), Vec3(1, 0, 1)});
    CHECK(wasserstein1(a, b).value == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(wasserstein1(a, a).value == 0.0);
  }
  SUBCASE("agrees with brute force for n <= 6") {
    std::mt19937_64 g(5);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n = 1 + trial % 6;
      const auto a = random_cloud(g, n);
      const auto b = random_cloud(g, n);
      CHECK(std::abs(wasserstein1(a, b).value - brute_force_w1(a, b)) <= 1e-12);
    }
  }
  SUBCASE("metric properties") {
    std::mt19937_64 g(6);
    for (int trial = 0; trial < 50; ++trial) {
      const auto a = random_cloud(g, 20), b = random_cloud(g, 20), c = random_cloud(g, 20);
      const double ab = wasserstein1(a, b).value, ba = wasserstein1(b, a).value;
      CHECK(ab >= 0.0);
      CHECK(std::abs(ab - ba) <= 1e-12);
      CHECK(ab <= wasserstein1(a, c).value + wasserstein1(c, b).value + 1e-9);
    }
  }
  SUBCASE("zero for a permuted copy") {
    std::mt19937_64 g(7);
    auto a = random_cloud(g, 30);
    auto b = a;
    std::shuffle(b.positions.begin(), b.positions.end(), g);
    CHECK(wasserstein1(a, b).value <= 1e-15);
  }
  SUBCASE("mismatched mass") {
    auto a = uniform_weights({Vec3::Zero()});
    auto b = a;
    b.weights[0] = 0.5;
    CHECK_THROWS_AS(wasserstein1(a, b), Error);
  }
  SUBCASE("general path brackets the exact value") {
    std::mt19937_64 g(8);
    const auto a = random_cloud(g, 40);
    auto b = random_cloud(g, 30);
    const auto r = wasserstein1(a, b);
    CHECK_FALSE(r.exact);
    CHECK(r.lower <= r.upper);
  }
}

TEST_CASE("cloud serialization round trips") {
  const auto c = sample_uniform_ball(Vec3(0.5, 0, 0), 1.0, 20, 10);
  std::stringstream ss;
  write_cloud_csv(ss, c);
  CHECK(ss.str().rfind("x,y,z,w\n", 0) == 0);
  const auto back = read_cloud_csv(ss);
  CHECK(back.positions == c.positions);
  CHECK(back.weights == c.weights);
  const auto j = cloud_from_json(cloud_to_json(c));
  CHECK(j.positions == c.positions);
  CHECK(j.generation_seed == c.generation_seed);
}
