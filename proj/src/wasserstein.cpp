#include "tstokes/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tstokes {

Assignment solve_assignment(std::span<const double> cost, std::size_t n) {
  Assignment out;
  out.row_to_col.assign(n, 0);
  if (n == 0) return out;
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is the virtual root of each search.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);

  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      const double* row = cost.data() + (i0 - 1) * n;
      const double ui0 = u[i0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - ui0 - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (std::size_t j = 1; j <= n; ++j) out.row_to_col[p[j] - 1] = j - 1;
  for (std::size_t i = 0; i < n; ++i) out.cost += cost[i * n + out.row_to_col[i]];
  return out;
}

double wasserstein1_1d(std::span<const double> xa, std::span<const double> wa,
                       std::span<const double> xb, std::span<const double> wb) {
  struct Event {
    double x;
    double dw;
  };
  std::vector<Event> ev;
  ev.reserve(xa.size() + xb.size());
  for (std::size_t i = 0; i < xa.size(); ++i) ev.push_back({xa[i], wa[i]});
  for (std::size_t i = 0; i < xb.size(); ++i) ev.push_back({xb[i], -wb[i]});
  std::sort(ev.begin(), ev.end(), [](const Event& l, const Event& r) { return l.x < r.x; });
  double diff = 0.0, total = 0.0;
  for (std::size_t k = 0; k + 1 < ev.size(); ++k) {
    diff += ev[k].dw;
    total += std::abs(diff) * (ev[k + 1].x - ev[k].x);
  }
  return total;
}

namespace {

bool uniform_weights(const ParticleCloud& c) {
  if (c.empty()) return false;
  const auto [lo, hi] = std::minmax_element(c.weights.begin(), c.weights.end());
  return *hi - *lo <= 1e-15 * std::abs(*hi);
}

double sliced_lower_bound(const ParticleCloud& a, const ParticleCloud& b) {
  std::vector<Vec3> dirs = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ(),
                            Vec3(1, 1, 1).normalized(), Vec3(1, -1, 1).normalized(),
                            Vec3(1, 1, -1).normalized(), Vec3(-1, 1, 1).normalized()};
  const Vec3 dc = a.centroid() - b.centroid();
  if (dc.norm() > 0.0) dirs.push_back(dc.normalized());
  double best = 0.0;
  std::vector<double> pa(a.size()), pb(b.size());
  for (const auto& d : dirs) {
    for (std::size_t i = 0; i < a.size(); ++i) pa[i] = d.dot(a.positions[i]);
    for (std::size_t i = 0; i < b.size(); ++i) pb[i] = d.dot(b.positions[i]);
    best = std::max(best, wasserstein1_1d(pa, a.weights, pb, b.weights));
  }
  return best;
}

// Each source atom in index order ships its mass to the nearest targets
// that still have capacity.
double greedy_upper_bound(const ParticleCloud& a, const ParticleCloud& b) {
  std::vector<double> cap = b.weights;
  std::vector<std::size_t> open(b.size());
  std::iota(open.begin(), open.end(), 0);
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double need = a.weights[i];
    while (need > 0.0 && !open.empty()) {
      std::size_t best_k = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < open.size(); ++k) {
        const double d = (a.positions[i] - b.positions[open[k]]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best_k = k;
        }
      }
      const std::size_t j = open[best_k];
      const double ship = std::min(need, cap[j]);
      total += ship * std::sqrt(best_d);
      need -= ship;
      cap[j] -= ship;
      if (cap[j] <= 0.0) open.erase(open.begin() + static_cast<std::ptrdiff_t>(best_k));
    }
  }
  return total;
}

}  // namespace

W1Result wasserstein1(const ParticleCloud& a, const ParticleCloud& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::empty_cloud, "W1 needs nonempty clouds");
  const double ma = a.total_mass(), mb = b.total_mass();
  if (std::abs(ma - mb) > 1e-12 * std::max(1.0, std::max(ma, mb))) {
    throw Error(ErrorCode::incomparable_measures, "clouds carry different total mass");
  }
  W1Result r;
  const std::size_t n = a.size();
  if (n == b.size() && n <= kExactAssignmentLimit && uniform_weights(a) && uniform_weights(b) &&
      std::abs(a.weights[0] - b.weights[0]) <= 1e-15 * a.weights[0]) {
    std::vector<double> cost(n * n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = (a.positions[i] - b.positions[j]).norm();
    }
    Assignment asg = solve_assignment(cost, n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += a.weights[i] * cost[i * n + asg.row_to_col[i]];
    r.value = r.lower = r.upper = total;
    r.exact = true;
    r.matching = std::move(asg.row_to_col);
    return r;
  }
  r.upper = greedy_upper_bound(a, b);
  r.lower = std::min(sliced_lower_bound(a, b), r.upper);
  r.value = r.upper;
  r.exact = false;
  return r;
}

}  // namespace tstokes
