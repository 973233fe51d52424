#include "tstokes/velocity.hpp"

#include "tstokes/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace tstokes {

namespace {

constexpr std::size_t kNoExclusion = std::numeric_limits<std::size_t>::max();
constexpr int kMaxTreeDepth = 48;

[[noreturn]] void throw_coincident(std::size_t j) {
  throw Error(ErrorCode::singular_evaluation,
              "target coincides with source particle " + std::to_string(j) + " (eps = 0)");
}

}  // namespace

void BackendConfig::validate() const {
  if (kind == BackendKind::treecode) {
    if (!(theta > 0.0 && theta < 1.0)) {
      throw Error(ErrorCode::invalid_parameter, "treecode theta must lie in (0, 1)");
    }
    if (leaf_size < 1) throw Error(ErrorCode::invalid_parameter, "leaf_size must be >= 1");
  }
}

// ---------------------------------------------------------------------------
// Octree

Octree Octree::build(const ParticleCloud& cloud, double theta, std::size_t leaf_size) {
  if (cloud.empty()) throw Error(ErrorCode::empty_cloud, "cannot build a tree on an empty cloud");
  if (leaf_size < 1) throw Error(ErrorCode::invalid_parameter, "leaf_size must be >= 1");
  Octree t;
  t.theta_ = theta;
  t.leaf_size_ = leaf_size;
  t.order_.resize(cloud.size());
  std::iota(t.order_.begin(), t.order_.end(), std::size_t{0});

  Vec3 lo = cloud.positions[0], hi = cloud.positions[0];
  for (const auto& p : cloud.positions) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 center = 0.5 * (lo + hi);
  double half = 0.5 * (hi - lo).maxCoeff();
  half = half > 0.0 ? half * (1.0 + 1e-12) : 1.0;
  t.nodes_.reserve(2 * cloud.size() / leaf_size + 16);
  t.nodes_.emplace_back();
  t.build_node(cloud, 0, 0, cloud.size(), center, half, 0);
  return t;
}

// Fills the already allocated node `self`; children get a contiguous block
// appended to the node array.
void Octree::build_node(const ParticleCloud& cloud, std::uint32_t self, std::size_t begin,
                        std::size_t end, const Vec3& center, double half, int depth) {
  depth_ = std::max(depth_, depth);
  nodes_[self].center = center;
  nodes_[self].half_width = half;
  nodes_[self].begin = begin;
  nodes_[self].end = end;
  nodes_[self].depth = depth;

  const std::size_t count = end - begin;
  if (count > leaf_size_ && depth < kMaxTreeDepth && half > 1e-13) {
    // Bucket by octant; stable so leaves keep ascending particle order.
    std::array<std::vector<std::size_t>, 8> buckets;
    for (std::size_t k = begin; k < end; ++k) {
      const Vec3& p = cloud.positions[order_[k]];
      const int oct = (p.x() >= center.x() ? 1 : 0) | (p.y() >= center.y() ? 2 : 0) |
                      (p.z() >= center.z() ? 4 : 0);
      buckets[static_cast<std::size_t>(oct)].push_back(order_[k]);
    }
    std::uint32_t used = 0;
    for (const auto& b : buckets) used += b.empty() ? 0 : 1;
    {
      const auto first = static_cast<std::uint32_t>(nodes_.size());
      nodes_[self].first_child = first;
      nodes_[self].child_count = used;
      nodes_.resize(nodes_.size() + used);
      std::size_t pos = begin;
      std::uint32_t slot = first;
      for (std::size_t o = 0; o < 8; ++o) {
        if (buckets[o].empty()) continue;
        std::copy(buckets[o].begin(), buckets[o].end(), order_.begin() + static_cast<std::ptrdiff_t>(pos));
        const double q = 0.5 * half;
        const Vec3 c(center.x() + ((o & 1) ? q : -q), center.y() + ((o & 2) ? q : -q),
                     center.z() + ((o & 4) ? q : -q));
        build_node(cloud, slot++, pos, pos + buckets[o].size(), c, q, depth + 1);
        pos += buckets[o].size();
      }
      double w = 0.0;
      Vec3 m = Vec3::Zero();
      for (std::uint32_t k = 0; k < used; ++k) {
        const OctreeNode& ch = nodes_[first + k];
        w += ch.weight;
        m += ch.weight * ch.centroid;
      }
      finish_node(cloud, self, w, m);
      return;
    }
  }

  double w = 0.0;
  Vec3 m = Vec3::Zero();
  for (std::size_t k = begin; k < end; ++k) {
    const std::size_t i = order_[k];
    w += cloud.weights[i];
    m += cloud.weights[i] * cloud.positions[i];
  }
  finish_node(cloud, self, w, m);
}

void Octree::finish_node(const ParticleCloud& cloud, std::uint32_t self, double weight,
                         const Vec3& moment) {
  OctreeNode& node = nodes_[self];
  node.weight = weight;
  node.centroid = weight > 0.0 ? Vec3(moment / weight) : node.center;
  double r = 0.0;
  Mat3 q = Mat3::Zero();
  for (std::size_t k = node.begin; k < node.end; ++k) {
    const std::size_t i = order_[k];
    const Vec3 s = cloud.positions[i] - node.centroid;
    r = std::max(r, s.norm());
    q.noalias() += cloud.weights[i] * s * s.transpose();
  }
  node.radius = r;
  node.second_moment = q;
}

// ---------------------------------------------------------------------------
// VelocityField

VelocityField::VelocityField(ParticleCloud source, KernelConfig kernel, BackendConfig backend)
    : source_(std::move(source)), kernel_(kernel), backend_(backend) {
  kernel_.validate();
  backend_.validate();
  if (source_.positions.size() != source_.weights.size()) {
    throw Error(ErrorCode::invalid_parameter, "positions and weights differ in length");
  }
  eps2_ = kernel_.regularization_epsilon * kernel_.regularization_epsilon;
  if (backend_.kind == BackendKind::treecode && !source_.empty()) {
    tree_ = Octree::build(source_, backend_.theta, backend_.leaf_size);
    sorted_pos_.reserve(source_.size());
    sorted_w_.reserve(source_.size());
    rank_.resize(source_.size());
    for (std::size_t k = 0; k < tree_->order().size(); ++k) rank_[tree_->order()[k]] = k;
    for (std::size_t i : tree_->order()) {
      sorted_pos_.push_back(source_.positions[i]);
      sorted_w_.push_back(source_.weights[i]);
    }
  }
}

Vec3 VelocityField::eval(const Vec3& x, std::optional<std::size_t> exclude) const {
  const std::size_t ex = exclude.value_or(kNoExclusion);
  return tree_ ? eval_tree(x, ex) : eval_direct(x, ex);
}

Vec3 VelocityField::eval_direct(const Vec3& x, std::size_t exclude) const {
  double ux = 0.0, uy = 0.0, uz = 0.0;
  const std::size_t n = source_.size();
  const bool singular = eps2_ == 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == exclude) continue;
    const Vec3 d = x - source_.positions[j];
    if (singular && d.squaredNorm() == 0.0) throw_coincident(j);
    const Vec3 v = stokeslet_down(d, eps2_);
    const double w = source_.weights[j];
    ux += w * v.x();
    uy += w * v.y();
    uz += w * v.z();
  }
  return {ux, uy, uz};
}

Vec3 VelocityField::eval_tree(const Vec3& x, std::size_t exclude) const {
  const auto& nodes = tree_->nodes();
  const auto& order = tree_->order();
  const double theta2 = backend_.theta * backend_.theta;
  const bool singular = eps2_ == 0.0;
  const bool quadrupole = backend_.quadrupole;
  Vec3 u = Vec3::Zero();
  std::uint32_t stack[8 * kMaxTreeDepth + 8];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const OctreeNode& node = nodes[stack[--top]];
    const Vec3 dc = x - node.centroid;
    const double dist2 = dc.squaredNorm();
    const bool holds_excluded =
        exclude != kNoExclusion && rank_[exclude] >= node.begin && rank_[exclude] < node.end;
    if (!holds_excluded && node.radius * node.radius < theta2 * dist2) {
      u += node.weight * stokeslet_down(dc, eps2_);
      if (quadrupole) u += stokeslet_down_quadrupole(dc, node.second_moment, eps2_);
      continue;
    }
    if (node.leaf()) {
      for (std::size_t k = node.begin; k < node.end; ++k) {
        if (order[k] == exclude) continue;
        const Vec3 d = x - sorted_pos_[k];
        if (singular && d.squaredNorm() == 0.0) throw_coincident(order[k]);
        u += sorted_w_[k] * stokeslet_down(d, eps2_);
      }
      continue;
    }
    for (std::uint32_t c = node.child_count; c-- > 0;) stack[top++] = node.first_child + c;
  }
  return u;
}

std::vector<Vec3> VelocityField::eval_batch(std::span<const Vec3> targets, Exclusion exclusion) const {
  if (exclusion == Exclusion::self && targets.size() != source_.size()) {
    throw Error(ErrorCode::invalid_parameter, "self exclusion needs one target per source");
  }
  std::vector<Vec3> out(targets.size());
  const auto n = static_cast<std::ptrdiff_t>(targets.size());
  // Exceptions cannot leave an OpenMP region; capture the first one.
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    try {
      const std::size_t ex = exclusion == Exclusion::self ? i : kNoExclusion;
      out[i] = tree_ ? eval_tree(targets[i], ex) : eval_direct(targets[i], ex);
    } catch (...) {
#pragma omp critical(tstokes_eval_batch)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<Vec3> VelocityField::at_sources() const {
  return eval_batch(source_.positions, kernel_.singular() ? Exclusion::self : Exclusion::none);
}

// ---------------------------------------------------------------------------
// Moduli and probes

double difference_quotient(const VelocityField& field, const Vec3& x, const Vec3& y,
                           ModulusMode mode) {
  const double s = (x - y).norm();
  if (s == 0.0) throw Error(ErrorCode::invalid_parameter, "difference quotient at coincident points");
  const double num = (field.eval(x) - field.eval(y)).norm();
  const double denom = mode == ModulusMode::lipschitz ? s : s * (1.0 + ln_minus(s));
  return num / denom;
}

double modulus_estimate(const VelocityField& field, ModulusMode mode, std::size_t n_pairs,
                        std::uint64_t seed, double r_min, double r_max) {
  if (n_pairs < 1) throw Error(ErrorCode::invalid_parameter, "n_pairs must be >= 1");
  if (!(r_min > 0.0 && r_min < r_max)) {
    throw Error(ErrorCode::invalid_parameter, "need 0 < r_min < r_max");
  }
  const ParticleCloud& src = field.source();
  const Vec3 c = src.empty() ? Vec3::Zero() : src.centroid();
  const double region = std::max(1.25 * (src.empty() ? 0.0 : src.support_radius()), r_max);

  Engine eng = make_engine(seed, "velocity.modulus_estimate");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> log_r(std::log(r_min), std::log(r_max));
  std::normal_distribution<double> gauss;
  std::vector<Vec3> pts;
  pts.reserve(2 * n_pairs);
  std::vector<double> sep(n_pairs);
  for (std::size_t k = 0; k < n_pairs; ++k) {
    Vec3 p;
    do {
      p = Vec3(unit(eng), unit(eng), unit(eng));
    } while (p.squaredNorm() > 1.0);
    Vec3 dir;
    do {
      dir = Vec3(gauss(eng), gauss(eng), gauss(eng));
    } while (dir.squaredNorm() == 0.0);
    dir.normalize();
    const double r = std::exp(log_r(eng));
    const Vec3 x = c + region * p;
    pts.push_back(x);
    pts.push_back(x + r * dir);
    sep[k] = r;
  }
  const auto u = field.eval_batch(pts, Exclusion::none);
  double best = 0.0;
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const double s = (pts[2 * k] - pts[2 * k + 1]).norm();
    const double denom = mode == ModulusMode::lipschitz ? s : s * (1.0 + ln_minus(s));
    best = std::max(best, (u[2 * k] - u[2 * k + 1]).norm() / denom);
  }
  return best;
}

double divergence_probe(const VelocityField& field, const Vec3& x, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::invalid_parameter, "probe step must be positive");
  if (field.kernel().singular()) {
    for (const auto& p : field.source().positions) {
      if ((p - x).norm() < 10.0 * h) {
        throw Error(ErrorCode::ill_conditioned_probe, "probe point within 10 h of a source");
      }
    }
  }
  double div = 0.0;
  for (int a = 0; a < 3; ++a) {
    Vec3 e = Vec3::Zero();
    e[a] = h;
    div += (field.eval(x + e)[a] - field.eval(x - e)[a]) / (2.0 * h);
  }
  return div;
}

}  // namespace tstokes
