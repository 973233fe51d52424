#pragma once

#include "tstokes/cloud.hpp"
#include "tstokes/kernel.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace tstokes {

enum class BackendKind { direct, treecode };

struct BackendConfig {
  BackendKind kind = BackendKind::direct;
  double theta = 0.4;           // opening angle, treecode only
  std::size_t leaf_size = 32;   // treecode only
  bool quadrupole = true;       // add the second-moment term to accepted clusters

  static BackendConfig direct() { return {}; }
  static BackendConfig treecode(double theta, std::size_t leaf_size = 32,
                                bool quadrupole = true) {
    return {BackendKind::treecode, theta, leaf_size, quadrupole};
  }
  void validate() const;
};

struct OctreeNode {
  Vec3 center;            // cube center
  double half_width = 0;  // cube half side
  double weight = 0;      // sum of child weights (or particle weights at a leaf)
  Vec3 centroid;          // weighted
  double radius = 0;      // max distance from centroid to a contained particle
  Mat3 second_moment = Mat3::Zero();  // sum_i w_i s_i s_i^T, s_i = x_i - centroid
  std::size_t begin = 0, end = 0;  // range in Octree::order()
  std::uint32_t first_child = 0;
  std::uint32_t child_count = 0;
  int depth = 0;

  bool leaf() const { return child_count == 0; }
};

// Cubic octree over a cloud; children of a node are stored contiguously.
class Octree {
 public:
  static Octree build(const ParticleCloud& cloud, double theta, std::size_t leaf_size);

  const std::vector<OctreeNode>& nodes() const { return nodes_; }
  // Particle indices grouped by leaf.
  const std::vector<std::size_t>& order() const { return order_; }
  double theta() const { return theta_; }
  std::size_t leaf_size() const { return leaf_size_; }
  int depth() const { return depth_; }

 private:
  void build_node(const ParticleCloud& cloud, std::uint32_t self, std::size_t begin,
                  std::size_t end, const Vec3& center, double half, int depth);
  void finish_node(const ParticleCloud& cloud, std::uint32_t self, double weight,
                   const Vec3& moment);

  std::vector<OctreeNode> nodes_;
  std::vector<std::size_t> order_;
  double theta_ = 0.4;
  std::size_t leaf_size_ = 32;
  int depth_ = 0;
};

inline Octree build_tree(const ParticleCloud& cloud, double theta, std::size_t leaf_size) {
  return Octree::build(cloud, theta, leaf_size);
}

enum class Exclusion { none, self };

// Mean-field velocity u(x) = sum_j w_j U_eps(x - x_j) (-e3) of a source cloud.
// Holds its own copy of the source snapshot; the tree (if any) is built at
// construction and the object is read-only afterwards.
class VelocityField {
 public:
  VelocityField(ParticleCloud source, KernelConfig kernel, BackendConfig backend = {});

  const ParticleCloud& source() const { return source_; }
  const KernelConfig& kernel() const { return kernel_; }
  const BackendConfig& backend() const { return backend_; }
  const std::optional<Octree>& tree() const { return tree_; }

  Vec3 eval(const Vec3& x, std::optional<std::size_t> exclude = std::nullopt) const;

  // Element-wise eval; with Exclusion::self target i skips source i (the
  // target list must then match the source count). Parallel across targets,
  // each target summed in a fixed order.
  std::vector<Vec3> eval_batch(std::span<const Vec3> targets, Exclusion exclusion) const;

  // Velocity of every source particle: self term skipped for the singular
  // kernel, kept for the regularized one.
  std::vector<Vec3> at_sources() const;

 private:
  Vec3 eval_direct(const Vec3& x, std::size_t exclude) const;
  Vec3 eval_tree(const Vec3& x, std::size_t exclude) const;

  ParticleCloud source_;
  KernelConfig kernel_;
  BackendConfig backend_;
  double eps2_ = 0.0;
  std::optional<Octree> tree_;
  // Source data in tree order (treecode) for contiguous leaf sweeps.
  std::vector<Vec3> sorted_pos_;
  std::vector<double> sorted_w_;
  std::vector<std::size_t> rank_;  // position of particle i in tree order
};

enum class ModulusMode { lipschitz, log_lipschitz };

// ln_-(s) = max(0, -ln s)
inline double ln_minus(double s) { return s >= 1.0 ? 0.0 : -std::log(s); }

// |u(x) - u(y)| / |x - y|, or divided additionally by (1 + ln_-|x - y|).
double difference_quotient(const VelocityField& field, const Vec3& x, const Vec3& y,
                           ModulusMode mode);

// Supremum of the difference quotient over n_pairs random pairs: x uniform
// in a ball around the source (radius max(1.25 * support radius, r_max)),
// |x - y| log-uniform in [r_min, r_max], random direction.
double modulus_estimate(const VelocityField& field, ModulusMode mode, std::size_t n_pairs,
                        std::uint64_t seed, double r_min, double r_max);

// Central-difference divergence of u at x with step h. For the singular
// kernel x must be at least 10 h away from every source.
double divergence_probe(const VelocityField& field, const Vec3& x, double h);

}  // namespace tstokes
