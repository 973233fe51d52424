#pragma once

#include "tstokes/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace tstokes {

// Weighted atomic approximation of a probability density. Weights are
// nonnegative and sum to one, except after absorption where the deficit is
// the absorbed mass.
struct ParticleCloud {
  std::vector<Vec3> positions;
  std::vector<double> weights;
  std::uint64_t generation_seed = 0;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  double total_mass() const;
  Vec3 centroid() const;  // weighted
  double support_radius() const;  // max distance from centroid

  // Structural checks: matching sizes, nonnegative weights, finite
  // coordinates. With require_probability, total mass must be 1 to 1e-12.
  void validate(bool require_probability = true) const;
};

// n particles of weight 1/n drawn uniformly in B(center, radius).
ParticleCloud sample_uniform_ball(const Vec3& center, double radius, std::size_t n,
                                  std::uint64_t seed);

using PositionMap = std::function<Vec3(const Vec3&)>;

// Moves every particle through the map; weights are copied bit for bit.
ParticleCloud push_forward(const ParticleCloud& cloud, const PositionMap& map);

ParticleCloud translated(const ParticleCloud& cloud, const Vec3& shift);

// Wendland C2 compactly supported mollifier in 3D, support radius equal to
// the bandwidth:  W(r) = 21 / (2 pi h^3) (1 - q)^4 (1 + 4 q), q = r / h.
struct DensityReconstruction {
  double bandwidth = 0.0;

  double mollifier(double r) const;
  // n^{-1/6} times the cloud's support radius.
  static DensityReconstruction default_for(const ParticleCloud& cloud);
};

// Mollified density rho_h(x_i) = sum_{j != i} w_j W(|x_i - x_j|) at every
// particle (leave-one-out). Cell-list neighbor search.
std::vector<double> density_at_particles(const ParticleCloud& cloud,
                                         const DensityReconstruction& recon);

// L^p norm of the mollified density using the particles as quadrature for
// rho dx:  ||rho_h||_p^p ~ sum_i w_i rho_h(x_i)^{p-1}. p = 1 returns the
// total mass exactly.
double lp_norm_estimate(const ParticleCloud& cloud, double p, const DensityReconstruction& recon);

// CSV with header "x,y,z,w", 17 significant digits.
void write_cloud_csv(std::ostream& os, const ParticleCloud& cloud);
void write_cloud_csv(const std::string& path, const ParticleCloud& cloud);
ParticleCloud read_cloud_csv(std::istream& is);
ParticleCloud read_cloud_csv(const std::string& path);

// {"generation_seed": s, "particles": [{"x":..,"y":..,"z":..,"w":..}, ...]}
std::string cloud_to_json(const ParticleCloud& cloud);
ParticleCloud cloud_from_json(const std::string& text);

}  // namespace tstokes
