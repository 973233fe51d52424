#include "tstokes/cloud.hpp"

#include "tstokes/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

namespace tstokes {

double ParticleCloud::total_mass() const {
  return std::accumulate(weights.begin(), weights.end(), 0.0);
}

Vec3 ParticleCloud::centroid() const {
  Vec3 c = Vec3::Zero();
  double m = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    c += weights[i] * positions[i];
    m += weights[i];
  }
  return m > 0.0 ? Vec3(c / m) : c;
}

double ParticleCloud::support_radius() const {
  const Vec3 c = centroid();
  double r = 0.0;
  for (const auto& p : positions) r = std::max(r, (p - c).norm());
  return r;
}

void ParticleCloud::validate(bool require_probability) const {
  if (positions.size() != weights.size()) {
    throw Error(ErrorCode::invalid_parameter, "positions and weights differ in length");
  }
  for (std::size_t i = 0; i < size(); ++i) {
    if (!all_finite(positions[i])) {
      throw Error(ErrorCode::blow_up, "non-finite position at particle " + std::to_string(i));
    }
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw Error(ErrorCode::invalid_parameter, "bad weight at particle " + std::to_string(i));
    }
  }
  if (require_probability && std::abs(total_mass() - 1.0) > 1e-12) {
    throw Error(ErrorCode::invalid_parameter, "weights do not sum to 1");
  }
}

ParticleCloud sample_uniform_ball(const Vec3& center, double radius, std::size_t n,
                                  std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::empty_cloud, "cannot sample an empty cloud");
  if (!(radius >= 0.0)) throw Error(ErrorCode::invalid_parameter, "radius must be >= 0");
  Engine eng = make_engine(seed, "cloud.uniform_ball");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  ParticleCloud cloud;
  cloud.generation_seed = seed;
  cloud.positions.reserve(n);
  cloud.weights.assign(n, 1.0 / static_cast<double>(n));
  while (cloud.positions.size() < n) {
    const Vec3 p(unit(eng), unit(eng), unit(eng));
    if (p.squaredNorm() > 1.0) continue;
    cloud.positions.emplace_back(center + radius * p);
  }
  return cloud;
}

ParticleCloud push_forward(const ParticleCloud& cloud, const PositionMap& map) {
  ParticleCloud out;
  out.generation_seed = cloud.generation_seed;
  out.weights = cloud.weights;
  out.positions.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Vec3 y = map(cloud.positions[i]);
    if (!all_finite(y)) {
      throw Error(ErrorCode::blow_up, "map produced a non-finite image for particle " + std::to_string(i));
    }
    out.positions.push_back(std::move(y));
  }
  return out;
}

ParticleCloud translated(const ParticleCloud& cloud, const Vec3& shift) {
  return push_forward(cloud, [&shift](const Vec3& x) -> Vec3 { return x + shift; });
}

// ---------------------------------------------------------------------------

double DensityReconstruction::mollifier(double r) const {
  const double q = r / bandwidth;
  if (q >= 1.0) return 0.0;
  const double h3 = bandwidth * bandwidth * bandwidth;
  const double a = 1.0 - q;
  const double a2 = a * a;
  return 21.0 / (2.0 * kPi * h3) * a2 * a2 * (1.0 + 4.0 * q);
}

DensityReconstruction DensityReconstruction::default_for(const ParticleCloud& cloud) {
  const double n = static_cast<double>(std::max<std::size_t>(cloud.size(), 1));
  double radius = cloud.support_radius();
  if (radius == 0.0) radius = 1.0;
  return {std::pow(n, -1.0 / 6.0) * radius};
}

namespace {

struct CellKeyHash {
  std::size_t operator()(const std::array<long long, 3>& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k[0]) * 0x9e3779b97f4a7c15ULL;
    h ^= static_cast<std::uint64_t>(k[1]) * 0xc2b2ae3d27d4eb4fULL;
    h ^= static_cast<std::uint64_t>(k[2]) * 0x165667b19e3779f9ULL;
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

}  // namespace

std::vector<double> density_at_particles(const ParticleCloud& cloud,
                                         const DensityReconstruction& recon) {
  if (!(recon.bandwidth > 0.0)) {
    throw Error(ErrorCode::invalid_parameter, "density bandwidth must be positive");
  }
  const double h = recon.bandwidth;
  auto cell_of = [h](const Vec3& p) {
    return std::array<long long, 3>{static_cast<long long>(std::floor(p.x() / h)),
                                    static_cast<long long>(std::floor(p.y() / h)),
                                    static_cast<long long>(std::floor(p.z() / h))};
  };
  std::unordered_map<std::array<long long, 3>, std::vector<std::size_t>, CellKeyHash> cells;
  for (std::size_t i = 0; i < cloud.size(); ++i) cells[cell_of(cloud.positions[i])].push_back(i);

  std::vector<double> rho(cloud.size(), 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(cloud.size()); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const Vec3& xi = cloud.positions[i];
    const auto c = cell_of(xi);
    double sum = 0.0;
    for (long long dx = -1; dx <= 1; ++dx)
      for (long long dy = -1; dy <= 1; ++dy)
        for (long long dz = -1; dz <= 1; ++dz) {
          auto it = cells.find({c[0] + dx, c[1] + dy, c[2] + dz});
          if (it == cells.end()) continue;
          for (std::size_t j : it->second) {
            if (j == i) continue;
            sum += cloud.weights[j] * recon.mollifier((xi - cloud.positions[j]).norm());
          }
        }
    rho[i] = sum;
  }
  return rho;
}

double lp_norm_estimate(const ParticleCloud& cloud, double p, const DensityReconstruction& recon) {
  if (!(p >= 1.0)) throw Error(ErrorCode::invalid_parameter, "p must be >= 1");
  if (!(recon.bandwidth > 0.0)) {
    throw Error(ErrorCode::invalid_parameter, "density bandwidth must be positive");
  }
  if (p == 1.0) return cloud.total_mass();
  const auto rho = density_at_particles(cloud, recon);
  double s = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) s += cloud.weights[i] * std::pow(rho[i], p - 1.0);
  return std::pow(s, 1.0 / p);
}

// ---------------------------------------------------------------------------

void write_cloud_csv(std::ostream& os, const ParticleCloud& cloud) {
  os << "x,y,z,w\n";
  char buf[160];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", p.x(), p.y(), p.z(),
                  cloud.weights[i]);
    os << buf;
  }
}

void write_cloud_csv(const std::string& path, const ParticleCloud& cloud) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_cloud_csv(os, cloud);
}

ParticleCloud read_cloud_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "x,y,z,w") {
    throw Error(ErrorCode::invalid_parameter, "cloud CSV must start with header x,y,z,w");
  }
  ParticleCloud cloud;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::array<double, 4> v{};
    std::istringstream ls(line);
    std::string field;
    std::size_t k = 0;
    while (std::getline(ls, field, ',')) {
      if (k >= 4) break;
      try {
        v[k++] = std::stod(field);
      } catch (const std::exception&) {
        throw Error(ErrorCode::invalid_parameter, "line " + std::to_string(lineno) + ": bad number");
      }
    }
    if (k != 4) {
      throw Error(ErrorCode::invalid_parameter, "line " + std::to_string(lineno) + ": expected 4 fields");
    }
    cloud.positions.emplace_back(v[0], v[1], v[2]);
    cloud.weights.push_back(v[3]);
  }
  return cloud;
}

ParticleCloud read_cloud_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_cloud_csv(is);
}

std::string cloud_to_json(const ParticleCloud& cloud) {
  nlohmann::json j;
  j["generation_seed"] = cloud.generation_seed;
  auto& parts = j["particles"] = nlohmann::json::array();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    parts.push_back({{"x", p.x()}, {"y", p.y()}, {"z", p.z()}, {"w", cloud.weights[i]}});
  }
  return j.dump();
}

ParticleCloud cloud_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ParticleCloud cloud;
  cloud.generation_seed = j.value("generation_seed", std::uint64_t{0});
  for (const auto& p : j.at("particles")) {
    cloud.positions.emplace_back(p.at("x").get<double>(), p.at("y").get<double>(),
                                 p.at("z").get<double>());
    cloud.weights.push_back(p.at("w").get<double>());
  }
  return cloud;
}

}  // namespace tstokes
