#include "tstokes/control.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace tstokes {

void ControlRegion::validate() const {
  if (!(radius > 0.0)) throw Error(ErrorCode::invalid_parameter, "control region radius must be positive");
  if (!all_finite(center)) throw Error(ErrorCode::invalid_parameter, "control region center must be finite");
}

Vec3 point_force_for_velocity(const Vec3& alpha, const Vec3& x, const Vec3& a) {
  const Vec3 d = x - alpha;
  const double r = d.norm();
  if (r == 0.0) throw Error(ErrorCode::degenerate_geometry, "target coincides with the force location");
  return 8.0 * kPi * r * (a - 0.5 * d * (d.dot(a) / (r * r)));
}

Vec3 blob_force_for_velocity(const Vec3& alpha, const Vec3& x, const Vec3& a, double eps) {
  if (eps == 0.0) return point_force_for_velocity(alpha, x, a);
  if (!(eps > 0.0)) throw Error(ErrorCode::invalid_parameter, "blob width must be >= 0");
  // U_eps = (A I + B d d^T) / (8 pi); its inverse is 8 pi / A (I - B / (A + B r^2) d d^T).
  const Vec3 d = x - alpha;
  const double r2 = d.squaredNorm();
  const double s = r2 + eps * eps;
  const double b = 1.0 / (s * std::sqrt(s));
  const double av = (r2 + 2.0 * eps * eps) * b;
  return (8.0 * kPi / av) * (a - d * (b / (av + b * r2) * d.dot(a)));
}

namespace {

// Gauss-Legendre nodes and weights on [-1, 1].
template <unsigned N>
std::vector<std::pair<double, double>> gauss_rule() {
  using G = boost::math::quadrature::gauss<double, N>;
  const auto& x = G::abscissa();
  const auto& w = G::weights();
  std::vector<std::pair<double, double>> rule;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k] == 0.0) {
      rule.emplace_back(0.0, w[k]);
    } else {
      rule.emplace_back(x[k], w[k]);
      rule.emplace_back(-x[k], w[k]);
    }
  }
  return rule;
}

}  // namespace

Vec3 mollified_force_velocity(const Vec3& alpha, double eps, const Vec3& F, const Vec3& x) {
  if (!(eps > 0.0)) throw Error(ErrorCode::invalid_parameter, "blob radius must be positive");
  const Vec3 d = x - alpha;
  const double dist = d.norm();
  if (dist <= eps) throw Error(ErrorCode::target_inside_blob, "target lies inside the force blob");
  if (F.isZero(0.0)) return Vec3::Zero();

  static const auto radial = gauss_rule<16>();
  static const auto polar = gauss_rule<30>();
  constexpr int n_phi = 32;
  // Polar axis along x - alpha, where the integrand varies fastest.
  const Vec3 ez = d / dist;
  const Vec3 ex = (std::abs(ez.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY()).cross(ez).normalized();
  const Vec3 ey = ez.cross(ex);

  Mat3 acc = Mat3::Zero();
  for (const auto& [xr, wr] : radial) {
    const double rho = 0.5 * eps * (xr + 1.0);
    const double wrho = 0.5 * eps * wr * rho * rho;
    for (const auto& [mu, wm] : polar) {
      const double sn = std::sqrt(std::max(0.0, 1.0 - mu * mu));
      for (int k = 0; k < n_phi; ++k) {
        const double phi = 2.0 * kPi * (k + 0.5) / n_phi;
        const Vec3 y = alpha + rho * (mu * ez + sn * (std::cos(phi) * ex + std::sin(phi) * ey));
        acc += (wrho * wm * (2.0 * kPi / n_phi)) * oseen(x - y);
      }
    }
  }
  const double volume = 4.0 / 3.0 * kPi * eps * eps * eps;
  return (acc / volume) * F;
}

double smooth_step(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / s);
  const double b = std::exp(-1.0 / (1.0 - s));
  return a / (a + b);
}

Curve::Curve(std::vector<Vec3> waypoints, double t0, double t1, double pad)
    : pts_(std::move(waypoints)), t0_(t0), t1_(t1), pad_(pad) {
  if (pts_.empty()) throw Error(ErrorCode::invalid_parameter, "curve needs at least one waypoint");
  if (!(t1 > t0)) throw Error(ErrorCode::invalid_parameter, "curve interval must be nonempty");
  if (!(pad >= 0.0 && pad < 0.5)) throw Error(ErrorCode::invalid_parameter, "curve pad must lie in [0, 1/2)");
}

Vec3 Curve::operator()(double t) const {
  if (pts_.size() == 1) return pts_[0];
  const double tau = (t - t0_) / (t1_ - t0_);
  const double sigma = std::clamp((tau - pad_) / (1.0 - 2.0 * pad_), 0.0, 1.0);
  const auto legs = static_cast<double>(pts_.size() - 1);
  const double u = sigma * legs;
  const auto leg = std::min(static_cast<std::size_t>(u), pts_.size() - 2);
  const double s = u - static_cast<double>(leg);
  return pts_[leg] + smooth_step(s) * (pts_[leg + 1] - pts_[leg]);
}

double Curve::length() const {
  double l = 0.0;
  for (std::size_t k = 1; k < pts_.size(); ++k) l += (pts_[k] - pts_[k - 1]).norm();
  return l;
}

namespace {

double distance_to_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double l2 = ab.squaredNorm();
  const double s = l2 > 0.0 ? std::clamp((p - a).dot(ab) / l2, 0.0, 1.0) : 0.0;
  return (p - (a + s * ab)).norm();
}

// Curves are polylines, so the closest approach is exact.
double curve_distance(const Curve& c, const Vec3& p) {
  const auto& w = c.waypoints();
  if (w.size() == 1) return (p - w[0]).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < w.size(); ++k) best = std::min(best, distance_to_segment(p, w[k - 1], w[k]));
  return best;
}

}  // namespace

FollowResult follow_curve(const Vec3& marker, const Curve& gamma, const ControlRegion& region,
                          const VelocityField* background, double dt, double eps) {
  region.validate();
  if (!(dt > 0.0)) throw Error(ErrorCode::invalid_parameter, "dt must be positive");
  if ((marker - gamma(gamma.t0())).norm() > 1e-9 * (1.0 + marker.norm())) {
    throw Error(ErrorCode::invalid_parameter, "marker must start on the curve");
  }
  if (curve_distance(gamma, region.center) <= region.radius) {
    throw Error(ErrorCode::curve_enters_region, "curve meets the closed control region");
  }
  const Vec3& alpha = region.center;
  const double span = gamma.t1() - gamma.t0();
  const auto n = static_cast<std::size_t>(std::ceil(span / dt - 1e-9));
  const double h = span / static_cast<double>(n);

  auto bg = [background](const Vec3& x) -> Vec3 {
    return background ? background->eval(x) : Vec3::Zero();
  };
  FollowResult res;
  Vec3 m = marker;
  res.times.push_back(gamma.t0());
  res.markers.push_back(m);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = gamma.t0() + static_cast<double>(k) * h;
    const double t_next = k + 1 == n ? gamma.t1() : t + h;
    const Vec3 a = (gamma(t_next) - m) / (t_next - t) - bg(m);
    const Vec3 F = blob_force_for_velocity(alpha, m, a, eps);
    const auto vel = [&](std::span<const Vec3> xs) {
      std::vector<Vec3> v(xs.size());
      for (std::size_t i = 0; i < xs.size(); ++i) v[i] = control_velocity(xs[i], alpha, F, eps) + bg(xs[i]);
      return v;
    };
    const std::array<Vec3, 1> cur = {m};
    m = rk4_step(cur, t_next - t, vel)[0];
    res.forces.push_back(F);
    res.times.push_back(t_next);
    res.markers.push_back(m);
    res.max_deviation = std::max(res.max_deviation, (m - gamma(t_next)).norm());
  }
  return res;
}

// ---------------------------------------------------------------------------
// Staged transport

std::vector<Ball> greedy_covering(const ParticleCloud& cloud, double radius) {
  if (!(radius > 0.0)) throw Error(ErrorCode::invalid_parameter, "covering radius must be positive");
  std::vector<Ball> balls;
  for (const auto& p : cloud.positions) {
    const bool covered =
        std::any_of(balls.begin(), balls.end(), [&p](const Ball& b) { return b.contains(p); });
    if (!covered) balls.push_back({p, radius});
  }
  return balls;
}

const ForceSample* ControlStage::sample_at(double t) const {
  if (schedule.empty() || t < schedule.front().t || t >= t_end) return nullptr;
  auto it = std::upper_bound(schedule.begin(), schedule.end(), t,
                             [](double v, const ForceSample& s) { return v < s.t; });
  return &*(it - 1);
}

ControlPlan ControlPlan::time_scaled(double s) const {
  if (!(s > 0.0)) throw Error(ErrorCode::invalid_parameter, "time scale must be positive");
  ControlPlan p = *this;
  p.horizon *= s;
  p.t0 *= s;
  for (auto& st : p.stages) {
    st.t_begin *= s;
    st.t_quarter *= s;
    st.t_half *= s;
    st.t_end *= s;
    for (auto& f : st.schedule) {
      f.t *= s;
      f.force /= s;
    }
  }
  return p;
}

std::string ControlPlan::to_json() const {
  using nlohmann::json;
  auto vec = [](const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); };
  json j;
  j["horizon"] = horizon;
  j["t0"] = t0;
  j["target"] = {{"center", vec(target.center)}, {"radius", target.radius}};
  j["regions"] = json::array();
  for (const auto& r : regions) j["regions"].push_back({{"center", vec(r.center)}, {"radius", r.radius}});
  j["stages"] = json::array();
  for (const auto& st : stages) {
    json s;
    s["index"] = st.index;
    s["times"] = {st.t_begin, st.t_quarter, st.t_half, st.t_end};
    s["absorption_window"] = {st.t_quarter, st.t_half};
    s["ball"] = {{"center", vec(st.ball.center)}, {"radius", st.ball.radius}};
    s["region"] = st.region;
    s["schedule"] = json::array();
    for (const auto& f : st.schedule) {
      s["schedule"].push_back(
          {{"t", f.t}, {"location", vec(f.location)}, {"force", vec(f.force)}, {"eps", f.eps}});
    }
    j["stages"].push_back(std::move(s));
  }
  return j.dump(1);
}

ControlPlan staged_transport_plan(const ParticleCloud& cloud, const std::vector<Ball>& covering,
                                  const Ball& target, double horizon,
                                  const std::vector<ControlRegion>& regions, const PlanOptions& options) {
  if (covering.empty()) throw Error(ErrorCode::covering_insufficient, "covering is empty");
  if (!(horizon > 0.0)) throw Error(ErrorCode::invalid_parameter, "horizon must be positive");
  if (!(target.radius > 0.0)) throw Error(ErrorCode::invalid_parameter, "target radius must be positive");
  if (regions.empty()) throw Error(ErrorCode::invalid_parameter, "at least one control region is needed");
  if (options.steps_per_leg < 1) throw Error(ErrorCode::invalid_parameter, "steps_per_leg must be >= 1");
  for (const auto& r : regions) {
    r.validate();
    if ((r.center - target.center).norm() <= r.radius + target.radius) {
      throw Error(ErrorCode::invalid_parameter, "control region overlaps the target ball");
    }
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    if (std::none_of(covering.begin(), covering.end(), [&p](const Ball& b) { return b.contains(p); })) {
      throw Error(ErrorCode::covering_insufficient,
                  "particle " + std::to_string(i) + " lies outside every covering ball");
    }
  }

  ControlPlan plan;
  plan.horizon = horizon;
  plan.t0 = horizon / 4.0;
  plan.target = target;
  plan.regions = regions;
  const auto L = static_cast<double>(covering.size());
  const double delta = horizon / (4.0 * (L + 1.0));

  for (std::size_t b = 0; b < covering.size(); ++b) {
    ControlStage st;
    st.index = static_cast<int>(b) + 1;
    st.t_begin = plan.t0 + static_cast<double>(b + 1) * delta;
    st.t_quarter = st.t_begin + 0.25 * delta;
    st.t_half = st.t_begin + 0.5 * delta;
    st.t_end = st.t_begin + delta;
    st.ball = covering[b];
    const Ball& ball = covering[b];
    if ((ball.center - target.center).norm() + ball.radius <= target.radius) {
      plan.stages.push_back(std::move(st));
      continue;
    }
    const Curve curve = Curve::line(ball.center, target.center, st.t_begin, st.t_quarter, options.pad);
    // Among admissible regions prefer the one the marker recedes from, so the
    // swept fluid moves away from the force instead of through it.
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < regions.size(); ++r) {
      const Vec3& alpha = regions[r].center;
      const double gap = (alpha - ball.center).norm() - regions[r].radius - ball.radius;
      if (gap <= 0.0 || curve_distance(curve, alpha) <= regions[r].radius) continue;
      const double recede = (target.center - alpha).norm() - (ball.center - alpha).norm();
      if (recede > best) {
        best = recede;
        st.region = static_cast<int>(r);
      }
    }
    if (st.region < 0) {
      throw Error(ErrorCode::curve_enters_region,
                  "no control region keeps clear of covering ball " + std::to_string(b));
    }
    const ControlRegion& region = regions[static_cast<std::size_t>(st.region)];
    const double h = (st.t_quarter - st.t_begin) / static_cast<double>(options.steps_per_leg);
    const FollowResult fr = follow_curve(ball.center, curve, region, nullptr, h, options.eps);
    for (std::size_t m = 0; m < fr.forces.size(); ++m) {
      st.schedule.push_back({fr.times[m], region.center, fr.forces[m], options.eps});
    }
    // Hold in the target, then replay time-mirrored about t_half with opposite sign.
    st.schedule.push_back({st.t_quarter, region.center, Vec3::Zero(), options.eps});
    const double mirror = 2.0 * st.t_half;
    for (std::size_t m = fr.forces.size(); m-- > 0;) {
      st.schedule.push_back({mirror - fr.times[m + 1], region.center, -fr.forces[m], options.eps});
    }
    plan.stages.push_back(std::move(st));
  }
  return plan;
}

ExecutionResult execute_control(const ParticleCloud& cloud, const ControlPlan& plan,
                                const ExecuteOptions& options) {
  if (!(options.dt > 0.0)) throw Error(ErrorCode::invalid_parameter, "dt must be positive");
  ExecutionResult res;

  std::vector<double> marks = {0.0, plan.horizon, plan.t0};
  for (const auto& st : plan.stages) {
    marks.insert(marks.end(), {st.t_begin, st.t_quarter, st.t_half, st.t_end});
    for (const auto& f : st.schedule) marks.push_back(f.t);
  }
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());

  std::vector<double> boundaries = {plan.t0};
  for (const auto& st : plan.stages) boundaries.push_back(st.t_begin);
  if (!plan.stages.empty()) boundaries.push_back(plan.stages.back().t_end);

  ParticleCloud cur = cloud;
  std::vector<std::size_t> ids(cloud.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  const double mass0 = cloud.total_mass();
  res.ledger.push_back({0.0, mass0});
  std::size_t next_boundary = 0;
  std::size_t stage_cursor = 0;

  auto record_boundary = [&](double t) {
    while (next_boundary < boundaries.size() && boundaries[next_boundary] <= t) {
      res.boundary_times.push_back(boundaries[next_boundary]);
      res.boundary_snapshots.push_back(cur);
      res.boundary_ids.push_back(ids);
      ++next_boundary;
    }
  };
  record_boundary(0.0);

  for (std::size_t g = 0; g + 1 < marks.size(); ++g) {
    const double a = marks[g], b = marks[g + 1];
    const auto n_sub = static_cast<std::size_t>(std::max(1.0, std::ceil((b - a) / options.dt - 1e-9)));
    for (std::size_t s = 0; s < n_sub; ++s) {
      const double ta = a + (b - a) * static_cast<double>(s) / static_cast<double>(n_sub);
      const double tb = s + 1 == n_sub ? b : a + (b - a) * static_cast<double>(s + 1) / static_cast<double>(n_sub);
      const double mid = 0.5 * (ta + tb);
      while (stage_cursor < plan.stages.size() && plan.stages[stage_cursor].t_end <= mid) ++stage_cursor;
      const ControlStage* stage =
          stage_cursor < plan.stages.size() && plan.stages[stage_cursor].t_begin <= mid
              ? &plan.stages[stage_cursor]
              : nullptr;
      const ForceSample* f = stage ? stage->sample_at(mid) : nullptr;
      const bool forced = f && !f->force.isZero(0.0);

      if (!cur.empty() && (forced || options.self_induction)) {
        const auto vel = [&](std::span<const Vec3> xs) {
          std::vector<Vec3> v(xs.size(), Vec3::Zero());
          if (options.self_induction) {
            ParticleCloud st;
            st.positions.assign(xs.begin(), xs.end());
            st.weights = cur.weights;
            v = options.model.field(st).at_sources();
          }
          if (forced) {
            for (std::size_t i = 0; i < xs.size(); ++i) v[i] += control_velocity(xs[i], f->location, f->force, f->eps);
          }
          return v;
        };
        cur.positions = rk4_step(cur.positions, tb - ta, vel);
        if (forced) {
          const double blob = std::max(f->eps, 0.0);
          for (const auto& p : cur.positions) {
            if ((p - f->location).norm() <= blob) ++res.blob_collisions;
          }
        }
      }

      // Absorption inside the target during (t_{i+1/4}, t_{i+1/2}].
      if (options.absorb && stage && tb > stage->t_quarter && tb <= stage->t_half && !cur.empty()) {
        std::size_t keep = 0;
        bool absorbed_any = false;
        for (std::size_t i = 0; i < cur.size(); ++i) {
          if (plan.target.contains(cur.positions[i])) {
            res.events.push_back({tb, ids[i], cur.positions[i], cur.weights[i]});
            res.absorbed_mass += cur.weights[i];
            absorbed_any = true;
            continue;
          }
          cur.positions[keep] = cur.positions[i];
          cur.weights[keep] = cur.weights[i];
          ids[keep] = ids[i];
          ++keep;
        }
        cur.positions.resize(keep);
        cur.weights.resize(keep);
        ids.resize(keep);
        if (absorbed_any) res.ledger.push_back({tb, mass0 - res.absorbed_mass});
      }
      record_boundary(tb);
    }
  }
  if (res.blob_collisions > 0) {
    res.warnings.push_back("blob collision: " + std::to_string(res.blob_collisions) +
                           " particle steps ended inside a force blob");
  }
  res.remaining_mass = mass0 - res.absorbed_mass;
  res.ledger.push_back({plan.horizon, res.remaining_mass});
  res.final_cloud = std::move(cur);
  res.final_ids = std::move(ids);
  return res;
}

void write_ledger_csv(const std::string& path, const std::vector<LedgerRow>& ledger) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "t,remaining_mass\n";
  char buf[80];
  for (const auto& r : ledger) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", r.t, r.remaining_mass);
    os << buf;
  }
}

}  // namespace tstokes
