#include "canonlift/symmetry.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace canonlift {

namespace {

constexpr double kDedupTolerance = 1e-9;

Eigen::Matrix3d make(double a00, double a01, double a10, double a11, double a22) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  m(0, 0) = a00;
  m(0, 1) = a01;
  m(1, 0) = a10;
  m(1, 1) = a11;
  m(2, 2) = a22;
  return m;
}

// Exact integer-entry matrices, so no rounding enters finite orbits.
const std::array<Eigen::Matrix3d, 1> kIdentity = {Eigen::Matrix3d::Identity()};
const std::array<Eigen::Matrix3d, 2> kReflectY = {Eigen::Matrix3d::Identity(),
                                                  make(1, 0, 0, -1, 1)};
const std::array<Eigen::Matrix3d, 2> kRot2 = {Eigen::Matrix3d::Identity(),
                                              make(-1, 0, 0, -1, 1)};
const std::array<Eigen::Matrix3d, 4> kRot4 = {
    Eigen::Matrix3d::Identity(), make(0, -1, 1, 0, 1), make(-1, 0, 0, -1, 1),
    make(0, 1, -1, 0, 1)};

double point_circle_distance(const CircleClosure& c, const Eigen::Vector3d& p) {
  const double rho = std::hypot(p.x(), p.y());
  return std::hypot(rho - c.radius, p.z() - c.height);
}

}  // namespace

std::string_view to_string(SymmetryType g) {
  switch (g) {
    case SymmetryType::Identity: return "identity";
    case SymmetryType::ReflectY: return "reflect_y";
    case SymmetryType::Rot2Z: return "rot2_z";
    case SymmetryType::Rot4Z: return "rot4_z";
    case SymmetryType::RotContZ: return "rotcont_z";
  }
  return "unknown";
}

SymmetryType symmetry_from_string(std::string_view name) {
  for (auto g : kAllSymmetryTypes) {
    if (to_string(g) == name) return g;
  }
  throw std::invalid_argument("unknown symmetry type '" + std::string(name) +
                              "' (valid: identity, reflect_y, rot2_z, rot4_z, rotcont_z)");
}

void SymmetryConfig::validate() const {
  if (active_set.empty()) throw std::invalid_argument("symmetry active_set must be non-empty");
  if (sample_count < 1) throw std::invalid_argument("symmetry sample_count must be >= 1");
  for (std::size_t i = 0; i < active_set.size(); ++i) {
    for (std::size_t j = i + 1; j < active_set.size(); ++j) {
      if (active_set[i] == active_set[j]) {
        throw std::invalid_argument("duplicate symmetry type in active_set: " +
                                    std::string(to_string(active_set[i])));
      }
    }
  }
}

std::span<const Eigen::Matrix3d> finite_transforms(SymmetryType g) {
  switch (g) {
    case SymmetryType::Identity: return kIdentity;
    case SymmetryType::ReflectY: return kReflectY;
    case SymmetryType::Rot2Z: return kRot2;
    case SymmetryType::Rot4Z: return kRot4;
    case SymmetryType::RotContZ: return {};
  }
  return {};
}

Eigen::Matrix3d rotation_z(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return make(c, -s, s, c, 1);
}

ClosureSet closure(SymmetryType g, const Eigen::Vector3d& x) {
  if (g == SymmetryType::RotContZ) {
    return CircleClosure{std::hypot(x.x(), x.y()), x.z()};
  }
  FiniteClosure out;
  for (const auto& m : finite_transforms(g)) {
    Eigen::Vector3d p = m * x;
    bool duplicate = false;
    for (const auto& q : out.points) {
      if ((p - q).cwiseAbs().maxCoeff() <= kDedupTolerance) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) out.points.push_back(p);
  }
  return out;
}

std::vector<Eigen::Vector3d> closure_samples(const ClosureSet& set, int m, Rng& rng) {
  if (m < 1) throw std::invalid_argument("closure_samples requires m >= 1");
  if (const auto* finite = std::get_if<FiniteClosure>(&set)) return finite->points;
  const auto& circle = std::get<CircleClosure>(set);
  std::vector<Eigen::Vector3d> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    out.emplace_back(circle.radius * std::cos(angle), circle.radius * std::sin(angle),
                     circle.height);
  }
  return out;
}

ClosestPoint closest_on_closure(SymmetryType g, const Eigen::Vector3d& seed,
                                const Eigen::Vector3d& target) {
  if (g == SymmetryType::RotContZ) {
    const double r = std::hypot(seed.x(), seed.y());
    const double rho = std::hypot(target.x(), target.y());
    double angle = 0.0;
    if (rho > 0.0) angle = std::atan2(target.y(), target.x());
    ClosestPoint out;
    out.point = Eigen::Vector3d(r * std::cos(angle), r * std::sin(angle), seed.z());
    out.distance = std::hypot(rho - r, target.z() - seed.z());
    return out;
  }
  ClosestPoint best;
  best.distance = std::numeric_limits<double>::infinity();
  int index = 0;
  for (const auto& m : finite_transforms(g)) {
    Eigen::Vector3d p = m * seed;
    const double d = (p - target).norm();
    if (d < best.distance) {
      best.distance = d;
      best.point = p;
      best.member = index;
    }
    ++index;
  }
  return best;
}

double closure_distance(SymmetryType ga, const Eigen::Vector3d& a, SymmetryType gb,
                        const Eigen::Vector3d& b) {
  const ClosureSet ca = closure(ga, a);
  const ClosureSet cb = closure(gb, b);
  const auto* fa = std::get_if<FiniteClosure>(&ca);
  const auto* fb = std::get_if<FiniteClosure>(&cb);
  if (!fa && !fb) {
    const auto& x = std::get<CircleClosure>(ca);
    const auto& y = std::get<CircleClosure>(cb);
    return std::hypot(x.radius - y.radius, x.height - y.height);
  }
  double best = std::numeric_limits<double>::infinity();
  if (fa && fb) {
    for (const auto& p : fa->points) {
      for (const auto& q : fb->points) best = std::min(best, (p - q).norm());
    }
    return best;
  }
  const auto& finite = fa ? *fa : *fb;
  const auto& circle = fa ? std::get<CircleClosure>(cb) : std::get<CircleClosure>(ca);
  for (const auto& p : finite.points) best = std::min(best, point_circle_distance(circle, p));
  return best;
}

}  // namespace canonlift
