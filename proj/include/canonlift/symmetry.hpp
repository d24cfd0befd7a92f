#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "canonlift/rng.hpp"

namespace canonlift {

/// Global symmetry types an object point may belong to. Rotations act about
/// the z-axis through the origin; the reflection negates y.
enum class SymmetryType : std::uint8_t { Identity, ReflectY, Rot2Z, Rot4Z, RotContZ };

inline constexpr std::array<SymmetryType, 5> kAllSymmetryTypes = {
    SymmetryType::Identity, SymmetryType::ReflectY, SymmetryType::Rot2Z,
    SymmetryType::Rot4Z, SymmetryType::RotContZ};

std::string_view to_string(SymmetryType g);
/// Throws std::invalid_argument on an unknown name.
SymmetryType symmetry_from_string(std::string_view name);

struct FiniteClosure {
  std::vector<Eigen::Vector3d> points;
};

struct CircleClosure {
  double radius = 0.0;
  double height = 0.0;
};

using ClosureSet = std::variant<FiniteClosure, CircleClosure>;

struct SymmetryConfig {
  std::vector<SymmetryType> active_set{kAllSymmetryTypes.begin(), kAllSymmetryTypes.end()};
  int sample_count = 8;
  std::uint64_t rng_seed = 0;

  /// The "w/o symmetry" ablation: a single coordinate per pixel.
  static SymmetryConfig identity_only() {
    SymmetryConfig c;
    c.active_set = {SymmetryType::Identity};
    return c;
  }
  void validate() const;
};

/// Linear maps generating a finite orbit (first entry is always the identity).
/// Empty for RotContZ.
std::span<const Eigen::Matrix3d> finite_transforms(SymmetryType g);

Eigen::Matrix3d rotation_z(double angle);

/// Orbit of x under g. Finite members are deduplicated at 1e-9.
ClosureSet closure(SymmetryType g, const Eigen::Vector3d& x);

/// Finite sets are returned verbatim; circles yield m uniform-angle points.
std::vector<Eigen::Vector3d> closure_samples(const ClosureSet& set, int m, Rng& rng);

struct ClosestPoint {
  Eigen::Vector3d point;
  double distance = 0.0;
  int member = 0;  // enumeration index for finite sets, 0 for circles
};

ClosestPoint closest_on_closure(SymmetryType g, const Eigen::Vector3d& seed,
                                const Eigen::Vector3d& target);

/// Smallest distance between two closure sets.
double closure_distance(SymmetryType ga, const Eigen::Vector3d& a, SymmetryType gb,
                        const Eigen::Vector3d& b);

}  // namespace canonlift
