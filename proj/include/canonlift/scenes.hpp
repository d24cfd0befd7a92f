#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "canonlift/heads.hpp"
#include "canonlift/rng.hpp"
#include "canonlift/symmetry.hpp"

namespace canonlift {

enum class ShapeClass : std::uint8_t {
  TableRot4,
  BenchRot2,
  BottleRotCont,
  PlaneReflectY,
  WedgeIdentity
};

inline constexpr std::array<ShapeClass, 5> kAllShapeClasses = {
    ShapeClass::TableRot4, ShapeClass::BenchRot2, ShapeClass::BottleRotCont,
    ShapeClass::PlaneReflectY, ShapeClass::WedgeIdentity};

std::string_view to_string(ShapeClass c);
ShapeClass shape_class_from_string(std::string_view name);
SymmetryType nominal_symmetry(ShapeClass c);

enum class TextureMode : std::uint8_t {
  Symmetric,  // smooth function of the class's symmetry invariants
  Breaking,   // smooth function of raw coordinates (diagnostics)
};

std::string_view to_string(TextureMode m);
TextureMode texture_mode_from_string(std::string_view name);

struct ShapeSpec {
  ShapeClass shape_class = ShapeClass::TableRot4;
  std::vector<double> params;
  std::uint64_t seed = 0;
  bool operator==(const ShapeSpec&) const = default;
};

/// Draws class parameters from their documented ranges.
ShapeSpec random_shape_spec(ShapeClass c, std::uint64_t seed);

/// Union of boxes and z-aligned cylinders, centred on its bounding box and
/// scaled to a unit bounding-box diagonal.
class SdfShape {
 public:
  explicit SdfShape(const ShapeSpec& spec);

  const ShapeSpec& spec() const { return spec_; }
  double sdf(const Eigen::Vector3d& p) const;
  /// Central-difference gradient of sdf.
  Eigen::Vector3d gradient(const Eigen::Vector3d& p) const;
  /// Tight bounding box in canonical units.
  Eigen::Vector3d bbox_min() const { return bmin_; }
  Eigen::Vector3d bbox_max() const { return bmax_; }
  /// Smallest full extent of any primitive, canonical units.
  double min_thickness() const { return min_thickness_; }

 private:
  struct Primitive {
    bool cylinder = false;
    Eigen::Vector3d center;
    Eigen::Vector3d half;  // cylinders: (radius, radius, half height)
  };
  double raw_sdf(const Eigen::Vector3d& q) const;

  ShapeSpec spec_;
  std::vector<Primitive> prims_;
  Eigen::Vector3d offset_ = Eigen::Vector3d::Zero();
  double scale_ = 1.0;
  Eigen::Vector3d bmin_, bmax_;
  double min_thickness_ = 0.0;
};

/// Flat RGB colour in [0, 1] of surface point p.
Eigen::Vector3d texture(ShapeClass c, const Eigen::Vector3d& p, TextureMode mode);

struct RenderSample {
  int height = 0;
  int width = 0;
  std::vector<float> image;         // H*W*3
  std::vector<std::uint8_t> mask;   // H*W
  std::vector<float> coords;        // H*W*3, zero on background
  std::vector<float> depth;         // H*W, +inf on background
  Camera camera;
};

struct TraceSettings {
  int max_steps = 128;
  double epsilon = 1e-4;
};

RenderSample render_view(const SdfShape& shape, TextureMode mode, const Camera& camera,
                         int height, int width, const TraceSettings& trace = {});

/// Azimuth U[0, 360), elevation U[-20, 40], translation U[-0.1, 0.1]^3.
Camera sample_camera(Rng& rng, double distance = 1.5, double focal = 1.2);

/// `count` surface points: near-surface rejection samples projected onto the
/// zero level set.
std::vector<Eigen::Vector3d> sample_surface(const SdfShape& shape, std::size_t count,
                                            std::uint64_t seed);

/// occupancy[c] = sdf(cell centre) <= 0, or a 2^3 supersampled majority.
std::vector<std::uint8_t> voxelize(const SdfShape& shape, int cells, bool supersample = false);

}  // namespace canonlift
