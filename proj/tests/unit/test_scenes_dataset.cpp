#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <gtest/gtest.h>

#include "canonlift/binary_io.hpp"
#include "canonlift/dataset.hpp"
#include "canonlift/scenes.hpp"
#include "canonlift/voxelgrid.hpp"
#include "test_util.hpp"

using namespace canonlift;
using canonlift::testing::random_point;

namespace {

DatasetConfig tiny_config() {
  DatasetConfig c;
  c.count_per_class = 3;
  c.image_size = 16;
  c.render_size = 16;
  c.input_views = 2;
  c.supervision_views = 2;
  c.grid_cells = 8;
  c.oracle_points = 256;
  return c;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(ShapeClass, NamesRoundTrip) {
  for (auto c : kAllShapeClasses) EXPECT_EQ(shape_class_from_string(to_string(c)), c);
  EXPECT_THROW(shape_class_from_string("teapot"), std::invalid_argument);
  EXPECT_EQ(texture_mode_from_string("breaking"), TextureMode::Breaking);
}

TEST(SdfShape, NormalizedAndCentred) {
  for (auto c : kAllShapeClasses) {
    for (std::uint64_t s = 0; s < 10; ++s) {
      const SdfShape shape(random_shape_spec(c, s));
      EXPECT_NEAR((shape.bbox_max() - shape.bbox_min()).norm(), 1.0, 1e-12);
      EXPECT_LT((shape.bbox_max() + shape.bbox_min()).norm(), 1e-12);
      EXPECT_GT(shape.sdf({0.6, 0.6, 0.6}), 0.0);
      EXPECT_GT(shape.min_thickness(), 0.0);
    }
  }
}

TEST(SdfShape, InvariantUnderNominalSymmetry) {
  Rng rng(1);
  for (auto c : kAllShapeClasses) {
    const SdfShape shape(random_shape_spec(c, 7));
    const SymmetryType g = nominal_symmetry(c);
    for (int trial = 0; trial < 500; ++trial) {
      const Eigen::Vector3d p = random_point(rng, 0.5);
      const double d = shape.sdf(p);
      const Eigen::Vector3d col = texture(c, p, TextureMode::Symmetric);
      std::vector<Eigen::Matrix3d> maps;
      if (g == SymmetryType::RotContZ) {
        maps.push_back(rotation_z(rng.uniform(0, 2 * std::numbers::pi)));
      } else {
        for (const auto& m : finite_transforms(g)) maps.push_back(m);
      }
      for (const auto& m : maps) {
        ASSERT_NEAR(shape.sdf(m * p), d, 1e-9) << to_string(c);
        ASSERT_LT((texture(c, m * p, TextureMode::Symmetric) - col).norm(), 1e-9) << to_string(c);
      }
    }
  }
}

TEST(SdfShape, SurfaceSamplesOnZeroLevelSet) {
  for (auto c : kAllShapeClasses) {
    const SdfShape shape(random_shape_spec(c, 3));
    const auto pts = sample_surface(shape, 200, 11);
    ASSERT_EQ(pts.size(), 200u);
    for (const auto& p : pts) {
      EXPECT_LT(std::abs(shape.sdf(p)), 1e-4);
      EXPECT_NEAR(shape.gradient(p).norm(), 1.0, 0.05);
    }
    EXPECT_EQ(sample_surface(shape, 50, 11), sample_surface(shape, 50, 11));
  }
}

TEST(Voxelize, MatchesSdfSignAtCentres) {
  const SdfShape shape(random_shape_spec(ShapeClass::TableRot4, 2));
  const int C = 8;
  const auto occ = voxelize(shape, C);
  const GridSpec spec{C, 1};
  std::size_t filled = 0;
  for (std::size_t i = 0; i < occ.size(); ++i) {
    EXPECT_EQ(occ[i], shape.sdf(spec.center(i)) <= 0.0 ? 1 : 0);
    filled += occ[i];
  }
  EXPECT_GT(filled, 0u);
  EXPECT_EQ(voxelize(shape, C, true).size(), occ.size());
}

TEST(RenderView, ForegroundHitsSurface) {
  Rng rng(2);
  for (auto c : kAllShapeClasses) {
    const SdfShape shape(random_shape_spec(c, 5));
    const Camera cam = sample_camera(rng);
    const auto s = render_view(shape, TextureMode::Symmetric, cam, 24, 24);
    std::size_t fg = 0;
    for (std::size_t px = 0; px < s.mask.size(); ++px) {
      if (!s.mask[px]) {
        EXPECT_EQ(s.image[3 * px], 0.0f);
        EXPECT_TRUE(std::isinf(s.depth[px]));
        continue;
      }
      ++fg;
      const Eigen::Vector3d p(s.coords[3 * px], s.coords[3 * px + 1], s.coords[3 * px + 2]);
      EXPECT_LT(std::abs(shape.sdf(p)), 2e-4);
      const Ray ray = cast_ray(cam, static_cast<int>(px / 24), static_cast<int>(px % 24), 24, 24);
      EXPECT_LT((ray.origin + s.depth[px] * ray.direction - p).norm(), 1e-5);
    }
    EXPECT_GT(fg, 0u) << to_string(c);
  }
}

TEST(Splits, CountsFollowRoundedFractions) {
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 143; ++i) ++counts[static_cast<int>(split_of(i, 143))];
  EXPECT_EQ(counts[0], 100);
  EXPECT_EQ(counts[1], 14);
  EXPECT_EQ(counts[2], 29);
  EXPECT_EQ(split_of(0, 1), Split::Train);
}

TEST(Dataset, GenerationIsOrderIndependentAndDeterministic) {
  const auto cfg = tiny_config();
  const auto ds = generate_dataset(cfg);
  ASSERT_EQ(ds.instances.size(), 15u);
  const auto& inst = ds.instances[7];  // class 2, index 1
  EXPECT_EQ(inst.spec.shape_class, ShapeClass::BottleRotCont);
  EXPECT_TRUE(generate_instance(cfg, ShapeClass::BottleRotCont, 1, inst.id) == inst);
  EXPECT_EQ(inst.inputs.size(), 2u);
  EXPECT_EQ(inst.occupancy.size(), 512u);
  EXPECT_EQ(inst.oracle.size(), 3u * 256u);
  auto other = cfg;
  other.seed = 2;
  EXPECT_FALSE(generate_instance(other, ShapeClass::BottleRotCont, 1, inst.id) == inst);
  EXPECT_EQ(ds.split(Split::Train).size() + ds.split(Split::Val).size() + ds.split(Split::Test).size(),
            15u);
}

TEST(Dataset, InstanceRecordRoundTrip) {
  auto cfg = tiny_config();
  const auto inst = generate_instance(cfg, ShapeClass::PlaneReflectY, 0, 3);
  const auto bytes = encode_instance(inst);
  const auto back = decode_instance(bytes);
  EXPECT_TRUE(back == inst);
  EXPECT_EQ(encode_instance(back), bytes);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_instance(trailing), DataError);
  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  EXPECT_THROW(decode_instance(truncated), DataError);
}

TEST(Dataset, DirectoryRoundTripAndErrors) {
  auto cfg = tiny_config();
  cfg.classes = {ShapeClass::WedgeIdentity};
  const auto ds = generate_dataset(cfg);
  const auto dir = temp_dir("canonlift_ds_test");
  write_dataset(dir, ds);
  const auto back = read_dataset(dir);
  ASSERT_EQ(back.instances.size(), ds.instances.size());
  for (std::size_t i = 0; i < ds.instances.size(); ++i) EXPECT_TRUE(back.instances[i] == ds.instances[i]);
  EXPECT_EQ(dataset_config_json(back.config), dataset_config_json(cfg));

  // A corrupt record names its file.
  const auto rec = dir / "instance_00001.clds";
  ASSERT_TRUE(std::filesystem::exists(rec));
  { std::ofstream(rec, std::ios::binary | std::ios::app) << 'x'; }
  try {
    read_dataset(dir);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("instance_00001.clds"), std::string::npos);
  }
  std::filesystem::remove_all(dir);
  EXPECT_THROW(read_dataset(dir), DataError);
}

TEST(DatasetConfig, RejectsBadValues) {
  auto cfg = tiny_config();
  cfg.count_per_class = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.classes.clear();
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}
