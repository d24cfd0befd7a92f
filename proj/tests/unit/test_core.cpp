#include <cmath>
#include <numbers>
#include <set>

#include <gtest/gtest.h>

#include "canonlift/binary_io.hpp"
#include "canonlift/rng.hpp"
#include "canonlift/symmetry.hpp"
#include "test_util.hpp"

using namespace canonlift;
using canonlift::testing::random_point;

namespace {

// Orbit generators written out by hand.
std::vector<Eigen::Matrix3d> hand_orbit(SymmetryType g) {
  Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d flip_y = I, half = I, quarter = Eigen::Matrix3d::Zero();
  flip_y(1, 1) = -1;
  half(0, 0) = half(1, 1) = -1;
  quarter(0, 1) = -1;
  quarter(1, 0) = 1;
  quarter(2, 2) = 1;
  switch (g) {
    case SymmetryType::Identity: return {I};
    case SymmetryType::ReflectY: return {I, flip_y};
    case SymmetryType::Rot2Z: return {I, half};
    case SymmetryType::Rot4Z: return {I, quarter, half, quarter * half};
    case SymmetryType::RotContZ: return {};
  }
  return {};
}

}  // namespace

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    differs = differs || x != c.uniform();
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, IndexCoversRange) {
  Rng r(3);
  std::set<std::size_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto k = r.index(7);
    ASSERT_LT(k, 7u);
    seen.insert(k);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Rng, DeriveSeedSeparatesInputs) {
  std::set<std::uint64_t> seeds;
  for (std::uint64_t a = 0; a < 20; ++a) {
    for (std::uint64_t b = 0; b < 20; ++b) seeds.insert(derive_seed(9, a, b));
  }
  EXPECT_EQ(seeds.size(), 400u);
  EXPECT_EQ(derive_seed(9, 1, 2), derive_seed(9, 1, 2));
  EXPECT_NE(derive_seed(9, 1, 2), derive_seed(9, 2, 1));
}

TEST(BinaryIo, FnvReferenceValues) {
  // Published FNV-1a 64 test vectors.
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ull);
  EXPECT_EQ(hex64(0xaf63dc4c8601ec8cull), "af63dc4c8601ec8c");
  EXPECT_EQ(hex64(1), "0000000000000001");
}

TEST(BinaryIo, RoundTrip) {
  ByteWriter w;
  w.put_magic("TEST");
  w.put<std::uint32_t>(7);
  w.put<double>(-2.5);
  w.put_string16("name");
  const float arr[3] = {1.f, 2.f, 3.f};
  w.put_array<float>(arr);
  ByteReader r(w.bytes(), "mem");
  r.expect_magic("TEST");
  EXPECT_EQ(r.get<std::uint32_t>("u32"), 7u);
  EXPECT_EQ(r.get<double>("f64"), -2.5);
  EXPECT_EQ(r.get_string16("name"), "name");
  float back[3];
  r.get_array<float>(back, "arr");
  EXPECT_EQ(back[2], 3.f);
  EXPECT_TRUE(r.at_end());
}

TEST(BinaryIo, TruncationReportsOffset) {
  ByteWriter w;
  w.put<std::uint16_t>(1);
  ByteReader r(w.bytes(), "mem");
  r.get<std::uint16_t>("a");
  try {
    r.get<std::uint32_t>("count");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.offset(), 2u);
    EXPECT_NE(std::string(e.what()).find("count"), std::string::npos);
  }
  ByteReader bad(std::vector<std::uint8_t>{'N', 'O', 'P', 'E'});
  EXPECT_THROW(bad.expect_magic("CLDS"), DataError);
  EXPECT_THROW(ByteReader::from_file("/nonexistent/file.bin"), DataError);
}

TEST(Symmetry, NamesRoundTrip) {
  for (SymmetryType g : kAllSymmetryTypes) EXPECT_EQ(symmetry_from_string(to_string(g)), g);
  EXPECT_EQ(to_string(SymmetryType::RotContZ), "rotcont_z");
  EXPECT_THROW(symmetry_from_string("rot3_z"), std::invalid_argument);
}

TEST(Symmetry, FiniteTransformsMatchHandOrbits) {
  for (SymmetryType g : kAllSymmetryTypes) {
    const auto got = finite_transforms(g);
    const auto want = hand_orbit(g);
    ASSERT_EQ(got.size(), want.size()) << to_string(g);
    if (!got.empty()) EXPECT_TRUE(got[0].isIdentity(0));
    for (const auto& w : want) {
      bool found = false;
      for (const auto& m : got) found = found || (m - w).norm() < 1e-12;
      EXPECT_TRUE(found) << to_string(g);
    }
  }
}

TEST(Symmetry, ClosuresAreGroupOrbits) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Vector3d x = random_point(rng);
    for (SymmetryType g : kAllSymmetryTypes) {
      const auto set = closure(g, x);
      if (g == SymmetryType::RotContZ) {
        const auto& c = std::get<CircleClosure>(set);
        EXPECT_NEAR(c.radius, std::hypot(x.x(), x.y()), 1e-12);
        EXPECT_EQ(c.height, x.z());
        continue;
      }
      const auto& pts = std::get<FiniteClosure>(set).points;
      EXPECT_EQ(pts.size(), hand_orbit(g).size());
      // Closed under the generators: every image of a member is a member.
      for (const auto& p : pts) {
        for (const auto& R : hand_orbit(g)) {
          double best = INFINITY;
          for (const auto& q : pts) best = std::min(best, (R * p - q).norm());
          EXPECT_LT(best, 1e-12);
        }
      }
    }
  }
}

TEST(Symmetry, ClosureDeduplicatesFixedPoints) {
  // A point on the z-axis is fixed by every rotation about it.
  const Eigen::Vector3d axis(0, 0, 0.2);
  EXPECT_EQ(std::get<FiniteClosure>(closure(SymmetryType::Rot4Z, axis)).points.size(), 1u);
  EXPECT_EQ(std::get<FiniteClosure>(closure(SymmetryType::ReflectY, {0.1, 0, 0.3})).points.size(), 1u);
}

TEST(Symmetry, ClosestOnFiniteClosureMatchesEnumeration) {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const Eigen::Vector3d s = random_point(rng), t = random_point(rng);
    for (SymmetryType g : {SymmetryType::Identity, SymmetryType::ReflectY, SymmetryType::Rot2Z,
                           SymmetryType::Rot4Z}) {
      double best = INFINITY;
      for (const auto& R : hand_orbit(g)) best = std::min(best, (R * s - t).norm());
      const auto c = closest_on_closure(g, s, t);
      EXPECT_EQ(c.distance, best);
      EXPECT_NEAR((c.point - t).norm(), c.distance, 1e-15);
    }
  }
}

TEST(Symmetry, ClosestOnCircleMatchesDenseSampling) {
  Rng rng(12);
  constexpr int kAngles = 100000;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Vector3d s = random_point(rng), t = random_point(rng);
    const double r = std::hypot(s.x(), s.y());
    double best = INFINITY;
    for (int i = 0; i < kAngles; ++i) {
      const double a = 2.0 * std::numbers::pi * i / kAngles;
      best = std::min(best, (Eigen::Vector3d(r * std::cos(a), r * std::sin(a), s.z()) - t).norm());
    }
    const auto c = closest_on_closure(SymmetryType::RotContZ, s, t);
    EXPECT_LE(c.distance, best + 1e-12);
    EXPECT_NEAR(c.distance, best, 1e-6);
    EXPECT_NEAR(std::hypot(c.point.x(), c.point.y()), r, 1e-12);
  }
}

TEST(Symmetry, ClosureDistanceProperties) {
  Rng rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    const Eigen::Vector3d a = random_point(rng), b = random_point(rng);
    for (SymmetryType ga : kAllSymmetryTypes) {
      EXPECT_NEAR(closure_distance(ga, a, ga, a), 0.0, 1e-12);
      for (SymmetryType gb : kAllSymmetryTypes) {
        const double d = closure_distance(ga, a, gb, b);
        EXPECT_NEAR(d, closure_distance(gb, b, ga, a), 1e-12);
        EXPECT_LE(d, (a - b).norm() + 1e-12);
      }
    }
    // Any member of the orbit is at distance zero.
    for (const auto& R : hand_orbit(SymmetryType::Rot4Z)) {
      EXPECT_NEAR(closure_distance(SymmetryType::Rot4Z, a, SymmetryType::Rot4Z, R * a), 0.0, 1e-12);
    }
  }
}

TEST(Symmetry, CircleSamplesLieOnCircle) {
  Rng rng(14);
  const Eigen::Vector3d x(0.3, -0.1, 0.2);
  const auto pts = closure_samples(closure(SymmetryType::RotContZ, x), 16, rng);
  ASSERT_EQ(pts.size(), 16u);
  for (const auto& p : pts) {
    EXPECT_NEAR(std::hypot(p.x(), p.y()), std::hypot(0.3, -0.1), 1e-12);
    EXPECT_EQ(p.z(), 0.2);
  }
  SymmetryConfig bad;
  bad.active_set.clear();
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}
