#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "canonlift/binary_io.hpp"
#include "canonlift/diff/ops.hpp"
#include "canonlift/kernels.hpp"
#include "canonlift/voxelgrid.hpp"
#include "test_util.hpp"

using namespace canonlift;
using canonlift::testing::random_point;

namespace {

// Independent trilinear oracle: continuous index u = (x + 0.5) C - 0.5,
// clamped to [0, C - 1], split into floor and fraction per axis.
std::vector<double> oracle_weights(int C, const Eigen::Vector3d& x) {
  std::vector<double> w(static_cast<std::size_t>(C * C * C), 0.0);
  int lo[3];
  double fr[3];
  for (int d = 0; d < 3; ++d) {
    const double u = std::clamp((x[d] + 0.5) * C - 0.5, 0.0, C - 1.0);
    lo[d] = std::min(static_cast<int>(std::floor(u)), C - 1);
    fr[d] = u - lo[d];
  }
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int c = 0; c < 2; ++c) {
        const int i = std::min(lo[0] + a, C - 1), j = std::min(lo[1] + b, C - 1),
                  k = std::min(lo[2] + c, C - 1);
        const double wt = (a ? fr[0] : 1 - fr[0]) * (b ? fr[1] : 1 - fr[1]) * (c ? fr[2] : 1 - fr[2]);
        w[static_cast<std::size_t>((i * C + j) * C + k)] += wt;
      }
    }
  }
  return w;
}

}  // namespace

TEST(GridSpec, CentresAndIndexing) {
  GridSpec g{4, 2};
  EXPECT_EQ(g.voxel_count(), 64u);
  EXPECT_DOUBLE_EQ(g.cell_center(0), -0.375);
  EXPECT_EQ(g.index(1, 2, 3), 27u);
  EXPECT_TRUE(g.center(27).isApprox(Eigen::Vector3d(-0.125, 0.125, 0.375)));
  EXPECT_THROW((GridSpec{0, 1}.validate()), std::invalid_argument);
}

TEST(Splat, WeightsMatchOracle) {
  Rng rng(1);
  for (int C : {1, 2, 5, 16}) {
    GridSpec spec{C, 1};
    for (int trial = 0; trial < 200; ++trial) {
      const Eigen::Vector3d x = random_point(rng, 0.55);
      std::vector<double> got(spec.voxel_count(), 0.0);
      for (const auto& cw : splat_weights(spec, x)) got[cw.cell] += cw.weight;
      const auto want = oracle_weights(C, x);
      EXPECT_LT(canonlift::testing::max_abs_diff(got, want), 1e-12) << "C=" << C;
    }
  }
}

TEST(Splat, PartitionOfUnity) {
  Rng rng(2);
  GridSpec spec{16, 1};
  for (int trial = 0; trial < 10000; ++trial) {
    const Eigen::Vector3d x = random_point(rng, 0.5);
    double total = 0.0;
    for (const auto& cw : splat_weights(spec, x)) total += cw.weight;
    ASSERT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Splat, AdjointOfSample) {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    GridSpec spec{8, 3};
    FeatureGrid<double> G(spec);
    for (auto& v : G.values) v = rng.uniform(-1, 1);
    const Eigen::Vector3d x = random_point(rng, 0.5);
    const std::vector<double> f = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    FeatureGrid<double> S(spec);
    splat<double>(S, x, f, 1.0);
    double lhs = 0.0;
    for (std::size_t i = 0; i < S.values.size(); ++i) lhs += S.values[i] * G.values[i];
    const auto s = sample(G, x);
    const double rhs = f[0] * s[0] + f[1] * s[1] + f[2] * s[2];
    ASSERT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(Splat, SampleOutsideIsZeroAndRejectsNonFinite) {
  FeatureGrid<float> G(GridSpec{4, 1});
  for (auto& v : G.values) v = 1.0f;
  EXPECT_EQ(sample(G, {0.6, 0, 0})[0], 0.0f);
  EXPECT_NEAR(sample(G, {0.1, -0.2, 0.3})[0], 1.0f, 1e-6);
  const float bad[1] = {NAN};
  EXPECT_THROW(splat<float>(G, {0, 0, 0}, bad, 1.0f), std::invalid_argument);
}

TEST(Kernels, ParallelMatchesSerial) {
  Rng rng(4);
  const int C = 8;
  const std::size_t M = 500, E = 4;
  std::vector<double> pts(3 * M), vals(E * M), sc(M), grid_grad(C * C * C * E);
  for (auto& p : pts) p = rng.uniform(-0.5, 0.5);
  for (auto& v : vals) v = rng.uniform(-1, 1);
  for (auto& s : sc) s = rng.uniform(0, 1);
  for (auto& g : grid_grad) g = rng.uniform(-1, 1);
  kernels::set_num_threads(3);
  std::vector<double> gs(grid_grad.size(), 0.0), gp(grid_grad.size(), 0.0);
  kernels::splat<double>(C, E, pts, vals, sc, gs, kernels::Exec::Serial);
  kernels::splat<double>(C, E, pts, vals, sc, gp, kernels::Exec::Parallel);
  EXPECT_LT(canonlift::testing::max_abs_diff(gs, gp), 1e-12);

  std::vector<double> ps(3 * M, 0), pp(3 * M, 0), vs(E * M, 0), vp(E * M, 0), ss(M, 0), sp(M, 0);
  kernels::splat_backward<double>(C, E, pts, vals, sc, grid_grad, ps, vs, ss, kernels::Exec::Serial);
  kernels::splat_backward<double>(C, E, pts, vals, sc, grid_grad, pp, vp, sp, kernels::Exec::Parallel);
  EXPECT_EQ(ps, pp);
  EXPECT_EQ(vs, vp);
  EXPECT_EQ(ss, sp);

  std::vector<double> os(E * M), op(E * M);
  kernels::sample<double>(C, E, grid_grad, pts, os, kernels::Exec::Serial);
  kernels::sample<double>(C, E, grid_grad, pts, op, kernels::Exec::Parallel);
  EXPECT_EQ(os, op);

  // A fixed thread count reproduces its own bits.
  std::vector<double> again(grid_grad.size(), 0.0);
  kernels::splat<double>(C, E, pts, vals, sc, again, kernels::Exec::Parallel);
  EXPECT_EQ(gp, again);
  kernels::set_num_threads(1);
}

TEST(NeighborConcat, MatchesNaiveMean) {
  Rng rng(5);
  const int C = 3;
  diff::Tape<double> t;
  diff::Buffer<double> g({27, 2});
  for (auto& v : g.data) v = rng.uniform(-1, 1);
  const auto& out = t.value(neighbor_concat(t, C, t.constant(g)));
  ASSERT_EQ(out.shape, (diff::Shape{27, 4}));
  for (int i = 0; i < C; ++i) {
    for (int j = 0; j < C; ++j) {
      for (int k = 0; k < C; ++k) {
        const int cell = (i * C + j) * C + k;
        double mean[2] = {0, 0};
        int n = 0;
        const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        for (const auto& o : off) {
          const int a = i + o[0], b = j + o[1], c = k + o[2];
          if (a < 0 || b < 0 || c < 0 || a >= C || b >= C || c >= C) continue;
          const int nb = (a * C + b) * C + c;
          mean[0] += g[2 * nb];
          mean[1] += g[2 * nb + 1];
          ++n;
        }
        EXPECT_EQ(out[4 * cell], g[2 * cell]);
        EXPECT_NEAR(out[4 * cell + 2], mean[0] / n, 1e-15);
        EXPECT_NEAR(out[4 * cell + 3], mean[1] / n, 1e-15);
      }
    }
  }
}

TEST(SplatOp, MatchesValueSpaceSplat) {
  Rng rng(6);
  diff::Tape<double> t;
  const std::size_t M = 20;
  diff::Buffer<double> p({M, 3}), v({M, 2}), s({M});
  for (auto& x : p.data) x = rng.uniform(-0.5, 0.5);
  for (auto& x : v.data) x = rng.uniform(-1, 1);
  for (auto& x : s.data) x = rng.uniform(0, 1);
  const auto& got = t.value(splat_points(t, 4, t.constant(p), t.constant(v), t.constant(s)));
  FeatureGrid<double> want(GridSpec{4, 2});
  for (std::size_t m = 0; m < M; ++m) {
    const double f[2] = {v[2 * m], v[2 * m + 1]};
    splat<double>(want, {p[3 * m], p[3 * m + 1], p[3 * m + 2]}, f, s[m]);
  }
  EXPECT_LT(canonlift::testing::max_abs_diff(got.data, want.values), 1e-14);
}

TEST(GridFile, BitwiseRoundTrip) {
  Rng rng(7);
  FeatureGrid<float> g(GridSpec{5, 3});
  for (auto& v : g.values) v = static_cast<float>(rng.uniform(-1, 1));
  const auto bytes = encode_grid(g);
  const auto back = decode_grid(bytes);
  EXPECT_EQ(back.spec, g.spec);
  EXPECT_EQ(back.values, g.values);
  EXPECT_EQ(encode_grid(back), bytes);

  const auto path = std::filesystem::temp_directory_path() / "canonlift_grid_test.cvgf";
  write_grid(path, g);
  EXPECT_EQ(read_grid(path).values, g.values);
  std::filesystem::remove(path);

  auto trailing = bytes;
  trailing.push_back(1);
  EXPECT_THROW(decode_grid(trailing), DataError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 4);
  EXPECT_THROW(decode_grid(truncated), DataError);
  try {
    read_grid("/nonexistent/grid.cvgf");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/grid.cvgf"), std::string::npos);
  }
}
