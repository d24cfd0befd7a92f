#include <algorithm>

#include <gtest/gtest.h>

#include "canonlift/analysis.hpp"
#include "canonlift/dataset.hpp"
#include "test_util.hpp"

using namespace canonlift;

namespace {

CoordinateField random_field(Rng& rng, int H, int W) {
  CoordinateField f;
  f.height = H;
  f.width = W;
  f.types = {SymmetryType::Identity, SymmetryType::Rot2Z, SymmetryType::RotContZ};
  const std::size_t n = static_cast<std::size_t>(H) * W;
  for (std::size_t i = 0; i < n * 9; ++i) f.coords.push_back(static_cast<float>(rng.uniform(-0.4, 0.4)));
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.uniform(), b = rng.uniform() * (1 - a);
    f.probs.insert(f.probs.end(), {static_cast<float>(a), static_cast<float>(b),
                                   static_cast<float>(1 - a - b)});
    f.mask.push_back(rng.uniform() < 0.7 ? 1 : 0);
  }
  return f;
}

ModelConfig small_model() {
  ModelConfig m;
  m.cells = 8;
  m.feature_dim = 4;
  m.hidden = 8;
  m.symmetry.sample_count = 4;
  m.render = RenderSettings{4, 4, 8};
  return m;
}

SceneInstance small_instance() {
  DatasetConfig c;
  c.image_size = 16;
  c.render_size = 8;
  c.input_views = 2;
  c.supervision_views = 1;
  c.grid_cells = 8;
  c.oracle_points = 64;
  return generate_instance(c, ShapeClass::BenchRot2, 0, 0);
}

}  // namespace

TEST(Correspondence, MatchesBruteForceRanking) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<CoordinateField> fields = {random_field(rng, 4, 5), random_field(rng, 4, 5)};
    std::uint32_t q = 0;
    while (!fields[0].mask[q]) ++q;
    const auto got = find_correspondences(0, q, fields, 6);
    ASSERT_EQ(got.size(), 2u);
    const auto gq = fields[0].types[fields[0].argmax_type(q)];
    for (std::size_t v = 0; v < 2; ++v) {
      std::vector<Match> all;
      for (std::uint32_t p = 0; p < 20; ++p) {
        if (!fields[v].mask[p]) continue;
        const std::size_t t = fields[v].argmax_type(p);
        all.push_back({p, closure_distance(gq, fields[0].coord(q, fields[0].argmax_type(q)),
                                           fields[v].types[t], fields[v].coord(p, t))});
      }
      std::stable_sort(all.begin(), all.end(),
                       [](const Match& a, const Match& b) { return a.distance < b.distance; });
      all.resize(std::min<std::size_t>(all.size(), 6));
      ASSERT_EQ(got[v].size(), all.size());
      for (std::size_t i = 0; i < all.size(); ++i) {
        EXPECT_EQ(got[v][i].pixel, all[i].pixel);
        EXPECT_NEAR(got[v][i].distance, all[i].distance, 1e-12);
      }
    }
    // The query matches itself at distance zero.
    EXPECT_EQ(got[0][0].distance, 0.0);
    EXPECT_TRUE(std::any_of(got[0].begin(), got[0].end(), [&](const Match& m) { return m.pixel == q; }));
  }
}

TEST(Correspondence, RejectsBadQuery) {
  Rng rng(2);
  std::vector<CoordinateField> fields = {random_field(rng, 2, 2)};
  EXPECT_THROW(find_correspondences(1, 0, fields, 3), std::invalid_argument);
  EXPECT_THROW(find_correspondences(0, 99, fields, 3), std::invalid_argument);
}

TEST(Saliency, NormalizedAndNonNegative) {
  const Model model(small_model());
  const auto params = model.initialize<float>(3);
  const auto inst = small_instance();
  const std::vector<std::uint32_t> region = {27, 28, 35, 36};
  const auto maps = saliency_backtrace(model, params, inst, inst.supervision[0].camera, region);
  ASSERT_EQ(maps.size(), 2u);
  float mx = 0.0f;
  for (std::size_t v = 0; v < maps.size(); ++v) {
    ASSERT_EQ(maps[v].size(), 256u);
    for (std::size_t p = 0; p < 256; ++p) {
      EXPECT_GE(maps[v][p], 0.0f);
      if (!inst.inputs[v].mask[p]) EXPECT_EQ(maps[v][p], 0.0f);  // background is not an input
      mx = std::max(mx, maps[v][p]);
    }
  }
  EXPECT_FLOAT_EQ(mx, 1.0f);
}

TEST(Saliency, ZeroModelGivesZeroMaps) {
  const Model model(small_model());
  auto params = model.initialize<float>(3);
  for (const auto& name : model.parameter_names()) {
    std::fill(params.at(name).value.data.begin(), params.at(name).value.data.end(), 0.0f);
  }
  const auto inst = small_instance();
  const std::vector<std::uint32_t> region = {0, 1, 2};
  for (const auto& m : saliency_backtrace(model, params, inst, inst.supervision[0].camera, region)) {
    for (float v : m) EXPECT_EQ(v, 0.0f);
  }
}

TEST(PredictFields, OnePerInputView) {
  const Model model(small_model());
  const auto params = model.initialize<float>(4);
  const auto inst = small_instance();
  const auto fields = predict_fields(model, params, inst);
  ASSERT_EQ(fields.size(), 2u);
  EXPECT_EQ(fields[0].mask, inst.inputs[0].mask);
  EXPECT_EQ(fields[0].types.size(), 5u);
}
