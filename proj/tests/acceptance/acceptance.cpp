// Runs every acceptance criterion and prints one PASS/FAIL line per
// criterion. Arguments select a subset by number (default: all).

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "canonlift/aggregate.hpp"
#include "canonlift/analysis.hpp"
#include "canonlift/canonical.hpp"
#include "canonlift/config.hpp"
#include "canonlift/dataset.hpp"
#include "canonlift/diff/checkpoint.hpp"
#include "canonlift/diff/ops.hpp"
#include "canonlift/gradcheck_suite.hpp"
#include "canonlift/kernels.hpp"
#include "canonlift/metrics.hpp"
#include "canonlift/model.hpp"
#include "canonlift/symmetry.hpp"
#include "canonlift/trainer.hpp"
#include "canonlift/voxelgrid.hpp"
#include <spdlog/spdlog.h>

using namespace canonlift;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Eigen::Vector3d random_point(Rng& rng, double half) {
  return {rng.uniform(-half, half), rng.uniform(-half, half), rng.uniform(-half, half)};
}

int run_cli(const std::string& binary, const std::string& args) {
  const std::string cmd = binary + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void set_pixels(CoordinateFieldVars& f, std::size_t n) {
  f.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) f.pixels[i] = static_cast<std::uint32_t>(i);
  f.height = 1;
  f.width = static_cast<int>(n);
}

DatasetConfig small_data(int count, int views) {
  DatasetConfig c;
  c.count_per_class = count;
  c.input_views = views;
  c.supervision_views = 2;
  c.oracle_points = 512;
  return c;
}

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  diff::GradCheckOptions opt;
  opt.step = 1e-5;
  opt.tolerance = 1e-4;
  const auto summaries = run_gradcheck_suite(100, opt);
  const double secs = seconds_since(t0);
  const std::set<std::string> required = {
      "splat", "sample", "coord_loss", "spurious_loss", "shape_distance", "project", "decode",
      "occupancy_head", "pixel_predictor", "dense", "softmax", "bce", "l1"};
  std::set<std::string> present;
  std::string failing;
  double worst = 0.0;
  for (const auto& s : summaries) {
    present.insert(s.name);
    worst = std::max(worst, s.max_rel_error);
    if (!s.ok() || s.seeds != 100) failing += " " + s.name;
  }
  std::string missing;
  for (const auto& r : required) {
    if (!present.count(r)) missing += " " + r;
  }
  const bool pass = failing.empty() && missing.empty() && secs < 120.0;
  return {pass, format("%zu ops x 100 seeds, max rel error %.2e, %.1f s (limit 120)%s%s",
                    summaries.size(), worst, secs,
                    failing.empty() ? "" : ("; failing:" + failing).c_str(),
                    missing.empty() ? "" : ("; missing:" + missing).c_str())};
}

Outcome splat_adjoint() {
  Rng rng(derive_seed(2, 0));
  double worst_adj = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int C = 2 + static_cast<int>(rng.index(15));
    const int D = 1 + static_cast<int>(rng.index(4));
    FeatureGrid<double> G(GridSpec{C, D});
    for (auto& v : G.values) v = rng.uniform(-1, 1);
    std::vector<double> f(static_cast<std::size_t>(D));
    for (auto& v : f) v = rng.uniform(-1, 1);
    const Eigen::Vector3d x = random_point(rng, 0.5);
    FeatureGrid<double> S(GridSpec{C, D});
    splat<double>(S, x, f, 1.0);
    double lhs = 0.0;
    for (std::size_t i = 0; i < S.values.size(); ++i) lhs += S.values[i] * G.values[i];
    const auto s = sample(G, x);
    double rhs = 0.0;
    for (int d = 0; d < D; ++d) rhs += f[static_cast<std::size_t>(d)] * s[static_cast<std::size_t>(d)];
    worst_adj = std::max(worst_adj, std::abs(lhs - rhs));
  }
  double worst_pu = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int C = 2 + static_cast<int>(rng.index(31));
    // Interior: every stencil cell lies inside the grid.
    const double half = 0.5 - 0.5 / C;
    const Eigen::Vector3d x = random_point(rng, half);
    double total = 0.0;
    for (const auto& cw : splat_weights(GridSpec{C, 1}, x)) total += cw.weight;
    worst_pu = std::max(worst_pu, std::abs(total - 1.0));
  }
  return {worst_adj <= 1e-6 && worst_pu <= 1e-6,
          format("adjoint max |<splat,G> - f.sample| = %.2e over 1000 trials (tol 1e-6); "
              "partition of unity max |sum w - 1| = %.2e over 1e4 points (tol 1e-6)",
              worst_adj, worst_pu)};
}

Outcome closure_oracles() {
  Rng rng(derive_seed(3, 0));
  const int kAngles = 100000;
  double worst_circle = 0.0;
  for (int pair = 0; pair < 1000; ++pair) {
    const Eigen::Vector3d s = random_point(rng, 0.5), t = random_point(rng, 0.5);
    double best = INFINITY;
    for (int a = 0; a < kAngles; ++a) {
      const double th = 2 * std::numbers::pi * a / kAngles;
      const Eigen::Vector3d r(std::cos(th) * s.x() - std::sin(th) * s.y(),
                              std::sin(th) * s.x() + std::cos(th) * s.y(), s.z());
      best = std::min(best, (r - t).norm());
    }
    const auto cp = closest_on_closure(SymmetryType::RotContZ, s, t);
    worst_circle = std::max({worst_circle, std::abs(cp.distance - best),
                             std::abs((cp.point - t).norm() - best)});
  }

  // coord_loss over finite closures against explicit enumeration of every
  // orbit member; the comparison is exact.
  const std::vector<SymmetryType> types = {SymmetryType::Identity, SymmetryType::ReflectY,
                                           SymmetryType::Rot2Z, SymmetryType::Rot4Z};
  int exact = 0;
  double worst_loss = 0.0;
  const int kFields = 200;
  for (int trial = 0; trial < kFields; ++trial) {
    const std::size_t n = 1 + rng.index(12), G = types.size();
    diff::Buffer<double> coords({n, G, 3}), logits({n, G});
    for (auto& v : coords.data) v = rng.uniform(-0.5, 0.5);
    for (auto& v : logits.data) v = rng.uniform(-3, 3);
    std::vector<double> gt(3 * n);
    for (auto& v : gt) v = rng.uniform(-0.5, 0.5);
    diff::Tape<double> tape;
    CoordinateFieldVars f;
    f.coords = tape.constant(coords);
    f.probs = diff::softmax(tape, tape.constant(logits));
    f.types = types;
    set_pixels(f, n);
    const auto& p = tape.value(f.probs);
    double want = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector3d x(gt[3 * i], gt[3 * i + 1], gt[3 * i + 2]);
      for (std::size_t g = 0; g < G; ++g) {
        const std::size_t k = i * G + g;
        const Eigen::Vector3d c(coords[3 * k], coords[3 * k + 1], coords[3 * k + 2]);
        std::vector<Eigen::Vector3d> orbit = {c};
        if (types[g] == SymmetryType::ReflectY) orbit.push_back({c.x(), -c.y(), c.z()});
        if (types[g] == SymmetryType::Rot2Z) orbit.push_back({-c.x(), -c.y(), c.z()});
        if (types[g] == SymmetryType::Rot4Z) {
          orbit.push_back({-c.y(), c.x(), c.z()});
          orbit.push_back({-c.x(), -c.y(), c.z()});
          orbit.push_back({c.y(), -c.x(), c.z()});
        }
        double d = INFINITY;
        for (const auto& m : orbit) d = std::min(d, (m - x).norm());
        want += p[k] * d;
      }
    }
    want /= static_cast<double>(n);
    const double got = tape.value(coord_loss(tape, f, std::span<const double>(gt)))[0];
    exact += got == want;
    worst_loss = std::max(worst_loss, std::abs(got - want));
  }
  return {worst_circle <= 1e-6 && exact == kFields,
          format("RotContZ closest point vs 1e5-angle oracle: max error %.2e over 1000 pairs "
              "(tol 1e-6); coord_loss bitwise equal to enumeration in %d/%d fields "
              "(max diff %.1e)",
              worst_circle, exact, kFields, worst_loss)};
}

Outcome permutation_invariance() {
  Rng rng(derive_seed(4, 0));
  DatasetConfig data = small_data(1, 4);
  ModelConfig mc;  // desk defaults: C=16, D=8
  mc.cells = data.grid_cells;
  const Model model(mc);
  double worst[4] = {0, 0, 0, 0};
  for (int trial = 0; trial < 100; ++trial) {
    const ShapeClass cls = kAllShapeClasses[rng.index(kAllShapeClasses.size())];
    data.seed = rng.next_u64();
    const SceneInstance inst = generate_instance(data, cls, 0, static_cast<std::uint32_t>(trial));
    const auto params = model.initialize<float>(rng.next_u64());
    std::vector<std::size_t> order = {0, 1, 2, 3};
    while (order == std::vector<std::size_t>{0, 1, 2, 3}) {
      for (std::size_t i = 3; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
    }
    ForwardOptions base;
    base.coordinate_losses = false;
    base.seed = 17;
    ForwardOptions perm = base;
    perm.view_order = order;
    diff::Tape<float> ta, tb;
    const auto a = forward(ta, model, diff::constant_binder(ta, params), inst, nullptr, LossWeights{}, base);
    const auto b = forward(tb, model, diff::constant_binder(tb, params), inst, nullptr, LossWeights{}, perm);
    const diff::Var va[4] = {a.aggregate.mean_features, a.aggregate.weight, a.refined, a.occupancy_logits};
    const diff::Var vb[4] = {b.aggregate.mean_features, b.aggregate.weight, b.refined, b.occupancy_logits};
    for (int k = 0; k < 4; ++k) {
      const auto& x = ta.value(va[k]).data;
      const auto& y = tb.value(vb[k]).data;
      for (std::size_t i = 0; i < x.size(); ++i) {
        worst[k] = std::max(worst[k], static_cast<double>(std::abs(x[i] - y[i])));
      }
    }
  }
  const double m = *std::max_element(worst, worst + 4);
  return {m <= 1e-5, format("max-abs change over 100 instances: V-bar %.2e, W-bar %.2e, refined V %.2e, "
                         "occupancy logits %.2e (tol 1e-5)",
                         worst[0], worst[1], worst[2], worst[3])};
}

Outcome decoupling() {
  DatasetConfig data = small_data(2, 4);
  const Dataset ds = generate_dataset(data);
  ModelConfig mc;
  mc.cells = data.grid_cells;
  const Model model(mc);
  const auto coord_names = model.coordinate_parameter_names();
  double max_on = 0.0, min_off = INFINITY;
  int checks = 0;
  for (const auto& inst : ds.instances) {
    const ShapeOracle oracle = inst.make_oracle();
    for (bool decouple : {true, false}) {
      for (int which = 0; which < 2; ++which) {  // L_vol, then L_vs
        auto store = model.initialize<double>(inst.id + 100);
        diff::Tape<double> t;
        ForwardOptions opt;
        opt.decouple = decouple;
        opt.coordinate_losses = false;
        const auto r = forward(t, model, diff::store_binder(t, store), inst, &oracle, LossWeights{}, opt);
        t.backward(which == 0 ? r.vol_loss : r.vs_loss);
        double mass = 0.0;
        for (const auto& n : coord_names) {
          for (double g : store.at(n).grad.data) mass += std::abs(g);
        }
        if (decouple) {
          max_on = std::max(max_on, mass);
        } else {
          min_off = std::min(min_off, mass);
        }
        ++checks;
      }
    }
  }
  return {max_on == 0.0 && min_off > 0.0,
          format("%d backward passes on %zu instances: coordinate/probability-head gradient L1 "
              "mass with decouple on max %.1e (must be 0), with decouple off min %.3e (must be > 0)",
              checks, ds.instances.size(), max_on, min_off)};
}

Outcome ground_truth_sanity() {
  DatasetConfig data = small_data(4, 4);
  data.oracle_points = 4096;
  const int m = SymmetryConfig{}.sample_count;
  double max_lc = 0.0, max_ls = 0.0, tol = 0.0;
  std::size_t fields = 0;
  for (ShapeClass cls : kAllShapeClasses) {
    for (int idx = 0; idx < data.count_per_class; ++idx) {
      const SceneInstance inst = generate_instance(data, cls, idx, static_cast<std::uint32_t>(idx));
      const ShapeOracle oracle = inst.make_oracle();
      // Sampling tolerance: how far fresh surface points sit from the oracle.
      const SdfShape shape(inst.spec);
      for (const auto& p : sample_surface(shape, 20000, derive_seed(inst.spec.seed, 0xfee1))) {
        tol = std::max(tol, oracle.nearest(p).distance);
      }
      for (std::size_t v = 0; v < inst.inputs.size(); ++v) {
        const auto& view = inst.inputs[v];
        std::vector<double> gt;
        for (std::size_t px = 0; px < view.mask.size(); ++px) {
          if (!view.mask[px]) continue;
          for (int d = 0; d < 3; ++d) gt.push_back(view.coords[3 * px + static_cast<std::size_t>(d)]);
        }
        const std::size_t n = gt.size() / 3;
        diff::Tape<double> t;
        CoordinateFieldVars f;
        f.coords = t.constant(diff::Buffer<double>({n, 1, 3}, gt));
        f.probs = t.constant(diff::Buffer<double>({n, 1}, 1.0));
        f.types = {nominal_symmetry(cls)};
        set_pixels(f, n);
        max_lc = std::max(max_lc, t.value(coord_loss(t, f, std::span<const double>(gt)))[0]);
        max_ls = std::max(max_ls, t.value(spurious_loss(t, f, oracle, m, view_seed(0, inst.id, v)))[0]);
        ++fields;
      }
    }
  }
  return {max_lc == 0.0 && max_ls <= tol,
          format("%zu ground-truth views over 5 classes: max L_c %.1e (must be 0), max L_s %.4f <= "
              "measured oracle sampling tolerance %.4f (4096 points)",
              fields, max_lc, max_ls, tol)};
}

// Smoothing: means over consecutive blocks of five epochs.
std::vector<double> block_means(const std::vector<EpochStats>& epochs, std::size_t block) {
  std::vector<double> out;
  for (std::size_t s = 0; s + block <= epochs.size(); s += block) {
    double sum = 0.0;
    for (std::size_t i = s; i < s + block; ++i) sum += epochs[i].mean.total;
    out.push_back(sum / static_cast<double>(block));
  }
  return out;
}

Outcome end_to_end() {
  const auto t0 = Clock::now();
  kernels::set_num_threads(1);
  RunConfig cfg;  // shipped defaults: 5 classes x 143, C=16, D=8, K=4
  cfg.threads = 1;
  const Dataset ds = generate_dataset(cfg.data);
  const double gen_secs = seconds_since(t0);
  const auto train = ds.split(Split::Train);
  const auto test = ds.split(Split::Test);
  const auto thresholds = cfg.thresholds();
  const std::vector<int> counts = {1, 2, 3, 4};

  struct Run {
    TrainResult result;
    MetricsReport metrics;
    double seconds = 0.0;
  };
  auto train_eval = [&](const ModelConfig& mc) {
    const auto t = Clock::now();
    const Model model(mc);
    Run r;
    r.result = run_training(model, train, cfg.train, [](const EpochStats& e) {
      std::printf("    epoch %3d  total %.5f  (%.1fs)\n", e.epoch, e.mean.total, e.seconds);
      std::fflush(stdout);
    });
    r.metrics = eval_view_sweep(model, r.result.params, test, counts, thresholds, cfg.eval.seed);
    r.seconds = seconds_since(t);
    return r;
  };
  std::printf("  criterion 7: training symmetry-aware model on %zu instances\n", train.size());
  const Run sym = train_eval(cfg.resolved_model());
  ModelConfig ablation = cfg.resolved_model();
  ablation.symmetry = SymmetryConfig::identity_only();
  ablation.symmetry.rng_seed = cfg.model.symmetry.rng_seed;
  std::printf("  criterion 7: training identity-only ablation\n");
  const Run idn = train_eval(ablation);
  const double total_secs = seconds_since(t0);

  const auto smooth = block_means(sym.result.epochs, 5);
  bool decreasing = smooth.size() >= 2;
  for (std::size_t i = 1; i < smooth.size(); ++i) decreasing = decreasing && smooth[i] < smooth[i - 1];
  std::string curve;
  for (double v : smooth) curve += format(" %.4f", v);

  auto at = [](const MetricsReport& m, int views) -> const ViewMetrics& {
    for (const auto& v : m.view_sweep) {
      if (v.views == views) return v;
    }
    throw std::runtime_error("missing view count");
  };
  const double iou4 = sym.metrics.full.mean_iou;
  const auto& s1 = at(sym.metrics, 1);
  const auto& a1 = at(idn.metrics, 1);
  const double table_gain = s1.per_class.at("table_rot4").iou - a1.per_class.at("table_rot4").iou;
  const double bench_gain = s1.per_class.at("bench_rot2").iou - a1.per_class.at("bench_rot2").iou;
  const double sweep4 = at(sym.metrics, 4).mean_iou, sweep1 = s1.mean_iou;

  const bool a = decreasing, b = iou4 >= 0.50, c = table_gain > 0 && bench_gain > 0,
             d = sweep4 >= sweep1 - 0.01, budget = total_secs <= 1800.0;
  std::string per_class;
  for (const auto& [name, m] : sym.metrics.full.per_class) per_class += format(" %s=%.3f", name.c_str(), m.iou);
  return {a && b && c && d && budget,
          format("(a) %s: 5-epoch block means%s; (b) %s: held-out 4-view mean IoU %.4f >= 0.50 "
              "[%s ]; (c) %s: 1-view gain over identity ablation table_rot4 %+.4f, bench_rot2 "
              "%+.4f; (d) %s: IoU 4 views %.4f vs 1 view %.4f; budget %s: %.0f s total (data %.0f s, "
              "symmetric %.0f s, ablation %.0f s; limit 1800 s)",
              a ? "PASS" : "FAIL", curve.c_str(), b ? "PASS" : "FAIL", iou4, per_class.c_str(),
              c ? "PASS" : "FAIL", table_gain, bench_gain, d ? "PASS" : "FAIL", sweep4, sweep1,
              budget ? "PASS" : "FAIL", total_secs, gen_secs, sym.seconds, idn.seconds)};
}

Outcome correspondence() {
  // Four views whose azimuths differ by the table's quarter turn: pixel i of
  // view k sees the k-th rotated copy of what pixel i of view 0 sees.
  int instances = 0, queries = 0, complete = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SdfShape shape(random_shape_spec(ShapeClass::TableRot4, derive_seed(8, seed)));
    const double zlo = shape.bbox_min().z(), zhi = shape.bbox_max().z();
    std::vector<CoordinateField> fields;
    for (int k = 0; k < 4; ++k) {
      Camera cam;
      cam.azimuth = 30.0 + 90.0 * k;
      cam.elevation = 20.0;
      const auto s = render_view(shape, TextureMode::Symmetric, cam, 48, 48);
      fields.push_back(ground_truth_field(GroundTruthCoords{48, 48, s.coords, s.mask}, SymmetryType::Rot4Z));
    }
    ++instances;
    auto quadrant = [](const Eigen::Vector3d& p) { return (p.x() > 0 ? 1 : 0) + (p.y() > 0 ? 2 : 0); };
    for (std::uint32_t q = 0; q < 48 * 48; ++q) {
      if (!fields[0].mask[q]) continue;
      const Eigen::Vector3d p = fields[0].coord(q, 0);
      if (p.z() > zlo + 0.25 * (zhi - zlo)) continue;  // legs only
      ++queries;
      const auto matches = find_correspondences(0, q, fields, 48 * 48);
      std::set<int> legs;
      for (std::size_t v = 0; v < fields.size(); ++v) {
        for (const auto& mt : matches[v]) {
          if (mt.distance > 1e-6) break;
          legs.insert(quadrant(fields[v].coord(mt.pixel, 0)));
        }
        if (!matches[v].empty()) worst = std::max(worst, matches[v][0].distance);
      }
      complete += legs.size() == 4;
    }
  }
  return {queries > 0 && complete == queries,
          format("%d/%d leg queries over %d Rot4Z tables retrieve all four legs within closure "
              "distance 1e-6 (worst best-match distance %.1e)",
              complete, queries, instances, worst)};
}

Outcome determinism(const std::string& cli, const std::string& mutant_cli) {
  std::vector<std::string> problems;
  DatasetConfig data = small_data(2, 2);
  data.classes = {ShapeClass::TableRot4, ShapeClass::PlaneReflectY};
  const Dataset d1 = generate_dataset(data), d2 = generate_dataset(data);
  std::size_t records = 0;
  for (std::size_t i = 0; i < d1.instances.size(); ++i) {
    const auto bytes = encode_instance(d1.instances[i]);
    if (bytes != encode_instance(d2.instances[i])) problems.push_back("dataset bytes differ");
    if (encode_instance(decode_instance(bytes)) != bytes) problems.push_back("CLDS round trip");
    ++records;
  }

  ModelConfig mc;
  mc.cells = data.grid_cells;
  const Model model(mc);
  TrainConfig tc;
  tc.epochs = 2;
  std::vector<const SceneInstance*> all;
  for (const auto& i : d1.instances) all.push_back(&i);
  const auto r1 = run_training(model, all, tc), r2 = run_training(model, all, tc);
  const auto c1 = diff::encode_checkpoint(r1.params);
  if (c1 != diff::encode_checkpoint(r2.params)) problems.push_back("checkpoints differ");
  if (diff::encode_checkpoint(diff::decode_checkpoint(c1)) != c1) problems.push_back("CLPM round trip");
  const std::vector<int> counts = {1, 2};
  const auto th = default_thresholds();
  if (metrics_json(eval_view_sweep(model, r1.params, all, counts, th, 0)) !=
      metrics_json(eval_view_sweep(model, r2.params, all, counts, th, 0))) {
    problems.push_back("metrics differ");
  }

  Rng rng(9);
  FeatureGrid<float> g(GridSpec{16, 8});
  for (auto& v : g.values) v = static_cast<float>(rng.uniform(-1, 1));
  const auto gb = encode_grid(g);
  if (encode_grid(decode_grid(gb)) != gb) problems.push_back("CVGF round trip");

  // End to end through the CLI: two generations into separate directories.
  const fs::path tmp = fs::temp_directory_path() / "canonlift_acceptance";
  fs::remove_all(tmp);
  const std::string small =
      " --set data.count_per_class=2 --set data.oracle_points=256 gen-data --classes bench_rot2 --out ";
  if (run_cli(cli, small + (tmp / "a").string()) != 0 || run_cli(cli, small + (tmp / "b").string()) != 0) {
    problems.push_back("cli gen-data failed");
  } else {
    for (const auto& e : fs::directory_iterator(tmp / "a")) {
      if (slurp(e.path()) != slurp(tmp / "b" / e.path().filename())) {
        problems.push_back("cli output differs: " + e.path().filename().string());
      }
    }
  }
  fs::remove_all(tmp);

  const int clean = run_cli(cli, "gradcheck --seeds 5");
  const int mutant = run_cli(mutant_cli, "gradcheck --seeds 5");
  if (clean != 0) problems.push_back("clean gradcheck exit " + std::to_string(clean));
  if (mutant == 0) problems.push_back("mutant gradcheck passed");

  std::string joined;
  for (const auto& p : problems) joined += "; " + p;
  return {problems.empty(),
          format("%zu dataset records, checkpoints, metrics and CLI outputs bitwise identical across "
              "runs; CVGF/CLDS/CLPM round trips exact; gradcheck exit %d clean, %d with flipped "
              "splat adjoint sign%s",
              records, clean, mutant, joined.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  kernels::set_num_threads(1);
  spdlog::set_level(spdlog::level::warn);
  const std::string cli = CANONLIFT_CLI, mutant = CANONLIFT_MUTANT_CLI;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"splat/sample adjoint and partition of unity", splat_adjoint},
      {"closure oracle equivalence", closure_oracles},
      {"view permutation invariance", permutation_invariance},
      {"decoupling contract", decoupling},
      {"ground-truth sanity", ground_truth_sanity},
      {"desk-scale end-to-end", end_to_end},
      {"ground-truth correspondences", correspondence},
      {"determinism and formats", [&] { return determinism(cli, mutant); }},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  std::vector<std::string> lines;
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    lines.push_back(format("criterion %d %s  %s (%.1f s): ", id, o.pass ? "PASS" : "FAIL",
                        criteria[i].first.c_str(), seconds_since(t0)) +
                    o.detail);
    std::printf("%s\n", lines.back().c_str());
    std::fflush(stdout);
  }
  std::printf("\nsummary\n");
  for (const auto& l : lines) std::printf("%s\n", l.substr(0, l.find(':')).c_str());
  std::printf("%d of %zu criteria failed\n", failures, lines.size());
  return failures == 0 ? 0 : 1;
}
