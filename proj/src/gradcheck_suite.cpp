#include "canonlift/gradcheck_suite.hpp"

#include <chrono>
#include <map>

#include "canonlift/aggregate.hpp"
#include "canonlift/canonical.hpp"
#include "canonlift/diff/ops.hpp"
#include "canonlift/heads.hpp"
#include "canonlift/rng.hpp"
#include "canonlift/voxelgrid.hpp"

namespace canonlift {

using diff::Buffer;
using diff::GradCheckOptions;
using diff::GradCheckReport;
using diff::ParamBinder;
using diff::ParamStore;
using diff::Shape;
using diff::Tape;
using diff::Var;

namespace {

Buffer<double> random_buffer(Rng& rng, Shape shape, double lo, double hi) {
  Buffer<double> b(std::move(shape));
  for (auto& v : b.data) v = rng.uniform(lo, hi);
  return b;
}

/// sum(w * x) with weights fixed by the seed.
Var weighted_sum(Tape<double>& t, Var x, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x77));
  Buffer<double> w = random_buffer(rng, t.shape(x), -1.0, 1.0);
  return diff::sum(t, diff::multiply(t, x, t.constant(std::move(w))));
}

/// Explicit inputs followed by every parameter of a store, so parameters
/// are checked like any other input.
struct Inputs {
  std::vector<Buffer<double>> buffers;
  std::map<std::string, std::size_t> params;

  std::size_t add(Buffer<double> b) {
    buffers.push_back(std::move(b));
    return buffers.size() - 1;
  }
  void add_params(const ParamStore<double>& store) {
    for (const auto& [name, e] : store) params[name] = add(e.value);
  }
  ParamBinder binder(std::span<const Var> vars) const {
    return [this, vars](const std::string& name) { return vars[params.at(name)]; };
  }
};

using Body = std::function<Var(Tape<double>&, std::span<const Var>, const Inputs&)>;

GradCheckReport check(Inputs inputs, const Body& body, const GradCheckOptions& options) {
  auto shared = std::make_shared<Inputs>(std::move(inputs));
  diff::TapeProgram program = [shared, body](Tape<double>& t, std::span<const Var> vars) {
    return body(t, vars, *shared);
  };
  return diff::grad_check(program, shared->buffers, options);
}

// A well-spread point set standing in for a surface sample.
ShapeOracle random_oracle(Rng& rng, std::size_t n) {
  std::vector<Eigen::Vector3d> pts(n);
  for (auto& p : pts) p = {rng.uniform(-0.45, 0.45), rng.uniform(-0.45, 0.45), rng.uniform(-0.45, 0.45)};
  return ShapeOracle(std::move(pts));
}

CoordinateFieldVars field_vars(Tape<double>& t, Var coords, Var logits, Var features,
                               std::span<const SymmetryType> types, std::size_t n) {
  CoordinateFieldVars f;
  f.coords = coords;
  f.probs = diff::softmax(t, logits);
  f.features = features;
  f.types.assign(types.begin(), types.end());
  for (std::size_t i = 0; i < n; ++i) f.pixels.push_back(static_cast<std::uint32_t>(i));
  f.height = 1;
  f.width = static_cast<int>(n);
  return f;
}

constexpr SymmetryType kTypes[] = {SymmetryType::Identity, SymmetryType::ReflectY,
                                   SymmetryType::Rot2Z, SymmetryType::Rot4Z,
                                   SymmetryType::RotContZ};

GradCheckReport unary_case(std::uint64_t seed, const GradCheckOptions& o, double lo, double hi,
                           Var (*op)(Tape<double>&, Var)) {
  Rng rng(seed);
  Inputs in;
  in.add(random_buffer(rng, {4, 3}, lo, hi));
  return check(in, [op, seed](Tape<double>& t, std::span<const Var> v, const Inputs&) {
    return weighted_sum(t, op(t, v[0]), seed);
  }, o);
}

std::vector<GradCheckCase> build_cases() {
  std::vector<GradCheckCase> cases;
  auto reg = [&](std::string name, auto fn) { cases.push_back({std::move(name), fn}); };

  reg("dense", [](std::uint64_t seed, const GradCheckOptions& o) {
    Rng rng(seed);
    Inputs in;
    in.add(random_buffer(rng, {4, 3}, -1, 1));
    in.add(random_buffer(rng, {3, 2}, -1, 1));
    in.add(random_buffer(rng, {2}, -1, 1));
    return check(in, [seed](Tape<double>& t, std::span<const Var> v, const Inputs&) {
      return weighted_sum(t, diff::dense(t, v[0], v[1], v[2]), seed);
    }, o);
  });
  reg("add", [](std::uint64_t seed, const GradCheckOptions& o) {
    Rng rng(seed);
    Inputs in;
    in.add(random_buffer(rng, {3, 2}, -1, 1));
    in.add(random_buffer(rng, {3, 2}, -1, 1));
    return check(in, [seed](Tape<double>& t, std::span<const Var> v, const Inputs&) {
      return weighted_sum(t, diff::subtract(t, diff::add(t, v[0], v[1]), diff::multiply(t, v[0], v[1])), seed);
    }, o);
  });
  reg("divide_eps", [](std::uint64_t seed, const GradCheckOptions& o) {
    Rng rng(seed);
    Inputs in;
    in.add(random_buffer(rng, {5, 2}, -1, 1));
    in.add(random_buffer(rng, {5, 1}, 0.2, 2.0));
    return check(in, [seed](Tape<double>& t, std::span<const Var> v, const Inputs&) {
      return weighted_sum(t, diff::divide_eps(t, v[0], v[1]), seed);
    }, o);
  });
  reg("relu", [](std::uint64_t seed, const GradCheckOptions& o) {
    return unary_case(seed, o, -1, 1, [](Tape<double>& t, Var a) { return diff::relu(t, a); });
  });
  reg("tanh", [](std::uint64_t seed, const GradCheckOptions& o) {
    return unary_case(seed, o, -2, 2, [](Tape<double>& t, Var a) { return diff::tanh(t, a); });
  });
  reg("sigmoid", [](std::uint64_t seed, const GradCheckOptions& o) {
    return unary_case(seed, o, -3, 3, [](Tape<double>& t, Var a) { return diff::sigmoid(t, a); });
  });
  reg("softmax", [](std::uint64_t seed, const GradCheckOptions& o) {
    return unary_case(seed, o, -2, 2, [](Tape<double>& t, Var a) { return diff::softmax(t, a); });
  });
  reg("l2_norm", [](std::uint64_t seed, const GradCheckOptions& o) {
    return unary_case(seed, o, -1, 1, [](Tape<double>& t, Var a) { return diff::l2_norm(t, a); });
  });
  reg("mean", [](std::uint64_t seed, const GradCheckOptions& o) {
    return unary_case(seed, o, -1, 1, [](Tape<double>& t, Var a) {
      return diff::mean(t, diff::multiply(t, a, a));
    });
  });
  reg("l1", [](std::uint64_t seed, const GradCheckOptions& o) {
    Rng rng(seed);
    Inputs in;
    in.add(random_buffer(rng, {4, 3}, -1, 1));
    in.add(random_buffer(rng, {4, 3}, -1, 1));
    return check(in, [](Tape<double>& t, std::span<const Var> v, const Inputs&) {
      return diff::l1_loss(t, v[0], v[1]);
    }, o);
  });
  reg("bce", [](std::uint64_t seed, const GradCheckOptions& o) {
    Rng rng(seed);
    Inputs in;
    in.add(random_buffer(rng, {6, 1}, -4, 4));
    in.add(random_buffer(rng, {6, 1}, 0, 1));
    return check(in, [](Tape<double>& t, std::span<const Var> v, const Inputs&) {
      return diff::bce_with_logits(t, v[0], v[1]);
    }, o);
  });
  reg("concat_slice_gather", [](std::uint64_t seed, const GradCheckOptions& o) {
    Rng rng(seed);
    Inputs in;
    in.add(random_buffer(rng, {4, 2}, -1, 1));
    in.add(random_buffer(rng, {4, 3}, -1, 1));
    return check(in, [seed](Tape<double>& t, std::span<const Var> v, const Inputs&) {
      const Var parts[] = {v[0], v[1]};
      Var c = diff::concat(t, std::span<const Var>(parts));
      Var s = diff::slice_cols(t, c, 1, 4);
      const std::uint32_t rows[] = {3, 0, 3, 1};
      Var g = diff::gather_rows(t, s, rows);
      return weighted_sum(t, diff::reshape(t, g, Shape{12}), seed);
    }, o);
  });
  reg("splat", [](std::uint64_t seed, const GradCheckOptions& o) {
    Rng rng(seed);
    Inputs in;
    in.add(random_buffer(rng, {5, 3}, -0.45, 0.45));
    in.add(random_buffer(rng, {5, 2}, -1, 1));
    in.add(random_buffer(rng, {5}, 0.1, 1));
    return check(in, [seed](Tape<double>& t, std::span<const Var> v, const Inputs&) {
      return weighted_sum(t, splat_points(t, 4, v[0], v[1], v[2]), seed);
    }, o);
  });
  reg("sample", [](std::uint64_t seed, const GradCheckOptions& o) {
    Rng rng(seed);
    Inputs in;
    in.add(random_buffer(rng, {64, 2}, -1, 1));
    in.add(random_buffer(rng, {5, 3}, -0.45, 0.45));
    return check(in, [seed](Tape<double>& t, std::span<const Var> v, const Inputs&) {
      return weighted_sum(t, sample_points(t, 4, v[0], v[1]), seed);
    }, o);
  });
  reg("neighbor_concat", [](std::uint64_t seed, const GradCheckOptions& o) {
    Rng rng(seed);
    Inputs in;
    in.add(random_buffer(rng, {27, 2}, -1, 1));
    return check(in, [seed](Tape<double>& t, std::span<const Var> v, const Inputs&) {
      return weighted_sum(t, neighbor_concat(t, 3, v[0]), seed);
    }, o);
  });
  reg("shape_distance", [](std::uint64_t seed, const GradCheckOptions& o) {
    Rng rng(seed);
    const auto oracle = std::make_shared<ShapeOracle>(random_oracle(rng, 64));
    Inputs in;
    in.add(random_buffer(rng, {6, 3}, -0.5, 0.5));
    return check(in, [oracle, seed](Tape<double>& t, std::span<const Var> v, const Inputs&) {
      return weighted_sum(t, shape_distance_op(t, *oracle, v[0]), seed);
    }, o);
  });
  reg("coord_loss", [](std::uint64_t seed, const GradCheckOptions& o) {
    Rng rng(seed);
    const std::size_t n = 4, g = std::size(kTypes);
    Inputs in;
    in.add(random_buffer(rng, {n, g, 3}, -0.45, 0.45));
    in.add(random_buffer(rng, {n, g}, -1, 1));
    const auto gt = std::make_shared<std::vector<double>>(random_buffer(rng, {n, 3}, -0.45, 0.45).data);
    return check(in, [gt, n](Tape<double>& t, std::span<const Var> v, const Inputs&) {
      const auto f = field_vars(t, v[0], v[1], Var{}, kTypes, n);
      return coord_loss(t, f, std::span<const double>(*gt));
    }, o);
  });
  reg("spurious_loss", [](std::uint64_t seed, const GradCheckOptions& o) {
    Rng rng(seed);
    const std::size_t n = 3, g = std::size(kTypes);
    const auto oracle = std::make_shared<ShapeOracle>(random_oracle(rng, 64));
    Inputs in;
    in.add(random_buffer(rng, {n, g, 3}, -0.45, 0.45));
    in.add(random_buffer(rng, {n, g}, -1, 1));
    return check(in, [oracle, n, seed](Tape<double>& t, std::span<const Var> v, const Inputs&) {
      const auto f = field_vars(t, v[0], v[1], Var{}, kTypes, n);
      return spurious_loss(t, f, *oracle, 4, seed);
    }, o);
  });
  reg("pixel_predictor", [](std::uint64_t seed, const GradCheckOptions& o) {
    Rng rng(seed);
    const auto pred = std::make_shared<PixelPredictor>(2, 2, 4);
    ParamStore<double> store;
    pred->initialize(store, rng);
    Inputs in;
    in.add(random_buffer(rng, {3, PixelPredictor::kInputDim}, -1, 1));
    in.add_params(store);
    return check(in, [pred, seed](Tape<double>& t, std::span<const Var> v, const Inputs& ins) {
      return weighted_sum(t, pred->apply(t, ins.binder(v), v[0]), seed);
    }, o);
  });
  reg("lift_view", [](std::uint64_t seed, const GradCheckOptions& o) {
    Rng rng(seed);
    const std::size_t n = 3, g = std::size(kTypes), d = 2;
    Inputs in;
    in.add(random_buffer(rng, {n, g, 3}, -0.45, 0.45));
    in.add(random_buffer(rng, {n, g}, -1, 1));
    in.add(random_buffer(rng, {n, d}, -1, 1));
    return check(in, [n, seed](Tape<double>& t, std::span<const Var> v, const Inputs&) {
      const auto f = field_vars(t, v[0], v[1], v[2], kTypes, n);
      SymmetryConfig sym;
      sym.sample_count = 3;
      return weighted_sum(t, lift_view(t, f, 4, sym, false, seed), seed);
    }, o);
  });
  reg("average", [](std::uint64_t seed, const GradCheckOptions& o) {
    Rng rng(seed);
    Inputs in;
    for (int k = 0; k < 2; ++k) {
      auto b = random_buffer(rng, {8, 3}, -1, 1);
      for (std::size_t c = 0; c < 8; ++c) b[3 * c + 2] = rng.uniform(0.2, 1.0);
      in.add(std::move(b));
    }
    return check(in, [seed](Tape<double>& t, std::span<const Var> v, const Inputs&) {
      const auto agg = average(t, v.subspan(0, 2));
      const Var parts[] = {agg.mean_features, agg.weight};
      return weighted_sum(t, diff::concat(t, std::span<const Var>(parts)), seed);
    }, o);
  });
  reg("refiner", [](std::uint64_t seed, const GradCheckOptions& o) {
    Rng rng(seed);
    const auto refiner = std::make_shared<Refiner>(2, true);
    ParamStore<double> store;
    refiner->initialize(store, rng);
    Inputs in;
    in.add(random_buffer(rng, {8, 2}, -1, 1));
    in.add(random_buffer(rng, {8, 1}, 0.1, 2));
    in.add_params(store);
    return check(in, [refiner, seed](Tape<double>& t, std::span<const Var> v, const Inputs& ins) {
      return weighted_sum(t, refiner->apply(t, ins.binder(v), 2, AggregateVars{v[0], v[1]}), seed);
    }, o);
  });
  reg("occupancy_head", [](std::uint64_t seed, const GradCheckOptions& o) {
    Rng rng(seed);
    const auto head = std::make_shared<OccupancyHead>(2, 3);
    ParamStore<double> store;
    head->initialize(store, rng);
    auto gt = std::make_shared<std::vector<std::uint8_t>>(8);
    for (auto& b : *gt) b = static_cast<std::uint8_t>(rng.index(2));
    Inputs in;
    in.add(random_buffer(rng, {8, 2}, -1, 1));
    in.add_params(store);
    return check(in, [head, gt](Tape<double>& t, std::span<const Var> v, const Inputs& ins) {
      return occupancy_loss(t, head->apply(t, ins.binder(v), 2, v[0]), *gt);
    }, o);
  });
  reg("project", [](std::uint64_t seed, const GradCheckOptions& o) {
    Rng rng(seed);
    const auto renderer = std::make_shared<Renderer>(2, 3, RenderSettings{2, 4, 4});
    ParamStore<double> store;
    renderer->initialize(store, rng);
    Camera cam;
    cam.azimuth = rng.uniform(0, 360);
    cam.elevation = rng.uniform(-30, 30);
    cam.translation = {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
    Inputs in;
    in.add(random_buffer(rng, {27, 2}, -1, 1));
    in.add_params(store);
    return check(in, [renderer, cam, seed](Tape<double>& t, std::span<const Var> v, const Inputs& ins) {
      return weighted_sum(t, renderer->project(t, ins.binder(v), 3, v[0], cam), seed);
    }, o);
  });
  reg("decode", [](std::uint64_t seed, const GradCheckOptions& o) {
    Rng rng(seed);
    const auto renderer = std::make_shared<Renderer>(2, 3, RenderSettings{2, 4, 4});
    ParamStore<double> store;
    renderer->initialize(store, rng);
    auto target = std::make_shared<std::vector<float>>(16 * 3);
    for (auto& x : *target) x = static_cast<float>(rng.uniform());
    Inputs in;
    in.add(random_buffer(rng, {4, 2}, -1, 1));
    in.add_params(store);
    return check(in, [renderer, target](Tape<double>& t, std::span<const Var> v, const Inputs& ins) {
      return view_synthesis_loss(t, renderer->decode(t, ins.binder(v), v[0]), *target);
    }, o);
  });
  reg("depth_pool", [](std::uint64_t seed, const GradCheckOptions& o) {
    Rng rng(seed);
    Inputs in;
    in.add(random_buffer(rng, {2, 3}, -1, 1));
    in.add(random_buffer(rng, {6, 2}, -1, 1));
    return check(in, [seed](Tape<double>& t, std::span<const Var> v, const Inputs&) {
      return weighted_sum(t, depth_pool(t, diff::softmax(t, v[0]), v[1]), seed);
    }, o);
  });
  reg("upsample2x", [](std::uint64_t seed, const GradCheckOptions& o) {
    Rng rng(seed);
    Inputs in;
    in.add(random_buffer(rng, {4, 3}, -1, 1));
    return check(in, [seed](Tape<double>& t, std::span<const Var> v, const Inputs&) {
      return weighted_sum(t, upsample2x(t, v[0], 2), seed);
    }, o);
  });
  return cases;
}

}  // namespace

std::vector<GradCheckCase> gradcheck_cases() { return build_cases(); }

std::vector<GradCheckSummary> run_gradcheck_suite(int seeds, const GradCheckOptions& options,
                                                  const std::string& filter) {
  std::vector<GradCheckSummary> out;
  for (const auto& c : gradcheck_cases()) {
    if (!filter.empty() && c.name.find(filter) == std::string::npos) continue;
    const auto start = std::chrono::steady_clock::now();
    GradCheckSummary s;
    s.name = c.name;
    for (int i = 0; i < seeds; ++i) {
      const auto seed = static_cast<std::uint64_t>(i);
      GradCheckOptions o = options;
      o.seed = derive_seed(options.seed, seed, 0x6c);
      const auto report = c.run(seed, o);
      ++s.seeds;
      s.max_rel_error = std::max(s.max_rel_error, report.max_rel_error);
      if (report.passed()) {
        ++s.passed;
      } else if (s.worst == diff::GradCheckStatus::Pass) {
        s.worst = report.status;
        s.first_failing_seed = seed;
      }
    }
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.push_back(s);
  }
  return out;
}

}  // namespace canonlift
