// canonlift: data generation, training, evaluation, gradient checks,
// rendering and inspection from one binary.
//
// Exit codes: 0 ok, 1 usage or config error, 2 data error, 3 check failure.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "canonlift/analysis.hpp"
#include "canonlift/binary_io.hpp"
#include "canonlift/config.hpp"
#include "canonlift/diff/checkpoint.hpp"
#include "canonlift/gradcheck_suite.hpp"
#include "canonlift/image_io.hpp"
#include "canonlift/kernels.hpp"
#include "canonlift/metrics.hpp"

namespace fs = std::filesystem;
using namespace canonlift;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitCheck = 3;

struct Common {
  std::optional<fs::path> config;
  std::vector<std::string> overrides;
  int threads = 0;  // 0 = CANONLIFT_THREADS, then the config value
  bool verbose = false;
};

int resolve_threads(const Common& c, const RunConfig& cfg) {
  if (c.threads > 0) return c.threads;
  if (const char* env = std::getenv("CANONLIFT_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("CANONLIFT_THREADS must be a positive integer, got '") + env + "'");
  }
  return cfg.threads > 0 ? cfg.threads : 1;
}

RunConfig setup(const Common& c, std::vector<std::string> extra = {},
                const std::optional<fs::path>& fallback_config = std::nullopt) {
  std::vector<std::string> overrides = std::move(extra);
  overrides.insert(overrides.end(), c.overrides.begin(), c.overrides.end());
  std::optional<fs::path> file = c.config;
  if (!file && fallback_config && fs::exists(*fallback_config)) file = fallback_config;
  RunConfig cfg = load_config(file, overrides);
  cfg.threads = resolve_threads(c, cfg);
  kernels::set_num_threads(cfg.threads);
  spdlog::set_level(c.verbose ? spdlog::level::debug : spdlog::level::info);
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

std::vector<const SceneInstance*> pick_split(const Dataset& ds, const std::string& split) {
  if (split == "all") {
    std::vector<const SceneInstance*> out;
    for (const auto& i : ds.instances) out.push_back(&i);
    return out;
  }
  if (split == "train") return ds.split(Split::Train);
  if (split == "val") return ds.split(Split::Val);
  if (split == "test") return ds.split(Split::Test);
  throw ConfigError("unknown split '" + split + "' (train, val, test, all)");
}

const SceneInstance& find_instance(const Dataset& ds, std::uint32_t id) {
  for (const auto& i : ds.instances) {
    if (i.id == id) return i;
  }
  throw DataError("instance " + std::to_string(id) + " not in dataset");
}

/// The dataset's own generation settings replace the data section, so the
/// grid size always matches the stored occupancy.
void adopt_dataset(RunConfig& cfg, const Dataset& ds) { cfg.data = ds.config; }

MetricsReport run_eval(const RunConfig& cfg, const Model& model,
                       const diff::ParamStore<float>& params,
                       std::span<const SceneInstance* const> instances) {
  const auto thresholds = cfg.thresholds();
  MetricsReport report = eval_view_sweep(model, params, instances, cfg.eval.views, thresholds,
                                         cfg.eval.seed);
  report.config_hash = config_hash(cfg);
  return report;
}

void write_metrics(const fs::path& dir, const MetricsReport& report) {
  write_text(dir / "metrics.json", metrics_json(report));
  write_text(dir / "metrics.csv", metrics_csv(report));
}

int cmd_gen_data(const Common& c, const fs::path& out, const std::string& classes, int count,
                 std::optional<std::uint64_t> seed) {
  std::vector<std::string> extra;
  if (!classes.empty()) extra.push_back("data.classes=" + classes);
  if (count > 0) extra.push_back("data.count_per_class=" + std::to_string(count));
  if (seed) extra.push_back("data.seed=" + std::to_string(*seed));
  const RunConfig cfg = setup(c, extra);
  const Dataset ds = generate_dataset(cfg.data);
  write_dataset(out, ds);
  write_resolved_config(out, cfg);
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& i : ds.instances) ++counts[static_cast<int>(i.split)];
  std::cout << "dataset " << out.string() << ": " << ds.instances.size() << " instances ("
            << counts[0] << " train, " << counts[1] << " val, " << counts[2] << " test), "
            << cfg.data.classes.size() << " classes, grid " << cfg.data.grid_cells << "^3\n";
  return 0;
}

int cmd_train(const Common& c, const fs::path& data, const fs::path& out,
              const std::string& eval_split) {
  RunConfig cfg = setup(c);
  const Dataset ds = read_dataset(data);
  adopt_dataset(cfg, ds);
  const auto train = ds.split(Split::Train);
  if (train.empty()) throw DataError("dataset " + data.string() + " has no training instances");
  fs::create_directories(out);
  write_resolved_config(out, cfg);
  const Model model(cfg.resolved_model());
  const TrainResult result = run_training(model, train, cfg.train);
  diff::save_checkpoint(out / "checkpoint.clpm", result.params);
  write_text(out / "loss.csv", loss_csv(result.epochs));
  const auto held_out = pick_split(ds, eval_split);
  if (!held_out.empty()) {
    const MetricsReport report = run_eval(cfg, model, result.params, held_out);
    write_metrics(out, report);
    std::cout << "mean IoU " << report.full.mean_iou << " (threshold " << report.full.threshold
              << "), mean L1x100 " << report.full.mean_l1 << " on " << held_out.size() << " "
              << eval_split << " instances\n";
  }
  return 0;
}

int cmd_eval(const Common& c, const fs::path& data, const fs::path& checkpoint,
             const fs::path& out, const std::string& views, const std::string& split) {
  std::vector<std::string> extra;
  if (!views.empty()) extra.push_back("eval.views=" + views);
  RunConfig cfg = setup(c, extra, checkpoint.parent_path() / "resolved_config.json");
  const Dataset ds = read_dataset(data);
  adopt_dataset(cfg, ds);
  const auto params = diff::load_checkpoint(checkpoint);
  const Model model(cfg.resolved_model());
  const auto instances = pick_split(ds, split);
  if (instances.empty()) throw DataError("split '" + split + "' of " + data.string() + " is empty");
  fs::create_directories(out);
  write_resolved_config(out, cfg);
  const MetricsReport report = run_eval(cfg, model, params, instances);
  write_metrics(out, report);
  std::cout << metrics_csv(report);
  return 0;
}

int cmd_gradcheck(const Common& c, int seeds, double tolerance, const std::string& filter) {
  setup(c);
  diff::GradCheckOptions options;
  options.tolerance = tolerance;
  const auto results = run_gradcheck_suite(seeds, options, filter);
  if (results.empty()) throw ConfigError("no gradcheck case matches '" + filter + "'");
  bool ok = true;
  std::printf("%-22s %8s %12s %8s  %s\n", "op", "passed", "max rel err", "seconds", "status");
  for (const auto& r : results) {
    ok = ok && r.ok();
    std::string status = r.ok() ? "pass"
                                : std::string(diff::to_string(r.worst)) + " (seed " +
                                      std::to_string(r.first_failing_seed) + ")";
    std::printf("%-22s %4d/%-3d %12.3e %8.2f  %s\n", r.name.c_str(), r.passed, r.seeds,
                r.max_rel_error, r.seconds, status.c_str());
  }
  std::printf("%s\n", ok ? "all ops pass" : "GRADCHECK FAILED");
  return ok ? 0 : kExitCheck;
}

Image to_image(const std::vector<float>& rgb, int size) {
  return Image{size, size, 3, rgb};
}

int cmd_render(const Common& c, const fs::path& data, const fs::path& checkpoint,
               std::uint32_t id, const Camera& cam, int views, const fs::path& out) {
  RunConfig cfg = setup(c, {}, checkpoint.parent_path() / "resolved_config.json");
  const Dataset ds = read_dataset(data);
  adopt_dataset(cfg, ds);
  const auto params = diff::load_checkpoint(checkpoint);
  const Model model(cfg.resolved_model());
  const SceneInstance& inst = find_instance(ds, id);
  diff::Tape<float> tape;
  ForwardOptions opts;
  opts.input_count = static_cast<std::size_t>(views);
  opts.coordinate_losses = false;
  opts.task_losses = false;
  opts.seed = cfg.eval.seed;
  const auto bind = diff::constant_binder(tape, params);
  const auto r = forward(tape, model, bind, inst, nullptr, LossWeights{}, opts);
  const auto img = model.renderer().render(tape, bind, model.config().cells, r.refined, cam);
  const int size = model.config().render.output_size;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_ppm(out, to_image(tape.value(img).data, size));
  write_resolved_config(out.has_parent_path() ? out.parent_path() : fs::path("."), cfg);
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

// Square region of half-width `radius` around (row, col) of a size x size image.
std::vector<std::uint32_t> square_region(int size, int row, int col, int radius) {
  std::vector<std::uint32_t> out;
  for (int r = std::max(0, row - radius); r <= std::min(size - 1, row + radius); ++r) {
    for (int q = std::max(0, col - radius); q <= std::min(size - 1, col + radius); ++q) {
      out.push_back(static_cast<std::uint32_t>(r * size + q));
    }
  }
  return out;
}

int cmd_inspect(const Common& c, const fs::path& data, const fs::path& checkpoint,
                std::uint32_t id, const fs::path& out, int region_row, int region_col,
                int region_radius, int query_view, int query_pixel, int top_n) {
  RunConfig cfg = setup(c, {}, checkpoint.parent_path() / "resolved_config.json");
  const Dataset ds = read_dataset(data);
  adopt_dataset(cfg, ds);
  const auto params = diff::load_checkpoint(checkpoint);
  const Model model(cfg.resolved_model());
  const SceneInstance& inst = find_instance(ds, id);
  if (inst.supervision.empty()) throw DataError("instance has no supervision views");
  fs::create_directories(out);
  write_resolved_config(out, cfg);

  // Saliency of a region of the first supervision view.
  const int size = model.config().render.output_size;
  const int row = region_row >= 0 ? region_row : size / 2;
  const int col = region_col >= 0 ? region_col : size / 2;
  const auto region = square_region(size, row, col, region_radius);
  const auto maps = saliency_backtrace(model, params, inst, inst.supervision.front().camera,
                                       region, 0, cfg.eval.seed);
  for (std::size_t v = 0; v < maps.size(); ++v) {
    const auto& s = inst.inputs[v];
    write_ppm(out / ("saliency_view" + std::to_string(v) + ".ppm"),
              Image{s.height, s.width, 1, maps[v]});
  }

  // Correspondences of one query pixel across the input views.
  const auto fields = predict_fields(model, params, inst);
  if (query_view < 0 || static_cast<std::size_t>(query_view) >= fields.size()) {
    throw ConfigError("query view " + std::to_string(query_view) + " outside 0.." +
                      std::to_string(fields.size() - 1));
  }
  const auto& qf = fields[static_cast<std::size_t>(query_view)];
  std::uint32_t qp = 0;
  if (query_pixel >= 0) {
    qp = static_cast<std::uint32_t>(query_pixel);
  } else {
    // Default: the foreground pixel closest to the image centre.
    double best = 1e300;
    for (int r = 0; r < qf.height; ++r) {
      for (int q = 0; q < qf.width; ++q) {
        const auto p = static_cast<std::size_t>(r * qf.width + q);
        const double d = std::hypot(r - qf.height / 2.0, q - qf.width / 2.0);
        if (qf.mask[p] && d < best) {
          best = d;
          qp = static_cast<std::uint32_t>(p);
        }
      }
    }
  }
  if (qp >= qf.mask.size() || !qf.mask[qp]) {
    throw ConfigError("query pixel " + std::to_string(qp) + " is not foreground");
  }
  const auto matches = find_correspondences(static_cast<std::size_t>(query_view), qp, fields,
                                            static_cast<std::size_t>(top_n));
  std::ofstream csv(out / "correspondences.csv");
  csv << "view,rank,pixel,distance\n";
  for (std::size_t v = 0; v < fields.size(); ++v) {
    const auto& s = inst.inputs[v];
    Image img{s.height, s.width, 3, s.image};
    for (auto& x : img.pixels) x *= 0.5f;
    auto mark = [&](std::uint32_t p, float r, float g, float b) {
      img.pixels[3 * p] = r;
      img.pixels[3 * p + 1] = g;
      img.pixels[3 * p + 2] = b;
    };
    for (std::size_t k = 0; k < matches[v].size(); ++k) {
      mark(matches[v][k].pixel, 1.0f, 0.1f, 0.1f);
      csv << v << "," << k << "," << matches[v][k].pixel << "," << matches[v][k].distance << "\n";
    }
    if (v == static_cast<std::size_t>(query_view)) mark(qp, 0.1f, 1.0f, 0.1f);
    write_ppm(out / ("correspondence_view" + std::to_string(v) + ".ppm"), img);
  }
  std::cout << "wrote " << maps.size() << " saliency maps and " << fields.size()
            << " correspondence overlays to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"canonlift: symmetry-aware canonical-coordinate lifting"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--set", common.overrides, "dotted.key=value override (repeatable)");
  app.add_option("--threads", common.threads, "worker threads (falls back to CANONLIFT_THREADS)")
      ->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", common.verbose, "debug logging");
  app.fallthrough();

  fs::path data, out, checkpoint;
  std::string classes, views, split = "test";
  int count = 0;
  std::optional<std::uint64_t> seed;

  auto* gen = app.add_subcommand("gen-data", "generate a procedural dataset");
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--classes", classes, "comma-separated class names");
  gen->add_option("--count", count, "instances per class")->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed, "dataset seed");

  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--data", data, "dataset directory")->required();
  train->add_option("--out", out, "run directory")->required();
  train->add_option("--eval-split", split, "split evaluated after training");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--data", data, "dataset directory")->required();
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--out", out, "output directory")->required();
  eval->add_option("--views", views, "view counts to sweep, e.g. 1,2,3,4");
  eval->add_option("--split", split, "train, val, test or all");

  int seeds = 100;
  double tolerance = 1e-4;
  std::string filter;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every op");
  grad->add_option("--seeds", seeds, "seeds per op")->check(CLI::PositiveNumber);
  grad->add_option("--tol", tolerance, "relative tolerance");
  grad->add_option("--filter", filter, "only ops whose name contains this");

  std::uint32_t id = 0;
  Camera cam;
  int render_views = 0;
  auto* render = app.add_subcommand("render", "render a novel view of an instance");
  render->add_option("--data", data, "dataset directory")->required();
  render->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  render->add_option("--instance", id, "instance id")->required();
  render->add_option("--azimuth", cam.azimuth, "degrees");
  render->add_option("--elevation", cam.elevation, "degrees");
  render->add_option("--tx", cam.translation.x());
  render->add_option("--ty", cam.translation.y());
  render->add_option("--tz", cam.translation.z());
  render->add_option("--distance", cam.distance);
  render->add_option("--focal", cam.focal);
  render->add_option("--views", render_views, "input views to use (0 = all)");
  fs::path render_out;
  render->add_option("--out", render_out, "output PPM")->required();

  int region_row = -1, region_col = -1, region_radius = 2, query_view = 0, query_pixel = -1,
      top_n = 8;
  auto* inspect = app.add_subcommand("inspect", "saliency maps and correspondences");
  inspect->add_option("--data", data, "dataset directory")->required();
  inspect->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  inspect->add_option("--instance", id, "instance id")->required();
  inspect->add_option("--out", out, "output directory")->required();
  inspect->add_option("--region-row", region_row, "saliency region centre row");
  inspect->add_option("--region-col", region_col, "saliency region centre column");
  inspect->add_option("--region-radius", region_radius, "saliency region half-width");
  inspect->add_option("--query-view", query_view, "input view of the query pixel");
  inspect->add_option("--query-pixel", query_pixel, "row-major query pixel index");
  inspect->add_option("--top-n", top_n, "matches per view")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(common, out, classes, count, seed);
    if (*train) return cmd_train(common, data, out, split);
    if (*eval) return cmd_eval(common, data, checkpoint, out, views, split);
    if (*grad) return cmd_gradcheck(common, seeds, tolerance, filter);
    if (*render) return cmd_render(common, data, checkpoint, id, cam, render_views, render_out);
    if (*inspect) {
      return cmd_inspect(common, data, checkpoint, id, out, region_row, region_col, region_radius,
                         query_view, query_pixel, top_n);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
