#include "canonlift/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "canonlift/kernels.hpp"

namespace canonlift {

using json = nlohmann::json;

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 1; i <= 19; ++i) t.push_back(0.05 * i);
  return t;
}

double iou_at(std::span<const float> pred, std::span<const std::uint8_t> gt, double threshold) {
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("iou: prediction has " + std::to_string(pred.size()) +
                                " voxels, ground truth " + std::to_string(gt.size()));
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] >= threshold;
    const bool g = gt[i] != 0;
    inter += p && g;
    uni += p || g;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

IouResult eval_iou(std::span<const float> pred, std::span<const std::uint8_t> gt,
                   std::span<const double> thresholds) {
  if (thresholds.empty()) throw std::invalid_argument("eval_iou: empty threshold list");
  IouResult best{-1.0, 0.0};
  for (double t : thresholds) {
    const double v = iou_at(pred, gt, t);
    if (v > best.iou) best = {v, t};
  }
  return best;
}

double eval_l1(const std::vector<std::vector<float>>& renders,
               const std::vector<std::vector<float>>& targets) {
  if (renders.size() != targets.size()) {
    throw std::invalid_argument("eval_l1: " + std::to_string(renders.size()) + " renders vs " +
                                std::to_string(targets.size()) + " targets");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < renders.size(); ++k) {
    if (renders[k].size() != targets[k].size()) {
      throw std::invalid_argument("eval_l1: render " + std::to_string(k) + " size mismatch");
    }
    for (std::size_t i = 0; i < renders[k].size(); ++i) {
      sum += std::abs(static_cast<double>(renders[k][i]) - targets[k][i]);
    }
    n += renders[k].size();
  }
  return n == 0 ? 0.0 : 100.0 * sum / static_cast<double>(n);
}

InstancePrediction predict_instance(const Model& model, const diff::ParamStore<float>& params,
                                    const SceneInstance& instance, std::size_t views,
                                    std::uint64_t seed) {
  diff::Tape<float> tape;
  ForwardOptions opts;
  opts.input_count = views;
  opts.coordinate_losses = false;
  opts.task_losses = true;
  opts.seed = seed;
  const auto r = forward(tape, model, diff::constant_binder(tape, params), instance, nullptr,
                         LossWeights{}, opts);
  InstancePrediction out;
  out.id = instance.id;
  out.shape_class = instance.spec.shape_class;
  const auto& logits = tape.value(r.occupancy_logits);
  out.occupancy.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.occupancy[i] = 1.0f / (1.0f + std::exp(-logits[i]));
  }
  for (auto v : r.renders) out.renders.push_back(tape.value(v).data);
  return out;
}

ViewMetrics evaluate(const Model& model, const diff::ParamStore<float>& params,
                     std::span<const SceneInstance* const> instances, int views,
                     std::span<const double> thresholds, std::uint64_t seed) {
  if (instances.empty()) throw std::invalid_argument("evaluate: no instances");
  if (thresholds.empty()) throw std::invalid_argument("evaluate: empty threshold list");
  std::vector<InstancePrediction> preds(instances.size());
  kernels::parallel_for(instances.size(), [&](std::size_t i) {
    preds[i] = predict_instance(model, params, *instances[i], static_cast<std::size_t>(views), seed);
  });

  // iou[i][t] and per-instance L1.
  std::vector<std::vector<double>> iou(instances.size());
  std::vector<double> l1(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    for (double t : thresholds) iou[i].push_back(iou_at(preds[i].occupancy, instances[i]->occupancy, t));
    std::vector<std::vector<float>> targets;
    for (const auto& s : instances[i]->supervision) targets.push_back(s.image);
    l1[i] = eval_l1(preds[i].renders, targets);
  }
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    by_class[std::string(to_string(instances[i]->spec.shape_class))].push_back(i);
  }
  auto class_mean_iou = [&](const std::vector<std::size_t>& members, std::size_t t) {
    double s = 0.0;
    for (auto i : members) s += iou[i][t];
    return s / static_cast<double>(members.size());
  };
  std::size_t best_t = 0;
  double best = -1.0;
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    double m = 0.0;
    for (const auto& [name, members] : by_class) m += class_mean_iou(members, t);
    m /= static_cast<double>(by_class.size());
    if (m > best) {
      best = m;
      best_t = t;
    }
  }
  ViewMetrics out;
  out.views = views;
  out.threshold = thresholds[best_t];
  for (const auto& [name, members] : by_class) {
    ClassMetrics cm;
    cm.count = members.size();
    cm.iou = class_mean_iou(members, best_t);
    for (auto i : members) cm.l1 += l1[i] / static_cast<double>(members.size());
    out.per_class[name] = cm;
    out.mean_iou += cm.iou / static_cast<double>(by_class.size());
    out.mean_l1 += cm.l1 / static_cast<double>(by_class.size());
  }
  return out;
}

MetricsReport eval_view_sweep(const Model& model, const diff::ParamStore<float>& params,
                              std::span<const SceneInstance* const> instances,
                              std::span<const int> counts, std::span<const double> thresholds,
                              std::uint64_t seed) {
  if (instances.empty()) throw std::invalid_argument("eval_view_sweep: no instances");
  const int K = static_cast<int>(instances.front()->inputs.size());
  MetricsReport report;
  report.full = evaluate(model, params, instances, K, thresholds, seed);
  for (int n : counts) {
    if (n < 1 || n > K) {
      throw std::invalid_argument("eval_view_sweep: view count " + std::to_string(n) +
                                  " outside 1.." + std::to_string(K));
    }
    report.view_sweep.push_back(n == K ? report.full
                                       : evaluate(model, params, instances, n, thresholds, seed));
  }
  return report;
}

namespace {
json view_json(const ViewMetrics& v) {
  json per = json::object();
  for (const auto& [name, m] : v.per_class) per[name] = {{"iou", m.iou}, {"l1", m.l1}, {"count", m.count}};
  return {{"views", v.views}, {"per_class", per}, {"mean_iou", v.mean_iou},
          {"mean_l1", v.mean_l1}, {"threshold", v.threshold}};
}
}  // namespace

std::string metrics_json(const MetricsReport& report) {
  json j = view_json(report.full);
  j["config_hash"] = report.config_hash;
  json sweep = json::array();
  for (const auto& v : report.view_sweep) sweep.push_back(view_json(v));
  j["view_sweep"] = sweep;
  return j.dump(2) + "\n";
}

std::string metrics_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << std::setprecision(9) << "views,class,iou,l1,threshold\n";
  auto rows = [&](const ViewMetrics& v) {
    for (const auto& [name, m] : v.per_class) {
      out << v.views << "," << name << "," << m.iou << "," << m.l1 << "," << v.threshold << "\n";
    }
    out << v.views << ",mean," << v.mean_iou << "," << v.mean_l1 << "," << v.threshold << "\n";
  };
  rows(report.full);
  for (const auto& v : report.view_sweep) {
    if (v.views != report.full.views) rows(v);
  }
  return out.str();
}

std::string loss_csv(const std::vector<EpochStats>& epochs) {
  std::ostringstream out;
  out << std::setprecision(9) << "epoch,total,coord,spurious,vol,vs,steps,skipped\n";
  for (const auto& e : epochs) {
    out << e.epoch << "," << e.mean.total << "," << e.mean.coord << "," << e.mean.spurious << ","
        << e.mean.vol << "," << e.mean.vs << "," << e.steps << "," << e.skipped << "\n";
  }
  return out.str();
}

}  // namespace canonlift
