#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "canonlift/dataset.hpp"
#include "canonlift/model.hpp"
#include "canonlift/trainer.hpp"

namespace canonlift {

/// 0.05, 0.10, ..., 0.95.
std::vector<double> default_thresholds();

/// IoU after binarizing pred >= threshold. An empty union scores 1.
double iou_at(std::span<const float> pred, std::span<const std::uint8_t> gt, double threshold);

struct IouResult {
  double iou = 0.0;
  double threshold = 0.0;
};

/// Best IoU over the thresholds (first threshold wins ties).
IouResult eval_iou(std::span<const float> pred, std::span<const std::uint8_t> gt,
                   std::span<const double> thresholds);

/// Mean absolute error over all renders, pixels and channels, times 100.
double eval_l1(const std::vector<std::vector<float>>& renders,
               const std::vector<std::vector<float>>& targets);

struct InstancePrediction {
  std::uint32_t id = 0;
  ShapeClass shape_class = ShapeClass::TableRot4;
  std::vector<float> occupancy;             // C^3 probabilities
  std::vector<std::vector<float>> renders;  // one per supervision view
};

InstancePrediction predict_instance(const Model& model, const diff::ParamStore<float>& params,
                                    const SceneInstance& instance, std::size_t views,
                                    std::uint64_t seed);

struct ClassMetrics {
  double iou = 0.0;
  double l1 = 0.0;
  std::size_t count = 0;
};

struct ViewMetrics {
  int views = 0;
  std::map<std::string, ClassMetrics> per_class;
  double mean_iou = 0.0;  // mean over classes
  double mean_l1 = 0.0;
  double threshold = 0.0;  // chosen over the whole set
};

/// Predicts every instance with its first `views` input views (0 = all).
ViewMetrics evaluate(const Model& model, const diff::ParamStore<float>& params,
                     std::span<const SceneInstance* const> instances, int views,
                     std::span<const double> thresholds, std::uint64_t seed);

struct MetricsReport {
  std::string config_hash;
  ViewMetrics full;
  std::vector<ViewMetrics> view_sweep;
};

MetricsReport eval_view_sweep(const Model& model, const diff::ParamStore<float>& params,
                              std::span<const SceneInstance* const> instances,
                              std::span<const int> counts, std::span<const double> thresholds,
                              std::uint64_t seed);

std::string metrics_json(const MetricsReport& report);
std::string metrics_csv(const MetricsReport& report);
std::string loss_csv(const std::vector<EpochStats>& epochs);

}  // namespace canonlift
