#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "canonlift/canonical.hpp"
#include "canonlift/dataset.hpp"
#include "canonlift/model.hpp"

namespace canonlift {

/// Gradient of the summed rendered intensity over `region` (pixel indices of
/// the rendered image) w.r.t. every input image, as per-pixel RGB L2
/// magnitudes scaled so the largest value across all views is 1. Runs with
/// decoupling disabled so gradients reach the input pixels.
std::vector<std::vector<float>> saliency_backtrace(const Model& model,
                                                   const diff::ParamStore<float>& params,
                                                   const SceneInstance& instance,
                                                   const Camera& camera,
                                                   std::span<const std::uint32_t> region,
                                                   std::size_t views = 0,
                                                   std::uint64_t seed = 0);

/// Predicted coordinate fields of the instance's input views.
std::vector<CoordinateField> predict_fields(const Model& model,
                                            const diff::ParamStore<float>& params,
                                            const SceneInstance& instance);

struct Match {
  std::uint32_t pixel = 0;
  double distance = 0.0;
};

/// For every field, the top_n foreground pixels closest to the query under
/// closure distance between the argmax-probability types. Ties rank by
/// pixel index.
std::vector<std::vector<Match>> find_correspondences(std::size_t query_view,
                                                     std::uint32_t query_pixel,
                                                     std::span<const CoordinateField> fields,
                                                     std::size_t top_n);

}  // namespace canonlift
