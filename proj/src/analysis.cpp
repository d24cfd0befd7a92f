#include "canonlift/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "canonlift/diff/ops.hpp"

namespace canonlift {

std::vector<std::vector<float>> saliency_backtrace(const Model& model,
                                                   const diff::ParamStore<float>& params,
                                                   const SceneInstance& instance,
                                                   const Camera& camera,
                                                   std::span<const std::uint32_t> region,
                                                   std::size_t views, std::uint64_t seed) {
  if (region.empty()) throw std::invalid_argument("saliency_backtrace: empty region");
  const int out_size = model.config().render.output_size;
  const auto out_pixels = static_cast<std::uint32_t>(out_size * out_size);
  for (auto p : region) {
    if (p >= out_pixels) {
      throw std::invalid_argument("saliency_backtrace: region pixel " + std::to_string(p) +
                                  " outside the " + std::to_string(out_size) + "^2 render");
    }
  }
  diff::Tape<float> tape;
  ForwardOptions opts;
  opts.decouple = false;
  opts.coordinate_losses = false;
  opts.task_losses = false;
  opts.differentiable_inputs = true;
  opts.input_count = views;
  opts.seed = seed;
  const auto bind = diff::constant_binder(tape, params);
  const auto r = forward(tape, model, bind, instance, nullptr, LossWeights{}, opts);
  auto rendered = model.renderer().render(tape, bind, model.config().cells, r.refined, camera);
  tape.backward(diff::sum(tape, diff::gather_rows(tape, rendered, region)));

  std::vector<std::vector<float>> maps;
  float peak = 0.0f;
  for (std::size_t k = 0; k < r.views.size(); ++k) {
    const auto& vp = r.views[k];
    std::vector<float> m(static_cast<std::size_t>(vp.height) * vp.width, 0.0f);
    const auto g = tape.grad(r.inputs[k]);
    if (!g.empty()) {
      for (std::size_t i = 0; i < vp.pixels.size(); ++i) {
        const float* row = g.data() + i * PixelPredictor::kInputDim;
        m[vp.pixels[i]] = std::sqrt(row[0] * row[0] + row[1] * row[1] + row[2] * row[2]);
        peak = std::max(peak, m[vp.pixels[i]]);
      }
    }
    maps.push_back(std::move(m));
  }
  if (peak > 0.0f) {
    for (auto& m : maps) {
      for (auto& v : m) v /= peak;
    }
  }
  return maps;
}

std::vector<CoordinateField> predict_fields(const Model& model,
                                            const diff::ParamStore<float>& params,
                                            const SceneInstance& instance) {
  diff::Tape<float> tape;
  ForwardOptions opts;
  opts.coordinate_losses = false;
  opts.task_losses = false;
  const auto r = forward(tape, model, diff::constant_binder(tape, params), instance, nullptr,
                         LossWeights{}, opts);
  std::vector<CoordinateField> out;
  for (const auto& f : r.fields) out.push_back(materialize(tape, f));
  return out;
}

std::vector<std::vector<Match>> find_correspondences(std::size_t query_view,
                                                     std::uint32_t query_pixel,
                                                     std::span<const CoordinateField> fields,
                                                     std::size_t top_n) {
  if (query_view >= fields.size()) {
    throw std::invalid_argument("find_correspondences: query view " + std::to_string(query_view) +
                                " of " + std::to_string(fields.size()));
  }
  const CoordinateField& qf = fields[query_view];
  if (query_pixel >= qf.mask.size() || !qf.mask[query_pixel]) {
    throw std::invalid_argument("find_correspondences: query pixel " +
                                std::to_string(query_pixel) + " is not foreground");
  }
  const std::size_t qg = qf.argmax_type(query_pixel);
  const SymmetryType qt = qf.types[qg];
  const Eigen::Vector3d qc = qf.coord(query_pixel, qg);

  std::vector<std::vector<Match>> out;
  for (const CoordinateField& f : fields) {
    std::vector<Match> matches;
    for (std::size_t p = 0; p < f.mask.size(); ++p) {
      if (!f.mask[p]) continue;
      const std::size_t g = f.argmax_type(p);
      matches.push_back({static_cast<std::uint32_t>(p),
                         closure_distance(qt, qc, f.types[g], f.coord(p, g))});
    }
    const std::size_t n = std::min(top_n, matches.size());
    std::partial_sort(matches.begin(), matches.begin() + static_cast<std::ptrdiff_t>(n),
                      matches.end(), [](const Match& a, const Match& b) {
                        return a.distance < b.distance ||
                               (a.distance == b.distance && a.pixel < b.pixel);
                      });
    matches.resize(n);
    out.push_back(std::move(matches));
  }
  return out;
}

}  // namespace canonlift
