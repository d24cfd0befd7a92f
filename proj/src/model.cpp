#include "canonlift/model.hpp"

#include <numeric>
#include <stdexcept>

#include "canonlift/diff/ops.hpp"

namespace canonlift {

using diff::Buffer;
using diff::Shape;
using diff::Tape;
using diff::Var;

void ModelConfig::validate() const {
  if (cells < 1) throw std::invalid_argument("model: cells must be >= 1");
  if (feature_dim < 1) throw std::invalid_argument("model: feature_dim must be >= 1");
  if (hidden < 1) throw std::invalid_argument("model: hidden must be >= 1");
  symmetry.validate();
  render.validate();
}

Model::Model(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto D = static_cast<std::size_t>(config_.feature_dim);
  const auto H = static_cast<std::size_t>(config_.hidden);
  predictor_ = PixelPredictor(config_.symmetry.active_set.size(), D, H);
  refiner_ = Refiner(D, config_.normalize_weight_input);
  occupancy_ = OccupancyHead(D, H);
  renderer_ = Renderer(D, H, config_.render);
}

template <typename T>
diff::ParamStore<T> Model::initialize(std::uint64_t seed) const {
  diff::ParamStore<T> store;
  Rng rng(seed);
  predictor_.initialize(store, rng);
  refiner_.initialize(store, rng);
  occupancy_.initialize(store, rng);
  renderer_.initialize(store, rng);
  return store;
}

std::vector<std::string> Model::coordinate_parameter_names() const {
  return predictor_.coord_branch().parameter_names();
}

std::vector<std::string> Model::parameter_names() const {
  std::vector<std::string> out;
  auto add = [&](const diff::ParametricMap& m) {
    for (auto& n : m.parameter_names()) out.push_back(std::move(n));
  };
  add(predictor_.coord_branch());
  add(predictor_.feature_branch());
  add(refiner_.stage(0));
  add(refiner_.stage(1));
  add(occupancy_.map());
  add(renderer_.occlusion());
  add(renderer_.decoder());
  return out;
}

std::uint64_t view_seed(std::uint64_t base, std::uint32_t instance, std::size_t view) {
  return derive_seed(base, instance, view);
}

template <typename T>
ForwardResult<T> forward(Tape<T>& tape, const Model& model, const diff::ParamBinder& bind,
                         const SceneInstance& instance, const ShapeOracle* oracle,
                         const LossWeights& weights, const ForwardOptions& options) {
  const ModelConfig& cfg = model.config();
  if (instance.cells != cfg.cells) {
    throw std::invalid_argument("forward: instance grid " + std::to_string(instance.cells) +
                                " does not match model grid " + std::to_string(cfg.cells));
  }
  std::vector<std::size_t> order;
  if (options.view_order) {
    order = *options.view_order;
  } else {
    order.resize(instance.inputs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
  }
  if (options.input_count > 0) {
    if (options.input_count > order.size()) {
      throw std::invalid_argument("forward: requested " + std::to_string(options.input_count) +
                                  " views, instance has " + std::to_string(order.size()));
    }
    order.resize(options.input_count);
  }
  if (order.empty()) throw std::invalid_argument("forward: no input views");

  const std::span<const SymmetryType> types(cfg.symmetry.active_set);
  ForwardResult<T> out;
  std::vector<Var> lc_terms, ls_terms;
  for (std::size_t v : order) {
    const RenderSample& s = instance.inputs.at(v);
    out.views.push_back(view_pixels<T>(s.image, s.mask, s.height, s.width));
    const ViewPixels<T>& vp = out.views.back();
    Var in = options.differentiable_inputs ? tape.input(vp.inputs) : tape.constant(vp.inputs);
    out.inputs.push_back(in);
    out.fields.push_back(predict_coords(tape, model.predictor(), bind, in, vp, types));
    const CoordinateFieldVars& field = out.fields.back();
    const std::uint64_t seed = view_seed(options.seed, instance.id, v);
    out.lifts.push_back(lift_view(tape, field, cfg.cells, cfg.symmetry, options.decouple, seed));
    if (options.coordinate_losses) {
      std::vector<T> gt(3 * vp.pixels.size());
      for (std::size_t i = 0; i < vp.pixels.size(); ++i) {
        for (int d = 0; d < 3; ++d) gt[3 * i + d] = static_cast<T>(s.coords[3 * vp.pixels[i] + d]);
      }
      lc_terms.push_back(coord_loss(tape, field, std::span<const T>(gt)));
      if (oracle == nullptr) throw std::invalid_argument("forward: spurious loss needs an oracle");
      ls_terms.push_back(spurious_loss(tape, field, *oracle, cfg.symmetry.sample_count,
                                       derive_seed(seed, 0x5u)));
    }
  }
  out.aggregate = average(tape, std::span<const Var>(out.lifts));
  out.refined = model.refiner().apply(tape, bind, cfg.cells, out.aggregate);
  out.occupancy_logits = model.occupancy().apply(tape, bind, cfg.cells, out.refined);

  std::vector<Var> total_terms;
  auto mean_of = [&](const std::vector<Var>& terms) {
    Var acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) acc = diff::add(tape, acc, terms[i]);
    return diff::scale(tape, acc, static_cast<T>(1.0 / static_cast<double>(terms.size())));
  };
  if (options.coordinate_losses) {
    out.coord_loss = mean_of(lc_terms);
    out.spurious_loss = mean_of(ls_terms);
    total_terms.push_back(diff::scale(tape, out.coord_loss, static_cast<T>(weights.coord)));
    total_terms.push_back(diff::scale(tape, out.spurious_loss, static_cast<T>(weights.spurious)));
  }
  if (options.task_losses) {
    out.vol_loss = occupancy_loss(tape, out.occupancy_logits, instance.occupancy);
    total_terms.push_back(diff::scale(tape, out.vol_loss, static_cast<T>(weights.vol)));
    std::vector<Var> vs_terms;
    for (const RenderSample& s : instance.supervision) {
      out.renders.push_back(model.renderer().render(tape, bind, cfg.cells, out.refined, s.camera));
      vs_terms.push_back(view_synthesis_loss(tape, out.renders.back(), s.image));
    }
    if (!vs_terms.empty()) {
      out.vs_loss = mean_of(vs_terms);
      total_terms.push_back(diff::scale(tape, out.vs_loss, static_cast<T>(weights.vs)));
    }
  }
  if (!total_terms.empty()) {
    Var acc = total_terms[0];
    for (std::size_t i = 1; i < total_terms.size(); ++i) acc = diff::add(tape, acc, total_terms[i]);
    out.total = acc;
  }
  return out;
}

template diff::ParamStore<float> Model::initialize<float>(std::uint64_t) const;
template diff::ParamStore<double> Model::initialize<double>(std::uint64_t) const;
template ForwardResult<float> forward<float>(Tape<float>&, const Model&, const diff::ParamBinder&,
                                             const SceneInstance&, const ShapeOracle*,
                                             const LossWeights&, const ForwardOptions&);
template ForwardResult<double> forward<double>(Tape<double>&, const Model&,
                                               const diff::ParamBinder&, const SceneInstance&,
                                               const ShapeOracle*, const LossWeights&,
                                               const ForwardOptions&);

}  // namespace canonlift
