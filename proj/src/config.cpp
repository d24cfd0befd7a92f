#include "canonlift/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "canonlift/binary_io.hpp"
#include "canonlift/metrics.hpp"

namespace canonlift {

using json = nlohmann::json;

ModelConfig RunConfig::resolved_model() const {
  ModelConfig m = model;
  m.cells = data.grid_cells;
  return m;
}

std::vector<double> RunConfig::thresholds() const {
  return eval.thresholds.empty() ? default_thresholds() : eval.thresholds;
}

json to_json(const RunConfig& c) {
  json j;
  json classes = json::array();
  for (ShapeClass s : c.data.classes) classes.push_back(std::string(to_string(s)));
  j["data"] = {{"classes", classes},
               {"count_per_class", c.data.count_per_class},
               {"seed", c.data.seed},
               {"image_size", c.data.image_size},
               {"render_size", c.data.render_size},
               {"input_views", c.data.input_views},
               {"supervision_views", c.data.supervision_views},
               {"grid_cells", c.data.grid_cells},
               {"camera_distance", c.data.camera_distance},
               {"focal", c.data.focal},
               {"oracle_points", c.data.oracle_points},
               {"texture", std::string(to_string(c.data.texture))},
               {"supersample_occupancy", c.data.supersample_occupancy}};
  json sym = json::array();
  for (SymmetryType g : c.model.symmetry.active_set) sym.push_back(std::string(to_string(g)));
  j["model"] = {{"feature_dim", c.model.feature_dim},
                {"hidden", c.model.hidden},
                {"symmetry", sym},
                {"sample_count", c.model.symmetry.sample_count},
                {"normalize_weight_input", c.model.normalize_weight_input},
                {"render",
                 {{"ray_grid", c.model.render.ray_grid},
                  {"depth_samples", c.model.render.depth_samples},
                  {"output_size", c.model.render.output_size}}}};
  j["train"] = {{"lambda_c", c.train.lambda.coord},
                {"lambda_s", c.train.lambda.spurious},
                {"lambda_vol", c.train.lambda.vol},
                {"lambda_vs", c.train.lambda.vs},
                {"lr", c.train.adam.lr},
                {"beta1", c.train.adam.beta1},
                {"beta2", c.train.adam.beta2},
                {"eps", c.train.adam.eps},
                {"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"lr_decay", c.train.lr_decay},
                {"decouple", c.train.decouple},
                {"seed", c.train.seed}};
  j["eval"] = {{"thresholds", c.eval.thresholds}, {"views", c.eval.views}, {"seed", c.eval.seed}};
  j["threads"] = c.threads;
  return j;
}

namespace {

void flatten(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (const auto& [k, v] : j.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) {
      flatten(v, key, out);
    } else {
      out.push_back(key);
    }
  }
}

json::json_pointer pointer(const std::string& dotted) {
  std::string p;
  std::stringstream ss(dotted);
  for (std::string part; std::getline(ss, part, '.');) p += "/" + part;
  return json::json_pointer(p);
}

std::string key_list() {
  std::string s;
  for (const auto& k : valid_keys()) s += "\n  " + k;
  return s;
}

void check_keys(const json& j) {
  std::vector<std::string> keys;
  flatten(j, "", keys);
  const auto valid = valid_keys();
  const std::set<std::string> ok(valid.begin(), valid.end());
  for (const auto& k : keys) {
    if (!ok.count(k)) throw ConfigError("unknown config key '" + k + "'; valid keys:" + key_list());
  }
}

}  // namespace

std::vector<std::string> valid_keys() {
  std::vector<std::string> keys;
  flatten(to_json(RunConfig{}), "", keys);
  return keys;
}

RunConfig run_config_from_json(const json& j) {
  check_keys(j);
  json merged = to_json(RunConfig{});
  merged.merge_patch(j);
  RunConfig c;
  try {
    const auto& d = merged.at("data");
    c.data.classes.clear();
    for (const auto& s : d.at("classes")) c.data.classes.push_back(shape_class_from_string(s.get<std::string>()));
    c.data.count_per_class = d.at("count_per_class").get<int>();
    c.data.seed = d.at("seed").get<std::uint64_t>();
    c.data.image_size = d.at("image_size").get<int>();
    c.data.render_size = d.at("render_size").get<int>();
    c.data.input_views = d.at("input_views").get<int>();
    c.data.supervision_views = d.at("supervision_views").get<int>();
    c.data.grid_cells = d.at("grid_cells").get<int>();
    c.data.camera_distance = d.at("camera_distance").get<double>();
    c.data.focal = d.at("focal").get<double>();
    c.data.oracle_points = d.at("oracle_points").get<int>();
    c.data.texture = texture_mode_from_string(d.at("texture").get<std::string>());
    c.data.supersample_occupancy = d.at("supersample_occupancy").get<bool>();

    const auto& m = merged.at("model");
    c.model.feature_dim = m.at("feature_dim").get<int>();
    c.model.hidden = m.at("hidden").get<int>();
    c.model.symmetry.active_set.clear();
    for (const auto& s : m.at("symmetry")) {
      c.model.symmetry.active_set.push_back(symmetry_from_string(s.get<std::string>()));
    }
    c.model.symmetry.sample_count = m.at("sample_count").get<int>();
    c.model.normalize_weight_input = m.at("normalize_weight_input").get<bool>();
    c.model.render.ray_grid = m.at("render").at("ray_grid").get<int>();
    c.model.render.depth_samples = m.at("render").at("depth_samples").get<int>();
    c.model.render.output_size = m.at("render").at("output_size").get<int>();

    const auto& t = merged.at("train");
    c.train.lambda.coord = t.at("lambda_c").get<double>();
    c.train.lambda.spurious = t.at("lambda_s").get<double>();
    c.train.lambda.vol = t.at("lambda_vol").get<double>();
    c.train.lambda.vs = t.at("lambda_vs").get<double>();
    c.train.adam.lr = t.at("lr").get<double>();
    c.train.adam.beta1 = t.at("beta1").get<double>();
    c.train.adam.beta2 = t.at("beta2").get<double>();
    c.train.adam.eps = t.at("eps").get<double>();
    c.train.epochs = t.at("epochs").get<int>();
    c.train.batch_size = t.at("batch_size").get<int>();
    c.train.lr_decay = t.at("lr_decay").get<double>();
    c.train.decouple = t.at("decouple").get<bool>();
    c.train.seed = t.at("seed").get<std::uint64_t>();
    c.model.symmetry.rng_seed = c.train.seed;

    const auto& e = merged.at("eval");
    c.eval.thresholds = e.at("thresholds").get<std::vector<double>>();
    c.eval.views = e.at("views").get<std::vector<int>>();
    c.eval.seed = e.at("seed").get<std::uint64_t>();
    c.threads = merged.at("threads").get<int>();
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("invalid config value: ") + ex.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
  try {
    c.data.validate();
    c.resolved_model().validate();
    c.train.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
  if (c.threads < 0) throw ConfigError("threads must be >= 0");
  return c;
}

RunConfig load_config(const std::optional<std::filesystem::path>& file,
                      const std::vector<std::string>& overrides) {
  json j = json::object();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw DataError("config file not found: " + file->string());
    try {
      j = json::parse(in);
    } catch (const json::exception& ex) {
      throw DataError(file->string() + ": " + ex.what());
    }
  }
  const json defaults = to_json(RunConfig{});
  const auto valid = valid_keys();
  const std::set<std::string> ok(valid.begin(), valid.end());
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override '" + o + "' is not of the form key=value");
    }
    const std::string key = o.substr(0, eq);
    const std::string text = o.substr(eq + 1);
    if (!ok.count(key)) throw ConfigError("unknown config key '" + key + "'; valid keys:" + key_list());
    const auto ptr = pointer(key);
    auto parse = [](const std::string& s) {
      try {
        return json::parse(s);
      } catch (const json::exception&) {
        return json(s);
      }
    };
    json value = parse(text);
    if (defaults.at(ptr).is_array() && !value.is_array()) {
      json arr = json::array();
      std::stringstream ss(text);
      for (std::string item; std::getline(ss, item, ',');) arr.push_back(parse(item));
      value = arr;
    }
    j[ptr] = value;
  }
  return run_config_from_json(j);
}

std::string config_hash(const RunConfig& config) {
  return hex64(fnv1a64(to_json(config).dump()));
}

void write_resolved_config(const std::filesystem::path& dir, const RunConfig& config) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "resolved_config.json", std::ios::trunc);
  out << to_json(config).dump(2) << "\n";
  std::ofstream hash(dir / "config_hash.txt", std::ios::trunc);
  hash << config_hash(config) << "\n";
  if (!out || !hash) throw DataError("cannot write resolved config into " + dir.string());
}

}  // namespace canonlift
