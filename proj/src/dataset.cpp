#include "canonlift/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <stdexcept>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "canonlift/binary_io.hpp"
#include "canonlift/kernels.hpp"

namespace canonlift {

using json = nlohmann::json;

namespace {
constexpr std::uint32_t kRecordVersion = 1;
}

void DatasetConfig::validate() const {
  if (classes.empty()) throw std::invalid_argument("dataset: no classes selected");
  if (count_per_class < 1) throw std::invalid_argument("dataset: count_per_class must be >= 1");
  if (image_size < 1 || render_size < 1) throw std::invalid_argument("dataset: image sizes must be >= 1");
  if (input_views < 1 || supervision_views < 0) {
    throw std::invalid_argument("dataset: need at least one input view");
  }
  if (grid_cells < 1) throw std::invalid_argument("dataset: grid_cells must be >= 1");
  if (!(camera_distance > 0.5)) throw std::invalid_argument("dataset: camera must sit outside the cube");
  if (oracle_points < 1) throw std::invalid_argument("dataset: oracle_points must be >= 1");
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "unknown";
}

Split split_of(int index, int count) {
  const int train = static_cast<int>(std::lround(0.7 * count));
  const int val = static_cast<int>(std::lround(0.1 * count));
  if (index < train) return Split::Train;
  if (index < train + val) return Split::Val;
  return Split::Test;
}

ShapeOracle SceneInstance::make_oracle() const {
  std::vector<Eigen::Vector3d> pts(oracle.size() / 3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    pts[i] = Eigen::Vector3d(oracle[3 * i], oracle[3 * i + 1], oracle[3 * i + 2]);
  }
  return ShapeOracle(std::move(pts));
}

bool SceneInstance::operator==(const SceneInstance& other) const {
  return encode_instance(*this) == encode_instance(other);
}

std::vector<const SceneInstance*> Dataset::split(Split s) const {
  std::vector<const SceneInstance*> out;
  for (const auto& inst : instances) {
    if (inst.split == s) out.push_back(&inst);
  }
  return out;
}

SceneInstance generate_instance(const DatasetConfig& config, ShapeClass c, int index,
                                std::uint32_t id) {
  const auto ci = static_cast<std::uint64_t>(c);
  const std::uint64_t base = derive_seed(config.seed, ci, static_cast<std::uint64_t>(index));
  SceneInstance inst;
  inst.id = id;
  inst.spec = random_shape_spec(c, derive_seed(base, 1));
  inst.texture = config.texture;
  inst.split = split_of(index, config.count_per_class);
  const SdfShape shape(inst.spec);
  if (shape.min_thickness() <= 1.0 / config.grid_cells) {
    spdlog::warn("{} instance {}: thinnest part {:.4f} is below one cell", to_string(c), index,
                 shape.min_thickness());
  }
  Rng cams(derive_seed(base, 2));
  for (int k = 0; k < config.input_views; ++k) {
    const Camera cam = sample_camera(cams, config.camera_distance, config.focal);
    inst.inputs.push_back(
        render_view(shape, config.texture, cam, config.image_size, config.image_size));
  }
  for (int k = 0; k < config.supervision_views; ++k) {
    const Camera cam = sample_camera(cams, config.camera_distance, config.focal);
    inst.supervision.push_back(
        render_view(shape, config.texture, cam, config.render_size, config.render_size));
  }
  inst.cells = config.grid_cells;
  inst.occupancy = voxelize(shape, config.grid_cells, config.supersample_occupancy);
  for (const auto& p : sample_surface(shape, static_cast<std::size_t>(config.oracle_points),
                                      derive_seed(base, 3))) {
    for (int d = 0; d < 3; ++d) inst.oracle.push_back(static_cast<float>(p[d]));
  }
  return inst;
}

Dataset generate_dataset(const DatasetConfig& config) {
  config.validate();
  Dataset ds;
  ds.config = config;
  const auto per = static_cast<std::size_t>(config.count_per_class);
  ds.instances.resize(config.classes.size() * per);
  kernels::parallel_for(ds.instances.size(), [&](std::size_t i) {
    ds.instances[i] = generate_instance(config, config.classes[i / per], static_cast<int>(i % per),
                                        static_cast<std::uint32_t>(i));
  });
  return ds;
}

// ---------------------------------------------------------------------------
// CLDS records

namespace {

void put_sample(ByteWriter& w, const RenderSample& s) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.height));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.width));
  w.put<double>(s.camera.azimuth);
  w.put<double>(s.camera.elevation);
  for (int d = 0; d < 3; ++d) w.put<double>(s.camera.translation[d]);
  w.put<double>(s.camera.distance);
  w.put<double>(s.camera.focal);
  w.put_array<float>(s.image);
  w.put_array<std::uint8_t>(s.mask);
  w.put_array<float>(s.coords);
  w.put_array<float>(s.depth);
}

RenderSample get_sample(ByteReader& r) {
  RenderSample s;
  s.height = static_cast<int>(r.get<std::uint32_t>("sample height"));
  s.width = static_cast<int>(r.get<std::uint32_t>("sample width"));
  if (s.height < 1 || s.width < 1 || s.height > 4096 || s.width > 4096) {
    r.fail("invalid sample size " + std::to_string(s.height) + "x" + std::to_string(s.width));
  }
  s.camera.azimuth = r.get<double>("camera azimuth");
  s.camera.elevation = r.get<double>("camera elevation");
  for (int d = 0; d < 3; ++d) s.camera.translation[d] = r.get<double>("camera translation");
  s.camera.distance = r.get<double>("camera distance");
  s.camera.focal = r.get<double>("camera focal");
  const std::size_t n = static_cast<std::size_t>(s.height) * s.width;
  s.image.resize(3 * n);
  s.mask.resize(n);
  s.coords.resize(3 * n);
  s.depth.resize(n);
  r.get_array<float>(std::span<float>(s.image), "image");
  r.get_array<std::uint8_t>(std::span<std::uint8_t>(s.mask), "mask");
  r.get_array<float>(std::span<float>(s.coords), "coordinates");
  r.get_array<float>(std::span<float>(s.depth), "depth");
  return s;
}

}  // namespace

std::vector<std::uint8_t> encode_instance(const SceneInstance& inst) {
  ByteWriter w;
  w.put_magic("CLDS");
  w.put<std::uint32_t>(kRecordVersion);
  w.put<std::uint32_t>(inst.id);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(inst.spec.shape_class));
  w.put<std::uint64_t>(inst.spec.seed);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(inst.spec.params.size()));
  w.put_array<double>(inst.spec.params);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(inst.texture));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(inst.split));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(inst.inputs.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(inst.supervision.size()));
  for (const auto& s : inst.inputs) put_sample(w, s);
  for (const auto& s : inst.supervision) put_sample(w, s);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(inst.cells));
  std::vector<std::uint8_t> bits((inst.occupancy.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < inst.occupancy.size(); ++i) {
    if (inst.occupancy[i]) bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  w.put_array<std::uint8_t>(bits);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(inst.oracle.size() / 3));
  w.put_array<float>(inst.oracle);
  return w.bytes();
}

SceneInstance decode_instance(std::vector<std::uint8_t> bytes, const std::string& source) {
  ByteReader r(std::move(bytes), source);
  r.expect_magic("CLDS");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kRecordVersion) r.fail("unsupported record version " + std::to_string(version));
  SceneInstance inst;
  inst.id = r.get<std::uint32_t>("instance id");
  const auto cls = r.get<std::uint8_t>("shape class");
  if (cls >= kAllShapeClasses.size()) r.fail("unknown shape class " + std::to_string(cls));
  inst.spec.shape_class = static_cast<ShapeClass>(cls);
  inst.spec.seed = r.get<std::uint64_t>("shape seed");
  inst.spec.params.resize(r.get<std::uint8_t>("parameter count"));
  r.get_array<double>(std::span<double>(inst.spec.params), "shape parameters");
  const auto tex = r.get<std::uint8_t>("texture mode");
  if (tex > 1) r.fail("unknown texture mode " + std::to_string(tex));
  inst.texture = static_cast<TextureMode>(tex);
  const auto split = r.get<std::uint8_t>("split");
  if (split > 2) r.fail("unknown split " + std::to_string(split));
  inst.split = static_cast<Split>(split);
  const auto k = r.get<std::uint32_t>("input view count");
  const auto k2 = r.get<std::uint32_t>("supervision view count");
  if (k > 1024 || k2 > 1024) r.fail("implausible view counts");
  for (std::uint32_t i = 0; i < k; ++i) inst.inputs.push_back(get_sample(r));
  for (std::uint32_t i = 0; i < k2; ++i) inst.supervision.push_back(get_sample(r));
  inst.cells = static_cast<int>(r.get<std::uint32_t>("grid cells"));
  if (inst.cells < 1 || inst.cells > 512) r.fail("invalid grid size " + std::to_string(inst.cells));
  const std::size_t voxels = static_cast<std::size_t>(inst.cells) * inst.cells * inst.cells;
  std::vector<std::uint8_t> bits((voxels + 7) / 8);
  r.get_array<std::uint8_t>(std::span<std::uint8_t>(bits), "occupancy");
  inst.occupancy.resize(voxels);
  for (std::size_t i = 0; i < voxels; ++i) inst.occupancy[i] = (bits[i / 8] >> (i % 8)) & 1u;
  const auto npts = r.get<std::uint32_t>("oracle point count");
  inst.oracle.resize(static_cast<std::size_t>(npts) * 3);
  r.get_array<float>(std::span<float>(inst.oracle), "oracle points");
  if (!r.at_end()) r.fail("trailing bytes after record");
  return inst;
}

// ---------------------------------------------------------------------------
// Directory layout

namespace {

json config_to_json(const DatasetConfig& c) {
  json j;
  json classes = json::array();
  for (ShapeClass s : c.classes) classes.push_back(std::string(to_string(s)));
  j["classes"] = classes;
  j["count_per_class"] = c.count_per_class;
  j["seed"] = c.seed;
  j["image_size"] = c.image_size;
  j["render_size"] = c.render_size;
  j["input_views"] = c.input_views;
  j["supervision_views"] = c.supervision_views;
  j["grid_cells"] = c.grid_cells;
  j["camera_distance"] = c.camera_distance;
  j["focal"] = c.focal;
  j["oracle_points"] = c.oracle_points;
  j["texture"] = std::string(to_string(c.texture));
  j["supersample_occupancy"] = c.supersample_occupancy;
  return j;
}

DatasetConfig config_from_json(const json& j) {
  DatasetConfig c;
  c.classes.clear();
  for (const auto& s : j.at("classes")) c.classes.push_back(shape_class_from_string(s.get<std::string>()));
  c.count_per_class = j.at("count_per_class").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.image_size = j.at("image_size").get<int>();
  c.render_size = j.at("render_size").get<int>();
  c.input_views = j.at("input_views").get<int>();
  c.supervision_views = j.at("supervision_views").get<int>();
  c.grid_cells = j.at("grid_cells").get<int>();
  c.camera_distance = j.at("camera_distance").get<double>();
  c.focal = j.at("focal").get<double>();
  c.oracle_points = j.at("oracle_points").get<int>();
  c.texture = texture_mode_from_string(j.at("texture").get<std::string>());
  c.supersample_occupancy = j.at("supersample_occupancy").get<bool>();
  return c;
}

std::string record_name(std::uint32_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "instance_%05u.clds", id);
  return buf;
}

}  // namespace

std::string dataset_config_json(const DatasetConfig& config) {
  return config_to_json(config).dump();
}

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  std::map<std::string, int> counts;
  json entries = json::array();
  for (const auto& inst : dataset.instances) {
    ByteWriter w;
    w.put_array<std::uint8_t>(encode_instance(inst));
    w.write_file(dir / record_name(inst.id));
    ++counts[std::string(to_string(inst.spec.shape_class))];
    entries.push_back({{"file", record_name(inst.id)},
                       {"id", inst.id},
                       {"class", std::string(to_string(inst.spec.shape_class))},
                       {"split", std::string(to_string(inst.split))},
                       {"seed", inst.spec.seed}});
  }
  json manifest;
  manifest["format"] = "CLDS";
  manifest["version"] = kRecordVersion;
  manifest["config"] = config_to_json(dataset.config);
  manifest["config_hash"] = hex64(fnv1a64(dataset_config_json(dataset.config)));
  manifest["counts"] = counts;
  manifest["instance_count"] = dataset.instances.size();
  manifest["instances"] = entries;
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

Dataset read_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw DataError("dataset manifest not found: " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  Dataset ds;
  try {
    if (manifest.at("format") != "CLDS" || manifest.at("version") != kRecordVersion) {
      throw DataError(manifest_path.string() + ": unsupported dataset format");
    }
    ds.config = config_from_json(manifest.at("config"));
    for (const auto& e : manifest.at("instances")) {
      const auto path = dir / e.at("file").get<std::string>();
      std::ifstream f(path, std::ios::binary);
      if (!f) throw DataError("dataset record not found: " + path.string());
      std::vector<std::uint8_t> bytes;
      bytes.assign(std::istreambuf_iterator<char>(f), {});
      ds.instances.push_back(decode_instance(std::move(bytes), path.string()));
    }
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  return ds;
}

}  // namespace canonlift
