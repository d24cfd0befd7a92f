#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "canonlift/canonical.hpp"
#include "canonlift/scenes.hpp"

namespace canonlift {

struct DatasetConfig {
  std::vector<ShapeClass> classes{kAllShapeClasses.begin(), kAllShapeClasses.end()};
  int count_per_class = 143;
  std::uint64_t seed = 1;
  int image_size = 32;   // input views
  int render_size = 32;  // supervision views
  int input_views = 4;
  int supervision_views = 5;
  int grid_cells = 16;
  double camera_distance = 1.5;
  double focal = 1.2;
  int oracle_points = 4096;
  TextureMode texture = TextureMode::Symmetric;
  bool supersample_occupancy = false;

  void validate() const;
};

enum class Split : std::uint8_t { Train, Val, Test };
std::string_view to_string(Split s);

/// Split of the index-th instance of a class with `count` instances:
/// round(0.7 n) train, round(0.1 n) val, the rest test.
Split split_of(int index, int count);

struct SceneInstance {
  std::uint32_t id = 0;
  ShapeSpec spec;
  TextureMode texture = TextureMode::Symmetric;
  Split split = Split::Train;
  std::vector<RenderSample> inputs;
  std::vector<RenderSample> supervision;
  int cells = 0;
  std::vector<std::uint8_t> occupancy;  // C^3
  std::vector<float> oracle;            // N*3 surface points

  ShapeOracle make_oracle() const;
  bool operator==(const SceneInstance&) const;
};

struct Dataset {
  DatasetConfig config;
  std::vector<SceneInstance> instances;

  std::vector<const SceneInstance*> split(Split s) const;
};

/// Instance `index` of class `c`; every random choice derives from
/// (config.seed, class, index), so generation order does not matter.
SceneInstance generate_instance(const DatasetConfig& config, ShapeClass c, int index,
                                std::uint32_t id);

/// All classes, instances ordered by class then index. Runs in parallel
/// over instances when more than one worker is configured.
Dataset generate_dataset(const DatasetConfig& config);

/// "CLDS" per-instance record.
std::vector<std::uint8_t> encode_instance(const SceneInstance& instance);
SceneInstance decode_instance(std::vector<std::uint8_t> bytes, const std::string& source = {});

/// Directory with instance_NNNNN.clds records and manifest.json (written last).
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& dir);

std::string dataset_config_json(const DatasetConfig& config);

}  // namespace canonlift
