#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "pft/dataset.hpp"
#include "pft/model.hpp"
#include "pft/trainer.hpp"

namespace pft {

struct DataSource {
  enum class Kind { synthetic, manifest };
  Kind kind = Kind::synthetic;
  SynthSpec synthetic;
  std::string manifest;  // resolved against the config file's directory
};

// Everything that determines a training run.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataSource data;

  ImageSize image_size() const { return {model.patch.height, model.patch.width, model.patch.channels}; }
};

// Unknown keys and type errors are rejected with a ConfigError naming the
// field path, e.g. "train.base_lr: expected a number".
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& path);
// Canonical, fully-resolved JSON (every field written).
std::string to_json(const RunConfig& cfg);

}  // namespace pft
