#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "pft/config.hpp"
#include "pft/dataset.hpp"
#include "pft/model.hpp"

namespace fixtures {

// 32 x 24 image, 8 x 8 patches: a 4 x 3 grid of 12 tokens, enough for both
// the quarter and the twelfth split.
inline pft::ModelConfig tiny_model(std::size_t identities = 4) {
  pft::ModelConfig m;
  m.patch.height = 32;
  m.patch.width = 24;
  m.patch.patch = 8;
  m.patch.stride = 8;
  m.patch.dim = 16;
  m.depth = 2;
  m.heads = 2;
  m.num_identities = identities;
  return m;
}

inline pft::ImageSize tiny_size() { return {32, 24, 3}; }

inline pft::RunConfig tiny_run(std::size_t steps = 3) {
  pft::RunConfig rc;
  rc.model = tiny_model();
  rc.train.batch_size = 8;
  rc.train.images_per_id = 2;
  rc.train.total_steps = steps;
  rc.train.seed = 7;
  rc.data.synthetic.ids = 4;
  rc.data.synthetic.variants = 4;
  return rc;
}

// The desk-scale setup: 96 x 48, 8 x 8 patches, D = 64, four blocks of four
// heads, 72 tokens.
inline pft::RunConfig desk_run() {
  pft::RunConfig rc;
  rc.model.num_identities = 8;
  rc.train.batch_size = 16;
  rc.train.images_per_id = 4;
  rc.train.total_steps = 300;
  rc.train.seed = 1;
  rc.data.synthetic = {0, 8, 0, 16, 2};
  return rc;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  std::random_device rd;
  auto dir = std::filesystem::temp_directory_path() / ("pft_" + name + "_" + std::to_string(rd()));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
