#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pft/model.hpp"
#include "pft/tensor.hpp"

namespace pft {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

using Checkpoint = std::vector<NamedTensor>;

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout, all integers little-endian u32:
//   "PFT1" | version | count | { name_len | name | rank | dims[rank] | f64 LE payload }*
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint snapshot(PftModel& model);
// Copies values into the model. Throws DataError naming both shapes when a
// tensor does not match, or naming the tensor when one is missing or extra.
void restore(PftModel& model, const Checkpoint& ckpt);

}  // namespace pft
