#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "pft/tensor.hpp"
#include "pft/vit.hpp"

namespace pft {

struct PixelRect {
  std::size_t x = 0, y = 0, width = 0, height = 0;

  bool contains(std::size_t px, std::size_t py) const {
    return px >= x && px < x + width && py >= y && py < y + height;
  }
  std::size_t area() const { return width * height; }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

struct ImageSize {
  std::size_t height = 96;
  std::size_t width = 48;
  std::size_t channels = 3;
};

struct DatasetRecord {
  Tensor image;  // C x H x W in [0, 1]
  std::size_t person_id = 0;
  std::size_t camera_id = 0;
  // Occluder placed by the synthetic generator, in pixel coordinates.
  std::optional<PixelRect> occluder;
};

// Procedural pedestrian: identity-specific torso/leg colours and stripe
// texture, per-variant pose jitter and photometric noise, a camera-specific
// background, and with probability 0.5 an occluder covering 20-60% of the
// figure from the bottom or a side. Deterministic in all arguments.
DatasetRecord generate_identity(std::uint64_t seed, std::size_t person_id, std::size_t variant, std::size_t camera,
                                ImageSize size = {});

struct SynthSpec {
  std::uint64_t seed = 0;
  std::size_t ids = 8;
  std::size_t first_variant = 0;
  std::size_t variants = 16;  // count starting at first_variant
  std::size_t cameras = 2;    // camera = variant % cameras
};

// Records ordered by identity, then variant.
std::vector<DatasetRecord> generate_dataset(const SynthSpec& spec, ImageSize size = {});

// Reads `path,person_id,camera_id` rows; image paths are relative to the
// manifest's directory. Images are bilinearly resized to `size`.
std::vector<DatasetRecord> load_manifest(const std::filesystem::path& path, ImageSize size = {});
// Writes each record as <stem>_<index>.ppm next to the manifest.
void write_manifest(const std::filesystem::path& path, std::span<const DatasetRecord> records);

std::vector<double> channel_mean(std::span<const DatasetRecord> records);

struct AugmentFlags {
  bool flip = true;
  bool pad_crop = true;
  bool erase = true;
  std::size_t padding = 10;
  double flip_prob = 0.5;
  double erase_prob = 0.5;
  double erase_min_area = 0.02;
  double erase_max_area = 0.4;
  double erase_min_aspect = 0.3;
  std::vector<double> fill;  // per channel erase value; empty means 0

  bool any() const { return flip || pad_crop || erase; }
};

// What augment() did, for inspection in tests.
struct AugmentTrace {
  bool flipped = false;
  std::optional<std::pair<std::size_t, std::size_t>> crop_origin;  // (x, y) in the padded image
  std::optional<PixelRect> erased;
};

// Horizontal flip (p) -> zero-pad and random-crop back -> random erasing (p).
DatasetRecord augment(const DatasetRecord& record, Rng& rng, const AugmentFlags& flags,
                      AugmentTrace* trace = nullptr);

Tensor flip_horizontal(const Tensor& image);

}  // namespace pft
