#include "pft/dataset.hpp"

#include <cmath>

#include "pft/errors.hpp"

namespace pft {

Tensor flip_horizontal(const Tensor& image) {
  if (image.rank() != 3) throw ShapeError("flip_horizontal: expected CxHxW, got " + shape_str(image.shape()));
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  Tensor out(image.shape());
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) out[(c * H + y) * W + x] = image[(c * H + y) * W + (W - 1 - x)];
  return out;
}

DatasetRecord augment(const DatasetRecord& record, Rng& rng, const AugmentFlags& flags, AugmentTrace* trace) {
  DatasetRecord out = record;
  const std::size_t C = out.image.dim(0), H = out.image.dim(1), W = out.image.dim(2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  if (flags.flip && unit(rng) < flags.flip_prob) {
    out.image = flip_horizontal(out.image);
    out.occluder.reset();
    if (trace) trace->flipped = true;
  }

  if (flags.pad_crop && flags.padding > 0) {
    const std::size_t pad = flags.padding;
    std::uniform_int_distribution<std::size_t> off(0, 2 * pad);
    const std::size_t ox = off(rng), oy = off(rng);
    Tensor cropped(out.image.shape());
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t y = 0; y < H; ++y) {
        // Padded coordinate (oy + y) maps to source row oy + y - pad.
        const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(oy + y) - static_cast<std::ptrdiff_t>(pad);
        if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H)) continue;
        for (std::size_t x = 0; x < W; ++x) {
          const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(ox + x) - static_cast<std::ptrdiff_t>(pad);
          if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(W)) continue;
          cropped[(c * H + y) * W + x] = out.image[(c * H + static_cast<std::size_t>(sy)) * W + static_cast<std::size_t>(sx)];
        }
      }
    }
    out.image = std::move(cropped);
    out.occluder.reset();
    if (trace) trace->crop_origin = std::make_pair(ox, oy);
  }

  if (flags.erase && unit(rng) < flags.erase_prob) {
    const double area = static_cast<double>(H * W);
    std::uniform_real_distribution<double> target(flags.erase_min_area, flags.erase_max_area);
    std::uniform_real_distribution<double> log_aspect(std::log(flags.erase_min_aspect),
                                                      -std::log(flags.erase_min_aspect));
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double a = target(rng) * area;
      const double aspect = std::exp(log_aspect(rng));
      const auto h = static_cast<std::size_t>(std::lround(std::sqrt(a * aspect)));
      const auto w = static_cast<std::size_t>(std::lround(std::sqrt(a / aspect)));
      if (h == 0 || w == 0 || h >= H || w >= W) continue;
      const std::size_t y0 = std::uniform_int_distribution<std::size_t>(0, H - h)(rng);
      const std::size_t x0 = std::uniform_int_distribution<std::size_t>(0, W - w)(rng);
      for (std::size_t c = 0; c < C; ++c) {
        const double v = c < flags.fill.size() ? flags.fill[c] : 0.0;
        for (std::size_t y = y0; y < y0 + h; ++y)
          for (std::size_t x = x0; x < x0 + w; ++x) out.image[(c * H + y) * W + x] = v;
      }
      if (trace) trace->erased = PixelRect{x0, y0, w, h};
      break;
    }
  }
  return out;
}

}  // namespace pft
