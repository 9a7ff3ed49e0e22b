#include "pft/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "pft/errors.hpp"

namespace pft {

namespace {

using Color = std::array<double, 3>;

Rng seeded(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  for (auto p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

struct Identity {
  Color skin, torso, legs, stripe;
  std::size_t stripe_period;
  bool vertical_stripes;
  double width_frac;
};

Identity make_identity(std::uint64_t seed, std::size_t person_id) {
  Rng rng = seeded({seed, person_id, 0x1d});
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Identity id;
  for (auto& c : id.torso) c = u(rng);
  for (auto& c : id.legs) c = u(rng);
  for (auto& c : id.stripe) c = u(rng);
  const double tone = std::uniform_real_distribution<double>(0.45, 0.85)(rng);
  id.skin = {tone, tone * 0.8, tone * 0.65};
  id.stripe_period = std::uniform_int_distribution<std::size_t>(3, 7)(rng);
  id.vertical_stripes = std::bernoulli_distribution(0.5)(rng);
  id.width_frac = std::uniform_real_distribution<double>(0.38, 0.52)(rng);
  return id;
}

}  // namespace

DatasetRecord generate_identity(std::uint64_t seed, std::size_t person_id, std::size_t variant, std::size_t camera,
                                ImageSize size) {
  if (size.channels != 3) throw ConfigError("synthetic generator produces 3-channel images");
  const std::size_t H = size.height, W = size.width;
  const Identity id = make_identity(seed, person_id);
  Rng rng = seeded({seed, person_id, variant, camera, 0x2e});

  // Camera-specific background tone.
  Rng cam_rng = seeded({seed, camera, 0x3f});
  std::uniform_real_distribution<double> bg_u(0.25, 0.6);
  const Color background{bg_u(cam_rng), bg_u(cam_rng), bg_u(cam_rng)};

  std::uniform_int_distribution<int> jitter(-3, 3);
  const int dx = jitter(rng), dy = jitter(rng);
  const double brightness = std::uniform_real_distribution<double>(0.85, 1.15)(rng);
  const double fig_w = id.width_frac * static_cast<double>(W) *
                       std::uniform_real_distribution<double>(0.92, 1.08)(rng);

  const double hd = static_cast<double>(H), wd = static_cast<double>(W);
  const double cx = wd / 2.0 + dx;
  const double top = 0.04 * hd + dy, head_end = 0.2 * hd + dy, torso_end = 0.56 * hd + dy, feet = 0.96 * hd + dy;

  Tensor img({3, H, W});
  std::normal_distribution<double> noise(0.0, 0.03);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const double fy = static_cast<double>(y) + 0.5, fx = static_cast<double>(x) + 0.5;
      Color c = background;
      if (fy >= top && fy < head_end && std::abs(fx - cx) < fig_w * 0.28) {
        c = id.skin;
      } else if (fy >= head_end && fy < torso_end && std::abs(fx - cx) < fig_w * 0.5) {
        const std::size_t phase = id.vertical_stripes ? static_cast<std::size_t>(fx - cx + 100.0)
                                                      : static_cast<std::size_t>(fy - head_end);
        c = (phase / id.stripe_period) % 2 == 0 ? id.torso : id.stripe;
      } else if (fy >= torso_end && fy < feet && std::abs(fx - cx) < fig_w * 0.42 &&
                 std::abs(fx - cx) > fig_w * 0.04) {
        c = id.legs;
      }
      for (std::size_t ch = 0; ch < 3; ++ch) {
        img[(ch * H + y) * W + x] = std::clamp(c[ch] * brightness + noise(rng), 0.0, 1.0);
      }
    }
  }

  DatasetRecord rec{std::move(img), person_id, camera, std::nullopt};
  if (std::bernoulli_distribution(0.5)(rng)) {
    const double frac = std::uniform_real_distribution<double>(0.2, 0.6)(rng);
    const int side = std::uniform_int_distribution<int>(0, 2)(rng);  // 0 bottom, 1 left, 2 right
    Color oc;
    for (auto& v : oc) v = std::uniform_real_distribution<double>(0.0, 1.0)(rng);

    const double fig_left = std::max(0.0, cx - fig_w * 0.5), fig_right = std::min(wd, cx + fig_w * 0.5);
    const double fig_top = std::max(0.0, top), fig_bottom = std::min(hd, feet);
    double x0, x1, y0, y1;
    if (side == 0) {
      x0 = std::max(0.0, fig_left - 3.0);
      x1 = std::min(wd, fig_right + 3.0);
      y1 = fig_bottom;
      y0 = y1 - frac * (fig_bottom - fig_top);
    } else {
      y0 = fig_top;
      y1 = fig_bottom;
      const double w = frac * (fig_right - fig_left);
      x0 = side == 1 ? fig_left : fig_right - w;
      x1 = x0 + w;
    }
    PixelRect r;
    r.x = static_cast<std::size_t>(std::floor(x0));
    r.y = static_cast<std::size_t>(std::floor(y0));
    r.width = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(x1)) - r.x);
    r.height = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(y1)) - r.y);
    r.width = std::min(r.width, W - r.x);
    r.height = std::min(r.height, H - r.y);
    for (std::size_t y = r.y; y < r.y + r.height; ++y)
      for (std::size_t x = r.x; x < r.x + r.width; ++x)
        for (std::size_t ch = 0; ch < 3; ++ch) {
          rec.image[(ch * H + y) * W + x] = std::clamp(oc[ch] + noise(rng), 0.0, 1.0);
        }
    rec.occluder = r;
  }
  return rec;
}

std::vector<DatasetRecord> generate_dataset(const SynthSpec& spec, ImageSize size) {
  if (spec.cameras == 0) throw ConfigError("synthetic data: cameras must be >= 1");
  std::vector<DatasetRecord> out;
  out.reserve(spec.ids * spec.variants);
  for (std::size_t id = 0; id < spec.ids; ++id) {
    for (std::size_t v = spec.first_variant; v < spec.first_variant + spec.variants; ++v) {
      out.push_back(generate_identity(spec.seed, id, v, v % spec.cameras, size));
    }
  }
  return out;
}

std::vector<double> channel_mean(std::span<const DatasetRecord> records) {
  if (records.empty()) return {};
  const std::size_t C = records.front().image.dim(0);
  std::vector<double> mean(C, 0.0);
  double count = 0.0;
  for (const auto& r : records) {
    const std::size_t plane = r.image.size() / C;
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t i = 0; i < plane; ++i) mean[c] += r.image[c * plane + i];
    }
    count += static_cast<double>(plane);
  }
  for (auto& m : mean) m /= count;
  return mean;
}

}  // namespace pft
