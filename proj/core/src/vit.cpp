#include "pft/vit.hpp"

#include <cmath>

#include "pft/errors.hpp"

namespace pft {

using ad::Tape;
using ad::Var;

Grid grid_extents(const PatchConfig& cfg) {
  if (cfg.height == 0 || cfg.width == 0 || cfg.channels == 0 || cfg.patch == 0 || cfg.dim == 0) {
    throw ConfigError("patch config: height, width, channels, patch and dim must be positive");
  }
  if (cfg.stride < 1) throw ConfigError("patch config: stride must be >= 1");
  if (cfg.patch > cfg.height || cfg.patch > cfg.width) {
    throw ConfigError("patch config: patch " + std::to_string(cfg.patch) + " exceeds image " +
                      std::to_string(cfg.height) + "x" + std::to_string(cfg.width));
  }
  Grid g;
  g.rows = (cfg.height + cfg.stride - cfg.patch) / cfg.stride;
  g.cols = (cfg.width + cfg.stride - cfg.patch) / cfg.stride;
  g.count = g.rows * g.cols;
  return g;
}

Grid compute_grid(const PatchConfig& cfg) {
  Grid g = grid_extents(cfg);
  if (g.count % 4 != 0 || g.count % 12 != 0) {
    throw ConfigError("patch config: N = " + std::to_string(g.count) + " (" + std::to_string(g.rows) + "x" +
                      std::to_string(g.cols) + ") must be divisible by 4 and 12");
  }
  return g;
}

Var PatchSequence::joined() const {
  if (!class_token) return tokens;
  return ad::concat({*class_token, tokens}, 0);
}

PatchSequence PatchSequence::split(Var with_class) {
  const std::size_t rows = with_class.value().rows();
  if (rows < 2) throw ShapeError("PatchSequence::split: need a class token and at least one patch");
  return PatchSequence{ad::slice(with_class, 0, 1, rows), ad::slice(with_class, 0, 0, 1)};
}

void fill_normal(Tensor& t, double std, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std);
  for (auto& v : t.data()) v = dist(rng);
}

PatchEmbedding PatchEmbedding::init(const PatchConfig& cfg, double std, Rng& rng) {
  PatchEmbedding e{Tensor({cfg.patch_features(), cfg.dim}), Tensor({1, cfg.dim})};
  fill_normal(e.weight, std, rng);
  return e;
}

void PatchEmbedding::visit(const std::string& prefix, const std::function<void(const std::string&, Tensor&)>& fn) {
  fn(prefix + ".weight", weight);
  fn(prefix + ".bias", bias);
}

Var extract_windows(Var image, const PatchConfig& cfg) {
  const Tensor& img = image.value();
  if (img.shape() != Shape{cfg.channels, cfg.height, cfg.width}) {
    throw ShapeError("patch_embed: image " + shape_str(img.shape()) + " does not match config " +
                     shape_str({cfg.channels, cfg.height, cfg.width}));
  }
  const Grid g = grid_extents(cfg);
  const std::size_t P = cfg.patch, S = cfg.stride, H = cfg.height, W = cfg.width;
  const std::size_t F = cfg.patch_features();
  // source[k] is the flat image index feeding windows entry k.
  std::vector<std::size_t> source(g.count * F);
  Tensor out({g.count, F});
  for (std::size_t gy = 0; gy < g.rows; ++gy) {
    for (std::size_t gx = 0; gx < g.cols; ++gx) {
      const std::size_t row = gy * g.cols + gx;
      std::size_t col = 0;
      for (std::size_t c = 0; c < cfg.channels; ++c) {
        for (std::size_t dy = 0; dy < P; ++dy) {
          for (std::size_t dx = 0; dx < P; ++dx, ++col) {
            const std::size_t src = (c * H + gy * S + dy) * W + gx * S + dx;
            source[row * F + col] = src;
            out[row * F + col] = img[src];
          }
        }
      }
    }
  }
  return image.tape().push(std::move(out), {image},
                           [image, source = std::move(source)](Tape& t, const Tensor&, std::span<const double> grad) {
                             auto gi = t.grad(image);
                             for (std::size_t k = 0; k < source.size(); ++k) gi[source[k]] += grad[k];
                           });
}

PatchSequence patch_embed(Tape& tape, Var image, const PatchConfig& cfg, PatchEmbedding& weights) {
  Var windows = extract_windows(image, cfg);
  Var proj = ad::matmul(windows, tape.param(weights.weight));
  return PatchSequence{ad::add_row(proj, tape.param(weights.bias)), std::nullopt};
}

EncoderBlock EncoderBlock::init(std::size_t dim, std::size_t num_heads, std::size_t hidden, double std, Rng& rng) {
  if (num_heads == 0 || dim % num_heads != 0) {
    throw ConfigError("encoder block: dim " + std::to_string(dim) + " not divisible by heads " +
                      std::to_string(num_heads));
  }
  const std::size_t dh = dim / num_heads;
  EncoderBlock b;
  for (std::size_t h = 0; h < num_heads; ++h) {
    AttentionHead head{Tensor({dim, dh}), Tensor({1, dh}), Tensor({dim, dh}), Tensor({dim, dh}), Tensor({1, dh})};
    fill_normal(head.wq, std, rng);
    fill_normal(head.wk, std, rng);
    fill_normal(head.wv, std, rng);
    b.heads.push_back(std::move(head));
  }
  b.wo = Tensor({dim, dim});
  fill_normal(b.wo, std, rng);
  b.bo = Tensor({1, dim});
  b.ln1_gain = Tensor({1, dim}, 1.0);
  b.ln1_bias = Tensor({1, dim});
  b.ln2_gain = Tensor({1, dim}, 1.0);
  b.ln2_bias = Tensor({1, dim});
  b.mlp_w1 = Tensor({dim, hidden});
  fill_normal(b.mlp_w1, std, rng);
  b.mlp_b1 = Tensor({1, hidden});
  b.mlp_w2 = Tensor({hidden, dim});
  fill_normal(b.mlp_w2, std, rng);
  b.mlp_b2 = Tensor({1, dim});
  return b;
}

void EncoderBlock::visit(const std::string& prefix, const std::function<void(const std::string&, Tensor&)>& fn) {
  for (std::size_t h = 0; h < heads.size(); ++h) {
    const std::string hp = prefix + ".attn.head" + std::to_string(h);
    fn(hp + ".wq", heads[h].wq);
    fn(hp + ".bq", heads[h].bq);
    fn(hp + ".wk", heads[h].wk);
    fn(hp + ".wv", heads[h].wv);
    fn(hp + ".bv", heads[h].bv);
  }
  fn(prefix + ".attn.wo", wo);
  fn(prefix + ".attn.bo", bo);
  fn(prefix + ".ln1.gain", ln1_gain);
  fn(prefix + ".ln1.bias", ln1_bias);
  fn(prefix + ".ln2.gain", ln2_gain);
  fn(prefix + ".ln2.bias", ln2_bias);
  fn(prefix + ".mlp.w1", mlp_w1);
  fn(prefix + ".mlp.b1", mlp_b1);
  fn(prefix + ".mlp.w2", mlp_w2);
  fn(prefix + ".mlp.b2", mlp_b2);
}

BlockOutput apply_block(Tape& tape, EncoderBlock& block, Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || xv.cols() != block.dim()) {
    throw ShapeError("encoder block: input " + shape_str(xv.shape()) + " does not have width " +
                     std::to_string(block.dim()));
  }
  const std::size_t tokens = xv.rows();
  const std::size_t dh = block.dim() / block.heads.size();
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  Var h = ad::layer_norm(x, tape.param(block.ln1_gain), tape.param(block.ln1_bias));
  std::vector<Var> head_out;
  head_out.reserve(block.heads.size());
  Tensor attention({tokens, tokens});
  for (auto& head : block.heads) {
    Var q = ad::add_row(ad::matmul(h, tape.param(head.wq)), tape.param(head.bq));
    Var k = ad::matmul(h, tape.param(head.wk));
    Var v = ad::add_row(ad::matmul(h, tape.param(head.wv)), tape.param(head.bv));
    Var scores = ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt_dh);
    Var weights = ad::softmax(scores, 1);
    const Tensor& wv = weights.value();
    for (std::size_t i = 0; i < wv.size(); ++i) attention[i] += wv[i];
    head_out.push_back(ad::matmul(weights, v));
  }
  const double inv_heads = 1.0 / static_cast<double>(block.heads.size());
  for (auto& a : attention.data()) a *= inv_heads;

  Var mixed = head_out.size() == 1 ? head_out[0] : ad::concat(std::span<const Var>(head_out), 1);
  Var attn = ad::add_row(ad::matmul(mixed, tape.param(block.wo)), tape.param(block.bo));
  Var x1 = ad::add(x, attn);

  Var h2 = ad::layer_norm(x1, tape.param(block.ln2_gain), tape.param(block.ln2_bias));
  Var hidden = ad::gelu(ad::add_row(ad::matmul(h2, tape.param(block.mlp_w1)), tape.param(block.mlp_b1)));
  Var mlp = ad::add_row(ad::matmul(hidden, tape.param(block.mlp_w2)), tape.param(block.mlp_b2));
  return BlockOutput{ad::add(x1, mlp), std::move(attention)};
}

Encoded encode(Tape& tape, std::span<EncoderBlock> blocks, const PatchSequence& seq) {
  if (!seq.class_token) throw ShapeError("encode: class token required");
  Encoded enc{seq.joined(), {}};
  for (auto& block : blocks) {
    BlockOutput b = apply_block(tape, block, enc.out);
    enc.out = b.out;
    enc.attention.push_back(std::move(b.attention));
  }
  return enc;
}

Tensor attention_rollout(std::span<const Tensor> attention, const Grid& grid) {
  const std::size_t n = grid.count + 1;
  Tensor joint({n, n});
  for (std::size_t i = 0; i < n; ++i) joint.at(i, i) = 1.0;
  for (const Tensor& a : attention) {
    if (a.shape() != Shape{n, n}) {
      throw ShapeError("attention_rollout: map " + shape_str(a.shape()) + " does not match grid of " +
                       std::to_string(grid.count) + " patches");
    }
    Tensor next({n, n});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        const double aik = 0.5 * (a.at(i, k) + (i == k ? 1.0 : 0.0));
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) next.at(i, j) += aik * joint.at(k, j);
      }
    }
    joint = std::move(next);
  }
  Tensor heat({grid.rows, grid.cols});
  double total = 0.0;
  for (std::size_t p = 0; p < grid.count; ++p) {
    heat[p] = std::max(0.0, joint.at(0, p + 1));
    total += heat[p];
  }
  if (total > 0.0) {
    for (auto& v : heat.data()) v /= total;
  } else {
    heat.fill(1.0 / static_cast<double>(grid.count));
  }
  return heat;
}

}  // namespace pft
