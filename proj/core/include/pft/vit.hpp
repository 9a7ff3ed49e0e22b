#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pft/autodiff.hpp"
#include "pft/tensor.hpp"

namespace pft {

using Rng = std::mt19937_64;

// Image and patch geometry. Grid extents follow
//   N_H = floor((H + S - P) / S),  N_W = floor((W + S - P) / S),  N = N_H * N_W.
struct PatchConfig {
  std::size_t height = 96;
  std::size_t width = 48;
  std::size_t channels = 3;
  std::size_t patch = 8;
  std::size_t stride = 8;
  std::size_t dim = 64;

  std::size_t patch_features() const { return channels * patch * patch; }
};

struct Grid {
  std::size_t rows = 0;  // N_H
  std::size_t cols = 0;  // N_W
  std::size_t count = 0; // N

  friend bool operator==(const Grid&, const Grid&) = default;
};

// Grid extents without the FRM/SSM divisibility requirement. Throws
// ConfigError when the field bounds are violated.
Grid grid_extents(const PatchConfig& cfg);
// Validated grid: additionally requires N divisible by 4 and by 12.
Grid compute_grid(const PatchConfig& cfg);

// Sequence of patch tokens with an optional class token kept separate.
struct PatchSequence {
  ad::Var tokens;                    // N x D
  std::optional<ad::Var> class_token; // 1 x D

  std::size_t length() const { return tokens.value().rows(); }
  // [class; tokens] when the class token is present, tokens otherwise.
  ad::Var joined() const;
  // Splits row 0 off as the class token.
  static PatchSequence split(ad::Var with_class);
};

struct PatchEmbedding {
  Tensor weight;  // (C*P*P) x D
  Tensor bias;    // 1 x D

  static PatchEmbedding init(const PatchConfig& cfg, double std, Rng& rng);
  void visit(const std::string& prefix, const std::function<void(const std::string&, Tensor&)>& fn);
};

// Strided P x P windows in row-major grid order; each row holds one window
// flattened as (channel, dy, dx).
ad::Var extract_windows(ad::Var image, const PatchConfig& cfg);
PatchSequence patch_embed(ad::Tape& tape, ad::Var image, const PatchConfig& cfg, PatchEmbedding& weights);

// Keys carry no bias: a key bias shifts every score in a query row equally
// and softmax cancels it.
struct AttentionHead {
  Tensor wq, bq, wk, wv, bv;  // D x (D/h), 1 x (D/h)
};

struct EncoderBlock {
  std::vector<AttentionHead> heads;
  Tensor wo, bo;                  // D x D, 1 x D
  Tensor ln1_gain, ln1_bias;      // 1 x D
  Tensor ln2_gain, ln2_bias;      // 1 x D
  Tensor mlp_w1, mlp_b1;          // D x hidden, 1 x hidden
  Tensor mlp_w2, mlp_b2;          // hidden x D, 1 x D

  static EncoderBlock init(std::size_t dim, std::size_t num_heads, std::size_t hidden, double std, Rng& rng);
  std::size_t dim() const { return wo.rows(); }
  void visit(const std::string& prefix, const std::function<void(const std::string&, Tensor&)>& fn);
};

struct BlockOutput {
  ad::Var out;
  Tensor attention;  // head-averaged, rows sum to 1
};

// Pre-norm block: x + MHSA(LN(x)), then + MLP(LN(.)).
BlockOutput apply_block(ad::Tape& tape, EncoderBlock& block, ad::Var x);

struct Encoded {
  ad::Var out;
  std::vector<Tensor> attention;  // one per applied block
};

// Applies `blocks` in order to a sequence that already carries its class
// token and position embedding.
Encoded encode(ad::Tape& tape, std::span<EncoderBlock> blocks, const PatchSequence& seq);

// Rollout of retained (N+1)x(N+1) attention maps: the product of
// (A + I) / 2 over layers, class-token row over patch positions, reshaped to
// the grid and normalized to sum 1. Falls back to uniform when the class
// row carries no mass on patches.
Tensor attention_rollout(std::span<const Tensor> attention, const Grid& grid);

// N(0, std) fill.
void fill_normal(Tensor& t, double std, Rng& rng);

}  // namespace pft
