#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pft/pfde.hpp"
#include "pft/ssm.hpp"
#include "pft/vit.hpp"

namespace pft {

// Ablation switches on top of the ViT baseline.
struct ModuleSwitches {
  bool pfde = true;
  bool frm = true;
  bool ssm = true;

  // "B", "B+P", "B+P+F", ... in the order P, F, S.
  std::string label() const;
  friend bool operator==(const ModuleSwitches&, const ModuleSwitches&) = default;
};

// Parses a comma-separated subset of {pfde, frm, ssm}; "" is the baseline.
ModuleSwitches parse_ablation(const std::string& list);

struct ModelConfig {
  PatchConfig patch;
  std::size_t depth = 4;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;
  double init_std = 0.02;
  ModuleSwitches modules;
  double beta = 1.0;
  LpdeInit lpde_init = LpdeInit::constant;
  SsmSlicing slicing = SsmSlicing::index;
  std::size_t num_identities = 8;
};

// Throws ConfigError naming the offending field.
void validate(const ModelConfig& cfg);

// Linear classifiers D -> identities, one per supervised feature: the global
// class feature, then left, middle, right and GLF when SSM is on. Each sees
// its features through a batch-norm neck with a learned per-channel gain.
struct HeadSet {
  std::vector<Tensor> neck_gains;  // 1 x D each
  std::vector<Tensor> weights;
  static std::vector<std::string> names(bool ssm);
};

struct ModelForward {
  ad::Var global_feature;                // 1 x D
  std::vector<ad::Var> branch_features;  // left, middle, right, GLF (SSM only)
  std::vector<Tensor> attention;         // global path, one map per block
  ad::Var global_tokens;                 // (N+1) x D after the last block

  // Global first, then branches; the order matches HeadSet.
  std::vector<ad::Var> features() const;
};

class PftModel {
 public:
  using Visitor = std::function<void(const std::string&, Tensor&)>;

  PftModel(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return cfg_; }
  const Grid& grid() const noexcept { return grid_; }
  std::size_t head_count() const noexcept { return heads_.weights.size(); }
  std::size_t embedding_dim() const noexcept { return cfg_.patch.dim * head_count(); }

  ModelForward forward(ad::Tape& tape, const Tensor& image);
  // Identity logits for a batch of one head's features (B x D, B >= 2):
  // batch-norm neck, then the linear classifier.
  ad::Var logits(ad::Tape& tape, std::size_t head, ad::Var features);

  // Retrieval embedding: the head-ordered class features concatenated, D or 5D.
  Tensor embed(const Tensor& image);

  // Parameters in a fixed order (the checkpoint order).
  void visit(const Visitor& fn);
  std::vector<Tensor*> parameters();
  std::size_t parameter_count();
  std::string topology() const;

  LpdeTensor* lpde() { return lpde_ ? &*lpde_ : nullptr; }

 private:
  ModelConfig cfg_;
  Grid grid_;
  std::optional<SsmSlices> slices_;
  PatchEmbedding patch_embed_;
  std::optional<LpdeTensor> lpde_;
  Tensor class_token_;
  Tensor pos_embed_;
  std::vector<EncoderBlock> blocks_;
  Tensor norm_gain_, norm_bias_;
  std::optional<EncoderBlock> ssm_block_;
  Tensor ssm_norm_gain_, ssm_norm_bias_;
  HeadSet heads_;
};

// Independent random stream per named model component, so toggling one
// module never shifts the initialization of another.
Rng component_rng(std::uint64_t seed, std::uint64_t component);

}  // namespace pft
