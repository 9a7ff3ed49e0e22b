#include "pft/model.hpp"

#include <cmath>
#include <sstream>

#include "pft/errors.hpp"
#include "pft/frm.hpp"

namespace pft {

using ad::Tape;
using ad::Var;

namespace {

enum Component : std::uint64_t { kPatchEmbed = 1, kPosEmbed, kBlocks, kLpde, kHeads };

}  // namespace

std::string ModuleSwitches::label() const {
  std::string s = "B";
  if (pfde) s += "+P";
  if (frm) s += "+F";
  if (ssm) s += "+S";
  return s;
}

ModuleSwitches parse_ablation(const std::string& list) {
  ModuleSwitches m{false, false, false};
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    if (item == "pfde") {
      m.pfde = true;
    } else if (item == "frm") {
      m.frm = true;
    } else if (item == "ssm") {
      m.ssm = true;
    } else {
      throw ConfigError("ablation: unknown module '" + item + "' (expected pfde, frm, ssm)");
    }
  }
  return m;
}

Rng component_rng(std::uint64_t seed, std::uint64_t component) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(component), 0x9f7u};
  return Rng(seq);
}

void validate(const ModelConfig& cfg) {
  const Grid g = (cfg.modules.frm || cfg.modules.ssm) ? compute_grid(cfg.patch) : grid_extents(cfg.patch);
  if (cfg.depth == 0) throw ConfigError("model.depth must be >= 1");
  if (cfg.heads == 0 || cfg.patch.dim % cfg.heads != 0) {
    throw ConfigError("model.heads: dim " + std::to_string(cfg.patch.dim) + " not divisible by " +
                      std::to_string(cfg.heads));
  }
  if (cfg.mlp_ratio == 0) throw ConfigError("model.mlp_ratio must be >= 1");
  if (!(cfg.init_std > 0.0)) throw ConfigError("model.init_std must be positive");
  if (cfg.num_identities == 0) throw ConfigError("model.num_identities must be >= 1");
  if (cfg.modules.pfde && (!(cfg.beta > 0.0) || !std::isfinite(cfg.beta))) {
    throw ConfigError("pfde.beta must be finite and positive");
  }
  if (cfg.modules.ssm && cfg.slicing == SsmSlicing::column && (g.rows % 4 != 0 || g.cols % 3 != 0)) {
    throw ConfigError("ssm.slicing=column needs grid rows divisible by 4 and columns by 3, got " +
                      std::to_string(g.rows) + "x" + std::to_string(g.cols));
  }
}

std::vector<std::string> HeadSet::names(bool ssm) {
  if (!ssm) return {"global"};
  return {"global", "left", "middle", "right", "glf"};
}

std::vector<Var> ModelForward::features() const {
  std::vector<Var> f{global_feature};
  f.insert(f.end(), branch_features.begin(), branch_features.end());
  return f;
}

PftModel::PftModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  validate(cfg_);
  const bool strict = cfg_.modules.frm || cfg_.modules.ssm;
  grid_ = strict ? compute_grid(cfg_.patch) : grid_extents(cfg_.patch);
  const std::size_t D = cfg_.patch.dim;

  Rng embed_rng = component_rng(seed, kPatchEmbed);
  patch_embed_ = PatchEmbedding::init(cfg_.patch, cfg_.init_std, embed_rng);

  if (cfg_.modules.pfde) {
    Rng lpde_rng = component_rng(seed, kLpde);
    lpde_ = init_lpde(cfg_.patch, cfg_.beta, cfg_.lpde_init, lpde_rng);
  }

  class_token_ = Tensor({1, D});
  pos_embed_ = Tensor({grid_.count + 1, D});
  Rng pos_rng = component_rng(seed, kPosEmbed);
  fill_normal(pos_embed_, cfg_.init_std, pos_rng);

  Rng block_rng = component_rng(seed, kBlocks);
  for (std::size_t i = 0; i < cfg_.depth; ++i) {
    blocks_.push_back(EncoderBlock::init(D, cfg_.heads, D * cfg_.mlp_ratio, cfg_.init_std, block_rng));
  }
  norm_gain_ = Tensor({1, D}, 1.0);
  norm_bias_ = Tensor({1, D});

  if (cfg_.modules.ssm) {
    slices_ = make_ssm_slices(cfg_.slicing, grid_);
    // The branch block starts as a copy of the global last block.
    ssm_block_ = blocks_.back();
    ssm_norm_gain_ = norm_gain_;
    ssm_norm_bias_ = norm_bias_;
  }

  Rng head_rng = component_rng(seed, kHeads);
  for (std::size_t h = 0; h < HeadSet::names(cfg_.modules.ssm).size(); ++h) {
    heads_.neck_gains.push_back(Tensor({1, D}, 1.0));
    Tensor w({D, cfg_.num_identities});
    fill_normal(w, cfg_.init_std, head_rng);
    heads_.weights.push_back(std::move(w));
  }
  for (Tensor* p : parameters()) p->set_requires_grad(true);
}

ModelForward PftModel::forward(Tape& tape, const Tensor& image) {
  Tensor centered = image;
  for (double& v : centered.data()) v = (v - 0.5) / 0.5;
  Var img = tape.constant(std::move(centered));
  PatchSequence f = patch_embed(tape, img, cfg_.patch, patch_embed_);
  if (lpde_) f = apply_pfde(tape, f, *lpde_);

  PatchSequence seq{f.tokens, tape.param(class_token_)};
  Var z = ad::add(seq.joined(), tape.param(pos_embed_));

  ModelForward out;
  std::span<EncoderBlock> trunk(blocks_.data(), blocks_.size() - 1);
  Encoded enc = encode(tape, trunk, PatchSequence::split(z));
  out.attention = std::move(enc.attention);

  const PatchSequence trunk_out = PatchSequence::split(enc.out);
  const PatchSequence global_in = cfg_.modules.frm ? frm_apply(trunk_out) : trunk_out;
  BlockOutput last = apply_block(tape, blocks_.back(), global_in.joined());
  out.attention.push_back(std::move(last.attention));
  out.global_tokens = last.out;
  out.global_feature =
      ad::layer_norm(ad::slice(last.out, 0, 0, 1), tape.param(norm_gain_), tape.param(norm_bias_));

  if (ssm_block_) {
    SsmOutput branches = ssm_apply(tape, trunk_out, *ssm_block_, *slices_);
    for (Var cls : branches.class_features) {
      out.branch_features.push_back(ad::layer_norm(cls, tape.param(ssm_norm_gain_), tape.param(ssm_norm_bias_)));
    }
  }
  return out;
}

Var PftModel::logits(Tape& tape, std::size_t head, Var features) {
  if (head >= heads_.weights.size()) throw ShapeError("logits: head index out of range");
  Var neck = ad::batch_norm(features, tape.param(heads_.neck_gains[head]));
  return ad::matmul(neck, tape.param(heads_.weights[head]));
}

Tensor PftModel::embed(const Tensor& image) {
  Tape tape(Tape::Mode::inference);
  const ModelForward f = forward(tape, image);
  const auto feats = f.features();
  Var joined = feats.size() == 1 ? feats[0] : ad::concat(std::span<const Var>(feats), 1);
  return joined.value().reshaped({embedding_dim()});
}

void PftModel::visit(const Visitor& fn) {
  patch_embed_.visit("patch_embed", fn);
  if (lpde_) fn("pfde.lpde", lpde_->values);
  fn("class_token", class_token_);
  fn("pos_embed", pos_embed_);
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].visit("blocks." + std::to_string(i), fn);
  fn("norm.gain", norm_gain_);
  fn("norm.bias", norm_bias_);
  if (ssm_block_) {
    ssm_block_->visit("ssm.block", fn);
    fn("ssm.norm.gain", ssm_norm_gain_);
    fn("ssm.norm.bias", ssm_norm_bias_);
  }
  const auto names = HeadSet::names(cfg_.modules.ssm);
  for (std::size_t h = 0; h < heads_.weights.size(); ++h) {
    fn("heads." + names[h] + ".neck_gain", heads_.neck_gains[h]);
    fn("heads." + names[h] + ".weight", heads_.weights[h]);
  }
}

std::vector<Tensor*> PftModel::parameters() {
  std::vector<Tensor*> out;
  visit([&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

std::size_t PftModel::parameter_count() {
  std::size_t n = 0;
  visit([&](const std::string&, Tensor& t) { n += t.size(); });
  return n;
}

std::string PftModel::topology() const {
  std::ostringstream s;
  s << cfg_.modules.label() << " N=" << grid_.count << " D=" << cfg_.patch.dim << " heads=" << cfg_.heads
    << " embed" << (cfg_.modules.pfde ? "+pfde" : "") << " trunk=" << cfg_.depth - 1 << " global=["
    << (cfg_.modules.frm ? "frm," : "") << "block" << cfg_.depth - 1 << "]";
  if (cfg_.modules.ssm) s << " ssm=[" << to_string(cfg_.slicing) << ",left,middle,right,glf]";
  return s.str();
}

}  // namespace pft
