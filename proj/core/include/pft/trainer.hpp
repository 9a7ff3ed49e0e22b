#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pft/dataset.hpp"
#include "pft/model.hpp"
#include "pft/optim.hpp"

namespace pft {

struct TrainConfig {
  std::size_t batch_size = 48;
  std::size_t images_per_id = 4;  // K of the P x K sampler; P = batch_size / K
  std::size_t total_steps = 300;
  std::optional<std::size_t> warmup_steps;  // default 10% of total_steps
  double base_lr = 0.008;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double margin = 0.3;
  bool triplet = true;
  double clip_grad_norm = 0.0;  // global L2 bound on the gradient; 0 disables
  AugmentFlags augment;
  std::uint64_t seed = 0;

  std::size_t warmup() const { return warmup_steps.value_or(total_steps / 10); }
  LrSchedule schedule() const { return {base_lr, total_steps, warmup()}; }
};

// Throws ConfigError naming the offending field.
void validate(const TrainConfig& cfg);

struct StepLog {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::vector<double> loss_per_head;
  double grad_norm = 0.0;  // before clipping

  // {"step":..,"lr":..,"loss":..,"loss_per_head":[..],"grad_norm":..}
  std::string to_json() const;
};

struct TrainResult {
  std::vector<StepLog> log;
};

// Identity labels mapped to contiguous class indices (sorted person ids).
std::vector<std::size_t> class_labels(std::span<const DatasetRecord> data);
std::size_t count_identities(std::span<const DatasetRecord> data);

// One batch on a fresh tape: forward every image, then per head
// id_loss (+ triplet_loss). Returns the total and fills per-head values.
ad::Var batch_loss(ad::Tape& tape, PftModel& model, std::span<const Tensor* const> images,
                   std::span<const std::size_t> labels, double margin, bool triplet,
                   std::vector<double>* per_head = nullptr);

// Rescales all gradients so their joint L2 norm is at most max_norm
// (max_norm == 0 leaves them alone). Returns the norm before rescaling.
double clip_gradients(std::span<Tensor* const> params, double max_norm);

// Draws P identities and K images of each; deterministic in rng.
std::vector<std::size_t> sample_batch(std::span<const std::size_t> labels, std::size_t identities,
                                      std::size_t images_per_id, Rng& rng);

// SGD with momentum under the warmup + cosine schedule. Deterministic given
// cfg.seed. Throws DivergenceError on a non-finite loss.
TrainResult train(PftModel& model, const TrainConfig& cfg, std::span<const DatasetRecord> data,
                  const std::function<void(const StepLog&)>& on_step = {});

}  // namespace pft
