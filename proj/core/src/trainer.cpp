#include "pft/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "pft/errors.hpp"
#include "pft/losses.hpp"

namespace pft {

using ad::Tape;
using ad::Var;

void validate(const TrainConfig& cfg) {
  if (cfg.images_per_id == 0) throw ConfigError("train.images_per_id must be >= 1");
  if (cfg.batch_size == 0 || cfg.batch_size % cfg.images_per_id != 0) {
    throw ConfigError("train.batch_size must be a positive multiple of train.images_per_id (" +
                      std::to_string(cfg.images_per_id) + ")");
  }
  if (cfg.triplet && (cfg.batch_size / cfg.images_per_id < 2 || cfg.images_per_id < 2)) {
    throw ConfigError("train.batch_size: triplet loss needs >= 2 identities and >= 2 images per identity");
  }
  if (cfg.total_steps > 0 && cfg.warmup() > cfg.total_steps) {
    throw ConfigError("train.warmup_steps exceeds train.total_steps");
  }
  if (!(cfg.base_lr > 0.0)) throw ConfigError("train.base_lr must be positive");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw ConfigError("train.momentum must be in [0, 1)");
  if (!(cfg.weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (!(cfg.margin > 0.0)) throw ConfigError("train.margin must be positive");
  if (!(cfg.clip_grad_norm >= 0.0)) throw ConfigError("train.clip_grad_norm must be >= 0");
}

std::string StepLog::to_json() const {
  nlohmann::json j;
  j["step"] = step;
  j["lr"] = lr;
  j["loss"] = loss;
  j["loss_per_head"] = loss_per_head;
  j["grad_norm"] = grad_norm;
  return j.dump();
}

std::vector<std::size_t> class_labels(std::span<const DatasetRecord> data) {
  std::map<std::size_t, std::size_t> index;
  for (const auto& r : data) index.emplace(r.person_id, 0);
  std::size_t next = 0;
  for (auto& [id, cls] : index) cls = next++;
  std::vector<std::size_t> labels;
  labels.reserve(data.size());
  for (const auto& r : data) labels.push_back(index.at(r.person_id));
  return labels;
}

std::size_t count_identities(std::span<const DatasetRecord> data) {
  const auto labels = class_labels(data);
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

Var batch_loss(Tape& tape, PftModel& model, std::span<const Tensor* const> images, std::span<const std::size_t> labels,
               double margin, bool triplet, std::vector<double>* per_head) {
  if (images.size() != labels.size() || images.empty()) throw ShapeError("batch_loss: images and labels differ");
  const std::size_t heads = model.head_count();
  if (images.size() < 2) throw DataError("batch_loss: the batch-norm neck needs at least 2 images");
  std::vector<std::vector<Var>> rows(heads);
  for (const Tensor* img : images) {
    const auto feats = model.forward(tape, *img).features();
    for (std::size_t h = 0; h < heads; ++h) rows[h].push_back(feats[h]);
  }
  Var total;
  if (per_head) per_head->clear();
  for (std::size_t h = 0; h < heads; ++h) {
    Var feats = ad::concat(std::span<const Var>(rows[h]), 0);
    Var loss = id_loss(model.logits(tape, h, feats), labels);
    if (triplet) loss = ad::add(loss, triplet_loss(feats, labels, margin));
    if (per_head) per_head->push_back(loss.value()[0]);
    total = total.valid() ? ad::add(total, loss) : loss;
  }
  return total;
}

double clip_gradients(std::span<Tensor* const> params, double max_norm) {
  double sq = 0.0;
  for (const Tensor* p : params) {
    if (!p->has_grad()) continue;
    for (double g : p->grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Tensor* p : params) {
      if (!p->has_grad()) continue;
      for (double& g : p->grad()) g *= s;
    }
  }
  return norm;
}

std::vector<std::size_t> sample_batch(std::span<const std::size_t> labels, std::size_t identities,
                                      std::size_t images_per_id, Rng& rng) {
  std::map<std::size_t, std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < labels.size(); ++i) by_id[labels[i]].push_back(i);
  if (by_id.size() < identities) {
    throw ConfigError("train.batch_size: sampler needs " + std::to_string(identities) + " identities, data has " +
                      std::to_string(by_id.size()));
  }
  std::vector<std::size_t> ids;
  for (const auto& kv : by_id) ids.push_back(kv.first);
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(identities);

  std::vector<std::size_t> batch;
  for (auto id : ids) {
    auto pool = by_id[id];
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t k = 0; k < images_per_id; ++k) {
      if (k < pool.size()) {
        batch.push_back(pool[k]);
      } else {
        batch.push_back(pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)]);
      }
    }
  }
  return batch;
}

TrainResult train(PftModel& model, const TrainConfig& cfg, std::span<const DatasetRecord> data,
                  const std::function<void(const StepLog&)>& on_step) {
  validate(cfg);
  if (data.empty()) throw DataError("training set is empty");
  const auto labels = class_labels(data);
  const std::size_t classes = *std::max_element(labels.begin(), labels.end()) + 1;
  if (classes > model.config().num_identities) {
    throw ConfigError("model.num_identities is " + std::to_string(model.config().num_identities) +
                      " but the training set has " + std::to_string(classes) + " identities");
  }

  AugmentFlags aug = cfg.augment;
  if (aug.erase && aug.fill.empty()) aug.fill = channel_mean(data);

  Rng rng = component_rng(cfg.seed, 0x7a11);
  Sgd optimizer({cfg.momentum, cfg.weight_decay});
  const auto params = model.parameters();
  const LrSchedule schedule = cfg.schedule();
  const std::size_t identities = cfg.batch_size / cfg.images_per_id;

  TrainResult result;
  for (std::size_t step = 0; step < cfg.total_steps; ++step) {
    const auto batch = sample_batch(labels, identities, cfg.images_per_id, rng);
    std::vector<Tensor> images;
    std::vector<std::size_t> batch_labels;
    images.reserve(batch.size());
    for (auto i : batch) {
      images.push_back(aug.any() ? augment(data[i], rng, aug).image : data[i].image);
      batch_labels.push_back(labels[i]);
    }
    std::vector<const Tensor*> ptrs;
    for (const auto& img : images) ptrs.push_back(&img);

    StepLog entry;
    entry.step = step;
    entry.lr = cosine_lr(step, schedule);
    {
      Tape tape;
      Var loss = batch_loss(tape, model, ptrs, batch_labels, cfg.margin, cfg.triplet, &entry.loss_per_head);
      entry.loss = loss.value()[0];
      if (!std::isfinite(entry.loss)) throw DivergenceError(step, "loss is not finite");
      tape.backward(loss);
    }
    entry.grad_norm = clip_gradients(params, cfg.clip_grad_norm);
    optimizer.step(params, entry.lr);
    for (const Tensor* p : params) {
      if (!all_finite(p->data())) throw DivergenceError(step, "parameter update produced non-finite values");
    }
    if (on_step) on_step(entry);
    result.log.push_back(std::move(entry));
  }
  return result;
}

}  // namespace pft
