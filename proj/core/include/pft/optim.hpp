#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pft/tensor.hpp"

namespace pft {

struct LrSchedule {
  double base_lr = 0.008;
  std::size_t total_steps = 300;
  std::size_t warmup_steps = 30;
};

// Linear warmup from 0 to base_lr over warmup_steps, then
//   base_lr * (1 + cos(pi * t)) / 2,  t = (step - warmup) / (total - warmup),
// reaching 0 at step == total_steps.
double cosine_lr(std::size_t step, const LrSchedule& schedule);

struct SgdConfig {
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

// v <- momentum * v + g + weight_decay * w ;  w <- w - lr * v
// A missing gradient counts as zero.
void sgd_step(Tensor& param, std::vector<double>& velocity, double lr, const SgdConfig& cfg);

class Sgd {
 public:
  explicit Sgd(SgdConfig cfg) : cfg_(cfg) {}

  // Updates every parameter in order and clears its gradient.
  void step(std::span<Tensor* const> params, double lr);
  const std::vector<std::vector<double>>& velocity() const noexcept { return velocity_; }

 private:
  SgdConfig cfg_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace pft
