#include "pft/optim.hpp"

#include <cmath>
#include <numbers>

#include "pft/errors.hpp"

namespace pft {

double cosine_lr(std::size_t step, const LrSchedule& s) {
  if (s.total_steps == 0 || s.warmup_steps > s.total_steps) {
    throw ConfigError("lr schedule: need total_steps > 0 and warmup_steps <= total_steps");
  }
  if (step > s.total_steps) throw ConfigError("lr schedule: step past total_steps");
  if (step < s.warmup_steps) {
    return s.base_lr * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
  }
  const std::size_t span = s.total_steps - s.warmup_steps;
  if (span == 0) return 0.0;
  const double t = static_cast<double>(step - s.warmup_steps) / static_cast<double>(span);
  return s.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

void sgd_step(Tensor& param, std::vector<double>& velocity, double lr, const SgdConfig& cfg) {
  if (velocity.size() != param.size()) velocity.assign(param.size(), 0.0);
  auto w = param.data();
  const bool has_grad = param.has_grad();
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double g = has_grad ? param.grad()[i] : 0.0;
    velocity[i] = cfg.momentum * velocity[i] + g + cfg.weight_decay * w[i];
    w[i] -= lr * velocity[i];
  }
}

void Sgd::step(std::span<Tensor* const> params, double lr) {
  if (velocity_.size() != params.size()) velocity_.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    sgd_step(*params[i], velocity_[i], lr, cfg_);
    params[i]->clear_grad();
  }
}

}  // namespace pft
