#include "pft/pfde.hpp"

#include <cmath>

#include "pft/errors.hpp"

namespace pft {

std::string to_string(LpdeInit init) {
  switch (init) {
    case LpdeInit::constant: return "constant";
    case LpdeInit::gaussian: return "gaussian";
    case LpdeInit::uniform: return "uniform";
    case LpdeInit::laplace: return "laplace";
    case LpdeInit::exponential: return "exponential";
  }
  return "constant";
}

LpdeInit lpde_init_from_string(const std::string& name) {
  for (auto init : {LpdeInit::constant, LpdeInit::gaussian, LpdeInit::uniform, LpdeInit::laplace,
                    LpdeInit::exponential}) {
    if (to_string(init) == name) return init;
  }
  throw ConfigError("unknown LPDE initialization '" + name + "'");
}

LpdeTensor init_lpde(const PatchConfig& cfg, double beta) {
  if (!std::isfinite(beta) || beta <= 0.0) {
    throw ConfigError("pfde.beta must be finite and positive, got " + std::to_string(beta));
  }
  const Grid g = grid_extents(cfg);
  LpdeTensor lpde{Tensor({g.count, cfg.dim}, beta), beta};
  lpde.values.set_requires_grad(true);
  return lpde;
}

LpdeTensor init_lpde(const PatchConfig& cfg, double beta, LpdeInit init, Rng& rng) {
  LpdeTensor lpde = init_lpde(cfg, beta);
  auto& data = lpde.values.storage();
  switch (init) {
    case LpdeInit::constant:
      break;
    case LpdeInit::gaussian: {
      std::normal_distribution<double> d(0.0, 1.0);
      for (auto& v : data) v = d(rng);
      break;
    }
    case LpdeInit::uniform: {
      std::uniform_real_distribution<double> d(0.0, 1.0);
      for (auto& v : data) v = d(rng);
      break;
    }
    case LpdeInit::laplace: {
      // Difference of two Exp(1) draws is Laplace(0, 1).
      std::exponential_distribution<double> d(1.0);
      for (auto& v : data) v = d(rng) - d(rng);
      break;
    }
    case LpdeInit::exponential: {
      std::exponential_distribution<double> d(1.0);
      for (auto& v : data) v = d(rng);
      break;
    }
  }
  return lpde;
}

PatchSequence apply_pfde(ad::Tape& tape, const PatchSequence& f_in, LpdeTensor& lpde) {
  if (f_in.class_token) throw ShapeError("apply_pfde: input must not carry a class token");
  const Shape& s = f_in.tokens.value().shape();
  if (s != lpde.values.shape()) {
    throw ShapeError("apply_pfde: sequence " + shape_str(s) + " vs LPDE " + shape_str(lpde.values.shape()));
  }
  return PatchSequence{ad::mul(f_in.tokens, tape.param(lpde.values)), std::nullopt};
}

}  // namespace pft
