#pragma once

#include <string>

#include "pft/vit.hpp"

namespace pft {

// Initialization of the enhancement tensor. Only `constant` (every entry
// equal to beta) is used by default; the random variants exist to replicate
// the comparison against distribution-based initializations.
enum class LpdeInit { constant, gaussian, uniform, laplace, exponential };

std::string to_string(LpdeInit init);
LpdeInit lpde_init_from_string(const std::string& name);

// Learnable N x D tensor multiplied elementwise into the patch sequence.
struct LpdeTensor {
  Tensor values;
  double beta = 1.0;
};

// Constant initialization; rejects beta <= 0 or non-finite.
LpdeTensor init_lpde(const PatchConfig& cfg, double beta);
// Any initialization. `rng` is only drawn from for the random variants
// (standard normal, U(0,1), Laplace(0,1), Exp(1)).
LpdeTensor init_lpde(const PatchConfig& cfg, double beta, LpdeInit init, Rng& rng);

// f_out = f_in (.) LPDE, row by row. The input must not carry a class token.
PatchSequence apply_pfde(ad::Tape& tape, const PatchSequence& f_in, LpdeTensor& lpde);

}  // namespace pft
