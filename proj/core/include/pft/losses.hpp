#pragma once

#include <cstddef>
#include <span>

#include "pft/autodiff.hpp"

namespace pft {

// Mean cross-entropy of logits[B x K] against integer labels in [0, K).
ad::Var id_loss(ad::Var logits, std::span<const std::size_t> labels);

// Batch-hard triplet loss on features[B x d]:
//   mean_a max(0, max_{p ~ a} d(a,p) - min_{n !~ a} d(a,n) + margin)
// with Euclidean d floored at sqrt(1e-12). The batch must hold at least two
// identities and at least one identity with two samples.
ad::Var triplet_loss(ad::Var features, std::span<const std::size_t> labels, double margin = 0.3);

}  // namespace pft
