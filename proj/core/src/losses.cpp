#include "pft/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "pft/errors.hpp"

namespace pft {

using ad::Tape;
using ad::Var;

Var id_loss(Var logits, std::span<const std::size_t> labels) {
  const Tensor& z = logits.value();
  if (z.rank() != 2 || z.rows() != labels.size()) {
    throw ShapeError("id_loss: logits " + shape_str(z.shape()) + " vs " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t B = z.rows(), K = z.cols();
  for (std::size_t b = 0; b < B; ++b) {
    if (labels[b] >= K) {
      throw DataError("id_loss: label " + std::to_string(labels[b]) + " outside [0, " + std::to_string(K) + ")");
    }
  }
  Tensor prob({B, K});
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    double mx = z.at(b, 0);
    for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, z.at(b, k));
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      prob.at(b, k) = std::exp(z.at(b, k) - mx);
      total += prob.at(b, k);
    }
    for (std::size_t k = 0; k < K; ++k) prob.at(b, k) /= total;
    loss += mx + std::log(total) - z.at(b, labels[b]);
  }
  loss /= static_cast<double>(B);
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return logits.tape().push(Tensor({1}, loss), {logits},
                            [logits, prob = std::move(prob), lab = std::move(lab), B, K](
                                Tape& t, const Tensor&, std::span<const double> g) {
                              auto gz = t.grad(logits);
                              const double s = g[0] / static_cast<double>(B);
                              for (std::size_t b = 0; b < B; ++b) {
                                for (std::size_t k = 0; k < K; ++k) {
                                  gz[b * K + k] += s * (prob.at(b, k) - (k == lab[b] ? 1.0 : 0.0));
                                }
                              }
                            });
}

Var triplet_loss(Var features, std::span<const std::size_t> labels, double margin) {
  const Tensor& f = features.value();
  if (f.rank() != 2 || f.rows() != labels.size()) {
    throw ShapeError("triplet_loss: features " + shape_str(f.shape()) + " vs " + std::to_string(labels.size()) +
                     " labels");
  }
  const std::size_t B = f.rows(), d = f.cols();
  std::map<std::size_t, std::size_t> counts;
  for (auto l : labels) ++counts[l];
  const bool has_pair = std::any_of(counts.begin(), counts.end(), [](const auto& kv) { return kv.second >= 2; });
  if (counts.size() < 2 || !has_pair) {
    throw DataError("triplet_loss: batch needs >= 2 identities and an identity with >= 2 samples");
  }

  constexpr double kFloor = 1e-12;
  Tensor dist({B, B});
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t j = i + 1; j < B; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = f.at(i, k) - f.at(j, k);
        s += diff * diff;
      }
      dist.at(i, j) = dist.at(j, i) = std::sqrt(std::max(s, kFloor));
    }
    dist.at(i, i) = std::sqrt(kFloor);
  }

  struct Active {
    std::size_t anchor, pos, neg;
  };
  std::vector<Active> active;
  double loss = 0.0;
  for (std::size_t a = 0; a < B; ++a) {
    std::size_t pos = a, neg = B;
    for (std::size_t j = 0; j < B; ++j) {
      if (labels[j] == labels[a]) {
        if (dist.at(a, j) > dist.at(a, pos)) pos = j;
      } else if (neg == B || dist.at(a, j) < dist.at(a, neg)) {
        neg = j;
      }
    }
    if (neg == B) continue;  // anchor's identity fills the batch; cannot happen with >= 2 ids
    const double h = dist.at(a, pos) - dist.at(a, neg) + margin;
    if (h > 0.0) {
      loss += h;
      active.push_back({a, pos, neg});
    }
  }
  loss /= static_cast<double>(B);

  return features.tape().push(
      Tensor({1}, loss), {features},
      [features, active = std::move(active), dist = std::move(dist), B, d](Tape& t, const Tensor&,
                                                                          std::span<const double> g) {
        const Tensor& f = features.value();
        auto gf = t.grad(features);
        const double s = g[0] / static_cast<double>(B);
        // d(dist_ij)/d f_i = (f_i - f_j) / dist_ij outside the floor.
        auto route = [&](std::size_t i, std::size_t j, double w) {
          if (i == j) return;
          double sq = 0.0;
          for (std::size_t k = 0; k < d; ++k) {
            const double diff = f.at(i, k) - f.at(j, k);
            sq += diff * diff;
          }
          if (sq <= kFloor) return;
          const double c = w / dist.at(i, j);
          for (std::size_t k = 0; k < d; ++k) {
            const double diff = f.at(i, k) - f.at(j, k);
            gf[i * d + k] += c * diff;
            gf[j * d + k] -= c * diff;
          }
        };
        for (const auto& a : active) {
          route(a.anchor, a.pos, s);
          route(a.anchor, a.neg, -s);
        }
      });
}

}  // namespace pft
