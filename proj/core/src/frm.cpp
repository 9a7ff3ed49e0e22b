#include "pft/frm.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "pft/errors.hpp"

namespace pft {

FrmGrouping FrmGrouping::make(std::size_t n) {
  if (n == 0 || n % 4 != 0) {
    throw ShapeError("FRM: sequence length " + std::to_string(n) + " is not a positive multiple of 4");
  }
  FrmGrouping g;
  g.group_len = n / 4;
  for (std::size_t i = 0; i < 4; ++i) g.groups[i] = RowRange{i * g.group_len, (i + 1) * g.group_len};
  return g;
}

PatchSequence frm_apply(const PatchSequence& z_in) {
  const FrmGrouping grouping = FrmGrouping::make(z_in.length());
  std::array<ad::Var, 4> f;
  for (std::size_t i = 0; i < 4; ++i) {
    f[i] = ad::slice(z_in.tokens, 0, grouping.groups[i].begin, grouping.groups[i].end);
  }
  ad::Var head = ad::add(f[0], f[1]);
  ad::Var tail = ad::add(f[2], f[3]);
  return PatchSequence{ad::concat({head, f[1], f[2], tail}, 0), z_in.class_token};
}

Tensor patch_cosine_similarity(const Tensor& tokens) {
  const std::size_t n = tokens.rows(), d = tokens.cols();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += tokens.at(i, k) * tokens.at(i, k);
    norms[i] = std::max(std::sqrt(s), 1e-12);
  }
  Tensor sim({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    sim.at(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += tokens.at(i, k) * tokens.at(j, k);
      const double c = std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
      sim.at(i, j) = c;
      sim.at(j, i) = c;
    }
  }
  return sim;
}

}  // namespace pft
