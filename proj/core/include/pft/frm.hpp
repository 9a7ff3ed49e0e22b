#pragma once

#include <array>
#include <cstddef>

#include "pft/vit.hpp"

namespace pft {

struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  friend bool operator==(const RowRange&, const RowRange&) = default;
};

// Four equal contiguous groups F1..F4 over an N-row sequence (0-based rows).
struct FrmGrouping {
  std::size_t group_len = 0;
  std::array<RowRange, 4> groups;

  // Throws ShapeError unless n is a positive multiple of 4.
  static FrmGrouping make(std::size_t n);
};

// [Class, F1+F2, F2, F3, F3+F4]. Length is preserved and the class token,
// when present, passes through untouched.
PatchSequence frm_apply(const PatchSequence& z_in);

// Pairwise cosine similarity of the rows of an N x D matrix. Norms are
// floored at 1e-12; the result is symmetric with unit diagonal.
Tensor patch_cosine_similarity(const Tensor& tokens);

}  // namespace pft
