#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "pft/frm.hpp"
#include "pft/vit.hpp"

namespace pft {

// `index` slices the flat sequence into twelve contiguous runs. `column`
// instead cuts each row-band quarter into three column thirds of the patch
// grid, so left/middle/right are true image columns.
enum class SsmSlicing { index, column };

std::string to_string(SsmSlicing slicing);
SsmSlicing ssm_slicing_from_string(const std::string& name);

// Twelve slices (0-based row lists, slice g at index g-1) and the four
// quarter groups they refine. Slice g lies inside quarter (g-1)/3.
struct SsmSlices {
  std::size_t length = 0;
  std::array<std::vector<std::size_t>, 12> slices;
  std::array<RowRange, 4> quarters;

  // Rows of left (slices 1,4,7,10), middle (2,5,8,11) or right (3,6,9,12),
  // in slice-number order. branch is 0, 1 or 2.
  std::vector<std::size_t> branch_rows(std::size_t branch) const;
};

// Contiguous slicing: slice g covers rows [(g-1)N/12, gN/12).
SsmSlices ssm_slice(std::size_t n);
// Column slicing over a grid whose rows divide by 4 and columns by 3.
SsmSlices ssm_slice_columns(const Grid& grid);
SsmSlices make_ssm_slices(SsmSlicing slicing, const Grid& grid);

struct SsmBranches {
  ad::Var left, middle, right;  // each N/3 x D, no class token
};

SsmBranches ssm_group(ad::Var tokens, const SsmSlices& slices);

// GLF = [class; Q1 + Q2 + Q3 + Q4], length N/4 + 1.
PatchSequence ssm_fuse(ad::Var tokens, const SsmSlices& slices, ad::Var class_token);

struct SsmOutput {
  // left, middle, right, GLF: inputs to the shared block (class-prefixed)...
  std::array<ad::Var, 4> inputs;
  // ...their encoded sequences...
  std::array<ad::Var, 4> outputs;
  // ...and the class-token row of each output (1 x D).
  std::array<ad::Var, 4> class_features;
};

// Splits the class token off `z`, builds the four branch sequences and runs
// each through the same (parameter-tied) final block.
SsmOutput ssm_apply(ad::Tape& tape, const PatchSequence& z, EncoderBlock& block, const SsmSlices& slices);

}  // namespace pft
