#include "pft/ssm.hpp"

#include "pft/errors.hpp"

namespace pft {

std::string to_string(SsmSlicing slicing) {
  return slicing == SsmSlicing::index ? "index" : "column";
}

SsmSlicing ssm_slicing_from_string(const std::string& name) {
  if (name == "index") return SsmSlicing::index;
  if (name == "column") return SsmSlicing::column;
  throw ConfigError("unknown SSM slicing '" + name + "' (expected index or column)");
}

std::vector<std::size_t> SsmSlices::branch_rows(std::size_t branch) const {
  if (branch > 2) throw ShapeError("SSM branch must be 0, 1 or 2");
  std::vector<std::size_t> rows;
  for (std::size_t g = branch; g < 12; g += 3) rows.insert(rows.end(), slices[g].begin(), slices[g].end());
  return rows;
}

SsmSlices ssm_slice(std::size_t n) {
  if (n == 0 || n % 12 != 0) {
    throw ShapeError("SSM: sequence length " + std::to_string(n) + " is not a positive multiple of 12");
  }
  SsmSlices s;
  s.length = n;
  const std::size_t len = n / 12;
  for (std::size_t g = 0; g < 12; ++g) {
    for (std::size_t r = g * len; r < (g + 1) * len; ++r) s.slices[g].push_back(r);
  }
  s.quarters = FrmGrouping::make(n).groups;
  return s;
}

SsmSlices ssm_slice_columns(const Grid& grid) {
  if (grid.rows % 4 != 0 || grid.cols % 3 != 0) {
    throw ShapeError("SSM column slicing needs grid rows divisible by 4 and columns by 3, got " +
                     std::to_string(grid.rows) + "x" + std::to_string(grid.cols));
  }
  SsmSlices s;
  s.length = grid.count;
  const std::size_t band = grid.rows / 4, third = grid.cols / 3;
  for (std::size_t q = 0; q < 4; ++q) {
    for (std::size_t t = 0; t < 3; ++t) {
      auto& rows = s.slices[q * 3 + t];
      for (std::size_t y = q * band; y < (q + 1) * band; ++y) {
        for (std::size_t x = t * third; x < (t + 1) * third; ++x) rows.push_back(y * grid.cols + x);
      }
    }
  }
  s.quarters = FrmGrouping::make(grid.count).groups;
  return s;
}

SsmSlices make_ssm_slices(SsmSlicing slicing, const Grid& grid) {
  return slicing == SsmSlicing::index ? ssm_slice(grid.count) : ssm_slice_columns(grid);
}

namespace {

void check_length(const char* op, ad::Var tokens, const SsmSlices& slices) {
  if (tokens.value().rank() != 2 || tokens.value().rows() != slices.length) {
    throw ShapeError(std::string(op) + ": sequence " + shape_str(tokens.value().shape()) + " does not match " +
                     std::to_string(slices.length) + " sliced rows");
  }
}

}  // namespace

SsmBranches ssm_group(ad::Var tokens, const SsmSlices& slices) {
  check_length("ssm_group", tokens, slices);
  const auto left = slices.branch_rows(0);
  const auto middle = slices.branch_rows(1);
  const auto right = slices.branch_rows(2);
  return SsmBranches{ad::gather_rows(tokens, left), ad::gather_rows(tokens, middle), ad::gather_rows(tokens, right)};
}

PatchSequence ssm_fuse(ad::Var tokens, const SsmSlices& slices, ad::Var class_token) {
  check_length("ssm_fuse", tokens, slices);
  ad::Var total;
  for (const auto& q : slices.quarters) {
    ad::Var part = ad::slice(tokens, 0, q.begin, q.end);
    total = total.valid() ? ad::add(total, part) : part;
  }
  return PatchSequence{total, class_token};
}

SsmOutput ssm_apply(ad::Tape& tape, const PatchSequence& z, EncoderBlock& block, const SsmSlices& slices) {
  if (!z.class_token) throw ShapeError("ssm_apply: class token required");
  const SsmBranches b = ssm_group(z.tokens, slices);
  const PatchSequence glf = ssm_fuse(z.tokens, slices, *z.class_token);
  SsmOutput out;
  out.inputs = {PatchSequence{b.left, z.class_token}.joined(), PatchSequence{b.middle, z.class_token}.joined(),
                PatchSequence{b.right, z.class_token}.joined(), glf.joined()};
  for (std::size_t i = 0; i < 4; ++i) {
    out.outputs[i] = apply_block(tape, block, out.inputs[i]).out;
    out.class_features[i] = ad::slice(out.outputs[i], 0, 0, 1);
  }
  return out;
}

}  // namespace pft
