#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "op_cases.hpp"
#include "oracles.hpp"
#include "pft/errors.hpp"
#include "pft/frm.hpp"
#include "pft/grad_check.hpp"
#include "pft/model.hpp"

namespace {

using pft::PatchSequence;
using pft::Tensor;
using pft::ad::Tape;
using pft::ad::Var;
namespace ad = pft::ad;

Tensor column(std::initializer_list<double> v) { return Tensor({v.size(), 1}, std::vector<double>(v)); }

Tensor frm_joined(const Tensor& cls, const Tensor& tokens) {
  Tape t;
  return pft::frm_apply(PatchSequence{t.constant(tokens), t.constant(cls)}).joined().value();
}

TEST(Grouping, FourEqualContiguousRanges) {
  const auto g = pft::FrmGrouping::make(12);
  EXPECT_EQ(g.group_len, 3u);
  EXPECT_EQ(g.groups[0], (pft::RowRange{0, 3}));
  EXPECT_EQ(g.groups[3], (pft::RowRange{9, 12}));
  EXPECT_THROW(pft::FrmGrouping::make(10), pft::ShapeError);
  EXPECT_THROW(pft::FrmGrouping::make(0), pft::ShapeError);
}

TEST(FrmApply, EightTokenExample) {
  EXPECT_EQ(frm_joined(column({0}), column({1, 2, 3, 4, 5, 6, 7, 8})), column({0, 4, 6, 3, 4, 5, 6, 12, 14}));
}

TEST(FrmApply, SingleTokenGroups) {
  EXPECT_EQ(frm_joined(column({9}), column({1, 2, 3, 4})), column({9, 3, 2, 3, 7}));
}

TEST(FrmApply, MatchesIndexOracleExactly) {
  std::mt19937_64 rng(73);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor z = opcases::random_tensor({12, 5}, rng);
    const Tensor cls = opcases::random_tensor({1, 5}, rng);
    Tape t;
    const auto out = pft::frm_apply(PatchSequence{t.constant(z), t.constant(cls)});
    EXPECT_TRUE(out.tokens.value().bitwise_equal(oracle::frm(z)));
    EXPECT_TRUE(out.class_token->value().bitwise_equal(cls));
  }
}

TEST(FrmApply, PreservesLengthAndMiddleRows) {
  std::mt19937_64 rng(79);
  for (std::size_t n : {4u, 8u, 12u, 72u}) {
    const Tensor z = opcases::random_tensor({n, 3}, rng);
    Tape t;
    const Tensor out = pft::frm_apply(PatchSequence{t.constant(z), t.constant(Tensor({1, 3}))}).joined().value();
    ASSERT_EQ(out.rows(), n + 1);
    for (std::size_t k = n / 4; k < 3 * n / 4; ++k)
      for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(out.at(k + 1, j), z.at(k, j));
  }
}

TEST(FrmApply, IsLinearOnPatchRows) {
  std::mt19937_64 rng(83);
  const Tensor z = opcases::random_tensor({12, 4}, rng);
  Tape t;
  const Tensor base = pft::frm_apply(PatchSequence{t.constant(z), {}}).tokens.value();
  for (double alpha : {-1.5, 0.25, 4.0}) {
    const Tensor out = pft::frm_apply(PatchSequence{ad::scale(t.constant(z), alpha), {}}).tokens.value();
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], alpha * base[i], 1e-14);
  }
}

TEST(FrmApply, NeighbourQuartersReceiveDoubleGradient) {
  std::mt19937_64 rng(89);
  const Tensor z = opcases::random_tensor({8, 2}, rng);
  Tape t;
  Var x = t.input(z);
  t.backward(ad::sum(pft::frm_apply(PatchSequence{x, {}}).tokens));
  const Tensor g = t.grad_tensor(x);
  const double expect[] = {1, 1, 2, 2, 2, 2, 1, 1};
  for (std::size_t k = 0; k < 8; ++k)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(g.at(k, j), expect[k]);

  const Tensor w = opcases::random_tensor({8, 2}, rng);
  auto fn = [&](Tape&, Var in) { return opcases::contract(pft::frm_apply(PatchSequence{in, {}}).tokens, w); };
  EXPECT_LT(ad::grad_check(fn, z), 1e-6);
}

TEST(FrmInModel, IndivisibleGridIsRejectedAtConstruction) {
  pft::ModelConfig m = fixtures::tiny_model();
  m.patch.height = 24;  // 3 x 3 grid, 9 tokens
  EXPECT_THROW(pft::PftModel(m, 0), pft::ConfigError);
}

TEST(CosineSimilarity, IdenticalRowsGiveAllOnes) {
  const Tensor s = pft::patch_cosine_similarity(Tensor::from_rows({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}));
  for (double v : s.data()) EXPECT_NEAR(v, 1.0, 1e-15);
}

TEST(CosineSimilarity, OrthogonalRowsGiveIdentity) {
  const Tensor s = pft::patch_cosine_similarity(Tensor::from_rows({{2, 0, 0}, {0, 3, 0}, {0, 0, 0.5}}));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(s.at(i, j), i == j ? 1.0 : 0.0);
}

TEST(CosineSimilarity, MatchesPairwiseOracle) {
  std::mt19937_64 rng(97);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = opcases::random_tensor({4, 3}, rng);
    const Tensor s = pft::patch_cosine_similarity(x);
    const Tensor expect = oracle::cosine_similarity(x);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_NEAR(s.at(i, j), expect.at(i, j), 1e-12);
        EXPECT_EQ(s.at(i, j), s.at(j, i));
        EXPECT_LE(std::abs(s.at(i, j)), 1.0);
      }
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(s.at(i, i), 1.0);
  }
}

TEST(CosineSimilarity, ZeroRowsStayFinite) {
  const Tensor s = pft::patch_cosine_similarity(Tensor::from_rows({{0, 0}, {1, 1}}));
  EXPECT_TRUE(pft::all_finite(s.data()));
  EXPECT_EQ(s.at(0, 1), 0.0);
  EXPECT_EQ(s.at(0, 0), 1.0);
}

}  // namespace
