#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "op_cases.hpp"
#include "pft/errors.hpp"
#include "pft/grad_check.hpp"
#include "pft/model.hpp"
#include "pft/pfde.hpp"
#include "pft/trainer.hpp"

namespace {

using pft::LpdeTensor;
using pft::Tensor;
using pft::ad::Tape;
using pft::ad::Var;
namespace ad = pft::ad;

pft::PatchConfig desk_patch() { return pft::PatchConfig{}; }

TEST(InitLpde, BetaOneIsAllOnes) {
  const LpdeTensor l = pft::init_lpde(desk_patch(), 1.0);
  EXPECT_EQ(l.values, Tensor({72, 64}, 1.0));
  EXPECT_EQ(l.beta, 1.0);
}

TEST(InitLpde, EveryEntryEqualsBeta) {
  const LpdeTensor l = pft::init_lpde(desk_patch(), 1.05);
  EXPECT_EQ(l.values, Tensor({72, 64}, 1.05));
}

TEST(InitLpde, NonPositiveBetaIsRejected) {
  EXPECT_THROW(pft::init_lpde(desk_patch(), 0.0), pft::ConfigError);
  EXPECT_THROW(pft::init_lpde(desk_patch(), -1.0), pft::ConfigError);
  EXPECT_THROW(pft::init_lpde(desk_patch(), std::nan("")), pft::ConfigError);
}

TEST(InitLpde, RandomVariantsAreSeededAndShapeMatched) {
  for (auto init : {pft::LpdeInit::gaussian, pft::LpdeInit::uniform, pft::LpdeInit::laplace,
                    pft::LpdeInit::exponential}) {
    pft::Rng a(5), b(5);
    const LpdeTensor x = pft::init_lpde(desk_patch(), 1.0, init, a);
    const LpdeTensor y = pft::init_lpde(desk_patch(), 1.0, init, b);
    EXPECT_EQ(x.values.shape(), (pft::Shape{72, 64}));
    EXPECT_TRUE(x.values.bitwise_equal(y.values));
    EXPECT_EQ(pft::lpde_init_from_string(pft::to_string(init)), init);
  }
  EXPECT_THROW(pft::lpde_init_from_string("cauchy"), pft::ConfigError);
}

TEST(ApplyPfde, OnesAreBitwiseIdentity) {
  std::mt19937_64 rng(61);
  const Tensor f = opcases::random_tensor({72, 64}, rng);
  LpdeTensor l = pft::init_lpde(desk_patch(), 1.0);
  Tape t;
  const auto out = pft::apply_pfde(t, pft::PatchSequence{t.constant(f), {}}, l);
  EXPECT_TRUE(out.tokens.value().bitwise_equal(f));
}

TEST(ApplyPfde, HadamardArithmetic) {
  LpdeTensor l{Tensor::from_rows({{0.5, 2}}), 1.0};
  Tape t;
  const auto out = pft::apply_pfde(t, pft::PatchSequence{t.constant(Tensor::from_rows({{2, 3}})), {}}, l);
  EXPECT_EQ(out.tokens.value(), Tensor::from_rows({{1, 6}}));
}

TEST(ApplyPfde, GradientWithRespectToLpdeIsTheInput) {
  std::mt19937_64 rng(67);
  const Tensor f = opcases::random_tensor({12, 5}, rng);
  LpdeTensor l{opcases::random_tensor({12, 5}, rng), 1.0};
  auto loss = [&](Tape& t) { return ad::sum(pft::apply_pfde(t, pft::PatchSequence{t.constant(f), {}}, l).tokens); };
  Tensor* params[] = {&l.values};
  EXPECT_LT(ad::grad_check_params(loss, params).max_rel_error, 1e-6);

  l.values.clear_grad();
  {
    Tape t;
    t.backward(loss(t));
  }
  ASSERT_TRUE(l.values.has_grad());
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(l.values.grad()[i], f[i]);
}

TEST(ApplyPfde, ScalingTheInputScalesTheOutput) {
  std::mt19937_64 rng(71);
  const Tensor f = opcases::random_tensor({12, 5}, rng);
  LpdeTensor l{opcases::random_tensor({12, 5}, rng), 1.0};
  Tape t;
  const Tensor base = pft::apply_pfde(t, pft::PatchSequence{t.constant(f), {}}, l).tokens.value();
  for (double alpha : {-2.0, 0.5, 3.0}) {
    Var scaled = ad::scale(t.constant(f), alpha);
    const Tensor out = pft::apply_pfde(t, pft::PatchSequence{scaled, {}}, l).tokens.value();
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(out[i], alpha * base[i], 1e-14);
  }
}

TEST(ApplyPfde, ClassTokenAndShapeMismatchAreRejected) {
  LpdeTensor l = pft::init_lpde(desk_patch(), 1.0);
  Tape t;
  EXPECT_THROW(pft::apply_pfde(t, pft::PatchSequence{t.constant(Tensor({72, 64})), t.constant(Tensor({1, 64}))}, l),
               pft::ShapeError);
  EXPECT_THROW(pft::apply_pfde(t, pft::PatchSequence{t.constant(Tensor({12, 64})), {}}, l), pft::ShapeError);
}

TEST(PfdeInModel, UnitBetaLeavesTheUntrainedNetworkBitwiseUnchanged) {
  pft::ModelConfig on = fixtures::tiny_model();
  pft::ModelConfig off = on;
  off.modules.pfde = false;
  pft::PftModel a(on, 9), b(off, 9);
  const Tensor image = pft::generate_identity(0, 1, 2, 0, fixtures::tiny_size()).image;
  EXPECT_TRUE(a.embed(image).bitwise_equal(b.embed(image)));
  EXPECT_EQ(a.parameter_count(), b.parameter_count() + 12 * 16);
}

TEST(PfdeInModel, LpdeReceivesNonzeroGradientFromTheTrainingLoss) {
  pft::PftModel model(fixtures::tiny_model(), 3);
  std::vector<Tensor> images;
  std::vector<std::size_t> labels;
  for (std::size_t id = 0; id < 2; ++id)
    for (std::size_t v = 0; v < 2; ++v) {
      images.push_back(pft::generate_identity(0, id, v, v, fixtures::tiny_size()).image);
      labels.push_back(id);
    }
  std::vector<const Tensor*> batch;
  for (const auto& im : images) batch.push_back(&im);
  {
    Tape t;
    t.backward(pft::batch_loss(t, model, batch, labels, 0.3, true));
  }
  const Tensor& l = model.lpde()->values;
  ASSERT_TRUE(l.has_grad());
  std::size_t nonzero = 0;
  for (double g : l.grad()) nonzero += g != 0.0;
  EXPECT_GT(nonzero, l.size() / 2);
}

}  // namespace
