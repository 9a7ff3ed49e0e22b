#include <gtest/gtest.h>

#include <cstring>

#include "fixtures.hpp"
#include "pft/checkpoint.hpp"
#include "pft/errors.hpp"

namespace {

using pft::Checkpoint;
using pft::Tensor;

std::uint32_t u32_at(const std::string& bytes, std::size_t pos) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + 3])) << 24;
}

TEST(Format, HeaderAndFirstTensorLayout) {
  const Checkpoint c{{"ab", Tensor::from_rows({{1.5, -2.0, 0.0}})}};
  const std::string b = pft::encode_checkpoint(c);
  EXPECT_EQ(b.substr(0, 4), "PFT1");
  EXPECT_EQ(u32_at(b, 4), 1u);
  EXPECT_EQ(u32_at(b, 8), 1u);
  EXPECT_EQ(u32_at(b, 12), 2u);
  EXPECT_EQ(b.substr(16, 2), "ab");
  EXPECT_EQ(u32_at(b, 18), 2u);
  EXPECT_EQ(u32_at(b, 22), 1u);
  EXPECT_EQ(u32_at(b, 26), 3u);
  ASSERT_EQ(b.size(), 30u + 3 * 8);
  double first = 0.0;
  std::uint64_t bits = 0;
  for (int k = 7; k >= 0; --k) bits = bits << 8 | static_cast<unsigned char>(b[30 + k]);
  std::memcpy(&first, &bits, 8);
  EXPECT_EQ(first, 1.5);
}

TEST(Format, RoundTripIsBitwiseForSpecialValues) {
  Tensor t({2, 3}, std::vector<double>{-0.0, 1e-310, std::numeric_limits<double>::infinity(), std::nan("7"),
                                       std::numeric_limits<double>::max(), 0.1});
  const Checkpoint c{{"x", t}, {"y.z", Tensor({4}, 2.0)}};
  const Checkpoint back = pft::decode_checkpoint(pft::encode_checkpoint(c));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].name, "x");
  EXPECT_TRUE(back[0].tensor.bitwise_equal(t));
  EXPECT_EQ(back[1].tensor.shape(), (pft::Shape{4}));
  EXPECT_EQ(pft::encode_checkpoint(back), pft::encode_checkpoint(c));
}

TEST(Format, CorruptInputsAreRejected) {
  const std::string good = pft::encode_checkpoint({{"w", Tensor({2}, 1.0)}});
  EXPECT_THROW(pft::decode_checkpoint("PFT2" + good.substr(4)), pft::DataError);
  EXPECT_THROW(pft::decode_checkpoint(good.substr(0, good.size() - 1)), pft::DataError);
  EXPECT_THROW(pft::decode_checkpoint(good + "x"), pft::DataError);
  std::string bad_version = good;
  bad_version[4] = 9;
  EXPECT_THROW(pft::decode_checkpoint(bad_version), pft::DataError);
  EXPECT_THROW(pft::encode_checkpoint({{"w", Tensor({1})}, {"w", Tensor({1})}}), pft::DataError);
}

TEST(Model, SnapshotRestoreRoundTripsThroughAFile) {
  pft::PftModel a(fixtures::tiny_model(), 1), b(fixtures::tiny_model(), 2);
  const auto dir = fixtures::temp_dir("ckpt");
  pft::save_checkpoint(dir / "m.pft", pft::snapshot(a));
  pft::restore(b, pft::load_checkpoint(dir / "m.pft"));
  EXPECT_EQ(pft::encode_checkpoint(pft::snapshot(a)), pft::encode_checkpoint(pft::snapshot(b)));
  const Tensor img = pft::generate_identity(0, 0, 1, 1, fixtures::tiny_size()).image;
  EXPECT_TRUE(a.embed(img).bitwise_equal(b.embed(img)));
}

TEST(Model, NamesAreUniqueAndOrdered) {
  pft::PftModel m(fixtures::tiny_model(), 1);
  const Checkpoint c = pft::snapshot(m);
  std::set<std::string> names;
  for (const auto& nt : c) EXPECT_TRUE(names.insert(nt.name).second) << nt.name;
  EXPECT_EQ(c.size(), m.parameters().size());
}

TEST(Model, ShapeMismatchNamesBothShapes) {
  pft::ModelConfig small = fixtures::tiny_model();
  pft::ModelConfig wide = small;
  wide.patch.dim = 24;
  pft::PftModel a(small, 1), b(wide, 1);
  try {
    pft::restore(b, pft::snapshot(a));
    FAIL() << "expected DataError";
  } catch (const pft::DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("16"), std::string::npos) << msg;
    EXPECT_NE(msg.find("24"), std::string::npos) << msg;
  }
  pft::ModelConfig no_ssm = small;
  no_ssm.modules.ssm = false;
  pft::PftModel c(no_ssm, 1);
  EXPECT_THROW(pft::restore(c, pft::snapshot(a)), pft::DataError);
  EXPECT_THROW(pft::restore(a, pft::snapshot(c)), pft::DataError);
}

TEST(Model, MissingFileIsADataError) {
  EXPECT_THROW(pft::load_checkpoint(fixtures::temp_dir("ckpt_missing") / "none.pft"), pft::DataError);
}

}  // namespace
