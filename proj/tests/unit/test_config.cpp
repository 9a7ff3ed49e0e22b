#include <gtest/gtest.h>

#include <fstream>

#include "fixtures.hpp"
#include "pft/config.hpp"
#include "pft/errors.hpp"

namespace {

std::string config_error(const std::string& text) {
  try {
    pft::parse_config(text);
  } catch (const pft::ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, EmptyObjectGivesDeskDefaults) {
  const pft::RunConfig c = pft::parse_config("{}");
  EXPECT_EQ(c.model.patch.height, 96u);
  EXPECT_EQ(c.model.patch.width, 48u);
  EXPECT_EQ(c.model.patch.dim, 64u);
  EXPECT_EQ(c.model.depth, 4u);
  EXPECT_EQ(c.train.batch_size, 48u);
  EXPECT_EQ(c.train.base_lr, 0.008);
  EXPECT_EQ(c.train.momentum, 0.9);
  EXPECT_EQ(c.model.modules, (pft::ModuleSwitches{true, true, true}));
}

TEST(Config, ShippedDeskConfigLoads) {
  const pft::RunConfig c = pft::load_config(PFT_SOURCE_DIR "/configs/desk.json");
  EXPECT_EQ(c.train.total_steps, 300u);
  EXPECT_EQ(c.data.synthetic.ids, 8u);
  EXPECT_EQ(c.data.synthetic.variants, 16u);
  EXPECT_EQ(c.train.augment.padding, 10u);
}

TEST(Config, CanonicalJsonRoundTrips) {
  pft::RunConfig c = pft::parse_config(R"({"train": {"seed": 42, "base_lr": 0.01}, "modules": {"frm": false}})");
  EXPECT_EQ(c.train.seed, 42u);
  EXPECT_FALSE(c.model.modules.frm);
  const std::string text = pft::to_json(c);
  EXPECT_EQ(pft::to_json(pft::parse_config(text)), text);
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_NE(config_error(R"({"train": {"base_lr": "fast"}})").find("train.base_lr"), std::string::npos);
  EXPECT_NE(config_error(R"({"model": {"depthh": 3}})").find("model.depthh"), std::string::npos);
  EXPECT_NE(config_error(R"({"model": {"dim": -4}})").find("model.dim"), std::string::npos);
  EXPECT_NE(config_error(R"({"pfde": {"beta": 0}})").find("beta"), std::string::npos);
  EXPECT_NE(config_error(R"({"pfde": {"init": "cauchy"}})").find("pfde.init"), std::string::npos);
  EXPECT_NE(config_error(R"({"data": {"kind": "manifest"}})").find("data.manifest"), std::string::npos);
  EXPECT_NE(config_error("{ not json").find("JSON"), std::string::npos);
}

TEST(Config, IndivisibleTokenCountIsRejected) {
  const std::string msg = config_error(R"({"model": {"height": 256, "width": 128, "patch": 16, "stride": 16}})");
  EXPECT_NE(msg.find("128"), std::string::npos) << msg;
}

TEST(Config, MissingFileNamesThePath) {
  const auto path = fixtures::temp_dir("cfg") / "absent.json";
  try {
    pft::load_config(path);
    FAIL();
  } catch (const pft::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(path.string()), std::string::npos);
  }
}

TEST(Ablation, SwitchListsParse) {
  EXPECT_EQ(pft::parse_ablation(""), (pft::ModuleSwitches{false, false, false}));
  EXPECT_EQ(pft::parse_ablation("pfde"), (pft::ModuleSwitches{true, false, false}));
  EXPECT_EQ(pft::parse_ablation("ssm,frm"), (pft::ModuleSwitches{false, true, true}));
  EXPECT_EQ(pft::parse_ablation("pfde,frm,ssm"), (pft::ModuleSwitches{true, true, true}));
  EXPECT_THROW(pft::parse_ablation("pfde,fpn"), pft::ConfigError);
}

}  // namespace
