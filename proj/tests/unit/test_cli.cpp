#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "commands.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mgs::cli;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::path(::testing::TempDir()) /
            ("mgs_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string write_config(const std::string& text, const std::string& name = "cfg.toml") {
    const fs::path p = root_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  Overrides with(const std::string& config) {
    Overrides o;
    o.config_path = config;
    o.out = (root_ / "out").string();
    o.quiet = true;
    return o;
  }

  static std::string read(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
  }

  static std::size_t data_rows(const std::string& csv) {
    std::size_t lines = 0;
    std::istringstream in(csv);
    for (std::string l; std::getline(in, l);) ++lines;
    return lines - 2;  // schema comment and header
  }

  fs::path root_;
  std::ostringstream out_, err_;
};

const char* kMinimal = R"(
[run]
id = "mini"
chains = 10
seed = 3
[schedule]
steps = 20
[guidance]
method = "none"
)";

}  // namespace

TEST_F(CliTest, MissingConfigExitsTwoAndNamesPath) {
  const std::string path = (root_ / "absent.toml").string();
  EXPECT_EQ(cmd_sample(with(path), out_, err_), 2);
  EXPECT_NE(err_.str().find(path), std::string::npos);
}

TEST_F(CliTest, InvalidFieldExitsTwoAndNamesField) {
  const auto cfg = write_config("[schedule]\nsigma_max = -3\n");
  EXPECT_EQ(cmd_sample(with(cfg), out_, err_), 2);
  EXPECT_NE(err_.str().find("schedule.sigma_max"), std::string::npos);
}

TEST_F(CliTest, SampleWritesOneRowPerChainAndGridEntry) {
  const auto cfg = write_config(kMinimal);
  ASSERT_EQ(cmd_sample(with(cfg), out_, err_), 0) << err_.str();
  const fs::path dir = root_ / "out" / "mini";
  const json manifest = json::parse(read(dir / "manifest.json"));
  EXPECT_EQ(manifest["results"]["chains"], 10);
  EXPECT_EQ(manifest["results"]["grid_length"], 21);
  EXPECT_EQ(data_rows(read(dir / "trajectory.csv")), 10u * 21u);
  EXPECT_EQ(data_rows(read(dir / "samples.csv")), 10u);
}

TEST_F(CliTest, SeedOverrideChangesSeedAndOutputsOnly) {
  const auto cfg = write_config(kMinimal);
  Overrides a = with(cfg);
  a.out = (root_ / "a").string();
  Overrides b = with(cfg);
  b.out = (root_ / "b").string();
  b.seed = 99;
  ASSERT_EQ(cmd_sample(a, out_, err_), 0);
  ASSERT_EQ(cmd_sample(b, out_, err_), 0);
  json ma = json::parse(read(root_ / "a" / "mini" / "manifest.json"));
  json mb = json::parse(read(root_ / "b" / "mini" / "manifest.json"));
  EXPECT_EQ(ma["config"]["run"]["seed"], 3);
  EXPECT_EQ(mb["config"]["run"]["seed"], 99);
  EXPECT_NE(read(root_ / "a" / "mini" / "samples.csv"), read(root_ / "b" / "mini" / "samples.csv"));
  mb["config"]["run"]["seed"] = 3;
  EXPECT_EQ(ma["config"], mb["config"]);
}

TEST_F(CliTest, ManifestConfigRerunsIdentically) {
  const auto cfg = write_config(kMinimal);
  ASSERT_EQ(cmd_sample(with(cfg), out_, err_), 0);
  const fs::path dir = root_ / "out" / "mini";
  const json manifest = json::parse(read(dir / "manifest.json"));
  const std::string echoed = write_config(manifest["config"].dump(), "echo.json");
  Overrides o = with(echoed);
  o.out = (root_ / "echo").string();
  ASSERT_EQ(cmd_sample(o, out_, err_), 0) << err_.str();
  EXPECT_EQ(read(dir / "trajectory.csv"), read(root_ / "echo" / "mini" / "trajectory.csv"));
}

TEST_F(CliTest, SweepSingleZetaHasMethodsTimesSeedsRows) {
  const auto cfg = write_config(R"(
[run]
id = "sw"
[schedule]
steps = 10
[sweep]
zetas = [0.0]
seeds = [0, 1, 2]
chains = 200
calibrate = false
)");
  ASSERT_EQ(cmd_sweep(with(cfg), out_, err_), 0) << err_.str();
  EXPECT_EQ(data_rows(read(root_ / "out" / "sw" / "kl.csv")), 2u * 3u);
}

TEST_F(CliTest, DiagnoseWithoutPairExitsTwo) {
  const auto cfg = write_config("[run]\nid = \"dg\"\n");
  EXPECT_EQ(cmd_diagnose(with(cfg), out_, err_), 2);
  EXPECT_NE(err_.str().find("diagnose.pair"), std::string::npos);
}

TEST_F(CliTest, GradcheckPassesOnDefaultPrior) {
  const auto cfg = write_config("[run]\nid = \"gc\"\n");
  ASSERT_EQ(cmd_gradcheck(with(cfg), out_, err_), 0) << err_.str();
  EXPECT_NE(out_.str().find("prior_score"), std::string::npos);
  EXPECT_TRUE(fs::exists(root_ / "out" / "gc" / "gradcheck.csv"));
}

TEST_F(CliTest, OverridesLandInResolvedDocument) {
  const auto cfg = write_config(kMinimal);
  Overrides o = with(cfg);
  o.zeta = "0,0.1";
  o.steps = 12;
  o.rule = "ddim";
  const json doc = resolve_document(o, "sweep");
  EXPECT_EQ(doc["schedule"]["steps"], 12);
  EXPECT_EQ(doc["schedule"]["rule"], "ddim");
  EXPECT_EQ(doc["sweep"]["zetas"].size(), 2u);
}

TEST_F(CliTest, WritesNothingOutsideOutputDirectory) {
  const auto cfg = write_config(kMinimal);
  ASSERT_EQ(cmd_sample(with(cfg), out_, err_), 0);
  std::size_t entries = 0;
  for (const auto& e : fs::directory_iterator(root_)) {
    (void)e;
    ++entries;
  }
  EXPECT_EQ(entries, 2u);  // cfg.toml and out/
}
