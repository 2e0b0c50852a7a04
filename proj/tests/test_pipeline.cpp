#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "lstmbt/pipeline.hpp"

using namespace lstmbt;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Pipeline : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("lstmbt_pipeline_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    csv_ = root_ / "wave.csv";
    std::ofstream out(csv_);
    out << "Date,Open,Adj Close\n";
    auto day = std::chrono::sys_days{std::chrono::year{2019} / 1 / 1};
    for (int k = 0; k < 200; ++k) {
      const double price = 40.0 + 6.0 * std::sin(k / 6.0) + 0.05 * k;
      out << format_date(day) << ",0," << price << "\n";
      day += std::chrono::days{1};
    }
  }
  void TearDown() override { fs::remove_all(root_); }

  std::vector<std::string> quick_args(const fs::path& out) const {
    return {"--input", csv_.string() + "=WAVE", "--epochs", "2",         "--lookback", "10",
            "--ae-lookback", "8", "--out", out.string(), "--batch-size", "16"};
  }

  fs::path root_, csv_;
};

}  // namespace

TEST(Config, Defaults) {
  auto cfg = validate_config({"--input", "data/spy.csv"});
  ASSERT_EQ(cfg.inputs.size(), 1u);
  EXPECT_EQ(cfg.inputs[0].ticker, "SPY");
  EXPECT_EQ(cfg.inputs[0].path, fs::path("data/spy.csv"));
  EXPECT_EQ(cfg.strategies, (std::set<int>{0, 1, 2}));
  EXPECT_DOUBLE_EQ(cfg.split_ratio, 0.8);
  EXPECT_EQ(cfg.lookback, 60);
  EXPECT_EQ(cfg.ae_lookback, 30);
  EXPECT_DOUBLE_EQ(cfg.dropout, 0.2);
  EXPECT_EQ(cfg.epochs, 100);
  EXPECT_EQ(cfg.batch_size, 32);
  EXPECT_DOUBLE_EQ(cfg.threshold, 0.55);
  EXPECT_EQ(cfg.hold_days, 3);
  EXPECT_EQ(cfg.seed, 42u);
}

TEST(Config, RangeErrorsNameTheLegalRange) {
  try {
    validate_config({"--input", "a.csv=A", "--threshold", "1.5"});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("(0, 1]"), std::string::npos);
  }
  try {
    validate_config({"--input", "a.csv=A", "--split-ratio", "0"});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("(0, 1)"), std::string::npos);
  }
  EXPECT_THROW(validate_config({"--input", "a.csv=A", "--epochs", "0"}), ConfigError);
  EXPECT_THROW(validate_config({"--input", "a.csv=A", "--strategies", "1,3"}), ConfigError);
  EXPECT_THROW(validate_config({"--input", "a.csv=A", "--bogus"}), ConfigError);
  EXPECT_THROW(validate_config({}), ConfigError);
  EXPECT_THROW(validate_config({"--input", "a.csv=A", "--input", "b.csv=A"}), ConfigError);
  EXPECT_THROW(validate_config({"--help"}), HelpRequested);
}

TEST(Config, FlagsBeatEnvironmentBeatsDefaults) {
  ::setenv("LSTMBT_EPOCHS", "7", 1);
  ::setenv("LSTMBT_INPUT", "x.csv=X;y.csv=Y", 1);
  auto from_env = validate_config(std::vector<std::string>{});
  auto from_flag = validate_config({"--epochs", "3", "--input", "z.csv=Z"});
  ::unsetenv("LSTMBT_EPOCHS");
  ::unsetenv("LSTMBT_INPUT");
  EXPECT_EQ(from_env.epochs, 7);
  ASSERT_EQ(from_env.inputs.size(), 2u);
  EXPECT_EQ(from_env.inputs[1].ticker, "Y");
  EXPECT_EQ(from_flag.epochs, 3);
  ASSERT_EQ(from_flag.inputs.size(), 1u);
  EXPECT_EQ(validate_config({"--input", "z.csv=Z"}).epochs, 100);
}

TEST_F(Pipeline, MissingFileExitsWithDataCode) {
  auto cfg = validate_config({"--input", (root_ / "nope.csv").string() + "=NOPE", "--out", (root_ / "out").string()});
  std::ostringstream out, err;
  EXPECT_EQ(run(cfg, out, err), kExitData);
  EXPECT_NE(err.str().find((root_ / "nope.csv").string()), std::string::npos);
  EXPECT_TRUE(fs::exists(root_ / "out" / "INCOMPLETE"));
}

TEST_F(Pipeline, WritesArtifactsAndTable) {
  auto cfg = validate_config(quick_args(root_ / "out"));
  std::ostringstream out, err;
  ASSERT_EQ(run(cfg, out, err), kExitOk) << err.str();
  EXPECT_NE(out.str().find("Buy & Hold"), std::string::npos);
  EXPECT_NE(out.str().find("Strategy 2"), std::string::npos);
  const auto dir = root_ / "out" / "WAVE";
  for (const char* f : {"prices.csv", "prices.svg", "strategy0_report.json", "strategy1_model.json",
                        "strategy1_predictions.csv", "strategy1_ledger.csv", "strategy1_report.json",
                        "strategy1_squared_error_density.csv", "strategy2_anomalies.csv", "strategy2_breakouts.svg",
                        "strategy2_report.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_FALSE(fs::exists(root_ / "out" / "INCOMPLETE"));
  EXPECT_TRUE(fs::exists(root_ / "out" / "comparison.json"));
}

TEST_F(Pipeline, SameSeedGivesIdenticalReports) {
  std::ostringstream o1, e1, o2, e2;
  ASSERT_EQ(run(validate_config(quick_args(root_ / "a")), o1, e1), kExitOk) << e1.str();
  ASSERT_EQ(run(validate_config(quick_args(root_ / "b")), o2, e2), kExitOk) << e2.str();
  EXPECT_EQ(o1.str(), o2.str());
  for (const char* f : {"comparison.json", "WAVE/strategy1_report.json", "WAVE/strategy2_report.json",
                        "WAVE/strategy1_predictions.csv", "WAVE/strategy2_anomalies.csv"})
    EXPECT_EQ(slurp(root_ / "a" / f), slurp(root_ / "b" / f)) << f;
}

TEST_F(Pipeline, TestSplitShorterThanLookbackIsDataError) {
  auto args = quick_args(root_ / "out");
  args[5] = "60";  // lookback: test split has 40 bars
  std::ostringstream out, err;
  EXPECT_EQ(run(validate_config(args), out, err), kExitData);
  EXPECT_TRUE(fs::exists(root_ / "out" / "INCOMPLETE"));
}
