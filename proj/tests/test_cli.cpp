#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <qsdlab/cli.hpp>

#include "support.hpp"

using namespace qsdlab;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "qsdlab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_command(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("qsdlab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string write_cfg(const std::string& name, const std::string& body) {
    const fs::path p = dir / name;
    std::ofstream(p) << body;
    return p.string();
  }

  std::string chain_cfg(const std::string& extra = "") {
    return write_cfg("chain.cfg", "[model]\nvariant = chain\nchain = " + test::fixture("three_state.mat") +
                                      "\nx0 = 0\n[run]\nseed = 4\nparticles = 5000\nhorizon = 4\n" + extra);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir;
};

}  // namespace

TEST_F(Cli, UnknownKeysAreListed) {
  const auto cfg = write_cfg("bad.cfg", "[model]\nvariant = uniform_ball\nwidth = 2\n[run]\nseed = 1\nspeed = 3\n");
  const auto r = run({"survival", "--config", cfg});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("model.width"), std::string::npos);
  EXPECT_NE(r.err.find("run.speed"), std::string::npos);
}

TEST_F(Cli, KeyOutsideSectionIsRejected) {
  const auto cfg = write_cfg("bad.cfg", "seed = 1\n[model]\nvariant = uniform_ball\n");
  EXPECT_EQ(run({"survival", "--config", cfg}).code, 2);
}

TEST_F(Cli, MissingSeedIsAnError) {
  const auto cfg = write_cfg("noseed.cfg", "[model]\nvariant = uniform_ball\n");
  const auto r = run({"survival", "--config", cfg, "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("seed"), std::string::npos);
  EXPECT_EQ(run({"survival", "--config", cfg, "--seed", "3", "--particles", "500", "--out", (dir / "o").string()}).code, 0);
}

TEST_F(Cli, UnknownSubcommandAndMissingConfig) {
  EXPECT_EQ(run({"bogus"}).code, 2);
  EXPECT_EQ(run({"survival"}).code, 2);
  EXPECT_EQ(run({"verify", "a9", "--config", chain_cfg()}).code, 2);
}

TEST_F(Cli, OraclePrintsTriple) {
  const auto r = run({"oracle", "--chain", test::fixture("two_state.mat")});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("lambda0 = 1.38196601125"), std::string::npos);
  EXPECT_NE(r.out.find("alpha = 0.6180339887"), std::string::npos);
  EXPECT_FALSE(fs::exists("oracle.csv"));
}

TEST_F(Cli, OracleWritesFilesWithOut) {
  const auto r = run({"oracle", "--chain", test::fixture("three_state.mat"), "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, 0);
  const auto csv = slurp(dir / "o" / "oracle.csv");
  EXPECT_EQ(csv.rfind("# qsdlab ", 0), 0u);
  EXPECT_NE(csv.find("state,alpha,eta,beta"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(dir / "o" / "summary.json"));
  EXPECT_NEAR(j["lambda0"].get<double>(), 0.27860613397018574, 1e-10);
  EXPECT_TRUE(j.contains("config_hash"));
}

TEST_F(Cli, QsdWritesMarginalAndSummary) {
  const auto out = dir / "q";
  const auto r = run({"qsd", "--config", chain_cfg(), "--t", "2", "--method", "fv", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out / "mcne_t2.csv"));
  const auto j = nlohmann::json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(j["qsdlab_version"], std::string(kVersion));
}

TEST_F(Cli, SurvivalOutputIsReproducible) {
  const auto cfg = chain_cfg();
  ASSERT_EQ(run({"survival", "--config", cfg, "--threads", "1", "--out", (dir / "a").string()}).code, 0);
  ASSERT_EQ(run({"survival", "--config", cfg, "--threads", "6", "--out", (dir / "b").string()}).code, 0);
  EXPECT_EQ(slurp(dir / "a" / "survival.csv"), slurp(dir / "b" / "survival.csv"));
  EXPECT_EQ(slurp(dir / "a" / "summary.json"), slurp(dir / "b" / "summary.json"));
}

TEST_F(Cli, LowAcceptanceExitsThree) {
  const auto cfg = write_cfg("one.cfg", "[model]\nvariant = chain\nchain = " + test::fixture("one_state.mat") +
                                            "\n[run]\nseed = 1\nparticles = 2000\nt = 1\nT = 30\n");
  const auto r = run({"qprocess", "--config", cfg, "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("acceptance"), std::string::npos);
}

TEST_F(Cli, PlotRefusesMixedUnits) {
  const auto cfg = chain_cfg();
  ASSERT_EQ(run({"survival", "--config", cfg, "--out", (dir / "s").string()}).code, 0);
  ASSERT_EQ(run({"qsd", "--config", cfg, "--t", "1", "--out", (dir / "q").string()}).code, 0);
  const auto ok = run({"plot", (dir / "s" / "survival.csv").string()});
  EXPECT_EQ(ok.code, 0);
  EXPECT_NE(ok.out.find("x,y,se,series"), std::string::npos);
  const auto bad = run({"plot", (dir / "s" / "survival.csv").string(), (dir / "q" / "mcne_t1.csv").string()});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("mixed units"), std::string::npos);
}

TEST_F(Cli, VerifyWritesReport) {
  const auto r = run({"verify", "a5", "--config", chain_cfg(), "--out", (dir / "v").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("consistent with"), std::string::npos);
  bool found = false;
  for (const auto& e : fs::directory_iterator(dir / "v")) found = found || e.path().extension() == ".json";
  EXPECT_TRUE(found);
}

TEST_F(Cli, BinaryExitCodes) {
  const std::string exe = QSDLAB_CLI;
  EXPECT_EQ(std::system((exe + " --version > /dev/null").c_str()), 0);
  const int code = std::system((exe + " survival --config /nonexistent.cfg > /dev/null 2>&1").c_str());
  EXPECT_EQ(WEXITSTATUS(code), 2);
}
