#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "discover/cli.hpp"
#include "discover/synthetic.hpp"

using namespace discover;
namespace fs = std::filesystem;

namespace {

struct Sandbox {
  fs::path dir;
  explicit Sandbox(const std::string& name) : dir(fs::temp_directory_path() / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Sandbox() { fs::remove_all(dir); }
  std::string file(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name) << text;
    return (dir / name).string();
  }
};

int run_cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "discover");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream captured;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), captured);
  if (out) *out = captured.str();
  return code;
}

const std::string kSmallSearch =
    "[search]\nmax_candidates = 2\nforest = 1\ngbdt = 1\nmlp = 0\n[mining]\nimportance_repeats = 2\n";

std::string planted_csv(const Sandbox& s) {
  synthetic::PlantedSpec spec;
  spec.rows = 800;
  return s.file("planted.csv", to_csv(synthetic::planted_table(4, spec)));
}

}  // namespace

TEST(Cli, TypoKeyIsAConfigErrorAndWritesNothing) {
  Sandbox s("discover_cli_typo");
  planted_csv(s);
  const auto cfg = s.file("c.toml", "data = \"planted.csv\"\ntarget = \"y\"\n[split]\nholdout_fracton = 0.2\n");
  EXPECT_EQ(run_cli({"run", "--config", cfg, "--out", (s.dir / "runs").string(), "--quiet"}), exit_config);
  EXPECT_FALSE(fs::exists(s.dir / "runs"));
}

TEST(Cli, MissingCsvIsADataError) {
  Sandbox s("discover_cli_missing");
  const auto cfg = s.file("c.toml", "data = \"absent.csv\"\ntarget = \"y\"\n");
  EXPECT_EQ(run_cli({"run", "--config", cfg, "--out", (s.dir / "runs").string(), "--quiet"}), exit_data);
  EXPECT_FALSE(fs::exists(s.dir / "runs"));
}

TEST(Cli, MissingTargetColumnIsAConfigError) {
  Sandbox s("discover_cli_target");
  planted_csv(s);
  const auto cfg = s.file("c.toml", "data = \"planted.csv\"\ntarget = \"nope\"\n");
  EXPECT_EQ(run_cli({"run", "--config", cfg, "--out", (s.dir / "runs").string(), "--quiet"}), exit_config);
  EXPECT_FALSE(fs::exists(s.dir / "runs"));
}

TEST(Cli, ConstantTargetIsAPipelineError) {
  Sandbox s("discover_cli_constant");
  std::string csv = "a,y\n";
  for (int i = 0; i < 50; ++i) csv += std::to_string(i) + ",1\n";
  s.file("d.csv", csv);
  const auto cfg = s.file("c.toml", "data = \"d.csv\"\ntarget = \"y\"\n" + kSmallSearch);
  EXPECT_EQ(run_cli({"run", "--config", cfg, "--out", (s.dir / "runs").string(), "--quiet"}), exit_pipeline);
  EXPECT_FALSE(fs::exists(s.dir / "runs"));
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run_cli({}), exit_usage);
  EXPECT_EQ(run_cli({"run"}), exit_usage);
  EXPECT_EQ(run_cli({"frobnicate"}), exit_usage);
  EXPECT_EQ(run_cli({"run", "--config", "/nonexistent.toml"}), exit_usage);
}

TEST(Cli, PlantedRunSucceedsAndReportRerenders) {
  Sandbox s("discover_cli_planted");
  planted_csv(s);
  const auto cfg = s.file("c.toml", "data = \"planted.csv\"\ntarget = \"y\"\nseed = 2\n" + kSmallSearch);
  std::string out;
  ASSERT_EQ(run_cli({"run", "--config", cfg, "--out", (s.dir / "runs").string(), "--quiet", "--jobs", "1"}, &out),
            exit_ok);
  EXPECT_NE(out.find("run directory: "), std::string::npos);
  const auto hash = config_hash(load_run_config(cfg));
  const auto dir = s.dir / "runs" / hash;
  ASSERT_TRUE(fs::exists(dir / "report.json"));
  const auto report = report_from_json(nlohmann::ordered_json::parse(std::ifstream(dir / "report.json")));
  EXPECT_GE(report.discoveries.size(), 1u);

  std::string md;
  ASSERT_EQ(run_cli({"report", dir.string()}, &md), exit_ok);
  std::stringstream written;
  written << std::ifstream(dir / "report.md").rdbuf();
  EXPECT_EQ(md, written.str());
}

TEST(Cli, SeedOverrideChangesTheRunDirectory) {
  Sandbox s("discover_cli_seed");
  planted_csv(s);
  const auto cfg = s.file("c.toml", "data = \"planted.csv\"\ntarget = \"y\"\nseed = 2\n" + kSmallSearch);
  ASSERT_EQ(run_cli({"run", "--config", cfg, "--out", (s.dir / "runs").string(), "--quiet", "--seed", "9"}), exit_ok);
  auto c = load_run_config(cfg);
  c.seed = 9;
  EXPECT_TRUE(fs::exists(s.dir / "runs" / config_hash(c) / "report.json"));
}

TEST(Cli, ReportRejectsMissingOrMalformedInput) {
  Sandbox s("discover_cli_tamper");
  EXPECT_EQ(run_cli({"report", (s.dir / "none").string()}), exit_data);
  s.file("report.json", "{\"not\": \"a report\"}");
  EXPECT_EQ(run_cli({"report", (s.dir / "report.json").string()}), exit_data);
}

TEST(Cli, BenchOnlySelectsAndSkipsMissingData) {
  Sandbox s("discover_cli_bench");
  const std::string bench = std::string(DISCOVER_SOURCE_DIR) + "/bench/suite.toml";
  std::string md;
  ASSERT_EQ(run_cli({"bench", "--config", bench, "--only", "climate,nhanes", "--out", s.dir.string(), "--quiet"}, &md),
            exit_ok);
  EXPECT_NE(md.find("| climate | ccwept |"), std::string::npos);
  EXPECT_NE(md.find("| nhanes | HL |"), std::string::npos);
  EXPECT_EQ(md.find("| hcv |"), std::string::npos);
  EXPECT_TRUE(fs::exists(s.dir / "comparison.csv"));
  EXPECT_TRUE(fs::exists(s.dir / "comparison.md"));
  EXPECT_EQ(run_cli({"bench", "--config", bench, "--only", "nosuch", "--out", s.dir.string(), "--quiet"}), exit_config);
}
