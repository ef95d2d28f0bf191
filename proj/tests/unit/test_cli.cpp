#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "sktlab/manifest.hpp"

using namespace sktlab;
namespace fs = std::filesystem;

namespace {

const fs::path kManifests = SKTLAB_MANIFESTS;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    out_ = fs::temp_directory_path() /
           ("sktlab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(out_);
    fs::create_directories(out_);
  }
  void TearDown() override { fs::remove_all(out_); }

  int run(const std::string& cmd, const fs::path& manifest, const std::string& extra = "") {
    const std::string line = std::string(SKTLAB_CLI) + " " + cmd + " --manifest " + manifest.string() + " --out " +
                             out_.string() + " " + extra + " > " + (out_ / "stdout.txt").string() + " 2> " +
                             (out_ / "stderr.txt").string();
    const int rc = std::system(line.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }

  fs::path write_manifest(const json& j) {
    const fs::path p = out_ / "input.json";
    std::ofstream(p) << j.dump(2);
    return p;
  }

  fs::path out_;
};

}  // namespace

TEST_F(Cli, VerifyPassesForCompetitiveSkt) {
  EXPECT_EQ(run("verify", kManifests / "skt_verify.json"), 0);
  const json j = load_json_file((out_ / "verify_report.json").string());
  EXPECT_TRUE(j.at("all_pass").get<bool>());
  EXPECT_TRUE(j.contains("provenance"));
  EXPECT_TRUE(fs::exists(out_ / "manifest.json"));
}

TEST_F(Cli, VerifyPassesForIdentityDiffusion) {
  EXPECT_EQ(run("verify", kManifests / "heat_dirichlet.json"), 0);
  const json j = load_json_file((out_ / "verify_report.json").string());
  EXPECT_EQ(j.at("C_star_hat"), 1.0);
}

TEST_F(Cli, VerifyFailureExitsOne) {
  EXPECT_EQ(run("verify", kManifests / "anisotropic_k4.json"), 1);
  const json j = load_json_file((out_ / "verify_report.json").string());
  EXPECT_FALSE(j.at("sg_prime_pass").get<bool>());
}

TEST_F(Cli, SimulateGateRefusesFailingModel) {
  EXPECT_EQ(run("simulate", kManifests / "anisotropic_k4.json"), 1);
  EXPECT_FALSE(fs::exists(out_ / "trajectory.csv"));
}

TEST_F(Cli, SimulateWritesTrajectoryAndSnapshots) {
  EXPECT_EQ(run("simulate", kManifests / "heat_dirichlet.json"), 0);
  std::ifstream is(out_ / "trajectory.csv");
  const auto t = read_csv(is);
  ASSERT_FALSE(t.rows.empty());
  EXPECT_NEAR(t.rows.back()[t.column("t")], 0.1, 1e-12);
  for (std::size_t k = 1; k < t.rows.size(); ++k) EXPECT_LT(t.rows[k][t.column("L2")], t.rows[k - 1][t.column("L2")]);
  const json s = load_json_file((out_ / "run_summary.json").string());
  EXPECT_EQ(s.at("terminated_reason"), "reached_t_end");
  EXPECT_EQ(s.at("snapshots").size(), 2u);
  EXPECT_TRUE(fs::exists(out_ / "snapshot_0.csv"));
}

TEST_F(Cli, SeedAndFormatOverrides) {
  EXPECT_EQ(run("simulate", kManifests / "heat_dirichlet.json", "--seed 42 --format bin"), 0);
  EXPECT_TRUE(fs::exists(out_ / "snapshot_0.bin"));
  const json m = load_json_file((out_ / "manifest.json").string());
  EXPECT_EQ(m.at("seed"), 42);
  EXPECT_EQ(m.at("outputs").at("format"), "bin");
}

TEST_F(Cli, RerunIsDeterministic) {
  ASSERT_EQ(run("simulate", kManifests / "heat_dirichlet.json"), 0);
  std::ifstream a(out_ / "trajectory.csv");
  const std::string first((std::istreambuf_iterator<char>(a)), {});
  ASSERT_EQ(run("simulate", kManifests / "heat_dirichlet.json"), 0);
  std::ifstream b(out_ / "trajectory.csv");
  const std::string second((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(first, second);
}

TEST_F(Cli, CompetitiveSimulationIsFinite) {
  EXPECT_EQ(run("simulate", kManifests / "skt_competitive.json"), 0);
  std::ifstream is(out_ / "trajectory.csv");
  const auto t = read_csv(is);
  ASSERT_FALSE(t.rows.empty());
  for (const auto& row : t.rows)
    for (double v : row) EXPECT_TRUE(std::isfinite(v));
}

TEST_F(Cli, DiagnoseWritesInequalityReports) {
  EXPECT_EQ(run("diagnose", kManifests / "skt_competitive.json"), 0);
  const json j = load_json_file((out_ / "diagnostics.json").string());
  for (const char* k : {"energy_inequality", "decay_bound", "ystar", "bmo_final", "interpolation", "morrey"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_TRUE(j.at("energy_inequality").at("holds").get<bool>());
}

TEST_F(Cli, StiffExplicitRunExitsThree) {
  EXPECT_EQ(run("simulate", kManifests / "stiff_explicit.json"), 3);
  const json s = load_json_file((out_ / "run_summary.json").string());
  EXPECT_EQ(s.at("terminated_reason"), "blowup_detected");
}

TEST_F(Cli, AttractorWritesReportAndSummary) {
  EXPECT_EQ(run("attractor", kManifests / "small_ensemble.json", "--threads 2"), 0);
  const json j = load_json_file((out_ / "attractor_report.json").string());
  EXPECT_EQ(j.at("members").size(), 3u);
  EXPECT_TRUE(j.at("common_ball").get<bool>());
  std::ifstream is(out_ / "attractor_summary.csv");
  EXPECT_EQ(read_csv(is).rows.size(), 3u);
}

TEST_F(Cli, DecayingLinearEnsembleHasVanishingBall) {
  EXPECT_EQ(run("attractor", kManifests / "linear_decay_ensemble.json"), 0);
  const json j = load_json_file((out_ / "attractor_report.json").string());
  EXPECT_LT(j.at("M_hat").get<double>(), 1e-6);
}

TEST_F(Cli, AttractorReportsExcludedMember) {
  EXPECT_EQ(run("attractor", kManifests / "blowup_ensemble.json"), 1);
  std::ifstream err(out_ / "stderr.txt");
  const std::string text((std::istreambuf_iterator<char>(err)), {});
  EXPECT_NE(text.find("FAILED member 1"), std::string::npos);
}

TEST_F(Cli, SweepRunsEveryValue) {
  EXPECT_EQ(run("sweep", kManifests / "sweep_cross_diffusion.json"), 0);
  std::ifstream is(out_ / "sweep_summary.csv");
  const auto t = read_csv(is);
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[2][t.column("value")], 2.0);
  for (int k = 0; k < 3; ++k) EXPECT_TRUE(fs::exists(out_ / ("run_" + std::to_string(k)) / "trajectory.csv"));
}

TEST_F(Cli, InputErrorsExitTwo) {
  json j = load_json_file((kManifests / "heat_dirichlet.json").string());
  j["schema"] = "unknown";
  EXPECT_EQ(run("simulate", write_manifest(j)), 2);
  j["schema"] = "sktlab/1";
  j["model"]["P"] = "not a polynomial";
  EXPECT_EQ(run("verify", write_manifest(j)), 2);
  EXPECT_EQ(run("verify", out_ / "missing.json"), 2);
  std::ofstream(out_ / "broken.json") << "{ not json";
  EXPECT_EQ(run("verify", out_ / "broken.json"), 2);
  EXPECT_EQ(run("sweep", kManifests / "heat_dirichlet.json"), 2);
}
