#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "smpc/smpc.h"

namespace fs = std::filesystem;

namespace {

const char * kSystem = R"("system": {"A": [[1, 1], [0, 1]], "B": [[0.5], [1]], "D": [[1, 0], [0, 1]]},
  "disturbance": {"kind": "uniform-on-box", "half_widths": [0.1, 0.1]})";

std::string striped_config(const std::string & extra = "")
{
  return std::string("{") + kSystem + R"(,
  "controller": {"kind": "striped", "horizon": 5, "Q": [[1, 0], [0, 1]], "R": [[1]],
    "chance_constraints": [{"f": [0, 0.3333333333333333], "g": [0], "p": 0.9},
                           {"f": [0, -0.3333333333333333], "g": [0], "p": 0.9},
                           {"f": [0.2, 0], "g": [0], "p": 0.8}, {"f": [-0.2, 0], "g": [0], "p": 0.8},
                           {"f": [0, 0], "g": [1], "p": 1.0}, {"f": [0, 0], "g": [-1], "p": 1.0}],
    "domain_box": [20, 20], "quantile_samples": 20000},
  "simulation": {"x0": [[-4.5, 1.5], [4, 0]], "T": 10, "n_traj": 3, "master_seed": 5})" +
         extra + "}";
}

std::string read_file(const fs::path & p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CApi : public ::testing::Test
{
protected:
  void SetUp() override
  {
    dir_ = fs::temp_directory_path() /
           ("smpc_capi_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  smpc_experiment * open(const std::string & json)
  {
    smpc_experiment * exp = nullptr;
    EXPECT_EQ(smpc_experiment_open_json(json.c_str(), &exp), SMPC_OK) << smpc_last_error_json();
    if (exp != nullptr) { smpc_experiment_set_output_dir(exp, dir_.string().c_str()); }
    return exp;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CApi, DareGoldenRatio)
{
  const double one = 1.0;
  double P = 0, K = 0, res = 1;
  ASSERT_EQ(smpc_dare(1, 1, &one, &one, &one, &one, &P, &K, &res), SMPC_OK);
  EXPECT_NEAR(P, (1.0 + std::sqrt(5.0)) / 2.0, 1e-9);
  EXPECT_NEAR(K, -(std::sqrt(5.0) - 1.0) / 2.0, 1e-9);
  EXPECT_LE(res, 1e-9);
  EXPECT_EQ(smpc_dare(1, 1, nullptr, &one, &one, &one, &P, &K, nullptr), SMPC_ERR_ARGUMENT);
}

TEST_F(CApi, UnknownKeyIsSchemaError)
{
  smpc_experiment * exp = nullptr;
  const std::string bad = striped_config(R"(, "extra": 1)");
  EXPECT_EQ(smpc_experiment_open_json(bad.c_str(), &exp), SMPC_ERR_SYNTHESIS);
  EXPECT_EQ(exp, nullptr);
  EXPECT_STREQ(smpc_last_error_code(), "schema");
  EXPECT_NE(std::string(smpc_last_error_json()).find("\"exit_code\":2"), std::string::npos);
  EXPECT_EQ(smpc_experiment_open_json("{not json", &exp), SMPC_ERR_SYNTHESIS);
  EXPECT_EQ(smpc_experiment_open("/nonexistent/config.json", &exp), SMPC_ERR_IO);
}

TEST_F(CApi, IndefiniteInputCostFailsSynthesis)
{
  const std::string cfg = std::string("{") + kSystem +
                          R"(, "controller": {"kind": "da", "horizon": 3, "Q": [[1, 0], [0, 1]], "R": [[-1]],
                                 "constraints": {"box": [5, 3, 1]}}})";
  smpc_experiment * exp = open(cfg);
  ASSERT_NE(exp, nullptr);
  EXPECT_EQ(smpc_experiment_synth(exp), SMPC_ERR_SYNTHESIS);
  EXPECT_STREQ(smpc_last_error_code(), "cost_not_pd");
  EXPECT_TRUE(fs::exists(dir_ / "error.json"));
  smpc_experiment_close(exp);
}

TEST_F(CApi, SynthWritesArtifactsAndControls)
{
  smpc_experiment * exp = open(striped_config());
  ASSERT_NE(exp, nullptr);
  ASSERT_EQ(smpc_experiment_synth(exp), SMPC_OK) << smpc_last_error_json();
  for (const char * f : {"controller.json", "xf.json", "xinf.json"}) {
    const std::string text = read_file(dir_ / f);
    EXPECT_NE(text.find(smpc_experiment_config_hash(exp)), std::string::npos) << f;
  }
  size_t n = 0, m = 0, nw = 0;
  ASSERT_EQ(smpc_experiment_dims(exp, &n, &m, &nw), SMPC_OK);
  EXPECT_EQ(n, 2u);
  EXPECT_EQ(m, 1u);
  double K[2];
  ASSERT_EQ(smpc_experiment_gain(exp, K), SMPC_OK);
  const double x[2] = {0.01, -0.02};
  double u = 0;
  int feasible = 0;
  ASSERT_EQ(smpc_experiment_control(exp, x, &u, &feasible), SMPC_OK);
  EXPECT_EQ(feasible, 1);
  EXPECT_NEAR(u, K[0] * x[0] + K[1] * x[1], 1e-12);
  const double far[2] = {50.0, 0.0};
  ASSERT_EQ(smpc_experiment_control(exp, far, &u, &feasible), SMPC_OK);
  EXPECT_EQ(feasible, 0);
  smpc_experiment_close(exp);
}

TEST_F(CApi, SimulationCsvRowsAndReplay)
{
  smpc_experiment * exp = open(striped_config());
  ASSERT_NE(exp, nullptr);
  ASSERT_EQ(smpc_experiment_simulate(exp), SMPC_OK) << smpc_last_error_json();
  const std::string first = read_file(dir_ / "ensemble.csv");
  const std::string summary = read_file(dir_ / "summary.json");
  std::istringstream lines(first);
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) {
    if (!line.empty() && std::isdigit(static_cast<unsigned char>(line[0]))) { ++rows; }
  }
  EXPECT_EQ(rows, 3 * 10);
  ASSERT_EQ(smpc_experiment_simulate(exp), SMPC_OK);
  EXPECT_EQ(read_file(dir_ / "ensemble.csv"), first);
  EXPECT_EQ(read_file(dir_ / "summary.json"), summary);

  smpc_experiment_set_threads(exp, 3);
  ASSERT_EQ(smpc_experiment_simulate(exp), SMPC_OK);
  EXPECT_EQ(read_file(dir_ / "ensemble.csv"), first);

  smpc_experiment_set_master_seed(exp, 6);
  ASSERT_EQ(smpc_experiment_simulate(exp), SMPC_OK);
  EXPECT_NE(read_file(dir_ / "ensemble.csv"), first);
  smpc_experiment_close(exp);
}

TEST_F(CApi, UnstableLoopFailsVerification)
{
  const std::string cfg = R"({"system": {"A": [[1.1]], "B": [[1]]},
    "disturbance": {"half_widths": [0.1]},
    "controller": {"kind": "linear", "Q": [[1]], "R": [[1]], "K": [[0]]},
    "verification": {"grid_lower": [-1], "grid_upper": [1], "mc_n": 200, "small_set_draws": 1000,
                     "iss_samples": 100}})";
  smpc_experiment * exp = open(cfg);
  ASSERT_NE(exp, nullptr);
  EXPECT_EQ(smpc_experiment_verify(exp), SMPC_ERR_VERIFICATION);
  EXPECT_NE(read_file(dir_ / "drift.json").find("no_certificate"), std::string::npos);
  smpc_experiment_close(exp);
}

TEST_F(CApi, DegenerateDisturbanceFailsSmallSet)
{
  const std::string cfg = R"({"system": {"A": [[0.5]], "B": [[1]], "D": [[0]]},
    "disturbance": {"half_widths": [0.1]},
    "controller": {"kind": "linear", "Q": [[1]], "R": [[1]], "K": [[0]]},
    "verification": {"grid_lower": [-1], "grid_upper": [1], "mc_n": 20, "small_set_draws": 1000,
                     "iss_samples": 100}})";
  smpc_experiment * exp = open(cfg);
  ASSERT_NE(exp, nullptr);
  EXPECT_EQ(smpc_experiment_verify(exp), SMPC_ERR_VERIFICATION);
  const std::string ss = read_file(dir_ / "smallset.json");
  EXPECT_NE(ss.find("no_interior"), std::string::npos);
  EXPECT_NE(read_file(dir_ / "drift.json").find("\"pass\": true"), std::string::npos);
  smpc_experiment_close(exp);
}

TEST_F(CApi, ReportSummarisesArtifacts)
{
  smpc_experiment * exp = open(striped_config());
  ASSERT_NE(exp, nullptr);
  const char * text = nullptr;
  EXPECT_EQ(smpc_experiment_report(exp, &text), SMPC_ERR_IO);
  ASSERT_EQ(smpc_experiment_synth(exp), SMPC_OK);
  ASSERT_EQ(smpc_experiment_simulate(exp), SMPC_OK);
  ASSERT_EQ(smpc_experiment_report(exp, &text), SMPC_OK);
  ASSERT_NE(text, nullptr);
  EXPECT_NE(std::string(text).find("simulation: 3 x 10 steps"), std::string::npos) << text;
  EXPECT_TRUE(fs::exists(dir_ / "report.json"));
  smpc_experiment_close(exp);
}
