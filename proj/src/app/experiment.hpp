#ifndef SMPC_APP_EXPERIMENT_HPP_
#define SMPC_APP_EXPERIMENT_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "linalg.hpp"
#include "mpc_striped.hpp"
#include "sets.hpp"
#include "system.hpp"
#include "uncertainty.hpp"

namespace smpc::app {

enum class ControllerKind { da, striped, linear };

struct VerificationSpec
{
  int grid_points = 31;
  double grid_margin = 0.1;
  std::optional<Vector> grid_lower;
  std::optional<Vector> grid_upper;
  int mc_n = 2000;
  std::uint64_t seed = 0;
  int fresh_states = 100;
  int small_set_draws = 1000000;
  int iss_samples = 10000;
  double iss_tol = 1e-7;
};

struct SimulationSpec
{
  std::vector<Vector> x0;
  int steps = 0;
  int n_traj = 1;
  std::uint64_t master_seed = 0;
  bool record = true;
  double xinf_rel_eps = 0.01;
  double lln_tolerance = 0.05;
};

struct ExperimentConfig
{
  std::string name;
  LinearSystem system;
  std::shared_ptr<const uncertainty::DisturbanceModel> disturbance;

  ControllerKind kind = ControllerKind::da;
  int horizon = 0;
  Matrix Q;
  Matrix R;
  sets::HPolytope Z;                                     // da
  std::vector<mpc_striped::ChanceConstraint> chance;     // striped
  sets::HPolytope domain_box;                            // striped
  int tail_horizon = 0;
  int quantile_samples = 100000;
  std::uint64_t quantile_seed = 0;
  std::vector<Matrix> stripe_gains;
  std::optional<Matrix> K;                               // linear

  VerificationSpec verification;
  SimulationSpec simulation;
  std::string output_dir = "out";
  std::string hash;   ///< FNV-1a of the canonical config text
};

/// Throws Error("schema") on malformed or unknown keys, Error("dimension") on
/// inconsistent shapes.
ExperimentConfig parse_config(const std::string & json_text);
ExperimentConfig load_config(const std::string & path);

/// Exit-code contract of the batch front end.
enum class Outcome : int { ok = 0, io = 1, synthesis = 2, verification = 3, simulation = 4 };

struct RunResult
{
  Outcome outcome = Outcome::ok;
  std::string error_code;
  std::string message;
  std::vector<std::string> files;
  std::string text;  ///< human-readable summary (report)
};

/// Lazily synthesised controller plus the four pipeline stages. Each stage
/// writes its artifacts under the output directory.
class Experiment
{
public:
  explicit Experiment(ExperimentConfig cfg);
  ~Experiment();

  const ExperimentConfig & config() const { return cfg_; }
  void set_output_dir(std::string dir) { cfg_.output_dir = std::move(dir); }
  void set_threads(int threads) { threads_ = threads < 1 ? 1 : threads; }
  void set_master_seed(std::uint64_t seed) { cfg_.simulation.master_seed = seed; }

  /// Throws the synthesis Error on failure.
  const Controller & controller();
  /// Optimal value (da, striped) or x'Px of the linear law; +inf where infeasible.
  double value(const Vector & x);

  RunResult synth();
  RunResult verify();
  RunResult simulate();
  RunResult report();

private:
  RunResult fail(Outcome outcome, const std::string & code, const std::string & message);

  ExperimentConfig cfg_;
  int threads_ = 1;
  std::unique_ptr<Controller> ctrl_;
  Matrix lyap_;  // value matrix of the linear law
};

std::string fnv1a_hex(const std::string & text);

}  // namespace smpc::app

#endif  // SMPC_APP_EXPERIMENT_HPP_
