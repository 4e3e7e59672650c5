#ifndef SMPC_CORE_SIM_HPP_
#define SMPC_CORE_SIM_HPP_

#include <cstdint>
#include <optional>
#include <vector>

#include "linalg.hpp"
#include "sets.hpp"
#include "system.hpp"
#include "uncertainty.hpp"

namespace smpc::sim {

struct Trajectory
{
  std::vector<Vector> states;        ///< x_0..x_T (empty when not recorded)
  std::vector<Vector> inputs;
  std::vector<Vector> disturbances;
  std::vector<double> stage_costs;   ///< x'Qx + u'Ru
  std::vector<bool> in_xinf;         ///< membership of x_k, k = 0..T
  std::optional<std::size_t> entry_index;
  bool feasible_throughout = true;
  int steps = 0;                     ///< transitions actually simulated
  double avg_cost = 0.0;             ///< time average over all steps
  double avg_cost_half = 0.0;        ///< time average over the first half
  Vector final_state;
};

struct RunOptions
{
  int steps = 0;
  bool record = true;           ///< keep per-step vectors
  double entry_tol = 1e-6;
};

/**
 * Closed loop x+ = A x + B u(x) + D w with w drawn from the stream
 * (seed, traj, k). Stops at the first infeasible solve.
 */
Trajectory run_trajectory(const Controller & ctrl, const uncertainty::DisturbanceModel & W, const Matrix & Q,
                          const Matrix & R, const Vector & x0, std::uint64_t seed, std::uint64_t traj,
                          const RunOptions & opts, const sets::TruncatedReachSet * xinf = nullptr);

struct EnsembleOptions
{
  int steps = 0;
  int n_traj = 1;
  std::uint64_t master_seed = 0;
  int threads = 1;
  bool record = true;
};

struct Ensemble
{
  std::vector<Trajectory> trajectories;
  std::vector<double> membership_curve;   ///< fraction of trajectories with x_k in Xinf, k = 0..T
  std::uint64_t master_seed = 0;
  std::size_t infeasible = 0;
};

/// Trajectory j starts from x0s[j % x0s.size()] on substream (master_seed, j).
Ensemble run_ensemble(const Controller & ctrl, const uncertainty::DisturbanceModel & W, const Matrix & Q,
                      const Matrix & R, const std::vector<Vector> & x0s, const EnsembleOptions & opts,
                      const sets::TruncatedReachSet * xinf = nullptr);

struct LlnReport
{
  std::vector<double> deviations;  ///< |avg - l_ss| / l_ss, or absolute when l_ss = 0
  double median = 0.0;
  double l_ss = 0.0;
  bool absolute = false;
};

/// Throws Error("bad_reference") if l_ss <= 0 while the averages are not all zero.
LlnReport lln_report(const Ensemble & ens, double l_ss);

/// Outer approximation of the minimal invariant set with eps = rel * circumradius.
sets::TruncatedReachSet xinf_outer(const Matrix & Acl, const Matrix & D, const sets::HPolytope & W, double rel = 0.01);

}  // namespace smpc::sim

#endif  // SMPC_CORE_SIM_HPP_
