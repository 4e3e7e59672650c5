#ifndef SMPC_CORE_MPC_STRIPED_HPP_
#define SMPC_CORE_MPC_STRIPED_HPP_

#include <optional>
#include <vector>

#include "numerics.hpp"
#include "sets.hpp"
#include "solver.hpp"
#include "system.hpp"
#include "uncertainty.hpp"

namespace smpc::mpc_striped {

/// P{f' x+ + g' u <= 1} >= p.
struct ChanceConstraint
{
  Vector f;
  Vector g;
  double p = 1.0;
};

struct StripedConfig
{
  LinearSystem system;
  int horizon = 0;
  /// Tail steps checked past the horizon; 0 picks the smallest admissible value.
  int tail_horizon = 0;
  Matrix Q;
  Matrix R;
  std::vector<ChanceConstraint> constraints;
  std::optional<uncertainty::DisturbanceModel> W;
  /// Artificial state bounds imposed robustly at every predicted step.
  sets::HPolytope domain_box;
  /// Overrides the synthesised L_1..L_{N-1} when non-empty.
  std::vector<Matrix> stripe_gains;
  int quantile_samples = 100000;
  std::uint64_t quantile_seed = 0;
  double tail_epsilon = 1e-3;
};

struct StripedSolution
{
  solver::QpStatus status = solver::QpStatus::infeasible;
  Vector c;   ///< stacked c_0..c_{N-1}
  double value = 0.0;  ///< x'Px x + c'Pc c
  bool fast_path = false;
  int iterations = 0;
};

/**
 * @brief Striped disturbance-affine stochastic MPC.
 *
 * Predictions use u_i = K x_i + c_i + sum_j L_j w_{i-j}; every constraint row
 * is tightened offline, so the online problem is a QP in c alone with cost
 * c'Pc c. Each disturbance lag is bounded by the larger of its striped and its
 * pure-K response, which keeps both the plain shift (c_1, .., c_{N-1}, 0) and
 * the stripe-absorbing shift feasible after any w in W.
 */
class StripedController : public Controller
{
public:
  /// Throws Error("tightening_infeasible"), Error("lyapunov_residual"), Error("tail_horizon"), ...
  explicit StripedController(const StripedConfig & cfg);

  const LinearSystem & system() const override { return sys_; }
  const Matrix & gain() const override { return riccati_.K; }
  ControlResult control(const Vector & x) const override;
  std::string kind() const override { return "striped"; }

  StripedSolution solve(const Vector & x, bool force_qp = false) const;
  /// Optimal value V(x); +inf when infeasible.
  double value(const Vector & x) const;
  /// max over rows of (nominal row - tightened bound); <= 0 means c is feasible at x.
  double constraint_violation(const Vector & x, const Vector & c) const;
  /// c* = 0 at x.
  bool in_terminal_region(const Vector & x) const;

  const numerics::RiccatiSolution & riccati() const { return riccati_; }
  const Matrix & Px() const { return Px_; }
  const Matrix & Pc() const { return Pc_; }
  const Matrix & Psi() const { return psi_; }
  double lyapunov_residual() const { return lyap_residual_; }
  const std::vector<Matrix> & stripe_gains() const { return L_; }
  /// Row k: constraint k (user constraints first, then domain box rows); column i: step i.
  const Matrix & tightenings() const { return tight_; }
  int horizon() const { return N_; }
  int tail_horizon() const { return N2_; }
  const sets::HPolytope & domain_box() const { return box_; }
  const std::vector<ChanceConstraint> & constraints() const { return cons_; }

private:
  struct Rows
  {
    Matrix gx;
    Matrix gc;
    Vector rhs;
  };

  void synthesize_stripes(const std::vector<ChanceConstraint> & user);
  Matrix lag_bounds(int lags) const;
  Rows build_rows(int steps) const;
  bool tail_redundant(int steps) const;

  LinearSystem sys_;
  int N_;
  int N2_ = 0;
  Matrix Q_, R_;
  sets::HPolytope W_;
  sets::HPolytope box_;
  numerics::RiccatiSolution riccati_;
  Matrix acl_;
  std::vector<Matrix> L_;
  std::vector<ChanceConstraint> cons_;  // user rows then box rows
  Vector q0_;                           // current-step offset per constraint
  Matrix tight_;
  Matrix Px_, Pc_, psi_;
  double lyap_residual_ = 0.0;
  Rows rows_;
};

}  // namespace smpc::mpc_striped

#endif  // SMPC_CORE_MPC_STRIPED_HPP_
