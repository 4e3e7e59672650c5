#ifndef SMPC_CORE_MPC_DA_HPP_
#define SMPC_CORE_MPC_DA_HPP_

#include <vector>

#include "numerics.hpp"
#include "sets.hpp"
#include "solver.hpp"
#include "system.hpp"

namespace smpc::mpc_da {

struct DAConfig
{
  LinearSystem system;
  int horizon = 0;
  Matrix Q;
  Matrix R;
  /// Joint constraint set over (x, u), dimension n + m.
  sets::HPolytope Z;
  /// Disturbance support and covariance.
  sets::HPolytope W;
  Matrix w_covariance;
};

struct DASolution
{
  solver::QpStatus status = solver::QpStatus::infeasible;
  Vector v;   ///< stacked open-loop moves v_0..v_{N-1}
  Matrix M;   ///< N m x N nw, strictly block lower triangular
  double objective = 0.0;  ///< expected cost of (v, M)
  bool fast_path = false;
  int iterations = 0;
};

/**
 * @brief Disturbance-affine robust MPC with expected quadratic cost.
 *
 * Predicted inputs u_i = v_i + sum_{j<i} M_{i,j} w_j. Constraints (x_i, u_i)
 * in Z and x_N in Xf hold for every disturbance sequence in W^N; each robust
 * row is encoded with LP-duality multipliers. The objective is the exact
 * expectation of sum (x'Qx + u'Ru) + x_N'Px_N.
 */
class DAController : public Controller
{
public:
  /// Throws Error("dare_failed"), Error("no_terminal_set"), Error("infeasible_at_origin"), ...
  explicit DAController(const DAConfig & cfg);

  const LinearSystem & system() const override { return sys_; }
  const Matrix & gain() const override { return riccati_.K; }
  ControlResult control(const Vector & x) const override;
  std::string kind() const override { return "da"; }

  DASolution solve(const Vector & x, bool force_qp = false) const;

  /// Exact E{J} of the policy (v, M) from x.
  double expected_cost(const Vector & x, const Vector & v, const Matrix & M) const;
  /// J along one disturbance sequence (stacked w_0..w_{N-1}).
  double realized_cost(const Vector & x, const Vector & v, const Matrix & M, const Vector & w) const;
  /// Predicted states x_0..x_N (stacked) and inputs under (v, M, w).
  void rollout(const Vector & x, const Vector & v, const Matrix & M, const Vector & w, Vector & xs,
               Vector & us) const;
  /// Worst-case constraint excess max_r [row_r(x, v, M) + h_{W^N}(coef_r) - z_r].
  double robust_violation(const Vector & x, const Vector & v, const Matrix & M) const;

  const numerics::RiccatiSolution & riccati() const { return riccati_; }
  const Matrix & P() const { return riccati_.P; }
  const sets::HPolytope & terminal_set() const { return xf_; }
  const sets::HPolytope & W() const { return W_; }
  const Matrix & Q() const { return Q_; }
  const Matrix & R() const { return R_; }
  const Matrix & w_covariance() const { return sigma_w_; }
  int horizon() const { return N_; }
  /// Assumption that (A + BK, D) is controllable; reported, not enforced.
  bool controllable() const { return controllable_; }
  /// Constant worst-case disturbance offsets of the robust rows under u = Kx predictions.
  const Vector & terminal_law_offsets() const { return fast_offsets_; }
  Eigen::Index decision_dim() const { return n_theta_; }
  Eigen::Index multiplier_count() const { return n_lambda_; }
  Eigen::Index robust_row_count() const { return z_rows_.size(); }

private:
  struct Param
  {
    Eigen::Index row;
    Eigen::Index col;
  };

  Matrix unpack_M(const Vector & theta) const;
  void build_template();

  LinearSystem sys_;
  int N_;
  Matrix Q_, R_;
  sets::HPolytope Z_;
  sets::HPolytope W_;
  Matrix sigma_w_;
  numerics::RiccatiSolution riccati_;
  sets::HPolytope xf_;
  bool controllable_ = false;

  // Prediction matrices.
  Matrix Abar_, Bbar_, Dbar_, Qbar_, Rbar_, Sbar_;
  // Robust rows: a_x x + Gamma v + (Gamma M + coef0) w <= z.
  Matrix row_ax_, row_gamma_, row_coef0_;
  Vector z_rows_;
  std::vector<int> row_stage_;
  std::vector<Param> params_;
  Eigen::Index n_v_ = 0, n_m_ = 0, n_lambda_ = 0, n_theta_ = 0;

  // Objective in theta: 1/2 t'Ht + (Gx x)'t + x'Cx x + c0.
  Matrix H_, Gx_, Cx_;
  double c0_ = 0.0;

  // Reduced template theta = theta_p + Nz y.
  Vector theta_p_;
  Matrix Nz_;
  Matrix red_h_, red_gx_;
  Vector red_g0_;
  Matrix red_ineq_;
  Matrix ineq_bx_;   // b(x) = ineq_b0 - ineq_bx x
  Vector ineq_b0_;

  // Unconstrained optimum: v = Kv x, M = Mu; fast check fast_ax x <= z - offsets.
  Matrix Kv_;
  Matrix Mu_;
  Matrix fast_ax_;
  Vector fast_offsets_;
};

}  // namespace smpc::mpc_da

#endif  // SMPC_CORE_MPC_DA_HPP_
