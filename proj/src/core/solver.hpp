#ifndef SMPC_CORE_SOLVER_HPP_
#define SMPC_CORE_SOLVER_HPP_

#include "linalg.hpp"

namespace smpc::solver {

/**
 * @brief Dense convex QP
 *
 *   min  1/2 x' H x + g' x + constant
 *   s.t. ineq_a x <= ineq_b,  eq_a x = eq_b
 *
 * A zero Hessian gives an LP. Empty constraint blocks may be left
 * default-constructed (0 rows).
 */
struct QProblem
{
  Matrix hessian;
  Vector gradient;
  double constant = 0.0;
  Matrix ineq_a;
  Vector ineq_b;
  Matrix eq_a;
  Vector eq_b;

  Eigen::Index dim() const { return gradient.size(); }
  /// Throws Error("dimension") / Error("asymmetric") if malformed.
  void validate() const;
};

enum class QpStatus { optimal, infeasible, unbounded, max_iter };

const char * to_string(QpStatus status);

struct QPSolution
{
  Vector x;
  double objective = 0.0;
  QpStatus status = QpStatus::max_iter;
  double kkt_residual = 0.0;
  Vector ineq_dual;
  Vector eq_dual;
  int iterations = 0;
};

struct QpSettings
{
  double tolerance = 1e-9;       ///< primal/dual residual and complementarity target
  int max_iterations = 200;
  double regularization = 1e-10; ///< proximal term added to the Hessian
  double divergence = 1e12;      ///< iterate magnitude treated as divergence
};

/// x = particular + nullspace * y parameterises {x : E x = e}.
struct EqualityReduction
{
  Vector particular;
  Matrix nullspace;
  double residual = 0.0;
  bool consistent = true;
};

EqualityReduction reduce_equalities(const Matrix & eq_a, const Vector & eq_b, double tol = 1e-9);

/**
 * Primal-dual interior point method (Mehrotra predictor-corrector) on the
 * inequality form; equality constraints are eliminated through a nullspace
 * basis first. The solver owns its workspace and is not reentrant.
 */
class QpSolver
{
public:
  explicit QpSolver(QpSettings settings = {}) : settings_(settings) {}

  QPSolution solve(const QProblem & problem);

  const QpSettings & settings() const { return settings_; }

private:
  struct Workspace
  {
    Matrix kkt;
    Matrix scaled_a;
    Vector s, z, dx, ds, dz, rd, rp, rc, w;
  };

  QpSettings settings_;
  Workspace ws_;
};

QPSolution solve_qp(const QProblem & problem, const QpSettings & settings = {});

struct Feasibility
{
  bool feasible = false;
  Vector witness;
  double phase1_objective = 0.0;  ///< min over x of max_i (a_i x - b_i), clipped below at -1
  QpStatus status = QpStatus::max_iter;
};

/// Phase-1 LP for {x : A x <= b, E x = e}. Throws Error("max_iter") if the
/// phase-1 problem itself fails to converge.
Feasibility solve_lp_feasibility(const Matrix & ineq_a, const Vector & ineq_b, const Matrix & eq_a,
                                 const Vector & eq_b, const QpSettings & settings = {});

}  // namespace smpc::solver

#endif  // SMPC_CORE_SOLVER_HPP_
