#ifndef SMPC_CORE_SYSTEM_HPP_
#define SMPC_CORE_SYSTEM_HPP_

#include <string>

#include "linalg.hpp"
#include "solver.hpp"

namespace smpc {

/// x+ = A x + B u + D w.
struct LinearSystem
{
  Matrix A;
  Matrix B;
  Matrix D;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index nw() const { return D.cols(); }

  /// Throws Error("dimension") / Error("non_finite").
  void validate() const;
  Vector step(const Vector & x, const Vector & u, const Vector & w) const { return A * x + B * u + D * w; }
};

struct ControlResult
{
  Vector u;
  bool feasible = false;
  solver::QpStatus status = solver::QpStatus::infeasible;
  double objective = 0.0;
  /// Deviation from the linear law: v_0 - Kx (disturbance-affine) or c_0 (striped).
  Vector correction;
  /// True when the unconstrained optimum was feasible and no QP was solved.
  bool fast_path = false;
};

/// Receding-horizon state feedback; control() must be safe to call concurrently.
class Controller
{
public:
  virtual ~Controller() = default;
  virtual const LinearSystem & system() const = 0;
  /// Terminal gain K of u = Kx.
  virtual const Matrix & gain() const = 0;
  virtual ControlResult control(const Vector & x) const = 0;
  virtual std::string kind() const = 0;
};

/// u = Kx everywhere.
class LinearFeedbackController : public Controller
{
public:
  LinearFeedbackController(LinearSystem sys, Matrix K);

  const LinearSystem & system() const override { return sys_; }
  const Matrix & gain() const override { return K_; }
  ControlResult control(const Vector & x) const override;
  std::string kind() const override { return "linear"; }

private:
  LinearSystem sys_;
  Matrix K_;
};

}  // namespace smpc

#endif  // SMPC_CORE_SYSTEM_HPP_
