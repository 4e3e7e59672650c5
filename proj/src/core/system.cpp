#include "system.hpp"

#include "error.hpp"

namespace smpc {

void LinearSystem::validate() const
{
  require_finite(A, "A");
  require_finite(B, "B");
  require_finite(D, "D");
  if (A.rows() == 0 || A.rows() != A.cols()) { throw Error("dimension", "A must be square and nonempty"); }
  if (B.rows() != A.rows() || B.cols() == 0) { throw Error("dimension", "B must have as many rows as A"); }
  if (D.rows() != A.rows() || D.cols() == 0) { throw Error("dimension", "D must have as many rows as A"); }
}

LinearFeedbackController::LinearFeedbackController(LinearSystem sys, Matrix K) : sys_(std::move(sys)), K_(std::move(K))
{
  sys_.validate();
  if (K_.rows() != sys_.m() || K_.cols() != sys_.n()) { throw Error("dimension", "gain must be m x n"); }
}

ControlResult LinearFeedbackController::control(const Vector & x) const
{
  if (x.size() != sys_.n()) { throw Error("dimension", "state has wrong dimension"); }
  ControlResult r;
  r.u = K_ * x;
  r.feasible = true;
  r.status = solver::QpStatus::optimal;
  r.correction = Vector::Zero(sys_.m());
  r.fast_path = true;
  return r;
}

}  // namespace smpc
