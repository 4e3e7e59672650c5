#ifndef SMPC_CORE_LINALG_HPP_
#define SMPC_CORE_LINALG_HPP_

#include <Eigen/Dense>

#include <string_view>

namespace smpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Throws smpc::Error("non_finite") if any entry is NaN or Inf.
void require_finite(const Matrix & m, std::string_view what);

}  // namespace smpc

#endif  // SMPC_CORE_LINALG_HPP_
