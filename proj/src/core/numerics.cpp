#include "numerics.hpp"

#include <cmath>
#include <string>

#include "error.hpp"

namespace smpc {

void require_finite(const Matrix & m, std::string_view what)
{
  if (!m.allFinite()) { throw Error("non_finite", std::string(what) + " has non-finite entries"); }
}

}  // namespace smpc

namespace smpc::numerics {

namespace {

void require_square(const Matrix & m, std::string_view what)
{
  if (m.rows() != m.cols()) {
    throw Error("not_square", std::string(what) + " must be square, got " +
                                std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

}  // namespace

double spectral_radius(const Matrix & a)
{
  require_square(a, "spectral_radius input");
  require_finite(a, "spectral_radius input");
  if (a.rows() == 0) { return 0.0; }
  if (a.rows() == 1) { return std::abs(a(0, 0)); }
  Eigen::EigenSolver<Matrix> es(a, false);
  if (es.info() != Eigen::Success) {
    throw Error("not_converged", "eigenvalue iteration did not converge");
  }
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_schur(const Matrix & a) { return spectral_radius(a) < 1.0 - kSchurMargin; }

Matrix symmetrize(const Matrix & m) { return 0.5 * (m + m.transpose()); }

bool is_symmetric(const Matrix & m, double rel_tol)
{
  if (m.rows() != m.cols()) { return false; }
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

double min_eigenvalue(const Matrix & symmetric)
{
  require_square(symmetric, "min_eigenvalue input");
  if (symmetric.rows() == 0) { return 0.0; }
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(symmetric), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

bool is_positive_definite(const Matrix & m)
{
  if (m.rows() != m.cols() || !m.allFinite() || !is_symmetric(m, 1e-10)) { return false; }
  return min_eigenvalue(m) > 0.0;
}

bool is_positive_semidefinite(const Matrix & m, double tol)
{
  if (m.rows() != m.cols() || !m.allFinite() || !is_symmetric(m, 1e-10)) { return false; }
  return min_eigenvalue(m) >= -tol * (1.0 + m.cwiseAbs().maxCoeff());
}

Matrix solve_dlyap(const Matrix & acl, const Matrix & s)
{
  require_square(acl, "Lyapunov dynamics");
  require_square(s, "Lyapunov right-hand side");
  require_finite(acl, "Lyapunov dynamics");
  require_finite(s, "Lyapunov right-hand side");
  const Eigen::Index n = acl.rows();
  if (s.rows() != n) { throw Error("dimension", "Lyapunov operands have mismatched sizes"); }
  if (n > 20) { throw Error("too_large", "Kronecker Lyapunov solve supports n <= 20"); }
  if (!is_schur(acl)) { throw Error("unstable", "Lyapunov dynamics are not Schur stable"); }
  if (!is_symmetric(s, 1e-10)) { throw Error("asymmetric", "Lyapunov right-hand side is not symmetric"); }

  // vec(A' X A) = (A' kron A') vec(X) with column-major vec.
  const Eigen::Index nn = n * n;
  Matrix lhs = Matrix::Identity(nn, nn);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      lhs.block(i * n, j * n, n, n) -= acl(j, i) * acl.transpose();
    }
  }
  const Vector rhs = Eigen::Map<const Vector>(s.data(), nn);
  const Vector sol = lhs.partialPivLu().solve(rhs);
  Matrix x = Eigen::Map<const Matrix>(sol.data(), n, n);
  return symmetrize(x);
}

double riccati_residual(const Matrix & a, const Matrix & b, const Matrix & q, const Matrix & r,
                        const Matrix & p, const Matrix & k)
{
  const Matrix rhs = q + a.transpose() * p * a - k.transpose() * (r + b.transpose() * p * b) * k;
  return (p - rhs).cwiseAbs().maxCoeff();
}

RiccatiSolution solve_dare(const Matrix & a, const Matrix & b, const Matrix & q, const Matrix & r,
                           const DareOptions & opts)
{
  require_square(a, "A");
  require_square(q, "Q");
  require_square(r, "R");
  for (const auto * m : {&a, &b, &q, &r}) { require_finite(*m, "Riccati data"); }
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.cols();
  if (b.rows() != n || q.rows() != n || r.rows() != m) {
    throw Error("dimension", "Riccati data dimensions are inconsistent");
  }
  if (!is_positive_semidefinite(q)) { throw Error("cost_not_pd", "Q must be symmetric PSD"); }
  if (!is_positive_definite(r)) { throw Error("cost_not_pd", "R must be symmetric PD"); }

  Matrix p = symmetrize(q);
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    const Matrix bp = b.transpose() * p;
    const Matrix gain = (r + bp * b).ldlt().solve(bp * a);
    Matrix next = symmetrize(q + a.transpose() * p * a - (bp * a).transpose() * gain);
    const double diff = (next - p).cwiseAbs().maxCoeff();
    const double scale = next.cwiseAbs().maxCoeff();
    p = std::move(next);
    if (!p.allFinite()) { break; }
    if (diff <= opts.tolerance * std::max(scale, 1e-300)) {
      ++it;
      break;
    }
  }
  if (it >= opts.max_iterations || !p.allFinite()) {
    throw Error("dare_failed", "Riccati iteration did not converge; (A,B) may not be stabilizable");
  }
  const Matrix k = -(r + b.transpose() * p * b).ldlt().solve(b.transpose() * p * a);
  if (!is_schur(a + b * k)) {
    throw Error("dare_failed", "Riccati gain does not stabilize A + BK; (A, Q^1/2) may not be detectable");
  }
  return {p, k, riccati_residual(a, b, q, r, p, k), it};
}

Matrix stationary_covariance(const Matrix & acl, const Matrix & d, const Matrix & sigma_w)
{
  if (d.rows() != acl.rows() || d.cols() != sigma_w.rows()) {
    throw Error("dimension", "stationary covariance operands have mismatched sizes");
  }
  // Sigma = Acl Sigma Acl' + D Sw D'
  return solve_dlyap(acl.transpose(), symmetrize(d * sigma_w * d.transpose()));
}

double terminal_stage_cost(const Matrix & acl, const Matrix & d, const Matrix & sigma_w,
                           const Matrix & q, const Matrix & r, const Matrix & k)
{
  const Matrix sigma = stationary_covariance(acl, d, sigma_w);
  return ((q + k.transpose() * r * k) * sigma).trace();
}

int controllability_rank(const Matrix & a, const Matrix & d)
{
  const Eigen::Index n = a.rows();
  if (n == 0) { return 0; }
  Matrix ctrb(n, n * d.cols());
  Matrix block = d;
  for (Eigen::Index i = 0; i < n; ++i) {
    ctrb.middleCols(i * d.cols(), d.cols()) = block;
    block = a * block;
  }
  if (ctrb.cols() == 0) { return 0; }
  Eigen::JacobiSVD<Matrix> svd(ctrb);
  const auto sv = svd.singularValues();
  const double tol = std::max(1e-12, 1e-10 * sv(0));
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) { ++rank; }
  }
  return rank;
}

}  // namespace smpc::numerics
