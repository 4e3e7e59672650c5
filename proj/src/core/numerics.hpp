#ifndef SMPC_CORE_NUMERICS_HPP_
#define SMPC_CORE_NUMERICS_HPP_

#include "linalg.hpp"

namespace smpc::numerics {

/// Margin used by is_schur: rho(A) must be below 1 - kSchurMargin.
inline constexpr double kSchurMargin = 1e-9;

/// Largest eigenvalue modulus. Throws on non-square input or when the
/// eigen-decomposition fails to converge.
double spectral_radius(const Matrix & a);

bool is_schur(const Matrix & a);

/// Solves X = Acl' X Acl + S for stable Acl (Kronecker-vectorised dense LU,
/// supported for n <= 20). The result is symmetrised.
Matrix solve_dlyap(const Matrix & acl, const Matrix & s);

struct DareOptions
{
  double tolerance = 1e-12;  ///< relative change between iterates
  int max_iterations = 100000;
};

struct RiccatiSolution
{
  Matrix P;
  Matrix K;          ///< u = K x, K = -(R + B'PB)^{-1} B'PA
  double residual;   ///< max-abs residual of the Riccati equation
  int iterations;
};

/**
 * @brief Discrete algebraic Riccati equation by value iteration.
 *
 * Iterates P <- Q + A'PA - A'PB (R + B'PB)^{-1} B'PA from P = Q until
 * successive iterates agree to the relative tolerance. Throws
 * Error("dare_failed") when the cap is hit or the resulting closed loop
 * A + BK is not Schur.
 */
RiccatiSolution solve_dare(const Matrix & a, const Matrix & b, const Matrix & q, const Matrix & r,
                           const DareOptions & opts = {});

/// Max-abs residual of P - (Q + A'PA - K'(R + B'PB)K).
double riccati_residual(const Matrix & a, const Matrix & b, const Matrix & q, const Matrix & r,
                        const Matrix & p, const Matrix & k);

/// Stationary second moment of x+ = Acl x + D w with Cov(w) = sigma_w.
Matrix stationary_covariance(const Matrix & acl, const Matrix & d, const Matrix & sigma_w);

/// Stationary expected stage cost trace((Q + K'RK) Sigma) of the loop u = Kx.
double terminal_stage_cost(const Matrix & acl, const Matrix & d, const Matrix & sigma_w,
                           const Matrix & q, const Matrix & r, const Matrix & k);

Matrix symmetrize(const Matrix & m);
bool is_symmetric(const Matrix & m, double rel_tol = 1e-10);
double min_eigenvalue(const Matrix & symmetric);
bool is_positive_definite(const Matrix & m);
bool is_positive_semidefinite(const Matrix & m, double tol = 1e-12);

/// Numerical rank of [D, AD, ..., A^{n-1}D].
int controllability_rank(const Matrix & a, const Matrix & d);

}  // namespace smpc::numerics

#endif  // SMPC_CORE_NUMERICS_HPP_
