#include "mpc_da.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"

namespace smpc::mpc_da {

namespace {

Matrix matrix_power(const Matrix & a, int k)
{
  Matrix out = Matrix::Identity(a.rows(), a.cols());
  for (int i = 0; i < k; ++i) { out = a * out; }
  return out;
}

Matrix block_diag_repeat(const Matrix & block, int count, const Matrix & last = Matrix())
{
  const Eigen::Index r = block.rows();
  const Eigen::Index total = r * count + last.rows();
  Matrix out = Matrix::Zero(total, total);
  for (int i = 0; i < count; ++i) { out.block(i * r, i * r, r, r) = block; }
  if (last.size() > 0) { out.bottomRightCorner(last.rows(), last.cols()) = last; }
  return out;
}

}  // namespace

DAController::DAController(const DAConfig & cfg)
    : sys_(cfg.system), N_(cfg.horizon), Q_(cfg.Q), R_(cfg.R), Z_(cfg.Z), W_(cfg.W), sigma_w_(cfg.w_covariance)
{
  sys_.validate();
  const Eigen::Index n = sys_.n(), m = sys_.m(), nw = sys_.nw();
  if (N_ < 1) { throw Error("schema", "horizon must be at least 1"); }
  if (Z_.dim() != n + m) { throw Error("dimension", "Z must live in (x, u) space"); }
  if (W_.dim() != nw) { throw Error("dimension", "W must match the columns of D"); }
  if (sigma_w_.rows() != nw || sigma_w_.cols() != nw || !numerics::is_positive_semidefinite(sigma_w_, 1e-12)) {
    throw Error("dimension", "disturbance covariance must be nw x nw PSD");
  }
  if (!sets::contains_origin_in_interior(Z_) || !sets::is_bounded(Z_)) {
    throw Error("bad_constraints", "Z must be bounded with the origin in its interior");
  }

  riccati_ = numerics::solve_dare(sys_.A, sys_.B, Q_, R_);
  const Matrix acl = sys_.A + sys_.B * riccati_.K;

  // Xc = {x : (F + G K) x <= z}.
  const Matrix fk = Z_.H().leftCols(n) + Z_.H().rightCols(m) * riccati_.K;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < fk.rows(); ++i) {
    if (fk.row(i).cwiseAbs().maxCoeff() > 0.0) { keep.push_back(i); }
  }
  Matrix xc_h(static_cast<Eigen::Index>(keep.size()), n);
  Vector xc_o(xc_h.rows());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    xc_h.row(static_cast<Eigen::Index>(k)) = fk.row(keep[k]);
    xc_o(static_cast<Eigen::Index>(k)) = Z_.h()(keep[k]);
  }
  xf_ = sets::max_rpi(acl, sys_.D, W_, sets::HPolytope(xc_h, xc_o));
  controllable_ = numerics::controllability_rank(acl, sys_.D) == n;

  build_template();

  if (solve(Vector::Zero(n), true).status != solver::QpStatus::optimal) {
    throw Error("infeasible_at_origin", "robust MPC problem is infeasible at x = 0");
  }
}

void DAController::build_template()
{
  const Eigen::Index n = sys_.n(), m = sys_.m(), nw = sys_.nw();
  const int N = N_;
  const Matrix & A = sys_.A;

  Abar_ = Matrix::Zero((N + 1) * n, n);
  Bbar_ = Matrix::Zero((N + 1) * n, N * m);
  Dbar_ = Matrix::Zero((N + 1) * n, N * nw);
  for (int i = 0; i <= N; ++i) {
    Abar_.middleRows(i * n, n) = matrix_power(A, i);
    for (int l = 0; l < i; ++l) {
      const Matrix ap = matrix_power(A, i - 1 - l);
      Bbar_.block(i * n, l * m, n, m) = ap * sys_.B;
      Dbar_.block(i * n, l * nw, n, nw) = ap * sys_.D;
    }
  }
  Qbar_ = block_diag_repeat(Q_, N, riccati_.P);
  Rbar_ = block_diag_repeat(R_, N);
  Sbar_ = block_diag_repeat(sigma_w_, N);

  // Robust rows: Z at stages 0..N-1, Xf at stage N.
  const Eigen::Index rz = Z_.rows(), rf = xf_.rows();
  const Eigen::Index nrows = N * rz + rf;
  Matrix fsel = Matrix::Zero(nrows, (N + 1) * n);
  Matrix gsel = Matrix::Zero(nrows, N * m);
  z_rows_.resize(nrows);
  row_stage_.assign(static_cast<std::size_t>(nrows), 0);
  for (int i = 0; i < N; ++i) {
    for (Eigen::Index r = 0; r < rz; ++r) {
      const Eigen::Index row = i * rz + r;
      fsel.block(row, i * n, 1, n) = Z_.H().block(r, 0, 1, n);
      gsel.block(row, i * m, 1, m) = Z_.H().block(r, n, 1, m);
      z_rows_(row) = Z_.h()(r);
      row_stage_[static_cast<std::size_t>(row)] = i;
    }
  }
  for (Eigen::Index r = 0; r < rf; ++r) {
    const Eigen::Index row = N * rz + r;
    fsel.block(row, N * n, 1, n) = xf_.H().row(r);
    z_rows_(row) = xf_.h()(r);
    row_stage_[static_cast<std::size_t>(row)] = N;
  }
  row_ax_ = fsel * Abar_;
  row_gamma_ = fsel * Bbar_ + gsel;
  row_coef0_ = fsel * Dbar_;

  params_.clear();
  for (int i = 1; i < N; ++i) {
    for (int j = 0; j < i; ++j) {
      for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = 0; b < nw; ++b) { params_.push_back({i * m + a, j * nw + b}); }
      }
    }
  }
  n_v_ = N * m;
  n_m_ = static_cast<Eigen::Index>(params_.size());

  // One multiplier block (W.rows() entries) per robust row and earlier disturbance.
  const Eigen::Index rw = W_.rows();
  std::vector<std::vector<Eigen::Index>> lam(static_cast<std::size_t>(nrows));
  n_lambda_ = 0;
  for (Eigen::Index r = 0; r < nrows; ++r) {
    for (int j = 0; j < row_stage_[static_cast<std::size_t>(r)]; ++j) {
      lam[static_cast<std::size_t>(r)].push_back(n_v_ + n_m_ + n_lambda_);
      n_lambda_ += rw;
    }
  }
  n_theta_ = n_v_ + n_m_ + n_lambda_;

  // W' lambda_{r,j} = coefficient of w_j in row r.
  Eigen::Index neq = 0;
  for (const auto & l : lam) { neq += static_cast<Eigen::Index>(l.size()) * nw; }
  Matrix eq = Matrix::Zero(neq, n_theta_);
  Vector eq_b(neq);
  Eigen::Index e = 0;
  for (Eigen::Index r = 0; r < nrows; ++r) {
    const auto & blocks = lam[static_cast<std::size_t>(r)];
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      for (Eigen::Index b = 0; b < nw; ++b, ++e) {
        eq.block(e, blocks[j], 1, rw) = W_.H().col(b).transpose();
        const Eigen::Index col = static_cast<Eigen::Index>(j) * nw + b;
        for (std::size_t p = 0; p < params_.size(); ++p) {
          if (params_[p].col == col) { eq(e, n_v_ + static_cast<Eigen::Index>(p)) = -row_gamma_(r, params_[p].row); }
        }
        eq_b(e) = row_coef0_(r, col);
      }
    }
  }

  // a_x x + Gamma v + sum_j s' lambda_{r,j} <= z, and lambda >= 0.
  Matrix ineq = Matrix::Zero(nrows + n_lambda_, n_theta_);
  ineq.topLeftCorner(nrows, n_v_) = row_gamma_;
  for (Eigen::Index r = 0; r < nrows; ++r) {
    for (Eigen::Index start : lam[static_cast<std::size_t>(r)]) { ineq.block(r, start, 1, rw) = W_.h().transpose(); }
  }
  ineq.bottomRightCorner(n_lambda_, n_lambda_) = -Matrix::Identity(n_lambda_, n_lambda_);
  Vector b0 = Vector::Zero(nrows + n_lambda_);
  b0.head(nrows) = z_rows_;
  ineq_bx_ = Matrix::Zero(nrows + n_lambda_, n);
  ineq_bx_.topRows(nrows) = row_ax_;

  // Expected cost.
  const Matrix hb = Bbar_.transpose() * Qbar_ * Bbar_ + Rbar_;
  H_ = Matrix::Zero(n_theta_, n_theta_);
  H_.topLeftCorner(n_v_, n_v_) = 2.0 * hb;
  const Matrix cross = Sbar_ * Dbar_.transpose() * Qbar_ * Bbar_;  // (N nw) x (N m)
  Vector g0 = Vector::Zero(n_theta_);
  for (Eigen::Index p = 0; p < n_m_; ++p) {
    const auto & pp = params_[static_cast<std::size_t>(p)];
    g0(n_v_ + p) = 2.0 * cross(pp.col, pp.row);
    for (Eigen::Index q = 0; q < n_m_; ++q) {
      const auto & qq = params_[static_cast<std::size_t>(q)];
      H_(n_v_ + p, n_v_ + q) = 2.0 * hb(pp.row, qq.row) * Sbar_(qq.col, pp.col);
    }
  }
  Gx_ = Matrix::Zero(n_theta_, n);
  Gx_.topRows(n_v_) = 2.0 * Bbar_.transpose() * Qbar_ * Abar_;
  Cx_ = Abar_.transpose() * Qbar_ * Abar_;
  c0_ = (Dbar_.transpose() * Qbar_ * Dbar_ * Sbar_).trace();

  const auto red = solver::reduce_equalities(eq, eq_b);
  if (!red.consistent) { throw Error("internal", "robust template equalities are inconsistent"); }
  theta_p_ = red.particular;
  Nz_ = red.nullspace;
  red_h_ = numerics::symmetrize(Nz_.transpose() * H_ * Nz_);
  red_gx_ = Nz_.transpose() * Gx_;
  red_g0_ = Nz_.transpose() * (H_ * theta_p_ + g0);
  red_ineq_ = ineq * Nz_;
  ineq_b0_ = b0 - ineq * theta_p_;

  // Unconstrained optimum and the constant worst-case offsets it induces.
  Kv_ = -hb.ldlt().solve(Bbar_.transpose() * Qbar_ * Abar_);
  Vector mu = Vector::Zero(n_m_);
  if (n_m_ > 0) {
    mu = H_.block(n_v_, n_v_, n_m_, n_m_).ldlt().solve(-g0.segment(n_v_, n_m_));
  }
  Vector theta_u = Vector::Zero(n_theta_);
  theta_u.segment(n_v_, n_m_) = mu;
  Mu_ = unpack_M(theta_u);
  const Matrix coef = row_gamma_ * Mu_ + row_coef0_;
  fast_offsets_ = Vector::Zero(nrows);
  for (Eigen::Index r = 0; r < nrows; ++r) {
    for (int j = 0; j < row_stage_[static_cast<std::size_t>(r)]; ++j) {
      fast_offsets_(r) += sets::support(W_, coef.block(r, j * nw, 1, nw).transpose());
    }
  }
  fast_ax_ = row_ax_ + row_gamma_ * Kv_;
}

Matrix DAController::unpack_M(const Vector & theta) const
{
  Matrix M = Matrix::Zero(N_ * sys_.m(), N_ * sys_.nw());
  for (std::size_t p = 0; p < params_.size(); ++p) {
    M(params_[p].row, params_[p].col) = theta(n_v_ + static_cast<Eigen::Index>(p));
  }
  return M;
}

DASolution DAController::solve(const Vector & x, bool force_qp) const
{
  if (x.size() != sys_.n()) { throw Error("dimension", "state has wrong dimension"); }
  DASolution out;
  if (!force_qp && ((fast_ax_ * x + fast_offsets_ - z_rows_).array() <= 0.0).all()) {
    out.status = solver::QpStatus::optimal;
    out.v = Kv_ * x;
    out.M = Mu_;
    out.objective = expected_cost(x, out.v, out.M);
    out.fast_path = true;
    return out;
  }
  solver::QProblem qp;
  qp.hessian = red_h_;
  qp.gradient = red_g0_ + red_gx_ * x;
  qp.ineq_a = red_ineq_;
  qp.ineq_b = ineq_b0_ - ineq_bx_ * x;
  solver::QpSolver solver;
  const auto sol = solver.solve(qp);
  out.status = sol.status;
  out.iterations = sol.iterations;
  if (sol.status != solver::QpStatus::optimal) { return out; }
  const Vector theta = theta_p_ + Nz_ * sol.x;
  out.v = theta.head(n_v_);
  out.M = unpack_M(theta);
  out.objective = expected_cost(x, out.v, out.M);
  return out;
}

ControlResult DAController::control(const Vector & x) const
{
  const DASolution sol = solve(x);
  ControlResult r;
  r.status = sol.status;
  r.feasible = sol.status == solver::QpStatus::optimal;
  r.fast_path = sol.fast_path;
  if (!r.feasible) { return r; }
  r.u = sol.v.head(sys_.m());
  r.objective = sol.objective;
  r.correction = r.u - riccati_.K * x;
  return r;
}

double DAController::expected_cost(const Vector & x, const Vector & v, const Matrix & M) const
{
  const Vector xs = Abar_ * x + Bbar_ * v;
  const Matrix fb = Bbar_ * M + Dbar_;
  return xs.dot(Qbar_ * xs) + v.dot(Rbar_ * v) + (fb.transpose() * Qbar_ * fb * Sbar_).trace() +
         (M.transpose() * Rbar_ * M * Sbar_).trace();
}

void DAController::rollout(const Vector & x, const Vector & v, const Matrix & M, const Vector & w, Vector & xs,
                           Vector & us) const
{
  us = v + M * w;
  xs = Abar_ * x + Bbar_ * us + Dbar_ * w;
}

double DAController::realized_cost(const Vector & x, const Vector & v, const Matrix & M, const Vector & w) const
{
  Vector xs, us;
  rollout(x, v, M, w, xs, us);
  return xs.dot(Qbar_ * xs) + us.dot(Rbar_ * us);
}

double DAController::robust_violation(const Vector & x, const Vector & v, const Matrix & M) const
{
  const Eigen::Index nw = sys_.nw();
  const Matrix coef = row_gamma_ * M + row_coef0_;
  const Vector nominal = row_ax_ * x + row_gamma_ * v - z_rows_;
  double worst = -std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < nominal.size(); ++r) {
    double val = nominal(r);
    for (int j = 0; j < row_stage_[static_cast<std::size_t>(r)]; ++j) {
      val += sets::support(W_, coef.block(r, j * nw, 1, nw).transpose());
    }
    worst = std::max(worst, val);
  }
  return worst;
}

}  // namespace smpc::mpc_da
