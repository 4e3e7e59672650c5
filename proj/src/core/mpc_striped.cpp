#include "mpc_striped.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"

namespace smpc::mpc_striped {

namespace {

constexpr int kMaxTail = 200;

Matrix block_diag(const Matrix & a, const Matrix & b)
{
  Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

}  // namespace

StripedController::StripedController(const StripedConfig & cfg)
    : sys_(cfg.system), N_(cfg.horizon), Q_(cfg.Q), R_(cfg.R), box_(cfg.domain_box)
{
  sys_.validate();
  const Eigen::Index n = sys_.n(), m = sys_.m(), nw = sys_.nw();
  if (N_ < 1) { throw Error("schema", "horizon must be at least 1"); }
  if (cfg.tail_horizon < 0) { throw Error("schema", "tail horizon must be non-negative"); }
  if (!cfg.W) { throw Error("schema", "striped controller needs a disturbance model"); }
  if (cfg.W->dim() != nw) { throw Error("dimension", "disturbance model must match the columns of D"); }
  W_ = cfg.W->support();
  if (Q_.rows() != n || Q_.cols() != n || R_.rows() != m || R_.cols() != m) {
    throw Error("dimension", "cost matrices have wrong size");
  }
  if (!numerics::is_positive_definite(Q_) || !numerics::is_positive_definite(R_)) {
    throw Error("cost_not_pd", "striped controller needs Q and R positive definite");
  }
  if (box_.dim() != n || !sets::is_bounded(box_) || !sets::contains_origin_in_interior(box_)) {
    throw Error("bad_constraints", "domain box must be bounded with the origin in its interior");
  }
  for (const auto & c : cfg.constraints) {
    if (c.f.size() != n || c.g.size() != m) { throw Error("dimension", "constraint (f, g) has wrong size"); }
    if (!(c.p > 0.0 && c.p <= 1.0)) { throw Error("domain", "constraint probability must lie in (0, 1]"); }
  }

  riccati_ = numerics::solve_dare(sys_.A, sys_.B, Q_, R_);
  const Matrix & K = riccati_.K;
  acl_ = sys_.A + sys_.B * K;

  cons_ = cfg.constraints;
  for (Eigen::Index k = 0; k < box_.H().rows(); ++k) {
    cons_.push_back({box_.H().row(k).transpose() / box_.h()(k), Vector::Zero(m), 1.0});
  }
  q0_.resize(static_cast<Eigen::Index>(cons_.size()));
  for (std::size_t k = 0; k < cons_.size(); ++k) {
    const auto & c = cons_[k];
    q0_(static_cast<Eigen::Index>(k)) =
        c.p >= 1.0 ? sets::support(W_, sys_.D.transpose() * c.f)
                   : uncertainty::tail_quantile(*cfg.W, c.f, sys_.D, c.p, cfg.quantile_samples, cfg.quantile_seed);
  }

  if (!cfg.stripe_gains.empty()) {
    if (static_cast<int>(cfg.stripe_gains.size()) != N_ - 1) {
      throw Error("dimension", "stripe gain override needs N - 1 matrices");
    }
    for (const Matrix & l : cfg.stripe_gains) {
      if (l.rows() != m || l.cols() != nw) { throw Error("dimension", "stripe gain has wrong size"); }
    }
    L_ = cfg.stripe_gains;
  } else {
    synthesize_stripes(cfg.constraints);
  }

  // Cumulative tightenings for every step that can be needed.
  const int max_steps = N_ + kMaxTail + 1;
  const Matrix lags = lag_bounds(max_steps);
  tight_.resize(lags.rows(), max_steps);
  tight_.col(0) = lags.col(0);
  for (int i = 1; i < max_steps; ++i) { tight_.col(i) = tight_.col(i - 1) + lags.col(i); }

  int tail = cfg.tail_horizon;
  if (tail == 0) {
    int start = 1;
    try {
      start = std::max(1, sets::mrpi_outer(acl_, sys_.D, W_, cfg.tail_epsilon).truncation());
    } catch (const Error & e) {
      if (e.code() != "singular") { throw; }
    }
    tail = start;
    while (tail <= kMaxTail && !tail_redundant(N_ + tail)) { ++tail; }
    if (tail > kMaxTail) { throw Error("tail_horizon", "no tail horizon makes the constraint tail redundant"); }
  } else if (tail > kMaxTail) {
    throw Error("schema", "tail horizon too large");
  }
  N2_ = tail;
  tight_.conservativeResize(Eigen::NoChange, N_ + N2_);
  if (tight_.maxCoeff() >= 1.0) {
    throw Error("tightening_infeasible", "a constraint tightening reaches 1; constraint cannot hold at its level");
  }
  rows_ = build_rows(N_ + N2_);

  // Psi = [[A+BK, BE], [0, M]] with E picking c_0 and M the block shift.
  const Eigen::Index nc = N_ * m;
  Matrix E = Matrix::Zero(m, nc);
  E.leftCols(m).setIdentity();
  Matrix shift = Matrix::Zero(nc, nc);
  if (N_ > 1) { shift.topRightCorner(nc - m, nc - m).setIdentity(); }
  psi_ = Matrix::Zero(n + nc, n + nc);
  psi_.topLeftCorner(n, n) = acl_;
  psi_.topRightCorner(n, nc) = sys_.B * E;
  psi_.bottomRightCorner(nc, nc) = shift;
  Matrix rhs(n + nc, n + nc);
  rhs.topLeftCorner(n, n) = Q_ + K.transpose() * R_ * K;
  rhs.topRightCorner(n, nc) = K.transpose() * R_ * E;
  rhs.bottomLeftCorner(nc, n) = E.transpose() * R_ * K;
  rhs.bottomRightCorner(nc, nc) = E.transpose() * R_ * E;
  const Matrix X = numerics::solve_dlyap(psi_, numerics::symmetrize(rhs));
  Px_ = X.topLeftCorner(n, n);
  Pc_ = X.bottomRightCorner(nc, nc);
  const Matrix bd = block_diag(Px_, Pc_);
  lyap_residual_ = (bd - psi_.transpose() * bd * psi_ - rhs).cwiseAbs().maxCoeff();
  if (lyap_residual_ > 1e-8) { throw Error("lyapunov_residual", "block Lyapunov equation residual too large"); }
  if (numerics::min_eigenvalue(Pc_) <= 0.0) { throw Error("lyapunov_residual", "Pc is not positive definite"); }

  if (solve(Vector::Zero(n), true).status != solver::QpStatus::optimal) {
    throw Error("infeasible_at_origin", "tightened problem is infeasible at the origin");
  }
}

void StripedController::synthesize_stripes(const std::vector<ChanceConstraint> & user)
{
  const Eigen::Index m = sys_.m(), nw = sys_.nw();
  const Matrix & K = riccati_.K;
  const Matrix & S = W_.H();
  const Eigen::Index ns = S.rows();
  const auto nc = static_cast<Eigen::Index>(user.size());
  const Eigen::Index nl = m * nw;
  const Eigen::Index dim = nl + nc * ns;
  constexpr double rho = 1e-6;

  L_.clear();
  Matrix phi = sys_.D;  // state response at the previous lag
  for (int j = 1; j < N_; ++j) {
    Matrix lj = Matrix::Zero(m, nw);
    if (nc > 0) {
      // min sum_c s'lam_c + rho |L|^2  s.t.  S'lam_c - L'b_c = const_c, lam >= 0.
      solver::QProblem qp;
      qp.hessian = Matrix::Zero(dim, dim);
      qp.hessian.topLeftCorner(nl, nl).diagonal().setConstant(2.0 * rho);
      qp.gradient = Vector::Zero(dim);
      qp.eq_a = Matrix::Zero(nc * nw, dim);
      qp.eq_b = Vector::Zero(nc * nw);
      for (Eigen::Index c = 0; c < nc; ++c) {
        const auto & con = user[static_cast<std::size_t>(c)];
        const Vector b = sys_.B.transpose() * con.f + con.g;
        const Vector base = (acl_ * phi).transpose() * con.f + (K * phi).transpose() * con.g;
        qp.gradient.segment(nl + c * ns, ns) = W_.h();
        for (Eigen::Index k = 0; k < nw; ++k) {
          const Eigen::Index r = c * nw + k;
          qp.eq_a.block(r, nl + c * ns, 1, ns) = S.col(k).transpose();
          for (Eigen::Index a = 0; a < m; ++a) { qp.eq_a(r, a + k * m) = -b(a); }
          qp.eq_b(r) = base(k);
        }
      }
      qp.ineq_a = Matrix::Zero(nc * ns, dim);
      qp.ineq_a.rightCols(nc * ns) = -Matrix::Identity(nc * ns, nc * ns);
      qp.ineq_b = Vector::Zero(nc * ns);
      const auto sol = solver::solve_qp(qp);
      if (sol.status == solver::QpStatus::optimal) {
        for (Eigen::Index k = 0; k < nw; ++k) {
          for (Eigen::Index a = 0; a < m; ++a) { lj(a, k) = sol.x(a + k * m); }
        }
      }
    }
    L_.push_back(lj);
    phi = acl_ * phi + sys_.B * lj;
  }
}

Matrix StripedController::lag_bounds(int lags) const
{
  const Matrix & K = riccati_.K;
  const auto nc = static_cast<Eigen::Index>(cons_.size());
  Matrix out(nc, lags);
  out.col(0) = q0_;
  Matrix phi = sys_.D;   // striped state response, lag r - 1
  Matrix pure = sys_.D;  // pure-K state response, lag r - 1
  for (int r = 1; r < lags; ++r) {
    const bool has_l = r <= N_ - 1;
    const Matrix lr = has_l ? L_[static_cast<std::size_t>(r - 1)] : Matrix::Zero(sys_.m(), sys_.nw());
    const Matrix phi_next = acl_ * phi + sys_.B * lr;
    const Matrix u_striped = K * phi + lr;
    const Matrix pure_next = acl_ * pure;
    const Matrix u_pure = K * pure;
    for (Eigen::Index k = 0; k < nc; ++k) {
      const auto & c = cons_[static_cast<std::size_t>(k)];
      const double hs = sets::support(W_, phi_next.transpose() * c.f + u_striped.transpose() * c.g);
      const double hp = sets::support(W_, pure_next.transpose() * c.f + u_pure.transpose() * c.g);
      out(k, r) = std::max(hs, hp);
    }
    phi = phi_next;
    pure = pure_next;
  }
  return out;
}

StripedController::Rows StripedController::build_rows(int steps) const
{
  const Eigen::Index n = sys_.n(), m = sys_.m();
  const Eigen::Index nc = N_ * m;
  const auto ncons = static_cast<Eigen::Index>(cons_.size());
  const Matrix & K = riccati_.K;
  Rows rows;
  rows.gx.resize(steps * ncons, n);
  rows.gc.resize(steps * ncons, nc);
  rows.rhs.resize(steps * ncons);
  // Nominal x_i = ax x + ac c.
  Matrix ax = Matrix::Identity(n, n);
  Matrix ac = Matrix::Zero(n, nc);
  for (int i = 0; i < steps; ++i) {
    Matrix ux = K * ax;
    Matrix uc = K * ac;
    if (i < N_) { uc.middleCols(i * m, m) += Matrix::Identity(m, m); }
    const Matrix ax_next = sys_.A * ax + sys_.B * ux;
    const Matrix ac_next = sys_.A * ac + sys_.B * uc;
    for (Eigen::Index k = 0; k < ncons; ++k) {
      const auto & c = cons_[static_cast<std::size_t>(k)];
      const Eigen::Index r = i * ncons + k;
      rows.gx.row(r) = c.f.transpose() * ax_next + c.g.transpose() * ux;
      rows.gc.row(r) = c.f.transpose() * ac_next + c.g.transpose() * uc;
      rows.rhs(r) = 1.0 - tight_(k, i);
    }
    ax = ax_next;
    ac = ac_next;
  }
  return rows;
}

bool StripedController::tail_redundant(int steps) const
{
  const Eigen::Index n = sys_.n();
  const auto ncons = static_cast<Eigen::Index>(cons_.size());
  const Rows all = build_rows(steps + 1);
  const Eigen::Index body = steps * ncons;
  const Eigen::Index dim = n + all.gc.cols();
  const Eigen::Index nbox = box_.H().rows();

  solver::QProblem lp;
  lp.hessian = Matrix::Zero(dim, dim);
  lp.ineq_a.resize(body + nbox, dim);
  lp.ineq_a.topRows(body) << all.gx.topRows(body), all.gc.topRows(body);
  lp.ineq_a.bottomRows(nbox) << box_.H(), Matrix::Zero(nbox, all.gc.cols());
  lp.ineq_b.resize(body + nbox);
  lp.ineq_b << all.rhs.head(body), box_.h();
  for (Eigen::Index k = 0; k < ncons; ++k) {
    const Eigen::Index r = body + k;
    Vector a(dim);
    a << all.gx.row(r).transpose(), all.gc.row(r).transpose();
    lp.gradient = -a;
    const auto sol = solver::solve_qp(lp);
    if (sol.status == solver::QpStatus::infeasible) { return true; }
    if (sol.status != solver::QpStatus::optimal) { return false; }
    if (a.dot(sol.x) > all.rhs(r) + 1e-9) { return false; }
  }
  return true;
}

StripedSolution StripedController::solve(const Vector & x, bool force_qp) const
{
  if (x.size() != sys_.n()) { throw Error("dimension", "state has wrong dimension"); }
  StripedSolution out;
  const Eigen::Index nc = N_ * sys_.m();
  if (!sets::contains(box_, x)) { return out; }
  const Vector slack = rows_.rhs - rows_.gx * x;
  if (!force_qp && (slack.array() >= 0.0).all()) {
    out.status = solver::QpStatus::optimal;
    out.c = Vector::Zero(nc);
    out.value = x.dot(Px_ * x);
    out.fast_path = true;
    return out;
  }
  solver::QProblem qp;
  qp.hessian = 2.0 * Pc_;
  qp.gradient = Vector::Zero(nc);
  qp.ineq_a = rows_.gc;
  qp.ineq_b = slack;
  solver::QpSolver solver;
  const auto sol = solver.solve(qp);
  out.status = sol.status;
  out.iterations = sol.iterations;
  if (sol.status != solver::QpStatus::optimal) { return out; }
  out.c = sol.x;
  out.value = x.dot(Px_ * x) + out.c.dot(Pc_ * out.c);
  return out;
}

ControlResult StripedController::control(const Vector & x) const
{
  const StripedSolution sol = solve(x);
  ControlResult r;
  r.status = sol.status;
  r.feasible = sol.status == solver::QpStatus::optimal;
  r.fast_path = sol.fast_path;
  if (!r.feasible) { return r; }
  r.correction = sol.c.head(sys_.m());
  r.u = riccati_.K * x + r.correction;
  r.objective = sol.value;
  return r;
}

double StripedController::value(const Vector & x) const
{
  const StripedSolution sol = solve(x);
  return sol.status == solver::QpStatus::optimal ? sol.value : std::numeric_limits<double>::infinity();
}

double StripedController::constraint_violation(const Vector & x, const Vector & c) const
{
  return (rows_.gx * x + rows_.gc * c - rows_.rhs).maxCoeff();
}

bool StripedController::in_terminal_region(const Vector & x) const
{
  const StripedSolution sol = solve(x);
  return sol.status == solver::QpStatus::optimal && sol.c.norm() <= 1e-7;
}

}  // namespace smpc::mpc_striped
