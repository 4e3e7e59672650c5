#include "solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "error.hpp"
#include "numerics.hpp"

namespace smpc::solver {

const char * to_string(QpStatus status)
{
  switch (status) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::unbounded: return "unbounded";
    case QpStatus::max_iter: return "max_iter";
  }
  return "unknown";
}

void QProblem::validate() const
{
  const Eigen::Index n = gradient.size();
  const bool has_h = hessian.size() > 0;
  if (has_h && (hessian.rows() != n || hessian.cols() != n)) {
    throw Error("dimension", "QP Hessian does not match gradient length");
  }
  if (ineq_a.rows() != ineq_b.size() || (ineq_a.rows() > 0 && ineq_a.cols() != n)) {
    throw Error("dimension", "QP inequality block is inconsistent");
  }
  if (eq_a.rows() != eq_b.size() || (eq_a.rows() > 0 && eq_a.cols() != n)) {
    throw Error("dimension", "QP equality block is inconsistent");
  }
  if (has_h && !numerics::is_symmetric(hessian, 1e-10)) {
    throw Error("asymmetric", "QP Hessian is not symmetric");
  }
}

EqualityReduction reduce_equalities(const Matrix & eq_a, const Vector & eq_b, double tol)
{
  const Eigen::Index n = eq_a.cols();
  EqualityReduction red;
  if (eq_a.rows() == 0) {
    red.particular = Vector::Zero(n);
    red.nullspace = Matrix::Identity(n, n);
    return red;
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(eq_a.transpose());
  qr.setThreshold(1e-11);
  const Eigen::Index rank = qr.rank();
  const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  red.nullspace = q.rightCols(n - rank);
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(eq_a);
  cod.setThreshold(1e-11);
  red.particular = cod.solve(eq_b);
  red.residual = (eq_a * red.particular - eq_b).lpNorm<Eigen::Infinity>();
  red.consistent = red.residual <= tol * (1.0 + eq_b.lpNorm<Eigen::Infinity>());
  return red;
}

namespace {

struct IpmResult
{
  Vector x;
  Vector z;
  QpStatus status = QpStatus::max_iter;
  int iterations = 0;
  bool diverged = false;
};

double max_step(const Vector & v, const Vector & dv)
{
  double alpha = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) { alpha = std::min(alpha, -v(i) / dv(i)); }
  }
  return alpha;
}

/// Mehrotra predictor-corrector on min 1/2 x'Hx + g'x s.t. A x <= b.
/// Rows of A are assumed nonzero and normalised.
IpmResult run_ipm(const Matrix & h, const Vector & g, const Matrix & a, const Vector & b,
                  const QpSettings & st)
{
  const Eigen::Index n = g.size();
  const Eigen::Index m = b.size();
  IpmResult res;

  Matrix hr = h;
  hr.diagonal().array() += st.regularization;

  if (m == 0) {
    res.x = -hr.ldlt().solve(g);
    const double rd = (h * res.x + g).lpNorm<Eigen::Infinity>();
    res.z = Vector(0);
    res.diverged = !res.x.allFinite() || res.x.lpNorm<Eigen::Infinity>() > st.divergence;
    if (res.diverged || rd > st.tolerance * (1.0 + g.lpNorm<Eigen::Infinity>())) {
      res.status = QpStatus::unbounded;
      res.diverged = true;
    } else {
      res.status = QpStatus::optimal;
    }
    return res;
  }

  const double bnorm = b.lpNorm<Eigen::Infinity>();
  const double gnorm = g.lpNorm<Eigen::Infinity>();

  // Starting point: least-squares fit to A x + 1 = b, then shift into the
  // positive orthant.
  Matrix kkt = hr;
  kkt.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
  Vector x = kkt.selfadjointView<Eigen::Lower>().ldlt().solve(
      -g + a.transpose() * (b - Vector::Ones(m)));
  if (!x.allFinite()) { x.setZero(); }
  Vector s = b - a * x;
  Vector z = Vector::Ones(m);
  const double smin = s.minCoeff();
  if (smin < 1e-2) { s.array() += 1e-2 - smin + (smin < 0 ? -0.5 * smin : 0.0); }
  {
    const double sz = s.dot(z);
    s.array() += 0.5 * sz / z.sum();
    z.array() += 0.5 * sz / s.sum();
  }

  Matrix scaled(m, n);
  Vector rd(n), rp(m), rc(m), dx(n), ds(m), dz(m), dxa(n), dsa(m), dza(m), w(m);

  // Degenerate problems can lose rd to rounding once mu is tiny; keep the
  // best iterate and accept it under a looser residual test.
  double best_merit = std::numeric_limits<double>::infinity();
  Vector best_x = x, best_z = z;
  bool best_ok = false;

  for (int it = 0; it < st.max_iterations; ++it) {
    res.iterations = it;
    rd.noalias() = h * x + g;
    rd.noalias() += a.transpose() * z;
    rp.noalias() = a * x + s - b;
    const double mu = s.dot(z) / static_cast<double>(m);
    const double dnorm = std::max({gnorm, (h * x).lpNorm<Eigen::Infinity>(),
                                   (a.transpose() * z).lpNorm<Eigen::Infinity>()});
    if (rp.lpNorm<Eigen::Infinity>() <= st.tolerance * (1.0 + bnorm) &&
        rd.lpNorm<Eigen::Infinity>() <= st.tolerance * (1.0 + dnorm) && mu <= 0.1 * st.tolerance) {
      res.status = QpStatus::optimal;
      break;
    }
    {
      const double ep = rp.lpNorm<Eigen::Infinity>() / (1.0 + bnorm);
      const double ed = rd.lpNorm<Eigen::Infinity>() / (1.0 + dnorm);
      const double merit = std::max({ep, ed, mu});
      if (ep <= 100.0 * st.tolerance && ed <= 100.0 * st.tolerance && mu <= st.tolerance && merit < best_merit) {
        best_merit = merit;
        best_x = x;
        best_z = z;
        best_ok = true;
      }
      if (best_ok && mu <= 1e-6 * st.tolerance) { break; }
    }
    if (!x.allFinite() || x.lpNorm<Eigen::Infinity>() > st.divergence ||
        z.lpNorm<Eigen::Infinity>() > st.divergence) {
      res.diverged = true;
      break;
    }

    w = z.cwiseQuotient(s);
    scaled = w.cwiseSqrt().asDiagonal() * a;
    kkt = hr;
    kkt.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
    // Late iterations make the scaled matrix lose definiteness to rounding;
    // retry with a growing diagonal shift.
    Eigen::LLT<Matrix, Eigen::Lower> llt(kkt);
    const double dscale = 1.0 + kkt.diagonal().cwiseAbs().maxCoeff();
    double shift = 1e-14 * dscale;
    double applied = 0.0;
    while (llt.info() != Eigen::Success && shift <= 1e-4 * dscale) {
      kkt.diagonal().array() += shift;
      applied += shift;
      llt.compute(kkt);
      shift *= 100.0;
    }
    if (llt.info() != Eigen::Success) { break; }

    auto direction = [&](const Vector & comp, Vector & ddx, Vector & dds, Vector & ddz) {
      const Vector tmp = (z.cwiseProduct(rp) - comp).cwiseQuotient(s);
      const Vector rhs = -rd - a.transpose() * tmp;
      ddx = llt.solve(rhs);
      // one refinement step against the unshifted system
      Vector r = rhs - kkt.selfadjointView<Eigen::Lower>() * ddx;
      r += applied * ddx;
      ddx += llt.solve(r);
      dds.noalias() = -rp - a * ddx;
      ddz = (-comp - z.cwiseProduct(dds)).cwiseQuotient(s);
    };

    // predictor
    rc = s.cwiseProduct(z);
    direction(rc, dxa, dsa, dza);
    const double alpha_aff = std::min(1.0, std::min(max_step(s, dsa), max_step(z, dza)));
    const double mu_aff = (s + alpha_aff * dsa).dot(z + alpha_aff * dza) / static_cast<double>(m);
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    // corrector
    rc = s.cwiseProduct(z) + dsa.cwiseProduct(dza);
    rc.array() -= sigma * mu;
    direction(rc, dx, ds, dz);
    const double alpha_max = std::min(max_step(s, ds), max_step(z, dz));
    const double alpha = std::min(1.0, 0.99 * alpha_max);

    x += alpha * dx;
    s += alpha * ds;
    z += alpha * dz;
    res.iterations = it + 1;
  }
  if (res.status != QpStatus::optimal && !res.diverged && best_ok) {
    res.status = QpStatus::optimal;
    x = best_x;
    z = best_z;
  }
  res.x = x;
  res.z = z;
  return res;
}

struct PreparedRows
{
  Matrix a;
  Vector b;
  std::vector<Eigen::Index> kept;
  Vector norms;
  bool trivially_infeasible = false;
};

PreparedRows prepare_rows(const Matrix & a, const Vector & b, double tol)
{
  PreparedRows pr;
  const Eigen::Index m = a.rows();
  const double amax = m > 0 && a.cols() > 0 ? a.cwiseAbs().maxCoeff() : 0.0;
  std::vector<Eigen::Index> kept;
  std::vector<double> norms;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double nrm = a.cols() > 0 ? a.row(i).norm() : 0.0;
    if (nrm <= 1e-12 * (1.0 + amax)) {
      if (b(i) < -tol) { pr.trivially_infeasible = true; }
      continue;
    }
    kept.push_back(i);
    norms.push_back(nrm);
  }
  pr.a.resize(static_cast<Eigen::Index>(kept.size()), a.cols());
  pr.b.resize(static_cast<Eigen::Index>(kept.size()));
  pr.norms.resize(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    pr.a.row(r) = a.row(kept[k]) / norms[k];
    pr.b(r) = b(kept[k]) / norms[k];
    pr.norms(r) = norms[k];
  }
  pr.kept = std::move(kept);
  return pr;
}

/// Phase 1 on prepared rows: min t s.t. a x - t <= b, t >= -1.
IpmResult phase_one(const PreparedRows & pr, const QpSettings & st)
{
  const Eigen::Index n = pr.a.cols();
  const Eigen::Index m = pr.a.rows();
  Matrix a1 = Matrix::Zero(m + 1, n + 1);
  a1.topLeftCorner(m, n) = pr.a;
  a1.col(n).head(m).setConstant(-1.0);
  a1(m, n) = -1.0;
  Vector b1(m + 1);
  b1 << pr.b, 1.0;
  Vector g1 = Vector::Zero(n + 1);
  g1(n) = 1.0;
  QpSettings st1 = st;
  st1.max_iterations = std::max(st.max_iterations, 200);
  return run_ipm(Matrix::Zero(n + 1, n + 1), g1, a1, b1, st1);
}

}  // namespace

QPSolution QpSolver::solve(const QProblem & p)
{
  p.validate();
  const Eigen::Index n = p.dim();
  const Matrix h = p.hessian.size() > 0 ? p.hessian : Matrix::Zero(n, n);
  const Matrix & a = p.ineq_a.rows() > 0 ? p.ineq_a : Matrix(Matrix::Zero(0, n));
  const Vector & b = p.ineq_b;
  const double tol = settings_.tolerance;

  QPSolution sol;
  sol.ineq_dual = Vector::Zero(p.ineq_b.size());
  sol.eq_dual = Vector::Zero(p.eq_b.size());

  const bool has_eq = p.eq_a.rows() > 0;
  EqualityReduction red;
  Matrix hy;
  Vector gy;
  Matrix ay;
  Vector by;
  if (has_eq) {
    red = reduce_equalities(p.eq_a, p.eq_b, tol);
    if (!red.consistent) {
      sol.x = red.particular;
      sol.status = QpStatus::infeasible;
      sol.kkt_residual = red.residual;
      return sol;
    }
    hy = red.nullspace.transpose() * h * red.nullspace;
    hy = numerics::symmetrize(hy);
    gy = red.nullspace.transpose() * (h * red.particular + p.gradient);
    ay = a * red.nullspace;
    by = b - a * red.particular;
  }
  const Matrix & hh = has_eq ? hy : h;
  const Vector & gg = has_eq ? gy : p.gradient;
  const Matrix & aa = has_eq ? ay : a;
  const Vector & bb = has_eq ? by : b;

  const PreparedRows pr = prepare_rows(aa, bb, tol);
  auto lift = [&](const Vector & y) -> Vector {
    return has_eq ? Vector(red.particular + red.nullspace * y) : y;
  };

  if (pr.trivially_infeasible) {
    sol.x = lift(Vector::Zero(gg.size()));
    sol.status = QpStatus::infeasible;
    return sol;
  }

  IpmResult r = run_ipm(hh, gg, pr.a, pr.b, settings_);
  sol.iterations = r.iterations;
  if (r.status != QpStatus::optimal) {
    if (pr.a.rows() > 0) {
      const IpmResult p1 = phase_one(pr, settings_);
      sol.iterations += p1.iterations;
      const double t = p1.x(p1.x.size() - 1);
      if (p1.status == QpStatus::optimal && t > 10.0 * tol) {
        sol.status = QpStatus::infeasible;
      } else if (p1.status == QpStatus::optimal && r.diverged) {
        sol.status = QpStatus::unbounded;
      } else {
        sol.status = QpStatus::max_iter;
      }
      sol.x = lift(p1.x.head(gg.size()));
    } else {
      sol.status = r.status;
      sol.x = lift(r.x);
    }
    sol.objective = 0.5 * sol.x.dot(h * sol.x) + p.gradient.dot(sol.x) + p.constant;
    return sol;
  }

  sol.status = QpStatus::optimal;
  sol.x = lift(r.x);
  for (std::size_t k = 0; k < pr.kept.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    sol.ineq_dual(pr.kept[k]) = r.z(row) / pr.norms(row);
  }
  Vector stat = h * sol.x + p.gradient;
  if (a.rows() > 0) { stat += a.transpose() * sol.ineq_dual; }
  if (has_eq) {
    sol.eq_dual = p.eq_a.transpose().completeOrthogonalDecomposition().solve(-stat);
    stat += p.eq_a.transpose() * sol.eq_dual;
  }
  double kkt = stat.lpNorm<Eigen::Infinity>();
  if (a.rows() > 0) {
    const Vector slack = b - a * sol.x;
    kkt = std::max(kkt, (-slack).cwiseMax(0.0).maxCoeff());
    kkt = std::max(kkt, slack.cwiseProduct(sol.ineq_dual).cwiseAbs().maxCoeff());
  }
  if (has_eq) { kkt = std::max(kkt, (p.eq_a * sol.x - p.eq_b).lpNorm<Eigen::Infinity>()); }
  sol.kkt_residual = kkt;
  sol.objective = 0.5 * sol.x.dot(h * sol.x) + p.gradient.dot(sol.x) + p.constant;
  return sol;
}

QPSolution solve_qp(const QProblem & problem, const QpSettings & settings)
{
  QpSolver solver(settings);
  return solver.solve(problem);
}

Feasibility solve_lp_feasibility(const Matrix & ineq_a, const Vector & ineq_b, const Matrix & eq_a,
                                 const Vector & eq_b, const QpSettings & settings)
{
  const Eigen::Index n = ineq_a.rows() > 0 ? ineq_a.cols() : eq_a.cols();
  if (ineq_a.rows() != ineq_b.size() || eq_a.rows() != eq_b.size() ||
      (ineq_a.rows() > 0 && eq_a.rows() > 0 && ineq_a.cols() != eq_a.cols())) {
    throw Error("dimension", "feasibility problem blocks are inconsistent");
  }
  const double tol = settings.tolerance;
  Feasibility out;
  const EqualityReduction red = reduce_equalities(eq_a.rows() > 0 ? eq_a : Matrix(0, n),
                                                  eq_a.rows() > 0 ? eq_b : Vector(0), tol);
  if (!red.consistent) {
    out.feasible = false;
    out.status = QpStatus::infeasible;
    out.witness = red.particular;
    out.phase1_objective = red.residual;
    return out;
  }
  const Matrix a = ineq_a.rows() > 0 ? Matrix(ineq_a * red.nullspace) : Matrix(0, red.nullspace.cols());
  const Vector b = ineq_a.rows() > 0 ? Vector(ineq_b - ineq_a * red.particular) : Vector(0);
  const PreparedRows pr = prepare_rows(a, b, tol);
  if (pr.trivially_infeasible) {
    out.feasible = false;
    out.status = QpStatus::infeasible;
    out.witness = red.particular;
    out.phase1_objective = std::numeric_limits<double>::infinity();
    return out;
  }
  if (pr.a.rows() == 0) {
    out.feasible = true;
    out.status = QpStatus::optimal;
    out.witness = red.particular;
    out.phase1_objective = -1.0;
    return out;
  }
  const IpmResult p1 = phase_one(pr, settings);
  if (p1.status != QpStatus::optimal) {
    throw Error("max_iter", "phase-1 feasibility problem did not converge");
  }
  const Eigen::Index ny = pr.a.cols();
  out.witness = red.particular + red.nullspace * p1.x.head(ny);
  out.phase1_objective = p1.x(ny);
  // The phase-1 value is measured on unit-norm rows; report the raw violation.
  const double violation =
      ineq_a.rows() > 0 ? (ineq_a * out.witness - ineq_b).maxCoeff() : -1.0;
  out.feasible = out.phase1_objective <= 10.0 * tol && violation <= 1e-8;
  out.status = out.feasible ? QpStatus::optimal : QpStatus::infeasible;
  return out;
}

}  // namespace smpc::solver
