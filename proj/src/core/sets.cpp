#include "sets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "error.hpp"
#include "numerics.hpp"
#include "solver.hpp"

namespace smpc::sets {

namespace {

constexpr double kRedundancyTol = 1e-9;
constexpr double kFixedPointTol = 1e-9;
constexpr int kMrpiCap = 200;
constexpr int kMaxRpiCap = 500;

void require_dim(Eigen::Index expected, Eigen::Index got, const char * what)
{
  if (expected != got) {
    throw Error("dimension", std::string(what) + ": expected dimension " + std::to_string(expected) +
                                 ", got " + std::to_string(got));
  }
}

solver::QPSolution solve_lp(const Matrix & a, const Vector & b, const Vector & cost)
{
  solver::QProblem p;
  p.hessian = Matrix::Zero(cost.size(), cost.size());
  p.gradient = cost;
  p.ineq_a = a;
  p.ineq_b = b;
  return solver::solve_qp(p);
}

double box_support(const HPolytope::Box & box, const Vector & d)
{
  double v = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    v += d(i) > 0.0 ? d(i) * box.upper(i) : d(i) * box.lower(i);
  }
  return v;
}

Vector box_argmax(const HPolytope::Box & box, const Vector & d)
{
  Vector x(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d(i) > 0.0) {
      x(i) = box.upper(i);
    } else if (d(i) < 0.0) {
      x(i) = box.lower(i);
    } else {
      x(i) = 0.5 * (box.lower(i) + box.upper(i));
    }
  }
  return x;
}

// Stack the rows of two polytopes.
HPolytope intersect(const Matrix & h1, const Vector & o1, const Matrix & h2, const Vector & o2)
{
  Matrix h(h1.rows() + h2.rows(), h1.cols());
  Vector o(o1.size() + o2.size());
  h << h1, h2;
  o << o1, o2;
  return HPolytope(std::move(h), std::move(o));
}

}  // namespace

HPolytope::HPolytope(Matrix H, Vector h) : H_(std::move(H)), h_(std::move(h))
{
  if (H_.rows() != h_.size()) {
    throw Error("dimension", "polytope: H has " + std::to_string(H_.rows()) + " rows but h has " +
                                 std::to_string(h_.size()) + " entries");
  }
  require_finite(H_, "polytope H");
  require_finite(h_, "polytope h");
  for (Eigen::Index i = 0; i < H_.rows(); ++i) {
    if (H_.row(i).cwiseAbs().maxCoeff() == 0.0) {
      throw Error("zero_row", "polytope: row " + std::to_string(i) + " of H is zero");
    }
  }
  detect_box();
}

void HPolytope::detect_box()
{
  const Eigen::Index n = H_.cols();
  if (n == 0) { return; }
  const double inf = std::numeric_limits<double>::infinity();
  Vector lo = Vector::Constant(n, -inf);
  Vector hi = Vector::Constant(n, inf);
  for (Eigen::Index i = 0; i < H_.rows(); ++i) {
    Eigen::Index j = -1;
    for (Eigen::Index c = 0; c < n; ++c) {
      if (H_(i, c) != 0.0) {
        if (j >= 0) { return; }
        j = c;
      }
    }
    const double bound = h_(i) / H_(i, j);
    if (H_(i, j) > 0.0) {
      hi(j) = std::min(hi(j), bound);
    } else {
      lo(j) = std::max(lo(j), bound);
    }
  }
  if (!lo.allFinite() || !hi.allFinite()) { return; }
  box_ = Box{lo, hi};
}

HPolytope HPolytope::box(const Vector & lower, const Vector & upper)
{
  require_dim(lower.size(), upper.size(), "box bounds");
  const Eigen::Index n = lower.size();
  Matrix H(2 * n, n);
  H << Matrix::Identity(n, n), -Matrix::Identity(n, n);
  Vector h(2 * n);
  h << upper, -lower;
  return HPolytope(std::move(H), std::move(h));
}

HPolytope HPolytope::symmetric_box(const Vector & half_widths)
{
  return box(-half_widths, half_widths);
}

HPolytope HPolytope::scaled(double alpha) const
{
  if (!(alpha > 0.0)) { throw Error("domain", "polytope scale must be positive"); }
  return HPolytope(H_, alpha * h_);
}

HPolytope HPolytope::linear_image(const Matrix & T) const
{
  require_dim(dim(), T.cols(), "linear_image");
  require_dim(T.rows(), T.cols(), "linear_image (square map)");
  Eigen::FullPivLU<Matrix> lu(T);
  if (!lu.isInvertible()) { throw Error("singular", "linear_image: map is not invertible"); }
  return HPolytope(H_ * lu.inverse(), h_);
}

HPolytope HPolytope::normalized() const
{
  const Vector norms = H_.rowwise().norm();
  return HPolytope(norms.cwiseInverse().asDiagonal() * H_, h_.cwiseQuotient(norms));
}

SupportPoint support_point(const HPolytope & P, const Vector & dir)
{
  require_dim(P.dim(), dir.size(), "support direction");
  SupportPoint out;
  if (const auto & box = P.as_box()) {
    if ((box->lower.array() > box->upper.array()).any()) {
      throw Error("empty_set", "support of an empty box");
    }
    out.value = box_support(*box, dir);
    out.point = box_argmax(*box, dir);
    // Multipliers on the tightest row of each active coordinate bound.
    out.multipliers = Vector::Zero(P.rows());
    for (Eigen::Index j = 0; j < dir.size(); ++j) {
      if (dir(j) == 0.0) { continue; }
      const double target = dir(j) > 0.0 ? box->upper(j) : box->lower(j);
      for (Eigen::Index i = 0; i < P.rows(); ++i) {
        const double a = P.H()(i, j);
        if (a == 0.0 || (a > 0.0) != (dir(j) > 0.0)) { continue; }
        if (P.h()(i) / a == target) {
          out.multipliers(i) = dir(j) / a;
          break;
        }
      }
    }
    return out;
  }
  const auto sol = solve_lp(P.H(), P.h(), -dir);
  switch (sol.status) {
    case solver::QpStatus::optimal:
      break;
    case solver::QpStatus::unbounded:
      throw Error("unbounded", "support: polytope is unbounded in the requested direction");
    case solver::QpStatus::infeasible:
      throw Error("empty_set", "support: polytope is empty");
    default:
      throw Error("max_iter", "support: LP did not converge");
  }
  out.value = dir.dot(sol.x);
  out.point = sol.x;
  out.multipliers = sol.ineq_dual;
  return out;
}

double support(const HPolytope & P, const Vector & dir)
{
  if (const auto & box = P.as_box()) {
    require_dim(P.dim(), dir.size(), "support direction");
    if ((box->lower.array() > box->upper.array()).any()) {
      throw Error("empty_set", "support of an empty box");
    }
    return box_support(*box, dir);
  }
  return support_point(P, dir).value;
}

bool contains(const HPolytope & P, const Vector & x)
{
  require_dim(P.dim(), x.size(), "contains");
  return ((P.H() * x - P.h()).array() <= kMembershipTol).all();
}

bool is_empty(const HPolytope & P)
{
  if (const auto & box = P.as_box()) {
    return (box->lower.array() > box->upper.array() + kMembershipTol).any();
  }
  return !solver::solve_lp_feasibility(P.H(), P.h(), Matrix(0, P.dim()), Vector(0)).feasible;
}

bool is_bounded(const HPolytope & P)
{
  if (P.as_box()) { return true; }
  for (Eigen::Index j = 0; j < P.dim(); ++j) {
    for (double sign : {1.0, -1.0}) {
      Vector d = Vector::Zero(P.dim());
      d(j) = sign;
      const auto sol = solve_lp(P.H(), P.h(), -d);
      if (sol.status == solver::QpStatus::unbounded) { return false; }
      if (sol.status != solver::QpStatus::optimal) {
        throw Error(sol.status == solver::QpStatus::infeasible ? "empty_set" : "max_iter",
                    "is_bounded: LP failed");
      }
    }
  }
  return true;
}

bool contains_origin_in_interior(const HPolytope & P)
{
  return P.rows() > 0 && (P.h().array() > 0.0).all();
}

HPolytope pontryagin_diff(const HPolytope & P, const std::function<double(const Vector &)> & support_s)
{
  Vector h = P.h();
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    h(i) -= support_s(P.H().row(i).transpose());
  }
  return HPolytope(P.H(), std::move(h));
}

HPolytope pontryagin_diff(const HPolytope & P, const HPolytope & S)
{
  require_dim(P.dim(), S.dim(), "pontryagin_diff");
  return pontryagin_diff(P, [&S](const Vector & d) { return support(S, d); });
}

HPolytope remove_redundant(const HPolytope & P)
{
  const HPolytope Pn = P.normalized();
  const Eigen::Index n = Pn.dim();

  // Collapse parallel rows, keeping the tightest offset.
  std::vector<Eigen::Index> order;
  for (Eigen::Index i = 0; i < Pn.rows(); ++i) {
    bool merged = false;
    for (auto & k : order) {
      if ((Pn.H().row(i) - Pn.H().row(k)).cwiseAbs().maxCoeff() <= 1e-12) {
        if (Pn.h()(i) < Pn.h()(k)) { k = i; }
        merged = true;
        break;
      }
    }
    if (!merged) { order.push_back(i); }
  }

  const double big = 1e6 * (1.0 + Pn.h().cwiseAbs().maxCoeff());
  std::vector<bool> keep(order.size(), true);
  for (std::size_t t = 0; t < order.size(); ++t) {
    const Eigen::Index row = order[t];
    std::vector<Eigen::Index> others;
    for (std::size_t u = 0; u < order.size(); ++u) {
      if (u != t && keep[u]) { others.push_back(order[u]); }
    }
    Matrix a(static_cast<Eigen::Index>(others.size()) + 2 * n, n);
    Vector b(a.rows());
    for (std::size_t u = 0; u < others.size(); ++u) {
      a.row(static_cast<Eigen::Index>(u)) = Pn.H().row(others[u]);
      b(static_cast<Eigen::Index>(u)) = Pn.h()(others[u]);
    }
    const auto off = static_cast<Eigen::Index>(others.size());
    a.middleRows(off, n) = Matrix::Identity(n, n);
    a.bottomRows(n) = -Matrix::Identity(n, n);
    b.tail(2 * n).setConstant(big);
    const auto sol = solve_lp(a, b, -Pn.H().row(row).transpose());
    if (sol.status == solver::QpStatus::infeasible) {
      throw Error("empty_set", "remove_redundant: polytope is empty");
    }
    if (sol.status == solver::QpStatus::optimal &&
        Pn.H().row(row).dot(sol.x) <= Pn.h()(row) + kRedundancyTol) {
      keep[t] = false;
    }
  }
  std::vector<Eigen::Index> kept;
  for (std::size_t t = 0; t < order.size(); ++t) {
    if (keep[t]) { kept.push_back(order[t]); }
  }
  std::sort(kept.begin(), kept.end());
  Matrix H(static_cast<Eigen::Index>(kept.size()), n);
  Vector h(H.rows());
  for (std::size_t u = 0; u < kept.size(); ++u) {
    H.row(static_cast<Eigen::Index>(u)) = Pn.H().row(kept[u]);
    h(static_cast<Eigen::Index>(u)) = Pn.h()(kept[u]);
  }
  return HPolytope(std::move(H), std::move(h));
}

namespace {

// Feasibility of sum_k terms[k] w_k = x with every w_k in W.
bool member_of_sum(const Vector & x, const std::vector<Matrix> & terms, const HPolytope & W)
{
  const Eigen::Index nw = W.dim();
  const Eigen::Index r = W.rows();
  const auto s = static_cast<Eigen::Index>(terms.size());
  Matrix ia = Matrix::Zero(s * r, s * nw);
  Vector ib(s * r);
  Matrix ea(x.size(), s * nw);
  for (Eigen::Index k = 0; k < s; ++k) {
    ia.block(k * r, k * nw, r, nw) = W.H();
    ib.segment(k * r, r) = W.h();
    ea.middleCols(k * nw, nw) = terms[static_cast<std::size_t>(k)];
  }
  return solver::solve_lp_feasibility(ia, ib, ea, x).feasible;
}

std::vector<Matrix> power_terms(const Matrix & A, const Matrix & D, int s)
{
  std::vector<Matrix> terms;
  terms.reserve(static_cast<std::size_t>(s));
  Matrix t = D;
  for (int k = 0; k < s; ++k) {
    terms.push_back(t);
    t = A * t;
  }
  return terms;
}

void require_disturbance_set(const Matrix & A, const Matrix & D, const HPolytope & W)
{
  require_dim(A.rows(), A.cols(), "A (square)");
  require_dim(A.rows(), D.rows(), "D rows");
  require_dim(D.cols(), W.dim(), "W dimension");
  if (!numerics::is_schur(A)) {
    throw Error("unstable", "spectral radius of the loop matrix is not below 1");
  }
  if (!contains_origin_in_interior(W)) {
    throw Error("no_interior", "disturbance set must contain the origin in its interior");
  }
  if (!is_bounded(W)) { throw Error("unbounded", "disturbance set is unbounded"); }
}

}  // namespace

bool member_truncated_sum(const Vector & x, const Matrix & A, const Matrix & D, const HPolytope & W, int s)
{
  if (s < 1) { throw Error("domain", "member_truncated_sum: s must be >= 1"); }
  require_dim(A.rows(), x.size(), "member_truncated_sum");
  require_dim(D.cols(), W.dim(), "W dimension");
  return member_of_sum(x, power_terms(A, D, s), W);
}

TruncatedReachSet::TruncatedReachSet(std::vector<Matrix> terms, HPolytope base, double alpha, double epsilon)
    : terms_(std::move(terms)), base_(std::move(base)), alpha_(alpha), epsilon_(epsilon)
{
  if (terms_.empty()) { throw Error("domain", "truncated reach set needs at least one term"); }
  if (!(alpha_ >= 0.0 && alpha_ < 1.0)) { throw Error("domain", "contraction factor must lie in [0, 1)"); }
  dim_ = terms_.front().rows();
  for (const auto & t : terms_) {
    require_dim(dim_, t.rows(), "reach-set term rows");
    require_dim(base_.dim(), t.cols(), "reach-set term cols");
  }
  build_facets();
}

double TruncatedReachSet::support(const Vector & dir) const
{
  require_dim(dim_, dir.size(), "support direction");
  double v = 0.0;
  for (const auto & t : terms_) {
    v += sets::support(base_, t.transpose() * dir);
  }
  return scale() * v;
}

Vector TruncatedReachSet::support_argmax(const Vector & dir) const
{
  Vector p = Vector::Zero(dim_);
  for (const auto & t : terms_) {
    const Vector c = t.transpose() * dir;
    if (const auto & box = base_.as_box()) {
      p += t * box_argmax(*box, c);
    } else {
      p += t * support_point(base_, c).point;
    }
  }
  return scale() * p;
}

void TruncatedReachSet::build_facets()
{
  if (dim_ == 1) {
    facet_normals_ = Matrix(2, 1);
    facet_normals_ << 1.0, -1.0;
    facet_offsets_ = Vector(2);
    facet_offsets_ << support(Vector::Ones(1)), support(-Vector::Ones(1));
    vertices_ = {Vector::Constant(1, facet_offsets_(0)), Vector::Constant(1, -facet_offsets_(1))};
    return;
  }
  if (dim_ != 2) { return; }

  // Recover the polygon from the support oracle: between two directions
  // whose maximisers differ, the edge normal either is tight or exposes a
  // new vertex.
  std::vector<Vector> normals;
  std::vector<double> offsets;
  constexpr int kSeeds = 8;
  std::vector<Vector> dirs;
  std::vector<Vector> pts;
  double radius = 0.0;
  for (int k = 0; k < kSeeds; ++k) {
    const double th = 2.0 * std::numbers::pi * k / kSeeds;
    Vector d(2);
    d << std::cos(th), std::sin(th);
    dirs.push_back(d);
    pts.push_back(support_argmax(d));
    normals.push_back(d);
    offsets.push_back(support(d));
    radius = std::max(radius, pts.back().norm());
  }
  const double tol = 1e-12 * (1.0 + radius);

  std::function<void(const Vector &, const Vector &, int)> refine =
      [&](const Vector & p1, const Vector & p2, int depth) {
        const Vector e = p2 - p1;
        if (e.norm() <= tol) { return; }
        Vector nrm(2);
        nrm << e(1), -e(0);
        nrm.normalize();
        const double h = support(nrm);
        if (h <= nrm.dot(p1) + tol || depth > 60) {
          normals.push_back(nrm);
          offsets.push_back(h);
          return;
        }
        const Vector p3 = support_argmax(nrm);
        vertices_.push_back(p3);
        refine(p1, p3, depth + 1);
        refine(p3, p2, depth + 1);
      };
  for (int k = 0; k < kSeeds; ++k) {
    vertices_.push_back(pts[static_cast<std::size_t>(k)]);
    refine(pts[static_cast<std::size_t>(k)], pts[static_cast<std::size_t>((k + 1) % kSeeds)], 0);
  }

  facet_normals_ = Matrix(static_cast<Eigen::Index>(normals.size()), 2);
  facet_offsets_ = Vector(facet_normals_.rows());
  for (std::size_t i = 0; i < normals.size(); ++i) {
    facet_normals_.row(static_cast<Eigen::Index>(i)) = normals[i].transpose();
    facet_offsets_(static_cast<Eigen::Index>(i)) = offsets[i];
  }
}

bool TruncatedReachSet::contains(const Vector & x) const
{
  require_dim(dim_, x.size(), "contains");
  if (dim_ <= 2) {
    return ((facet_normals_ * x - facet_offsets_).array() <= kMembershipTol).all();
  }
  for (Eigen::Index j = 0; j < dim_; ++j) {
    Vector e = Vector::Zero(dim_);
    e(j) = 1.0;
    if (x(j) > support(e) + kMembershipTol || -x(j) > support(-e) + kMembershipTol) { return false; }
  }
  return member_of_sum(x / scale(), terms_, base_);
}

double TruncatedReachSet::circumradius() const
{
  if (dim_ <= 2) {
    double r = 0.0;
    for (const auto & v : vertices_) { r = std::max(r, v.norm()); }
    return r;
  }
  double sq = 0.0;
  for (Eigen::Index j = 0; j < dim_; ++j) {
    Vector e = Vector::Zero(dim_);
    e(j) = 1.0;
    const double m = std::max(support(e), support(-e));
    sq += m * m;
  }
  return std::sqrt(sq);
}

double mrpi_alpha(const Matrix & A, const Matrix & D, const HPolytope & W, int s)
{
  if (s < 1) { throw Error("domain", "mrpi_alpha: s must be >= 1"); }
  if (D.cwiseAbs().maxCoeff() == 0.0) { return 0.0; }
  require_dim(D.rows(), D.cols(), "D (square, invertible)");
  Eigen::FullPivLU<Matrix> lu(D);
  if (!lu.isInvertible()) {
    throw Error("singular", "contraction test needs an invertible disturbance map");
  }
  // D W = {x : S D^{-1} x <= s}; alpha = max_i h_{A^s D W}(g_i) / s_i.
  const Matrix G = W.H() * lu.inverse();
  Matrix As = Matrix::Identity(A.rows(), A.cols());
  for (int k = 0; k < s; ++k) { As = A * As; }
  const Matrix map = (As * D).transpose();
  double alpha = 0.0;
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    alpha = std::max(alpha, support(W, map * G.row(i).transpose()) / W.h()(i));
  }
  return alpha;
}

TruncatedReachSet mrpi_truncation(const Matrix & A, const Matrix & D, const HPolytope & W, int s,
                                  double epsilon)
{
  require_disturbance_set(A, D, W);
  const double alpha = mrpi_alpha(A, D, W, s);
  if (alpha >= 1.0) { throw Error("slow_contraction", "contraction factor is not below 1 at this s"); }
  return TruncatedReachSet(power_terms(A, D, s), W, alpha, epsilon);
}

TruncatedReachSet mrpi_outer(const Matrix & A, const Matrix & D, const HPolytope & W, double eps)
{
  require_disturbance_set(A, D, W);
  if (!(eps > 0.0)) { throw Error("domain", "mrpi_outer: eps must be positive"); }
  const Eigen::Index n = A.rows();
  if (D.cwiseAbs().maxCoeff() == 0.0) {
    return TruncatedReachSet({D}, W, 0.0, eps);
  }
  // Running coordinate supports of the s-term sum.
  Vector up = Vector::Zero(n);
  Vector down = Vector::Zero(n);
  Matrix t = D;
  for (int s = 1; s <= kMrpiCap; ++s) {
    for (Eigen::Index j = 0; j < n; ++j) {
      up(j) += support(W, t.row(j).transpose());
      down(j) += support(W, -t.row(j).transpose());
    }
    t = A * t;
    const double m = std::max(up.maxCoeff(), down.maxCoeff());
    const double alpha = mrpi_alpha(A, D, W, s);
    if (alpha <= eps / (eps + m)) {
      TruncatedReachSet out(power_terms(A, D, s), W, alpha, eps);
      // Excess over the untruncated sum is at most (scale - 1) * M.
      if ((out.scale() - 1.0) * m > eps * (1.0 + 1e-12)) {
        throw Error("internal", "mrpi_outer: accuracy post-check failed");
      }
      return out;
    }
  }
  throw Error("slow_contraction", "mrpi_outer: no admissible truncation within 200 terms");
}

double robust_invariance_margin(const HPolytope & Omega, const Matrix & Acl, const Matrix & D,
                                const HPolytope & W)
{
  double worst = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < Omega.rows(); ++i) {
    const Vector hi = Omega.H().row(i).transpose();
    worst = std::max(worst, support(Omega, Acl.transpose() * hi) + support(W, D.transpose() * hi) -
                                Omega.h()(i));
  }
  return worst;
}

HPolytope max_rpi(const Matrix & Acl, const Matrix & D, const HPolytope & W, const HPolytope & Xc)
{
  require_dim(Acl.rows(), Acl.cols(), "Acl (square)");
  require_dim(Acl.rows(), Xc.dim(), "Xc dimension");
  require_dim(Acl.rows(), D.rows(), "D rows");
  require_dim(D.cols(), W.dim(), "W dimension");
  if (!numerics::is_schur(Acl)) {
    throw Error("unstable", "max_rpi: closed loop is not Schur stable");
  }
  if (!contains_origin_in_interior(Xc)) {
    throw Error("no_interior", "max_rpi: constraint set must contain the origin in its interior");
  }
  const HPolytope xc = Xc.normalized();
  if (is_empty(xc)) { throw Error("no_terminal_set", "max_rpi: constraint set is empty"); }
  HPolytope omega = remove_redundant(xc);

  for (int it = 0; it < kMaxRpiCap; ++it) {
    // Pre(Omega) = {x : H Acl x <= h - h_W(D' H_i)}.
    std::vector<Vector> rows;
    std::vector<double> offs;
    for (Eigen::Index i = 0; i < omega.rows(); ++i) {
      const Vector hi = omega.H().row(i).transpose();
      const Vector a = Acl.transpose() * hi;
      const double o = omega.h()(i) - support(W, D.transpose() * hi);
      const double nrm = a.norm();
      if (nrm <= 1e-14) {
        if (o < -kFixedPointTol) { throw Error("no_terminal_set", "max_rpi: iteration emptied the set"); }
        continue;
      }
      rows.push_back(a / nrm);
      offs.push_back(o / nrm);
    }
    Matrix ph(static_cast<Eigen::Index>(rows.size()), Acl.cols());
    Vector po(ph.rows());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      ph.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
      po(static_cast<Eigen::Index>(r)) = offs[r];
    }
    const HPolytope next_raw = intersect(xc.H(), xc.h(), ph, po);
    if (is_empty(next_raw)) { throw Error("no_terminal_set", "max_rpi: iteration emptied the set"); }
    const HPolytope next = remove_redundant(next_raw);

    // next is a subset of omega; equal when omega satisfies every row of next.
    bool fixed = true;
    for (Eigen::Index i = 0; i < next.rows() && fixed; ++i) {
      fixed = support(omega, next.H().row(i).transpose()) <= next.h()(i) + kFixedPointTol;
    }
    omega = next;
    if (fixed) {
      if (robust_invariance_margin(omega, Acl, D, W) > 1e-8) {
        throw Error("internal", "max_rpi: fixed point failed the invariance check");
      }
      return omega;
    }
  }
  throw Error("max_iter", "max_rpi: iteration cap reached");
}

}  // namespace smpc::sets
