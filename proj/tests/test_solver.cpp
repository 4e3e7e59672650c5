#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "solver.hpp"

using smpc::Matrix;
using smpc::Vector;
using namespace smpc::solver;

namespace {

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }
Vector v1(double v) { return Vector::Constant(1, v); }

// Brute-force 2-D feasibility: a bounded polygon is nonempty iff one of the
// pairwise constraint intersections satisfies every row.
bool vertex_enumeration_feasible(const Matrix & a, const Vector & b)
{
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < a.rows(); ++j) {
      Eigen::Matrix2d m;
      m.row(0) = a.row(i);
      m.row(1) = a.row(j);
      if (std::abs(m.determinant()) < 1e-12) { continue; }
      const Eigen::Vector2d p = m.inverse() * Eigen::Vector2d(b(i), b(j));
      if (((a * p) - b).maxCoeff() <= 1e-9) { return true; }
    }
  }
  return false;
}

}  // namespace

TEST(SolveQp, ActiveLowerBound)
{
  QProblem p;
  p.hessian = m1(2.0);
  p.gradient = v1(0.0);
  p.ineq_a = m1(-1.0);
  p.ineq_b = v1(-1.0);
  const auto s = solve_qp(p);
  ASSERT_EQ(s.status, QpStatus::optimal);
  EXPECT_NEAR(s.x(0), 1.0, 1e-8);
  EXPECT_NEAR(s.objective, 1.0, 1e-8);
  EXPECT_LE(s.kkt_residual, 1e-8);
}

TEST(SolveQp, EqualityConstrainedSymmetric)
{
  QProblem p;
  p.hessian = 2.0 * Matrix::Identity(2, 2);
  p.gradient = Vector::Zero(2);
  p.eq_a = Matrix::Ones(1, 2);
  p.eq_b = v1(2.0);
  const auto s = solve_qp(p);
  ASSERT_EQ(s.status, QpStatus::optimal);
  EXPECT_NEAR(s.x(0), 1.0, 1e-8);
  EXPECT_NEAR(s.x(1), 1.0, 1e-8);
  EXPECT_NEAR(s.objective, 2.0, 1e-8);
}

TEST(SolveQp, LinearProgramAtVertex)
{
  QProblem p;
  p.hessian = m1(0.0);
  p.gradient = v1(-1.0);
  p.ineq_a.resize(2, 1);
  p.ineq_a << 1.0, -1.0;
  p.ineq_b.resize(2);
  p.ineq_b << 3.0, 0.0;
  const auto s = solve_qp(p);
  ASSERT_EQ(s.status, QpStatus::optimal);
  EXPECT_NEAR(s.x(0), 3.0, 1e-8);
}

TEST(SolveQp, ReportsInfeasible)
{
  QProblem p;
  p.hessian = m1(1.0);
  p.gradient = v1(0.0);
  p.ineq_a.resize(2, 1);
  p.ineq_a << 1.0, -1.0;
  p.ineq_b.resize(2);
  p.ineq_b << -1.0, 0.0;
  EXPECT_EQ(solve_qp(p).status, QpStatus::infeasible);
}

TEST(SolveQp, ReportsUnboundedLp)
{
  QProblem p;
  p.hessian = m1(0.0);
  p.gradient = v1(-1.0);
  p.ineq_a = m1(-1.0);
  p.ineq_b = v1(0.0);
  EXPECT_EQ(solve_qp(p).status, QpStatus::unbounded);
}

TEST(SolveQp, InconsistentEqualities)
{
  QProblem p;
  p.hessian = Matrix::Identity(2, 2);
  p.gradient = Vector::Zero(2);
  p.eq_a.resize(2, 2);
  p.eq_a << 1, 1, 1, 1;
  p.eq_b.resize(2);
  p.eq_b << 1, 2;
  EXPECT_EQ(solve_qp(p).status, QpStatus::infeasible);
}

TEST(SolveQp, RandomEqualityConstrainedMatchesKktOracle)
{
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    const int d = 2 + trial % 29;
    const int p_eq = trial % std::max(1, d / 2);
    Matrix f(d, d);
    for (int i = 0; i < d * d; ++i) { f.data()[i] = nd(gen); }
    QProblem p;
    p.hessian = f * f.transpose() + Matrix::Identity(d, d);
    p.gradient = Vector::NullaryExpr(d, [&](Eigen::Index) { return nd(gen); });
    p.eq_a = Matrix::NullaryExpr(p_eq, d, [&](Eigen::Index, Eigen::Index) { return nd(gen); });
    p.eq_b = Vector::NullaryExpr(p_eq, [&](Eigen::Index) { return nd(gen); });
    // Loose box that is inactive at the KKT solution.
    Matrix kkt = Matrix::Zero(d + p_eq, d + p_eq);
    kkt.topLeftCorner(d, d) = p.hessian;
    kkt.topRightCorner(d, p_eq) = p.eq_a.transpose();
    kkt.bottomLeftCorner(p_eq, d) = p.eq_a;
    Vector rhs(d + p_eq);
    rhs << -p.gradient, p.eq_b;
    const Vector oracle = kkt.fullPivLu().solve(rhs).head(d);
    const double bound = 10.0 * (1.0 + oracle.cwiseAbs().maxCoeff());
    p.ineq_a.resize(2 * d, d);
    p.ineq_a << Matrix::Identity(d, d), -Matrix::Identity(d, d);
    p.ineq_b = Vector::Constant(2 * d, bound);
    const auto s = solve_qp(p);
    ASSERT_EQ(s.status, QpStatus::optimal) << "trial " << trial;
    EXPECT_LE((s.x - oracle).lpNorm<Eigen::Infinity>(), 1e-7) << "trial " << trial;
    EXPECT_LE(s.kkt_residual, 1e-8 * (1.0 + bound));
  }
}

TEST(SolveQp, ConstantShiftLeavesIteratesBitwiseIdentical)
{
  QProblem p;
  p.hessian = Matrix::Identity(3, 3);
  p.gradient = Vector::Constant(3, -2.0);
  p.ineq_a = Matrix::Identity(3, 3);
  p.ineq_b = Vector::Constant(3, 1.0);
  const auto a = solve_qp(p);
  p.constant = 123.456;
  const auto b = solve_qp(p);
  ASSERT_EQ(a.status, QpStatus::optimal);
  EXPECT_EQ(a.iterations, b.iterations);
  for (int i = 0; i < 3; ++i) { EXPECT_EQ(a.x(i), b.x(i)); }
  EXPECT_NEAR(b.objective - a.objective, 123.456, 1e-9);
}

TEST(LpFeasibility, SimpleCases)
{
  Matrix a(2, 1);
  a << 1.0, -1.0;
  Vector b(2);
  b << 1.0, 0.0;
  const auto f = solve_lp_feasibility(a, b, Matrix(0, 1), Vector(0));
  ASSERT_TRUE(f.feasible);
  EXPECT_GE(f.witness(0), -1e-8);
  EXPECT_LE(f.witness(0), 1.0 + 1e-8);
  b << -1.0, 0.0;
  const auto g = solve_lp_feasibility(a, b, Matrix(0, 1), Vector(0));
  EXPECT_FALSE(g.feasible);
  EXPECT_GE(g.phase1_objective, 1e-8);
}

TEST(LpFeasibility, AgreesWithVertexEnumerationIn2D)
{
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd(0.0, 1.0);
  int n_feasible = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int extra = 1 + trial % 6;
    Matrix a(4 + extra, 2);
    Vector b(4 + extra);
    a.topRows(4) << 1, 0, -1, 0, 0, 1, 0, -1;
    b.head(4).setConstant(2.0);
    for (int i = 0; i < extra; ++i) {
      a(4 + i, 0) = nd(gen);
      a(4 + i, 1) = nd(gen);
      b(4 + i) = nd(gen) - 0.5;
    }
    const bool oracle = vertex_enumeration_feasible(a, b);
    const auto f = solve_lp_feasibility(a, b, Matrix(0, 2), Vector(0));
    // Skip razor-thin instances where the phase-1 optimum sits at the tolerance.
    if (std::abs(f.phase1_objective) < 1e-7) { continue; }
    EXPECT_EQ(f.feasible, oracle) << "trial " << trial;
    if (f.feasible) {
      ++n_feasible;
      EXPECT_LE((a * f.witness - b).maxCoeff(), 1e-8);
    }
  }
  EXPECT_GT(n_feasible, 20);
}
