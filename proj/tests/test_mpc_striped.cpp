#include <gtest/gtest.h>

#include <cmath>

#include "error.hpp"
#include "mpc_striped.hpp"
#include "random.hpp"

using smpc::Matrix;
using smpc::Vector;
using namespace smpc::mpc_striped;
using smpc::sets::HPolytope;
using smpc::solver::QpStatus;
using smpc::uncertainty::DisturbanceModel;

namespace {

Vector vec(std::initializer_list<double> v)
{
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) { out(i++) = x; }
  return out;
}

// |x2| <= 3 at p = 0.9, |x1| <= 5 at p = 0.8, |u| <= 1 robustly, domain box 20.
StripedConfig di_config(int N = 5, double w = 0.1)
{
  StripedConfig c;
  c.system.A = Matrix(2, 2);
  c.system.A << 1, 1, 0, 1;
  c.system.B = Matrix(2, 1);
  c.system.B << 0.5, 1;
  c.system.D = Matrix::Identity(2, 2);
  c.horizon = N;
  c.Q = Matrix::Identity(2, 2);
  c.R = Matrix::Identity(1, 1);
  const Vector g0 = Vector::Zero(1), g1 = Vector::Ones(1);
  c.constraints = {{vec({0, 1.0 / 3}), g0, 0.9}, {vec({0, -1.0 / 3}), g0, 0.9}, {vec({0.2, 0}), g0, 0.8},
                   {vec({-0.2, 0}), g0, 0.8},    {vec({0, 0}), g1, 1.0},        {vec({0, 0}), -g1, 1.0}};
  c.W = DisturbanceModel::uniform_box(vec({w, w}), 1);
  c.domain_box = HPolytope::symmetric_box(vec({20, 20}));
  return c;
}

const StripedController & di()
{
  static const StripedController ctrl(di_config());
  return ctrl;
}

std::vector<Vector> feasible_states(const StripedController & ctrl, int count, std::uint64_t seed)
{
  smpc::RngStream rng(seed);
  std::vector<Vector> out;
  while (static_cast<int>(out.size()) < count) {
    const Vector x = vec({-5.0 + 10.0 * rng.uniform(), -3.0 + 6.0 * rng.uniform()});
    if (ctrl.solve(x).status == QpStatus::optimal) { out.push_back(x); }
  }
  return out;
}

Vector shifted(const Vector & c, Eigen::Index m)
{
  Vector out = Vector::Zero(c.size());
  out.head(c.size() - m) = c.tail(c.size() - m);
  return out;
}

}  // namespace

TEST(MpcStriped, LyapunovBlocks)
{
  const StripedController & ctrl = di();
  EXPECT_LE(ctrl.lyapunov_residual(), 1e-8);
  EXPECT_LE((ctrl.Px() - ctrl.riccati().P).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_GT(smpc::numerics::min_eigenvalue(ctrl.Pc()), 0.0);
  EXPECT_EQ(ctrl.stripe_gains().size(), 4u);
  EXPECT_GE(ctrl.tail_horizon(), 1);
  EXPECT_EQ(ctrl.tightenings().cols(), ctrl.horizon() + ctrl.tail_horizon());
  EXPECT_EQ(ctrl.tightenings().rows(), 10);
}

TEST(MpcStriped, SingleMoveHorizon)
{
  const StripedController ctrl(di_config(1));
  EXPECT_TRUE(ctrl.stripe_gains().empty());
  const Matrix & P = ctrl.riccati().P;
  const Matrix B = di_config().system.B;
  const Matrix expected = Matrix::Identity(1, 1) + B.transpose() * P * B;
  EXPECT_NEAR(ctrl.Pc()(0, 0), expected(0, 0), 1e-9);
}

TEST(MpcStriped, VanishingDisturbanceIsNominal)
{
  const StripedController ctrl(di_config(5, 1e-9));
  EXPECT_LT(ctrl.tightenings().maxCoeff(), 1e-6);
  const Vector x = vec({0.0, 1.5});
  const auto sol = ctrl.solve(x);
  ASSERT_EQ(sol.status, QpStatus::optimal);
  EXPECT_NEAR(sol.value, x.dot(ctrl.Px() * x) + sol.c.dot(ctrl.Pc() * sol.c), 1e-12);
}

TEST(MpcStriped, OriginAndNearOrigin)
{
  const StripedController & ctrl = di();
  const auto r0 = ctrl.control(Vector::Zero(2));
  ASSERT_TRUE(r0.feasible);
  EXPECT_EQ(r0.u.norm(), 0.0);
  smpc::RngStream rng(4);
  for (int k = 0; k < 1000; ++k) {
    const Vector x = 0.05 * vec({2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0});
    const auto r = ctrl.control(x);
    ASSERT_TRUE(r.feasible);
    EXPECT_EQ((r.u - ctrl.gain() * x).norm(), 0.0);
    EXPECT_TRUE(ctrl.in_terminal_region(x));
  }
  // The QP agrees with the closed-form answer there.
  const auto forced = ctrl.solve(vec({0.02, -0.01}), true);
  ASSERT_EQ(forced.status, QpStatus::optimal);
  EXPECT_LE(forced.c.norm(), 1e-7);
}

TEST(MpcStriped, OutsideDomainIsInfeasible)
{
  const StripedController & ctrl = di();
  EXPECT_FALSE(ctrl.control(vec({30.0, 0.0})).feasible);
  EXPECT_FALSE(ctrl.control(vec({4.9, 3.0})).feasible);
}

TEST(MpcStriped, ShiftedSequenceStaysFeasible)
{
  const StripedController & ctrl = di();
  const auto model = DisturbanceModel::uniform_box(vec({0.1, 0.1}), 2);
  smpc::RngStream rng(8);
  const auto states = feasible_states(ctrl, 1000, 6);
  for (const Vector & x : states) {
    const auto sol = ctrl.solve(x);
    const Vector u = ctrl.gain() * x + sol.c.head(1);
    Vector w = model.sample(rng);
    // Alternate interior draws with support vertices.
    if (rng() & 1u) { w = w.cwiseSign() * 0.1; }
    const Vector xp = ctrl.system().step(x, u, w);
    EXPECT_LE(ctrl.constraint_violation(xp, shifted(sol.c, 1)), 1e-9);
  }
}

TEST(MpcStriped, ValueDecreaseAndIss)
{
  const StripedController & ctrl = di();
  const Matrix & K = ctrl.gain();
  Matrix weight(3, 3);
  weight.topLeftCorner(2, 2) = Matrix::Identity(2, 2) + K.transpose() * K;
  weight.topRightCorner(2, 1) = K.transpose();
  weight.bottomLeftCorner(1, 2) = K;
  // Lower-right block is R: the Psi-Lyapunov equation gives exactly
  // V(x) - V_shift(x+) = x'Qx + (Kx + c0)'R(Kx + c0).
  weight.bottomRightCorner(1, 1) = Matrix::Identity(1, 1);
  for (const Vector & x : feasible_states(ctrl, 2000, 12)) {
    const auto sol = ctrl.solve(x);
    const Vector xp = ctrl.system().step(x, K * x + sol.c.head(1), Vector::Zero(2));
    const double vp = ctrl.value(xp);
    ASSERT_TRUE(std::isfinite(vp));
    Vector z(3);
    z << x, sol.c.head(1);
    EXPECT_LE(vp - sol.value, -z.dot(weight * z) + 1e-7);
    EXPECT_LE(vp - sol.value, -0.5 * x.squaredNorm() + 1e-7);
  }
}

TEST(MpcStriped, TerminalRegionIsAbsorbing)
{
  const StripedController & ctrl = di();
  const auto model = DisturbanceModel::uniform_box(vec({0.1, 0.1}), 3);
  const auto starts = feasible_states(ctrl, 1000, 19);
  int entered = 0;
  for (std::size_t t = 0; t < starts.size(); ++t) {
    smpc::RngStream rng(31, t);
    Vector x = starts[t];
    bool inside = false;
    for (int k = 0; k < 60; ++k) {
      const auto r = ctrl.control(x);
      ASSERT_TRUE(r.feasible);
      const bool zero = r.correction.norm() <= 1e-7;
      if (inside) { ASSERT_TRUE(zero) << "trajectory " << t << " step " << k; }
      inside = inside || zero;
      x = ctrl.system().step(x, r.u, model.sample(rng));
    }
    entered += inside ? 1 : 0;
  }
  EXPECT_EQ(entered, 1000);
}

TEST(MpcStriped, ChanceConstraintFrequency)
{
  const StripedController & ctrl = di();
  const auto model = DisturbanceModel::uniform_box(vec({0.1, 0.1}), 5);
  const auto & cons = ctrl.constraints();
  std::vector<long> ok(cons.size(), 0);
  long total = 0;
  // Starts near the state bounds keep the constraints active for a while.
  const std::vector<Vector> starts = {vec({-4.5, 1.5}), vec({4.0, 0.0}), vec({0.0, -2.0}), vec({-3.0, 0.0})};
  for (int t = 0; t < 1000; ++t) {
    smpc::RngStream rng(41, static_cast<std::uint64_t>(t));
    Vector x = starts[static_cast<std::size_t>(t) % starts.size()];
    for (int k = 0; k < 100; ++k) {
      const auto r = ctrl.control(x);
      ASSERT_TRUE(r.feasible);
      const Vector xp = ctrl.system().step(x, r.u, model.sample(rng));
      for (std::size_t c = 0; c < cons.size(); ++c) {
        if (cons[c].f.dot(xp) + cons[c].g.dot(r.u) <= 1.0) { ++ok[c]; }
      }
      ++total;
      x = xp;
    }
  }
  for (std::size_t c = 0; c < cons.size(); ++c) {
    EXPECT_GE(static_cast<double>(ok[c]) / static_cast<double>(total), cons[c].p - 0.01) << "constraint " << c;
  }
}

TEST(MpcStriped, StripeOverrideAndErrors)
{
  StripedConfig c = di_config();
  c.stripe_gains.assign(4, Matrix::Zero(1, 2));
  const StripedController zero_l(c);
  EXPECT_LE(zero_l.lyapunov_residual(), 1e-8);
  EXPECT_LE((zero_l.Pc() - di().Pc()).cwiseAbs().maxCoeff(), 1e-9);

  c.stripe_gains.assign(2, Matrix::Zero(1, 2));
  EXPECT_THROW(StripedController{c}, smpc::Error);

  StripedConfig big = di_config(5, 2.0);
  try {
    StripedController ctrl(big);
    FAIL() << "expected tightening failure";
  } catch (const smpc::Error & e) {
    EXPECT_EQ(e.code(), "tightening_infeasible");
  }

  StripedConfig bad = di_config();
  bad.constraints[0].p = 0.0;
  EXPECT_THROW(StripedController{bad}, smpc::Error);
}
