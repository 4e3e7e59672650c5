#include <gtest/gtest.h>

#include <cmath>

#include "error.hpp"
#include "mpc_da.hpp"
#include "numerics.hpp"
#include "sim.hpp"

using smpc::Matrix;
using smpc::Vector;
using namespace smpc::sim;
using smpc::sets::HPolytope;
using smpc::uncertainty::DisturbanceModel;

namespace {

Vector vec(std::initializer_list<double> v)
{
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) { out(i++) = x; }
  return out;
}

smpc::LinearSystem di_system()
{
  smpc::LinearSystem s;
  s.A = Matrix(2, 2);
  s.A << 1, 1, 0, 1;
  s.B = Matrix(2, 1);
  s.B << 0.5, 1;
  s.D = Matrix::Identity(2, 2);
  return s;
}

const Matrix I2 = Matrix::Identity(2, 2);
const Matrix I1 = Matrix::Identity(1, 1);

const smpc::LinearFeedbackController & lqr()
{
  static const smpc::LinearFeedbackController ctrl = [] {
    const auto s = di_system();
    return smpc::LinearFeedbackController(s, smpc::numerics::solve_dare(s.A, s.B, I2, I1).K);
  }();
  return ctrl;
}

Matrix acl(const smpc::Controller & c) { return c.system().A + c.system().B * c.gain(); }

// Linear law that refuses to act outside |x1| <= limit.
class Clipped : public smpc::Controller
{
public:
  explicit Clipped(double limit) : limit_(limit) {}
  const smpc::LinearSystem & system() const override { return lqr().system(); }
  const Matrix & gain() const override { return lqr().gain(); }
  smpc::ControlResult control(const Vector & x) const override
  {
    auto r = lqr().control(x);
    if (std::abs(x(0)) > limit_) { r.feasible = false; }
    return r;
  }
  std::string kind() const override { return "clipped"; }

private:
  double limit_;
};

}  // namespace

TEST(Sim, TrajectoryRecordIsConsistent)
{
  const auto W = DisturbanceModel::uniform_box(vec({0.1, 0.1}));
  const auto t = run_trajectory(lqr(), W, I2, I1, vec({3.0, -1.0}), 5, 0, {50});
  ASSERT_TRUE(t.feasible_throughout);
  EXPECT_EQ(t.steps, 50);
  ASSERT_EQ(t.states.size(), t.inputs.size() + 1);
  ASSERT_EQ(t.inputs.size(), t.disturbances.size());
  ASSERT_EQ(t.inputs.size(), t.stage_costs.size());
  EXPECT_EQ(t.in_xinf.size(), 51u);
  const auto & s = lqr().system();
  double sum = 0.0;
  for (std::size_t k = 0; k < t.inputs.size(); ++k) {
    EXPECT_LE((t.states[k + 1] - s.step(t.states[k], t.inputs[k], t.disturbances[k])).norm(), 1e-9);
    EXPECT_DOUBLE_EQ(t.stage_costs[k], t.states[k].squaredNorm() + t.inputs[k].squaredNorm());
    sum += t.stage_costs[k];
  }
  EXPECT_NEAR(t.avg_cost, sum / 50, 1e-12);
  EXPECT_EQ(t.entry_index, std::optional<std::size_t>(0));
}

TEST(Sim, ReplayIsBitwiseIdentical)
{
  const auto W = DisturbanceModel::uniform_box(vec({0.1, 0.1}));
  const auto a = run_trajectory(lqr(), W, I2, I1, vec({1.0, 1.0}), 11, 3, {100});
  const auto b = run_trajectory(lqr(), W, I2, I1, vec({1.0, 1.0}), 11, 3, {100});
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.disturbances, b.disturbances);
  const auto c = run_trajectory(lqr(), W, I2, I1, vec({1.0, 1.0}), 11, 4, {100});
  EXPECT_NE(a.disturbances, c.disturbances);
}

TEST(Sim, NominalDecayInLyapunovNorm)
{
  const auto W = DisturbanceModel::uniform_box(vec({1e-300, 1e-300}));
  const Matrix P = smpc::numerics::solve_dlyap(acl(lqr()), I2);
  const auto t = run_trajectory(lqr(), W, I2, I1, vec({4.0, -2.0}), 1, 0, {60});
  for (std::size_t k = 0; k + 1 < t.states.size(); ++k) {
    const double now = t.states[k].dot(P * t.states[k]);
    EXPECT_LT(t.states[k + 1].dot(P * t.states[k + 1]), now);
  }
}

TEST(Sim, InfeasibleSolveTruncates)
{
  const auto W = DisturbanceModel::uniform_box(vec({0.1, 0.1}));
  const Clipped ctrl(2.0);
  const auto t = run_trajectory(ctrl, W, I2, I1, vec({3.0, 0.0}), 1, 0, {20});
  EXPECT_FALSE(t.feasible_throughout);
  EXPECT_EQ(t.steps, 0);
  EXPECT_EQ(t.states.size(), 1u);

  const auto ens = run_ensemble(ctrl, W, I2, I1, {vec({3.0, 0.0}), vec({0.5, 0.0})}, {20, 4});
  EXPECT_EQ(ens.infeasible, 2u);
}

TEST(Sim, SingleTrajectoryEnsembleMatches)
{
  const auto W = DisturbanceModel::uniform_box(vec({0.1, 0.1}));
  const auto t = run_trajectory(lqr(), W, I2, I1, vec({1.0, 0.0}), 21, 0, {40});
  const auto ens = run_ensemble(lqr(), W, I2, I1, {vec({1.0, 0.0})}, {40, 1, 21});
  ASSERT_EQ(ens.trajectories.size(), 1u);
  EXPECT_EQ(ens.trajectories[0].states, t.states);
  EXPECT_EQ(ens.trajectories[0].avg_cost, t.avg_cost);
}

TEST(Sim, WholeSpaceMembership)
{
  const auto W = DisturbanceModel::uniform_box(vec({0.1, 0.1}));
  const auto ens = run_ensemble(lqr(), W, I2, I1, {vec({3.0, 1.0})}, {30, 8, 2});
  ASSERT_EQ(ens.membership_curve.size(), 31u);
  for (double m : ens.membership_curve) { EXPECT_EQ(m, 1.0); }
}

TEST(Sim, ThreadCountDoesNotChangeResults)
{
  const auto W = DisturbanceModel::uniform_box(vec({0.1, 0.1}));
  const auto xinf = xinf_outer(acl(lqr()), I2, W.support());
  EnsembleOptions o{80, 24, 99, 1};
  const auto a = run_ensemble(lqr(), W, I2, I1, {vec({3.0, 1.0}), vec({-2.0, 0.5})}, o, &xinf);
  o.threads = 4;
  const auto b = run_ensemble(lqr(), W, I2, I1, {vec({3.0, 1.0}), vec({-2.0, 0.5})}, o, &xinf);
  EXPECT_EQ(a.membership_curve, b.membership_curve);
  for (std::size_t j = 0; j < a.trajectories.size(); ++j) {
    EXPECT_EQ(a.trajectories[j].states, b.trajectories[j].states);
  }
}

TEST(Sim, MembershipConvergesForLinearLoop)
{
  const auto W = DisturbanceModel::uniform_box(vec({0.1, 0.1}));
  const auto xinf = xinf_outer(acl(lqr()), I2, W.support());
  EXPECT_GT(xinf.epsilon(), 0.0);
  EXPECT_NEAR(xinf.epsilon(), 0.01 * xinf.circumradius(), 0.002 * xinf.circumradius());
  const auto ens = run_ensemble(lqr(), W, I2, I1, {vec({4.0, -2.0})}, {100, 200, 7, 1, false}, &xinf);
  EXPECT_EQ(ens.membership_curve.front(), 0.0);
  EXPECT_GE(ens.membership_curve.back(), 0.99);
  EXPECT_GE(ens.membership_curve.back(), ens.membership_curve[50]);
}

TEST(Sim, LlnForLinearLoop)
{
  const auto W = DisturbanceModel::uniform_box(vec({0.1, 0.1}));
  const Matrix K = lqr().gain();
  const double l_ss = smpc::numerics::terminal_stage_cost(acl(lqr()), I2, W.covariance(), I2, I1, K);
  const auto ens = run_ensemble(lqr(), W, I2, I1, {Vector::Zero(2)}, {20000, 10, 3, 1, false});
  const auto rep = lln_report(ens, l_ss);
  EXPECT_EQ(rep.deviations.size(), 10u);
  EXPECT_LE(rep.median, 0.1);
  for (const auto & t : ens.trajectories) { EXPECT_LE(std::abs(t.avg_cost - t.avg_cost_half), 0.1 * t.avg_cost); }
}

TEST(Sim, LlnReferenceChecks)
{
  const auto W0 = DisturbanceModel::uniform_box(vec({1e-300, 1e-300}));
  const auto quiet = run_ensemble(lqr(), W0, I2, I1, {Vector::Zero(2)}, {10, 3});
  const auto rep = lln_report(quiet, 0.0);
  EXPECT_TRUE(rep.absolute);
  EXPECT_EQ(rep.median, 0.0);

  const auto W = DisturbanceModel::uniform_box(vec({0.1, 0.1}));
  const auto noisy = run_ensemble(lqr(), W, I2, I1, {Vector::Zero(2)}, {10, 3});
  EXPECT_THROW(lln_report(noisy, 0.0), smpc::Error);
  EXPECT_THROW(lln_report(noisy, -1.0), smpc::Error);
}

TEST(Sim, DaTrajectoriesStayFeasible)
{
  smpc::mpc_da::DAConfig c;
  c.system = di_system();
  c.horizon = 3;
  c.Q = I2;
  c.R = I1;
  c.Z = HPolytope::symmetric_box(vec({5, 3, 1}));
  c.W = HPolytope::symmetric_box(vec({0.1, 0.1}));
  c.w_covariance = I2 * (0.01 / 3.0);
  const smpc::mpc_da::DAController ctrl(c);
  const auto W = DisturbanceModel::uniform_box(vec({0.1, 0.1}));
  const auto ens = run_ensemble(ctrl, W, I2, I1, {vec({-4.5, 1.5}), vec({4.0, 0.0})}, {300, 10, 5});
  EXPECT_EQ(ens.infeasible, 0u);
  for (const auto & t : ens.trajectories) {
    for (std::size_t k = 0; k < t.inputs.size(); ++k) {
      Vector z(3);
      z << t.states[k], t.inputs[k];
      EXPECT_TRUE(smpc::sets::contains(c.Z, z));
    }
    EXPECT_TRUE(t.entry_index.has_value());
  }
}
