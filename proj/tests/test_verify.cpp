#include <gtest/gtest.h>

#include <cmath>

#include "error.hpp"
#include "numerics.hpp"
#include "random.hpp"
#include "verify.hpp"

using smpc::Matrix;
using smpc::Vector;
using namespace smpc::verify;
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

Matrix mat1(double a) { return Matrix::Constant(1, 1, a); }

ClosedLoop scalar_loop(double a)
{
  return {[a](const Vector & x) -> std::optional<Vector> { return Vector(a * x); }, mat1(1.0)};
}

ValueFn abs_value()
{
  return [](const Vector & x) { return std::abs(x(0)); };
}

GridSpec scalar_grid(double half, int ppa = 31) { return {vec({-half}), vec({half}), ppa}; }

}  // namespace

TEST(Verify, ScalarDriftCertificate)
{
  const auto W = DisturbanceModel::uniform_box(vec({0.1}), 1);
  DriftOptions opts;
  opts.seed = 3;
  const auto cert = certify_drift(scalar_loop(0.5), abs_value(), W, scalar_grid(1.0), opts);
  ASSERT_TRUE(cert.found) << cert.failure;
  EXPECT_TRUE(std::isfinite(cert.b));
  EXPECT_GE(cert.b, 1.0);
  EXPECT_GT(cert.scale, 0.0);
  EXPECT_LE(cert.worst_violation, 0.0);
  EXPECT_LE(cert.level, 0.3);
  for (std::size_t k = 0; k < cert.states.size(); ++k) {
    if (cert.in_c[k]) { EXPECT_LE(std::abs(cert.states[k](0)), 0.3); }
  }
  EXPECT_EQ(drift_fresh_violations(cert, scalar_loop(0.5), abs_value(), W, 200, 9), 0);
}

TEST(Verify, DeterministicContraction)
{
  const auto W = DisturbanceModel::uniform_box(vec({1e-12}), 1);
  const auto cert = certify_drift(scalar_loop(0.5), quadratic(mat1(1.0)), W, scalar_grid(1.0, 21));
  ASSERT_TRUE(cert.found) << cert.failure;
  // Only states next to the origin need the b term.
  for (std::size_t k = 0; k < cert.states.size(); ++k) {
    if (cert.in_c[k]) { EXPECT_LE(std::abs(cert.states[k](0)), 0.2); }
  }
}

TEST(Verify, ExpandingLoopHasNoCertificate)
{
  const auto W = DisturbanceModel::uniform_box(vec({0.1}), 1);
  const auto cert = certify_drift(scalar_loop(2.0), abs_value(), W, scalar_grid(1.0));
  EXPECT_FALSE(cert.found);
  EXPECT_EQ(cert.failure, "no_certificate");
  EXPECT_THROW(drift_fresh_violations(cert, scalar_loop(2.0), abs_value(), W, 10, 1), smpc::Error);
}

TEST(Verify, DriftIsDeterministicAcrossThreads)
{
  const auto W = DisturbanceModel::uniform_box(vec({0.1}), 1);
  DriftOptions one, four;
  one.seed = four.seed = 17;
  four.threads = 4;
  const auto a = certify_drift(scalar_loop(0.5), abs_value(), W, scalar_grid(1.0), one);
  const auto b = certify_drift(scalar_loop(0.5), abs_value(), W, scalar_grid(1.0), four);
  EXPECT_EQ(a.drift, b.drift);
  EXPECT_EQ(a.b, b.b);
  EXPECT_EQ(a.level, b.level);
}

TEST(Verify, SmallSetScalarHandCase)
{
  const HPolytope W = HPolytope::symmetric_box(vec({0.1}));
  const auto cert = small_set_at(mat1(0.5), mat1(1.0), W, 0.1);
  ASSERT_TRUE(cert.found);
  EXPECT_NEAR(smpc::sets::support(cert.omega, vec({1.0})), 0.05, 1e-12);
  EXPECT_NEAR(smpc::sets::support(cert.omega, vec({-1.0})), 0.05, 1e-12);
}

TEST(Verify, SmallSetZeroLoopTakesUnitRadius)
{
  const HPolytope W = HPolytope::symmetric_box(vec({0.1, 0.1}));
  const auto model = DisturbanceModel::uniform_box(vec({0.1, 0.1}), 2);
  const auto cert = certify_small_set(Matrix::Zero(2, 2), Matrix::Identity(2, 2), W, &model, 10000, 1);
  ASSERT_TRUE(cert.found);
  EXPECT_EQ(cert.r, 1.0);
  EXPECT_EQ(cert.nu_mass, 1.0);
}

TEST(Verify, SmallSetWitnessIsReachableFromEveryVertex)
{
  Matrix acl(2, 2);
  acl << 0.8, 0.3, -0.1, 0.6;
  const HPolytope W = HPolytope::symmetric_box(vec({0.1, 0.2}));
  const auto model = DisturbanceModel::uniform_box(vec({0.1, 0.2}), 4);
  const auto cert = certify_small_set(acl, Matrix::Identity(2, 2), W, &model, 20000, 5);
  ASSERT_TRUE(cert.found) << cert.failure;
  EXPECT_GT(cert.nu_mass, 0.0);
  ASSERT_TRUE(smpc::sets::contains(cert.omega, cert.witness));
  // omega - Acl x lies in W for every corner x of C.
  for (int v = 0; v < 4; ++v) {
    const Vector x = vec({(v & 1) ? cert.r : -cert.r, (v & 2) ? cert.r : -cert.r});
    EXPECT_TRUE(smpc::sets::contains(W, cert.witness - acl * x));
  }
}

TEST(Verify, SmallSetDegenerateDisturbance)
{
  const HPolytope W = HPolytope::symmetric_box(vec({0.1}));
  const auto zero_d = certify_small_set(mat1(0.5), mat1(0.0), W, nullptr);
  EXPECT_FALSE(zero_d.found);
  EXPECT_EQ(zero_d.failure, "no_interior");

  const HPolytope point = HPolytope::symmetric_box(vec({0.0}));
  const auto flat = certify_small_set(mat1(0.5), mat1(1.0), point, nullptr);
  EXPECT_FALSE(flat.found);
  EXPECT_EQ(flat.failure, "no_interior");
}

TEST(Verify, IssDecreaseForLinearLoop)
{
  Matrix acl(2, 2);
  acl << 1.0 - 0.5 * 0.4, 1.0 - 0.5 * 1.2, -0.4, 1.0 - 1.2;
  ASSERT_TRUE(smpc::numerics::is_schur(acl));
  const Matrix P = smpc::numerics::solve_dlyap(acl, Matrix::Identity(2, 2));
  const StepFn f = [&](const Vector & x) -> std::optional<Vector> { return Vector(acl * x); };
  smpc::RngStream rng(2);
  std::vector<Vector> states;
  for (int k = 0; k < 1000; ++k) { states.push_back(vec({4 * rng.uniform() - 2, 4 * rng.uniform() - 2})); }
  // V(Acl x) - V(x) = -|x|^2 exactly.
  const auto rep = check_iss_decrease(quadratic(P), f, 1.0, states, 1e-10);
  EXPECT_TRUE(rep.pass);
  EXPECT_LE(std::abs(rep.worst_margin), 1e-10);
  EXPECT_EQ(rep.samples, 1000u);

  const auto flat = check_iss_decrease([](const Vector &) { return 0.0; }, f, 0.5, states, 1e-7);
  EXPECT_FALSE(flat.pass);
  EXPECT_EQ(flat.violations, 1000u);
}

TEST(Verify, IssSkipsUndefinedStates)
{
  const StepFn f = [](const Vector & x) -> std::optional<Vector> {
    if (x(0) > 0) { return std::nullopt; }
    return Vector(0.5 * x);
  };
  const auto rep = check_iss_decrease(quadratic(mat1(1.0)), f, 0.5, {vec({1.0}), vec({-1.0})}, 1e-12);
  EXPECT_EQ(rep.skipped, 1u);
  EXPECT_EQ(rep.samples, 1u);
  EXPECT_TRUE(rep.pass);
}

TEST(Verify, TerminalEntry)
{
  const Matrix K = mat1(-0.5);
  std::vector<Vector> xs, us;
  for (int k = 0; k < 10; ++k) {
    xs.push_back(vec({1.0 / (k + 1)}));
    us.push_back(K * xs.back());
  }
  xs.push_back(vec({0.0}));
  EXPECT_EQ(detect_terminal_entry(xs, us, K), std::optional<std::size_t>(0));

  us[3](0) += 1e-3;
  EXPECT_EQ(detect_terminal_entry(xs, us, K), std::optional<std::size_t>(4));

  us[9](0) += 1.0;
  EXPECT_FALSE(detect_terminal_entry(xs, us, K).has_value());
}

TEST(Verify, TerminalEntryIsMonotoneUnderExtension)
{
  const Matrix K = mat1(-0.5);
  smpc::RngStream rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vector> xs{vec({1.0})}, us;
    std::optional<std::size_t> prev;
    const int switch_at = static_cast<int>(rng() % 20);
    for (int k = 0; k < 40; ++k) {
      const Vector x = xs.back();
      us.push_back(k < switch_at ? Vector(K * x + vec({0.1})) : Vector(K * x));
      xs.push_back(0.5 * x);
      const auto entry = detect_terminal_entry(xs, us, K);
      if (prev) { ASSERT_EQ(entry, prev); }
      if (entry) { prev = entry; }
    }
    EXPECT_EQ(prev, std::optional<std::size_t>(static_cast<std::size_t>(switch_at)));
  }
}
