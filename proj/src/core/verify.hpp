#ifndef SMPC_CORE_VERIFY_HPP_
#define SMPC_CORE_VERIFY_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "linalg.hpp"
#include "sets.hpp"
#include "system.hpp"
#include "uncertainty.hpp"

namespace smpc::verify {

using ValueFn = std::function<double(const Vector &)>;
/// Deterministic part g(x) of x+ = g(x) + D w; empty where the law is undefined.
using StepFn = std::function<std::optional<Vector>(const Vector &)>;

struct ClosedLoop
{
  StepFn g;
  Matrix D;
};

/// g(x) = A x + B u(x) for a receding-horizon controller.
ClosedLoop closed_loop(const Controller & ctrl);

/// V(x) = x' P x.
ValueFn quadratic(const Matrix & P);

struct GridSpec
{
  Vector lower;
  Vector upper;
  int points_per_axis = 31;
};

/// Bounding box of `domain` enlarged by `margin` (relative) on every side.
GridSpec grid_around(const sets::HPolytope & domain, double margin = 0.1, int points_per_axis = 31);

struct DriftOptions
{
  int mc_n = 2000;
  std::uint64_t seed = 0;
  int max_halvings = 40;
  int threads = 1;
};

/**
 * Drift certificate for E V(x+) - V(x) <= -delta + (b - 1) delta 1_C(x), i.e.
 * the condition on V / delta with b = 1 + d / delta.
 * C = {V <= level} restricted to the grid; `box` is its bounding box.
 */
struct DriftCertificate
{
  bool found = false;
  std::string failure;
  double d_hat = 0.0;      ///< max over the grid of the 3-sigma upper drift, clipped at 0
  double scale = 0.0;      ///< delta = d' - d_hat
  double b = 0.0;
  double level = 0.0;
  sets::HPolytope box;
  double worst_violation = 0.0;  ///< max over grid of upper drift / delta + 1 - b 1_C; <= 0 when found
  int mc_samples_per_state = 0;
  std::uint64_t seed = 0;
  GridSpec grid;
  std::vector<Vector> states;   ///< feasible grid states
  std::vector<double> drift;    ///< Monte Carlo mean of V(x+) - V(x)
  std::vector<double> std_error;  ///< its standard error
  std::vector<bool> in_c;

  /// Indicator of C at an arbitrary state.
  bool contains(const ValueFn & V, const Vector & x) const { return V(x) <= level; }
};

DriftCertificate certify_drift(const ClosedLoop & loop, const ValueFn & V, const uncertainty::DisturbanceModel & W,
                               const GridSpec & grid, const DriftOptions & opts = {});

/// Fresh random feasible states in the grid hull violating the certificate beyond 3 standard errors.
int drift_fresh_violations(const DriftCertificate & cert, const ClosedLoop & loop, const ValueFn & V,
                           const uncertainty::DisturbanceModel & W, int n_states, std::uint64_t seed);

struct SmallSetCertificate
{
  bool found = false;
  std::string failure;
  double r = 0.0;             ///< C = [-r, r]^n
  sets::HPolytope omega;      ///< D W minus (-Acl C)
  Vector witness;
  double nu_mass = 0.0;       ///< min over vertices x of C of P(Acl x + D w in Omega)
  int draws = 0;
};

/// Omega for a fixed radius; found = false when it is empty.
SmallSetCertificate small_set_at(const Matrix & Acl, const Matrix & D, const sets::HPolytope & W, double r);

/**
 * Halving search r = 1, 1/2, ... down to 1e-12 for a nonempty Omega, then the
 * nu-mass from `draws` samples of the model (skipped when model is null).
 */
SmallSetCertificate certify_small_set(const Matrix & Acl, const Matrix & D, const sets::HPolytope & W,
                                      const uncertainty::DisturbanceModel * model, int draws = 1000000,
                                      std::uint64_t seed = 0);

struct IssReport
{
  bool pass = false;
  double worst_margin = 0.0;  ///< max V(f(x,0)) - V(x) + alpha3 |x|^2
  Vector worst_state;
  std::size_t violations = 0;
  std::size_t samples = 0;
  std::size_t skipped = 0;    ///< states where f(x, 0) was undefined
};

IssReport check_iss_decrease(const ValueFn & V, const StepFn & nominal, double alpha3, const std::vector<Vector> & states,
                             double tol);

/// Smallest k with |u_j - K x_j| <= tol for all j >= k.
std::optional<std::size_t> detect_terminal_entry(const std::vector<Vector> & states, const std::vector<Vector> & inputs,
                                                 const Matrix & K, double tol = 1e-6);

}  // namespace smpc::verify

#endif  // SMPC_CORE_VERIFY_HPP_
