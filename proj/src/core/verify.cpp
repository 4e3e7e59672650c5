#include "verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>
#include <unordered_map>

#include "error.hpp"
#include "random.hpp"
#include "solver.hpp"

namespace smpc::verify {

namespace {

constexpr std::uint64_t kDriftStream = 0xd1;
constexpr std::uint64_t kFreshStream = 0xd2;
constexpr std::uint64_t kNuStream = 0x55;

struct Moments
{
  double mean = 0.0;
  double se = 0.0;
};

Moments drift_moments(const Vector & x, const Vector & gx, const Matrix & D, const ValueFn & V,
                      const uncertainty::DisturbanceModel & W, int n, RngStream & rng)
{
  const double v0 = V(x);
  double sum = 0.0, sum2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double d = V(gx + D * W.sample(rng)) - v0;
    sum += d;
    sum2 += d * d;
  }
  Moments m;
  m.mean = sum / n;
  m.se = std::sqrt(std::max(0.0, sum2 / n - m.mean * m.mean) / (n - 1));
  return m;
}

template <class Fn>
void parallel_for(std::size_t count, int threads, Fn && fn)
{
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) { fn(i); }
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < count; i += workers) { fn(i); }
    });
  }
  for (auto & th : pool) { th.join(); }
}

sets::HPolytope image_polytope(const Matrix & D, const sets::HPolytope & W)
{
  if (D.rows() != D.cols()) { throw Error("singular", "small-set certificate needs square D"); }
  Eigen::FullPivLU<Matrix> lu(D);
  if (!lu.isInvertible()) { throw Error("singular", "small-set certificate needs invertible D"); }
  return sets::HPolytope(W.H() * lu.inverse(), W.h());
}

}  // namespace

ClosedLoop closed_loop(const Controller & ctrl)
{
  ClosedLoop loop;
  loop.D = ctrl.system().D;
  loop.g = [&ctrl](const Vector & x) -> std::optional<Vector> {
    const ControlResult r = ctrl.control(x);
    if (!r.feasible) { return std::nullopt; }
    const LinearSystem & s = ctrl.system();
    return Vector(s.A * x + s.B * r.u);
  };
  return loop;
}

ValueFn quadratic(const Matrix & P)
{
  return [P](const Vector & x) { return x.dot(P * x); };
}

GridSpec grid_around(const sets::HPolytope & domain, double margin, int points_per_axis)
{
  const Eigen::Index n = domain.dim();
  GridSpec g;
  g.lower.resize(n);
  g.upper.resize(n);
  g.points_per_axis = points_per_axis;
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector d = Vector::Zero(n);
    d(i) = 1.0;
    const double hi = sets::support(domain, d);
    const double lo = -sets::support(domain, -d);
    const double pad = margin * (hi - lo) / 2.0;
    g.lower(i) = lo - pad;
    g.upper(i) = hi + pad;
  }
  return g;
}

DriftCertificate certify_drift(const ClosedLoop & loop, const ValueFn & V, const uncertainty::DisturbanceModel & W,
                               const GridSpec & grid, const DriftOptions & opts)
{
  const Eigen::Index n = grid.lower.size();
  const int ppa = grid.points_per_axis;
  if (ppa < 3 || grid.upper.size() != n || n == 0) { throw Error("schema", "grid needs >= 3 points per axis"); }
  if (opts.mc_n < 2) { throw Error("schema", "drift needs at least 2 samples per state"); }
  std::size_t total = 1;
  for (Eigen::Index i = 0; i < n; ++i) { total *= static_cast<std::size_t>(ppa); }

  auto coords = [&](std::size_t idx) {
    std::vector<int> c(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      c[static_cast<std::size_t>(i)] = static_cast<int>(idx % static_cast<std::size_t>(ppa));
      idx /= static_cast<std::size_t>(ppa);
    }
    return c;
  };
  const Vector step = (grid.upper - grid.lower) / (ppa - 1);

  std::vector<std::optional<Moments>> est(total);
  std::vector<Vector> pts(total);
  parallel_for(total, opts.threads, [&](std::size_t idx) {
    const auto c = coords(idx);
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) { x(i) = grid.lower(i) + step(i) * c[static_cast<std::size_t>(i)]; }
    pts[idx] = x;
    const auto gx = loop.g(x);
    if (!gx) { return; }
    RngStream rng(opts.seed, idx, kDriftStream);
    est[idx] = drift_moments(x, *gx, loop.D, V, W, opts.mc_n, rng);
  });

  DriftCertificate cert;
  cert.mc_samples_per_state = opts.mc_n;
  cert.seed = opts.seed;
  cert.grid = grid;

  // Feasible states with a missing axis neighbour form the outer layer.
  std::vector<std::size_t> feasible;
  std::vector<bool> outer;
  for (std::size_t idx = 0; idx < total; ++idx) {
    if (!est[idx]) { continue; }
    const auto c = coords(idx);
    bool edge = false;
    std::size_t stride = 1;
    for (Eigen::Index i = 0; i < n && !edge; ++i) {
      const int ci = c[static_cast<std::size_t>(i)];
      if (ci == 0 || ci == ppa - 1 || !est[idx - stride] || !est[idx + stride]) { edge = true; }
      stride *= static_cast<std::size_t>(ppa);
    }
    feasible.push_back(idx);
    outer.push_back(edge);
  }
  if (feasible.empty()) {
    cert.failure = "empty_grid";
    return cert;
  }

  std::vector<double> upper(feasible.size()), values(feasible.size());
  double d_hat = 0.0, scale_ref = 0.0;
  for (std::size_t k = 0; k < feasible.size(); ++k) {
    const Moments & m = *est[feasible[k]];
    upper[k] = m.mean + 3.0 * m.se;
    values[k] = V(pts[feasible[k]]);
    d_hat = std::max(d_hat, upper[k]);
    scale_ref = std::max(scale_ref, std::abs(m.mean));
    cert.states.push_back(pts[feasible[k]]);
    cert.drift.push_back(m.mean);
    cert.std_error.push_back(m.se);
  }
  cert.d_hat = d_hat;
  std::unordered_map<std::size_t, std::size_t> slot;
  for (std::size_t k = 0; k < feasible.size(); ++k) { slot.emplace(feasible[k], k); }

  double delta = std::max(d_hat, 1e-3 * scale_ref);
  if (delta <= 0.0) { delta = 1e-12; }
  for (int h = 0; h <= opts.max_halvings; ++h, delta *= 0.5) {
    // C must hold every state whose decrease is not comfortably below -delta.
    // Axis neighbours are included so that C also covers states between grid points.
    double level = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < feasible.size(); ++k) {
      if (upper[k] <= -2.0 * delta) { continue; }
      level = std::max(level, values[k]);
      const auto c = coords(feasible[k]);
      std::size_t stride = 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int ci = c[static_cast<std::size_t>(i)];
        for (const int dir : {-1, 1}) {
          if (ci + dir < 0 || ci + dir >= ppa) { continue; }
          const std::size_t nb = dir < 0 ? feasible[k] - stride : feasible[k] + stride;
          if (const auto it = slot.find(nb); it != slot.end()) { level = std::max(level, values[it->second]); }
        }
        stride *= static_cast<std::size_t>(ppa);
      }
    }
    bool touches = false;
    for (std::size_t k = 0; k < feasible.size() && !touches; ++k) {
      touches = outer[k] && values[k] <= level;
    }
    if (touches) { continue; }

    cert.found = true;
    cert.scale = delta;
    cert.b = 1.0 + d_hat / delta;
    cert.level = std::max(level, 0.0);
    cert.in_c.assign(feasible.size(), false);
    Vector lo = Vector::Constant(n, std::numeric_limits<double>::infinity());
    Vector hi = -lo;
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < feasible.size(); ++k) {
      const bool in = values[k] <= cert.level;
      cert.in_c[k] = in;
      if (in) {
        lo = lo.cwiseMin(cert.states[k]);
        hi = hi.cwiseMax(cert.states[k]);
      }
      worst = std::max(worst, upper[k] / delta + 1.0 - (in ? cert.b : 0.0));
    }
    if (!std::isfinite(lo(0))) {
      lo.setZero();
      hi.setZero();
    }
    cert.box = sets::HPolytope::box(lo - step, hi + step);
    cert.worst_violation = worst;
    return cert;
  }
  cert.failure = "no_certificate";
  return cert;
}

int drift_fresh_violations(const DriftCertificate & cert, const ClosedLoop & loop, const ValueFn & V,
                           const uncertainty::DisturbanceModel & W, int n_states, std::uint64_t seed)
{
  if (!cert.found) { throw Error("domain", "no drift certificate to re-check"); }
  const Eigen::Index n = cert.grid.lower.size();
  RngStream pick(seed, 0, kFreshStream);
  int checked = 0, bad = 0, attempts = 0;
  while (checked < n_states) {
    if (++attempts > 1000 * n_states) { throw Error("empty_grid", "no feasible fresh states in the grid hull"); }
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x(i) = cert.grid.lower(i) + (cert.grid.upper(i) - cert.grid.lower(i)) * pick.uniform();
    }
    const auto gx = loop.g(x);
    if (!gx) { continue; }
    RngStream rng(seed, static_cast<std::uint64_t>(checked) + 1, kFreshStream);
    const Moments m = drift_moments(x, *gx, loop.D, V, W, cert.mc_samples_per_state, rng);
    const double bound = (-1.0 + (cert.contains(V, x) ? cert.b : 0.0)) * cert.scale;
    if (m.mean - 3.0 * m.se > bound) { ++bad; }
    ++checked;
  }
  return bad;
}

SmallSetCertificate small_set_at(const Matrix & Acl, const Matrix & D, const sets::HPolytope & W, double r)
{
  SmallSetCertificate cert;
  cert.r = r;
  if (D.isZero(0.0) || !sets::contains_origin_in_interior(W)) {
    cert.failure = "no_interior";
    return cert;
  }
  const sets::HPolytope dw = image_polytope(D, W);
  // h_{-Acl C}(d) = r |Acl' d|_1 for the box C.
  cert.omega = sets::pontryagin_diff(dw, [&](const Vector & d) { return r * (Acl.transpose() * d).lpNorm<1>(); });
  const auto feas = solver::solve_lp_feasibility(cert.omega.H(), cert.omega.h(), Matrix(0, Acl.rows()), Vector(0));
  if (!feas.feasible) {
    cert.failure = "empty_omega";
    return cert;
  }
  cert.found = true;
  cert.witness = feas.witness;
  return cert;
}

SmallSetCertificate certify_small_set(const Matrix & Acl, const Matrix & D, const sets::HPolytope & W,
                                      const uncertainty::DisturbanceModel * model, int draws, std::uint64_t seed)
{
  SmallSetCertificate cert;
  for (double r = 1.0; r >= 1e-12; r *= 0.5) {
    cert = small_set_at(Acl, D, W, r);
    if (cert.found || cert.failure == "no_interior") { break; }
  }
  if (!cert.found) {
    if (cert.failure != "no_interior") { cert.failure = "r_underflow"; }
    return cert;
  }
  if (model == nullptr || draws <= 0) { return cert; }

  const Eigen::Index n = Acl.rows();
  const std::size_t corners = std::size_t{1} << n;
  std::vector<Vector> images(corners);
  for (std::size_t v = 0; v < corners; ++v) {
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) { x(i) = ((v >> i) & 1u) ? cert.r : -cert.r; }
    images[v] = Acl * x;
  }
  std::vector<long> hits(corners, 0);
  RngStream rng(seed, kNuStream);
  for (int k = 0; k < draws; ++k) {
    const Vector dw = D * model->sample(rng);
    for (std::size_t v = 0; v < corners; ++v) {
      if (sets::contains(cert.omega, images[v] + dw)) { ++hits[v]; }
    }
  }
  cert.draws = draws;
  cert.nu_mass = static_cast<double>(*std::min_element(hits.begin(), hits.end())) / draws;
  return cert;
}

IssReport check_iss_decrease(const ValueFn & V, const StepFn & nominal, double alpha3, const std::vector<Vector> & states,
                             double tol)
{
  IssReport rep;
  rep.worst_margin = -std::numeric_limits<double>::infinity();
  for (const Vector & x : states) {
    const auto xp = nominal(x);
    if (!xp) {
      ++rep.skipped;
      continue;
    }
    const double margin = V(*xp) - V(x) + alpha3 * x.squaredNorm();
    ++rep.samples;
    if (margin > tol) { ++rep.violations; }
    if (margin > rep.worst_margin) {
      rep.worst_margin = margin;
      rep.worst_state = x;
    }
  }
  rep.pass = rep.samples > 0 && rep.violations == 0;
  return rep;
}

std::optional<std::size_t> detect_terminal_entry(const std::vector<Vector> & states, const std::vector<Vector> & inputs,
                                                 const Matrix & K, double tol)
{
  if (states.size() < inputs.size()) { throw Error("dimension", "trajectory has fewer states than inputs"); }
  std::size_t k = inputs.size();
  while (k > 0 && (inputs[k - 1] - K * states[k - 1]).norm() <= tol) { --k; }
  if (k == inputs.size()) { return std::nullopt; }
  return k;
}

}  // namespace smpc::verify
