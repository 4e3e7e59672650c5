#include "sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "error.hpp"
#include "random.hpp"
#include "verify.hpp"

namespace smpc::sim {

Trajectory run_trajectory(const Controller & ctrl, const uncertainty::DisturbanceModel & W, const Matrix & Q,
                          const Matrix & R, const Vector & x0, std::uint64_t seed, std::uint64_t traj,
                          const RunOptions & opts, const sets::TruncatedReachSet * xinf)
{
  const LinearSystem & sys = ctrl.system();
  if (x0.size() != sys.n() || W.dim() != sys.nw() || opts.steps < 0) { throw Error("dimension", "run_trajectory"); }

  Trajectory t;
  const auto member = [&](const Vector & x) { return xinf == nullptr || xinf->contains(x); };
  if (opts.record) {
    t.states.reserve(static_cast<std::size_t>(opts.steps) + 1);
    t.inputs.reserve(static_cast<std::size_t>(opts.steps));
    t.disturbances.reserve(static_cast<std::size_t>(opts.steps));
    t.stage_costs.reserve(static_cast<std::size_t>(opts.steps));
    t.states.push_back(x0);
  }
  t.in_xinf.reserve(static_cast<std::size_t>(opts.steps) + 1);
  t.in_xinf.push_back(member(x0));

  const int half = opts.steps / 2;
  double sum = 0.0;
  Vector x = x0;
  for (int k = 0; k < opts.steps; ++k) {
    const ControlResult r = ctrl.control(x);
    if (!r.feasible) {
      t.feasible_throughout = false;
      break;
    }
    RngStream rng(seed, traj, static_cast<std::uint64_t>(k));
    const Vector w = W.sample(rng);
    const double cost = x.dot(Q * x) + r.u.dot(R * r.u);
    sum += cost;
    if (k + 1 == half) { t.avg_cost_half = sum / half; }
    Vector next = sys.step(x, r.u, w);
    if (opts.record) {
      t.inputs.push_back(r.u);
      t.disturbances.push_back(w);
      t.stage_costs.push_back(cost);
      t.states.push_back(next);
    }
    x = std::move(next);
    t.in_xinf.push_back(member(x));
    ++t.steps;
  }
  if (t.steps > 0) { t.avg_cost = sum / t.steps; }
  t.final_state = x;
  if (opts.record) { t.entry_index = verify::detect_terminal_entry(t.states, t.inputs, ctrl.gain(), opts.entry_tol); }
  return t;
}

Ensemble run_ensemble(const Controller & ctrl, const uncertainty::DisturbanceModel & W, const Matrix & Q,
                      const Matrix & R, const std::vector<Vector> & x0s, const EnsembleOptions & opts,
                      const sets::TruncatedReachSet * xinf)
{
  if (x0s.empty() || opts.n_traj < 1) { throw Error("domain", "run_ensemble needs a start and a trajectory"); }
  Ensemble ens;
  ens.master_seed = opts.master_seed;
  ens.trajectories.resize(static_cast<std::size_t>(opts.n_traj));
  const RunOptions ro{opts.steps, opts.record};

  std::atomic<int> next{0};
  const auto worker = [&] {
    for (int j = next++; j < opts.n_traj; j = next++) {
      const auto idx = static_cast<std::size_t>(j);
      ens.trajectories[idx] = run_trajectory(ctrl, W, Q, R, x0s[idx % x0s.size()], opts.master_seed,
                                             static_cast<std::uint64_t>(j), ro, xinf);
    }
  };
  const int threads = std::clamp(opts.threads, 1, opts.n_traj);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < threads; ++i) { pool.emplace_back(worker); }
  }

  ens.membership_curve.assign(static_cast<std::size_t>(opts.steps) + 1, 0.0);
  for (const Trajectory & t : ens.trajectories) {
    if (!t.feasible_throughout) { ++ens.infeasible; }
    for (std::size_t k = 0; k < t.in_xinf.size(); ++k) { ens.membership_curve[k] += t.in_xinf[k] ? 1.0 : 0.0; }
  }
  for (double & m : ens.membership_curve) { m /= opts.n_traj; }
  return ens;
}

LlnReport lln_report(const Ensemble & ens, double l_ss)
{
  if (ens.trajectories.empty()) { throw Error("domain", "empty ensemble"); }
  LlnReport rep;
  rep.l_ss = l_ss;
  const bool noisy = std::any_of(ens.trajectories.begin(), ens.trajectories.end(),
                                 [](const Trajectory & t) { return t.avg_cost != 0.0; });
  if (!(l_ss > 0.0)) {
    if (noisy || l_ss < 0.0) { throw Error("bad_reference", "l_ss must be positive when costs are nonzero"); }
    rep.absolute = true;
  }
  for (const Trajectory & t : ens.trajectories) {
    const double dev = std::abs(t.avg_cost - l_ss);
    rep.deviations.push_back(rep.absolute ? dev : dev / l_ss);
  }
  std::vector<double> sorted = rep.deviations;
  const std::size_t n = sorted.size();
  std::sort(sorted.begin(), sorted.end());
  rep.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return rep;
}

sets::TruncatedReachSet xinf_outer(const Matrix & Acl, const Matrix & D, const sets::HPolytope & W, double rel)
{
  // Size the tolerance from a coarse pass at the scale of D W.
  double r0 = 0.0;
  for (Eigen::Index i = 0; i < Acl.rows(); ++i) {
    const Vector e = Vector::Unit(Acl.rows(), i);
    r0 = std::max({r0, sets::support(W, D.transpose() * e), sets::support(W, -D.transpose() * e)});
  }
  if (!(r0 > 0.0)) { throw Error("no_interior", "D W is a point"); }
  const sets::TruncatedReachSet coarse = sets::mrpi_outer(Acl, D, W, r0);
  const double eps = rel * coarse.circumradius();
  return sets::mrpi_outer(Acl, D, W, eps);
}

}  // namespace smpc::sim
