#include "experiment.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "error.hpp"
#include "mpc_da.hpp"
#include "numerics.hpp"
#include "random.hpp"
#include "sim.hpp"
#include "verify.hpp"

namespace smpc::app {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kIssStream = 0x155;

[[noreturn]] void schema(const std::string & where, const std::string & what)
{
  throw Error("schema", where + ": " + what);
}

void allow_keys(const json & j, const std::string & where, std::initializer_list<std::string_view> keys)
{
  if (!j.is_object()) { schema(where, "expected an object"); }
  for (const auto & item : j.items()) {
    if (std::find(keys.begin(), keys.end(), item.key()) == keys.end()) { schema(where, "unknown key '" + item.key() + "'"); }
  }
}

const json & need(const json & j, const char * key, const std::string & where)
{
  const auto it = j.find(key);
  if (it == j.end()) { schema(where, std::string("missing '") + key + "'"); }
  return *it;
}

double to_double(const json & j, const std::string & where)
{
  if (!j.is_number()) { schema(where, "expected a number"); }
  const double v = j.get<double>();
  if (!std::isfinite(v)) { schema(where, "non-finite number"); }
  return v;
}

int to_int(const json & j, const std::string & where)
{
  if (!j.is_number_integer()) { schema(where, "expected an integer"); }
  const auto v = j.get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) { schema(where, "out of range"); }
  return static_cast<int>(v);
}

std::uint64_t to_u64(const json & j, const std::string & where)
{
  if (j.is_number_unsigned()) { return j.get<std::uint64_t>(); }
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) { return static_cast<std::uint64_t>(j.get<std::int64_t>()); }
  schema(where, "expected a nonnegative integer");
}

Vector to_vector(const json & j, const std::string & where)
{
  if (!j.is_array()) { schema(where, "expected an array of numbers"); }
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) { v(static_cast<Eigen::Index>(i)) = to_double(j[i], where); }
  return v;
}

Matrix to_matrix(const json & j, const std::string & where)
{
  if (!j.is_array() || j.empty()) { schema(where, "expected a nonempty array of rows"); }
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) { schema(where, "ragged matrix"); }
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = to_double(j[r][c], where);
    }
  }
  return m;
}

sets::HPolytope to_polytope(const json & j, const std::string & where)
{
  if (j.is_object() && j.contains("box")) {
    allow_keys(j, where, {"box"});
    return sets::HPolytope::symmetric_box(to_vector(j["box"], where + ".box"));
  }
  allow_keys(j, where, {"H", "h"});
  const Matrix H = to_matrix(need(j, "H", where), where + ".H");
  const Vector h = to_vector(need(j, "h", where), where + ".h");
  if (H.rows() != h.size()) { throw Error("dimension", where + ": H and h disagree"); }
  return sets::HPolytope(H, h);
}

json to_json(const Vector & v)
{
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) { a.push_back(v(i)); }
  return a;
}

json to_json(const Matrix & m)
{
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) { a.push_back(to_json(Vector(m.row(r).transpose()))); }
  return a;
}

json to_json(const sets::HPolytope & p) { return {{"H", to_json(p.H())}, {"h", to_json(p.h())}}; }

void parse_system(const json & j, ExperimentConfig & cfg)
{
  allow_keys(j, "system", {"A", "B", "D"});
  cfg.system.A = to_matrix(need(j, "A", "system"), "system.A");
  cfg.system.B = to_matrix(need(j, "B", "system"), "system.B");
  cfg.system.D = j.contains("D") ? to_matrix(j["D"], "system.D") : Matrix::Identity(cfg.system.A.rows(), cfg.system.A.rows());
  cfg.system.validate();
}

void parse_disturbance(const json & j, ExperimentConfig & cfg)
{
  allow_keys(j, "disturbance", {"kind", "half_widths", "H", "h", "sigma", "core_weight", "core_scale", "seed"});
  const std::string kind = j.contains("kind") ? j["kind"].get<std::string>() : "uniform-on-box";
  uncertainty::DisturbanceKind dk;
  try {
    dk = uncertainty::kind_from_string(kind);
  } catch (const Error &) {
    schema("disturbance.kind", "unknown kind '" + kind + "'");
  }
  sets::HPolytope support;
  if (j.contains("half_widths")) {
    if (j.contains("H") || j.contains("h")) { schema("disturbance", "give half_widths or H/h, not both"); }
    support = sets::HPolytope::symmetric_box(to_vector(j["half_widths"], "disturbance.half_widths"));
  } else {
    const Matrix H = to_matrix(need(j, "H", "disturbance"), "disturbance.H");
    const Vector h = to_vector(need(j, "h", "disturbance"), "disturbance.h");
    if (H.rows() != h.size()) { throw Error("dimension", "disturbance: H and h disagree"); }
    support = sets::HPolytope(H, h);
  }
  uncertainty::DisturbanceParams params;
  if (j.contains("sigma")) { params.sigma = to_double(j["sigma"], "disturbance.sigma"); }
  if (j.contains("core_weight")) { params.core_weight = to_double(j["core_weight"], "disturbance.core_weight"); }
  if (j.contains("core_scale")) { params.core_scale = to_double(j["core_scale"], "disturbance.core_scale"); }
  const std::uint64_t seed = j.contains("seed") ? to_u64(j["seed"], "disturbance.seed") : 0;
  if (support.dim() != cfg.system.nw()) { throw Error("dimension", "disturbance dimension differs from D columns"); }
  cfg.disturbance = std::make_shared<uncertainty::DisturbanceModel>(dk, support, params, seed);
}

void parse_controller(const json & j, ExperimentConfig & cfg)
{
  const std::string kind = need(j, "kind", "controller").is_string() ? j["kind"].get<std::string>() : "";
  const Eigen::Index n = cfg.system.n(), m = cfg.system.m();
  auto costs = [&] {
    cfg.Q = to_matrix(need(j, "Q", "controller"), "controller.Q");
    cfg.R = to_matrix(need(j, "R", "controller"), "controller.R");
    if (cfg.Q.rows() != n || cfg.Q.cols() != n || cfg.R.rows() != m || cfg.R.cols() != m) {
      throw Error("dimension", "controller: Q or R has the wrong shape");
    }
  };
  if (kind == "da") {
    allow_keys(j, "controller", {"kind", "horizon", "Q", "R", "constraints"});
    cfg.kind = ControllerKind::da;
    cfg.horizon = to_int(need(j, "horizon", "controller"), "controller.horizon");
    costs();
    cfg.Z = to_polytope(need(j, "constraints", "controller"), "controller.constraints");
    if (cfg.Z.dim() != n + m) { throw Error("dimension", "controller.constraints must act on (x, u)"); }
  } else if (kind == "striped") {
    allow_keys(j, "controller", {"kind", "horizon", "Q", "R", "chance_constraints", "domain_box", "tail_horizon",
                                 "quantile_samples", "quantile_seed", "stripe_gains"});
    cfg.kind = ControllerKind::striped;
    cfg.horizon = to_int(need(j, "horizon", "controller"), "controller.horizon");
    costs();
    const json & cc = need(j, "chance_constraints", "controller");
    if (!cc.is_array()) { schema("controller.chance_constraints", "expected an array"); }
    for (std::size_t i = 0; i < cc.size(); ++i) {
      const std::string where = "controller.chance_constraints[" + std::to_string(i) + "]";
      allow_keys(cc[i], where, {"f", "g", "p"});
      mpc_striped::ChanceConstraint c;
      c.f = to_vector(need(cc[i], "f", where), where + ".f");
      c.g = to_vector(need(cc[i], "g", where), where + ".g");
      c.p = to_double(need(cc[i], "p", where), where + ".p");
      if (c.f.size() != n || c.g.size() != m) { throw Error("dimension", where + ": f or g has the wrong length"); }
      cfg.chance.push_back(std::move(c));
    }
    const Vector box = to_vector(need(j, "domain_box", "controller"), "controller.domain_box");
    if (box.size() != n) { throw Error("dimension", "controller.domain_box has the wrong length"); }
    cfg.domain_box = sets::HPolytope::symmetric_box(box);
    if (j.contains("tail_horizon")) { cfg.tail_horizon = to_int(j["tail_horizon"], "controller.tail_horizon"); }
    if (j.contains("quantile_samples")) {
      cfg.quantile_samples = to_int(j["quantile_samples"], "controller.quantile_samples");
    }
    if (j.contains("quantile_seed")) { cfg.quantile_seed = to_u64(j["quantile_seed"], "controller.quantile_seed"); }
    if (j.contains("stripe_gains")) {
      if (!j["stripe_gains"].is_array()) { schema("controller.stripe_gains", "expected an array of matrices"); }
      for (const auto & g : j["stripe_gains"]) { cfg.stripe_gains.push_back(to_matrix(g, "controller.stripe_gains")); }
    }
  } else if (kind == "linear") {
    allow_keys(j, "controller", {"kind", "Q", "R", "K"});
    cfg.kind = ControllerKind::linear;
    costs();
    if (j.contains("K")) {
      cfg.K = to_matrix(j["K"], "controller.K");
      if (cfg.K->rows() != m || cfg.K->cols() != n) { throw Error("dimension", "controller.K has the wrong shape"); }
    }
  } else {
    schema("controller.kind", "expected \"da\", \"striped\" or \"linear\"");
  }
}

void parse_verification(const json & j, ExperimentConfig & cfg)
{
  allow_keys(j, "verification", {"grid_points", "grid_margin", "grid_lower", "grid_upper", "mc_n", "seed",
                                 "fresh_states", "small_set_draws", "iss_samples", "iss_tol"});
  VerificationSpec & v = cfg.verification;
  if (j.contains("grid_points")) { v.grid_points = to_int(j["grid_points"], "verification.grid_points"); }
  if (j.contains("grid_margin")) { v.grid_margin = to_double(j["grid_margin"], "verification.grid_margin"); }
  if (j.contains("grid_lower") != j.contains("grid_upper")) { schema("verification", "grid_lower needs grid_upper"); }
  if (j.contains("grid_lower")) {
    v.grid_lower = to_vector(j["grid_lower"], "verification.grid_lower");
    v.grid_upper = to_vector(j["grid_upper"], "verification.grid_upper");
    if (v.grid_lower->size() != cfg.system.n() || v.grid_upper->size() != cfg.system.n() ||
        (v.grid_upper->array() <= v.grid_lower->array()).any()) {
      throw Error("dimension", "verification grid bounds are inconsistent");
    }
  }
  if (j.contains("mc_n")) { v.mc_n = to_int(j["mc_n"], "verification.mc_n"); }
  if (j.contains("seed")) { v.seed = to_u64(j["seed"], "verification.seed"); }
  if (j.contains("fresh_states")) { v.fresh_states = to_int(j["fresh_states"], "verification.fresh_states"); }
  if (j.contains("small_set_draws")) { v.small_set_draws = to_int(j["small_set_draws"], "verification.small_set_draws"); }
  if (j.contains("iss_samples")) { v.iss_samples = to_int(j["iss_samples"], "verification.iss_samples"); }
  if (j.contains("iss_tol")) { v.iss_tol = to_double(j["iss_tol"], "verification.iss_tol"); }
  if (v.grid_points < 3 || v.mc_n < 2 || v.fresh_states < 0 || v.small_set_draws < 1 || v.iss_samples < 1 ||
      v.grid_margin < 0.0) {
    schema("verification", "value out of range");
  }
}

void parse_simulation(const json & j, ExperimentConfig & cfg)
{
  allow_keys(j, "simulation", {"x0", "T", "n_traj", "master_seed", "record", "xinf_rel_eps", "lln_tolerance"});
  SimulationSpec & s = cfg.simulation;
  const json & x0 = need(j, "x0", "simulation");
  if (!x0.is_array() || x0.empty()) { schema("simulation.x0", "expected a nonempty list of states"); }
  for (const auto & x : x0) {
    s.x0.push_back(to_vector(x, "simulation.x0"));
    if (s.x0.back().size() != cfg.system.n()) { throw Error("dimension", "simulation.x0 entry has the wrong length"); }
  }
  s.steps = to_int(need(j, "T", "simulation"), "simulation.T");
  if (j.contains("n_traj")) { s.n_traj = to_int(j["n_traj"], "simulation.n_traj"); }
  if (j.contains("master_seed")) { s.master_seed = to_u64(j["master_seed"], "simulation.master_seed"); }
  if (j.contains("record")) {
    if (!j["record"].is_boolean()) { schema("simulation.record", "expected a boolean"); }
    s.record = j["record"].get<bool>();
  }
  if (j.contains("xinf_rel_eps")) { s.xinf_rel_eps = to_double(j["xinf_rel_eps"], "simulation.xinf_rel_eps"); }
  if (j.contains("lln_tolerance")) { s.lln_tolerance = to_double(j["lln_tolerance"], "simulation.lln_tolerance"); }
  if (s.steps < 1 || s.n_traj < 1 || !(s.xinf_rel_eps > 0.0)) { schema("simulation", "value out of range"); }
}

std::string fmt17(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path & path, const std::string & text)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) { throw Error("io", "cannot write " + path.string()); }
  out << text;
  if (!out) { throw Error("io", "write failed for " + path.string()); }
}

std::string ctrl_kind(ControllerKind k)
{
  switch (k) {
    case ControllerKind::da: return "da";
    case ControllerKind::striped: return "striped";
    case ControllerKind::linear: return "linear";
  }
  return "unknown";
}

/// Bounding box of the states the controller can act on.
sets::HPolytope state_domain(const ExperimentConfig & cfg)
{
  const Eigen::Index n = cfg.system.n();
  Vector lo(n), hi(n);
  if (cfg.kind == ControllerKind::da) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Vector d = Vector::Zero(cfg.Z.dim());
      d(i) = 1.0;
      hi(i) = sets::support(cfg.Z, d);
      lo(i) = -sets::support(cfg.Z, -d);
    }
    return sets::HPolytope::box(lo, hi);
  }
  // Striped: the domain box cut by the pure state rows.
  std::vector<Vector> rows;
  for (const auto & c : cfg.chance) {
    if (c.g.isZero(0.0) && !c.f.isZero(0.0)) { rows.push_back(c.f); }
  }
  Matrix H(cfg.domain_box.rows() + static_cast<Eigen::Index>(rows.size()), n);
  Vector h(H.rows());
  H.topRows(cfg.domain_box.rows()) = cfg.domain_box.H();
  h.head(cfg.domain_box.rows()) = cfg.domain_box.h();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    H.row(cfg.domain_box.rows() + static_cast<Eigen::Index>(k)) = rows[k].transpose();
    h(cfg.domain_box.rows() + static_cast<Eigen::Index>(k)) = 1.0;
  }
  return sets::HPolytope(H, h);
}

json header(const ExperimentConfig & cfg, const char * artifact)
{
  return {{"artifact", artifact},
          {"config_hash", cfg.hash},
          {"master_seed", cfg.simulation.master_seed},
          {"name", cfg.name},
          {"controller", ctrl_kind(cfg.kind)}};
}

json read_json(const fs::path & path)
{
  std::ifstream in(path);
  if (!in) { return nullptr; }
  try {
    return json::parse(in);
  } catch (const json::exception &) {
    return nullptr;
  }
}

}  // namespace

std::string fnv1a_hex(const std::string & text)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

ExperimentConfig parse_config(const std::string & json_text)
{
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error & e) {
    throw Error("schema", std::string("invalid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    allow_keys(j, "config", {"name", "system", "disturbance", "controller", "verification", "simulation", "output"});
    cfg.hash = fnv1a_hex(j.dump());
    if (j.contains("name")) {
      if (!j["name"].is_string()) { schema("name", "expected a string"); }
      cfg.name = j["name"].get<std::string>();
    }
    parse_system(need(j, "system", "config"), cfg);
    parse_disturbance(need(j, "disturbance", "config"), cfg);
    parse_controller(need(j, "controller", "config"), cfg);
    if (j.contains("verification")) { parse_verification(j["verification"], cfg); }
    if (j.contains("simulation")) { parse_simulation(j["simulation"], cfg); }
    if (j.contains("output")) {
      allow_keys(j["output"], "output", {"dir"});
      if (!need(j["output"], "dir", "output").is_string()) { schema("output.dir", "expected a string"); }
      cfg.output_dir = j["output"]["dir"].get<std::string>();
    }
  } catch (const json::exception & e) {
    throw Error("schema", e.what());
  }
  if (cfg.kind == ControllerKind::linear && j.contains("verification") && !cfg.verification.grid_lower) {
    schema("verification", "the linear controller needs grid_lower/grid_upper");
  }
  return cfg;
}

ExperimentConfig load_config(const std::string & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) { throw Error("io", "cannot read " + path); }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

Experiment::Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {}
Experiment::~Experiment() = default;

const Controller & Experiment::controller()
{
  if (ctrl_) { return *ctrl_; }
  if (!numerics::is_positive_definite(cfg_.R)) { throw Error("cost_not_pd", "R must be positive definite"); }
  switch (cfg_.kind) {
    case ControllerKind::da: {
      mpc_da::DAConfig c;
      c.system = cfg_.system;
      c.horizon = cfg_.horizon;
      c.Q = cfg_.Q;
      c.R = cfg_.R;
      c.Z = cfg_.Z;
      c.W = cfg_.disturbance->support();
      c.w_covariance = cfg_.disturbance->covariance();
      ctrl_ = std::make_unique<mpc_da::DAController>(c);
      break;
    }
    case ControllerKind::striped: {
      mpc_striped::StripedConfig c;
      c.system = cfg_.system;
      c.horizon = cfg_.horizon;
      c.tail_horizon = cfg_.tail_horizon;
      c.Q = cfg_.Q;
      c.R = cfg_.R;
      c.constraints = cfg_.chance;
      c.W = *cfg_.disturbance;
      c.domain_box = cfg_.domain_box;
      c.stripe_gains = cfg_.stripe_gains;
      c.quantile_samples = cfg_.quantile_samples;
      c.quantile_seed = cfg_.quantile_seed;
      ctrl_ = std::make_unique<mpc_striped::StripedController>(c);
      break;
    }
    case ControllerKind::linear: {
      const Matrix K = cfg_.K ? *cfg_.K : numerics::solve_dare(cfg_.system.A, cfg_.system.B, cfg_.Q, cfg_.R).K;
      const Matrix acl = cfg_.system.A + cfg_.system.B * K;
      const Matrix stage = cfg_.Q + K.transpose() * cfg_.R * K;
      // An unstable gain is kept so that verification can reject it.
      lyap_ = numerics::is_schur(acl) ? numerics::solve_dlyap(acl, stage) : stage;
      ctrl_ = std::make_unique<LinearFeedbackController>(cfg_.system, K);
      break;
    }
  }
  return *ctrl_;
}

double Experiment::value(const Vector & x)
{
  const Controller & c = controller();
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (const auto * da = dynamic_cast<const mpc_da::DAController *>(&c)) {
    const auto s = da->solve(x);
    return s.status == solver::QpStatus::optimal ? s.objective : inf;
  }
  if (const auto * st = dynamic_cast<const mpc_striped::StripedController *>(&c)) { return st->value(x); }
  return x.dot(lyap_ * x);
}

RunResult Experiment::fail(Outcome outcome, const std::string & code, const std::string & message)
{
  RunResult r;
  r.outcome = outcome;
  r.error_code = code;
  r.message = message;
  try {
    fs::create_directories(cfg_.output_dir);
    json e = header(cfg_, "error");
    e["error"] = code;
    e["message"] = message;
    e["exit_code"] = static_cast<int>(outcome);
    write_text(fs::path(cfg_.output_dir) / "error.json", e.dump(2) + "\n");
    r.files.push_back("error.json");
  } catch (const std::exception &) {
    // The caller still gets the code.
  }
  return r;
}

RunResult Experiment::synth()
{
  try {
    const Controller & c = controller();
    const fs::path dir(cfg_.output_dir);
    fs::create_directories(dir);
    const LinearSystem & sys = c.system();
    const Matrix acl = sys.A + sys.B * c.gain();

    json cj = header(cfg_, "controller");
    cj["K"] = to_json(c.gain());
    cj["closed_loop_spectral_radius"] = numerics::spectral_radius(acl);
    json xf = header(cfg_, "terminal_set");
    if (const auto * da = dynamic_cast<const mpc_da::DAController *>(&c)) {
      cj["horizon"] = da->horizon();
      cj["P"] = to_json(da->P());
      cj["riccati_residual"] = da->riccati().residual;
      cj["controllable"] = da->controllable();
      cj["decision_dim"] = da->decision_dim();
      cj["robust_rows"] = da->robust_row_count();
      xf["representation"] = "polytope";
      xf["set"] = to_json(da->terminal_set());
    } else if (const auto * st = dynamic_cast<const mpc_striped::StripedController *>(&c)) {
      cj["horizon"] = st->horizon();
      cj["tail_horizon"] = st->tail_horizon();
      cj["P"] = to_json(st->riccati().P);
      cj["riccati_residual"] = st->riccati().residual;
      cj["Px"] = to_json(st->Px());
      cj["Pc"] = to_json(st->Pc());
      cj["lyapunov_residual"] = st->lyapunov_residual();
      json gains = json::array();
      for (const Matrix & L : st->stripe_gains()) { gains.push_back(to_json(L)); }
      cj["stripe_gains"] = gains;
      cj["tightenings"] = to_json(st->tightenings());
      xf["representation"] = "implicit";
      xf["test"] = "norm(c*(x)) <= 1e-7";
      xf["domain_box"] = to_json(st->domain_box());
    } else {
      const auto rs = numerics::solve_dare(sys.A, sys.B, cfg_.Q, cfg_.R);
      cj["P"] = to_json(lyap_);
      cj["riccati_residual"] = numerics::riccati_residual(sys.A, sys.B, cfg_.Q, cfg_.R, rs.P, rs.K);
      xf["representation"] = "whole_space";
    }
    const double l_ss = numerics::terminal_stage_cost(acl, sys.D, cfg_.disturbance->covariance(), cfg_.Q, cfg_.R,
                                                      c.gain());
    cj["l_ss"] = l_ss;

    const auto xinf = sim::xinf_outer(acl, sys.D, cfg_.disturbance->support(), cfg_.simulation.xinf_rel_eps);
    json xj = header(cfg_, "xinf");
    xj["epsilon"] = xinf.epsilon();
    xj["alpha"] = xinf.alpha();
    xj["truncation"] = xinf.truncation();
    xj["circumradius"] = xinf.circumradius();
    if (xinf.facet_normals().rows() > 0) {
      xj["set"] = {{"H", to_json(xinf.facet_normals())}, {"h", to_json(xinf.facet_offsets())}};
    }

    write_text(dir / "controller.json", cj.dump(2) + "\n");
    write_text(dir / "xf.json", xf.dump(2) + "\n");
    write_text(dir / "xinf.json", xj.dump(2) + "\n");
    RunResult r;
    r.files = {"controller.json", "xf.json", "xinf.json"};
    return r;
  } catch (const Error & e) {
    return fail(e.code() == "io" ? Outcome::io : Outcome::synthesis, e.code(), e.what());
  } catch (const std::exception & e) {
    return fail(Outcome::synthesis, "internal", e.what());
  }
}

RunResult Experiment::verify()
{
  try {
    controller();
  } catch (const Error & e) {
    return fail(Outcome::synthesis, e.code(), e.what());
  }
  try {
    const Controller & c = controller();
    const LinearSystem & sys = c.system();
    const VerificationSpec & vs = cfg_.verification;
    const fs::path dir(cfg_.output_dir);
    fs::create_directories(dir);

    verify::GridSpec grid;
    if (vs.grid_lower) {
      grid = {*vs.grid_lower, *vs.grid_upper, vs.grid_points};
    } else {
      grid = verify::grid_around(state_domain(cfg_), vs.grid_margin, vs.grid_points);
    }
    const verify::ClosedLoop loop = verify::closed_loop(c);
    const verify::ValueFn V = [this](const Vector & x) { return value(x); };
    verify::DriftOptions dopt;
    dopt.mc_n = vs.mc_n;
    dopt.seed = vs.seed;
    dopt.threads = threads_;
    const auto cert = verify::certify_drift(loop, V, *cfg_.disturbance, grid, dopt);
    const int fresh =
        cert.found && vs.fresh_states > 0 ? verify::drift_fresh_violations(cert, loop, V, *cfg_.disturbance, vs.fresh_states, vs.seed) : 0;
    const bool drift_pass = cert.found && cert.worst_violation <= 0.0 && fresh == 0;

    json dj = header(cfg_, "drift");
    dj["pass"] = drift_pass;
    dj["found"] = cert.found;
    dj["failure"] = cert.failure;
    dj["b"] = cert.b;
    dj["scale"] = cert.scale;
    dj["d_hat"] = cert.d_hat;
    dj["level"] = cert.level;
    if (cert.found) { dj["C_box"] = to_json(cert.box); }
    dj["worst_violation"] = cert.worst_violation;
    dj["fresh_states"] = vs.fresh_states;
    dj["fresh_violations"] = fresh;
    dj["mc_samples_per_state"] = cert.mc_samples_per_state;
    dj["seed"] = cert.seed;
    dj["grid"] = {{"lower", to_json(grid.lower)}, {"upper", to_json(grid.upper)}, {"points_per_axis", grid.points_per_axis}};
    json states = json::array();
    for (std::size_t k = 0; k < cert.states.size(); ++k) {
      states.push_back({{"x", to_json(cert.states[k])},
                        {"drift", cert.drift[k]},
                        {"std_error", cert.std_error[k]},
                        {"in_C", k < cert.in_c.size() && cert.in_c[k]}});
    }
    dj["states"] = states;

    const Matrix acl = sys.A + sys.B * c.gain();
    json sj = header(cfg_, "small_set");
    bool small_pass = false;
    try {
      const auto ss = verify::certify_small_set(acl, sys.D, cfg_.disturbance->support(), cfg_.disturbance.get(),
                                                vs.small_set_draws, vs.seed);
      small_pass = ss.found && ss.nu_mass > 0.0;
      sj["found"] = ss.found;
      sj["failure"] = ss.failure;
      sj["r"] = ss.r;
      if (ss.found) {
        sj["omega"] = to_json(ss.omega);
        sj["witness"] = to_json(ss.witness);
      }
      sj["nu_mass"] = ss.nu_mass;
      sj["draws"] = ss.draws;
    } catch (const Error & e) {
      sj["found"] = false;
      sj["failure"] = e.code();
    }
    sj["pass"] = small_pass;
    sj["seed"] = vs.seed;

    // ISS decrease on feasible states drawn uniformly from the grid box.
    std::vector<Vector> samples;
    RngStream rng(vs.seed, 0, kIssStream);
    const long cap = 1000L * vs.iss_samples;
    for (long attempt = 0; attempt < cap && static_cast<int>(samples.size()) < vs.iss_samples; ++attempt) {
      Vector x(sys.n());
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        x(i) = grid.lower(i) + (grid.upper(i) - grid.lower(i)) * rng.uniform();
      }
      if (std::isfinite(value(x))) { samples.push_back(std::move(x)); }
    }
    const double alpha3 = 0.5 * numerics::min_eigenvalue(cfg_.Q);
    const auto iss = verify::check_iss_decrease(V, loop.g, alpha3, samples, vs.iss_tol);
    json ij = header(cfg_, "iss");
    ij["pass"] = iss.pass;
    ij["alpha3"] = alpha3;
    ij["tolerance"] = vs.iss_tol;
    ij["samples"] = iss.samples;
    ij["skipped"] = iss.skipped;
    ij["violations"] = iss.violations;
    ij["worst_margin"] = iss.worst_margin;
    if (iss.worst_state.size() > 0) { ij["worst_state"] = to_json(iss.worst_state); }
    ij["seed"] = vs.seed;

    write_text(dir / "drift.json", dj.dump(2) + "\n");
    write_text(dir / "smallset.json", sj.dump(2) + "\n");
    write_text(dir / "iss.json", ij.dump(2) + "\n");
    RunResult r;
    r.files = {"drift.json", "smallset.json", "iss.json"};
    if (!(drift_pass && small_pass && iss.pass)) {
      r.outcome = Outcome::verification;
      r.error_code = "certificate_failed";
      r.message = std::string(drift_pass ? "" : "drift ") + (small_pass ? "" : "small_set ") + (iss.pass ? "" : "iss");
    }
    return r;
  } catch (const Error & e) {
    return fail(e.code() == "io" ? Outcome::io : Outcome::verification, e.code(), e.what());
  } catch (const std::exception & e) {
    return fail(Outcome::verification, "internal", e.what());
  }
}

RunResult Experiment::simulate()
{
  if (cfg_.simulation.x0.empty()) { return fail(Outcome::simulation, "schema", "config has no simulation block"); }
  try {
    controller();
  } catch (const Error & e) {
    return fail(Outcome::synthesis, e.code(), e.what());
  }
  try {
    const Controller & c = controller();
    const LinearSystem & sys = c.system();
    const SimulationSpec & ss = cfg_.simulation;
    const fs::path dir(cfg_.output_dir);
    fs::create_directories(dir);

    const Matrix acl = sys.A + sys.B * c.gain();
    const auto xinf = sim::xinf_outer(acl, sys.D, cfg_.disturbance->support(), ss.xinf_rel_eps);
    sim::EnsembleOptions eo;
    eo.steps = ss.steps;
    eo.n_traj = ss.n_traj;
    eo.master_seed = ss.master_seed;
    eo.threads = threads_;
    eo.record = ss.record;
    const auto ens = sim::run_ensemble(c, *cfg_.disturbance, cfg_.Q, cfg_.R, ss.x0, eo, &xinf);
    const double l_ss = numerics::terminal_stage_cost(acl, sys.D, cfg_.disturbance->covariance(), cfg_.Q, cfg_.R,
                                                      c.gain());

    RunResult r;
    if (ss.record) {
      std::string csv = "# config_hash=" + cfg_.hash + " master_seed=" + std::to_string(ss.master_seed) + "\ntraj,k";
      for (Eigen::Index i = 0; i < sys.n(); ++i) { csv += ",x" + std::to_string(i); }
      for (Eigen::Index i = 0; i < sys.m(); ++i) { csv += ",u" + std::to_string(i); }
      for (Eigen::Index i = 0; i < sys.nw(); ++i) { csv += ",w" + std::to_string(i); }
      csv += ",stage_cost,in_xinf\n";
      for (std::size_t j = 0; j < ens.trajectories.size(); ++j) {
        const auto & t = ens.trajectories[j];
        for (std::size_t k = 0; k < t.inputs.size(); ++k) {
          csv += std::to_string(j) + "," + std::to_string(k);
          for (Eigen::Index i = 0; i < sys.n(); ++i) { csv += "," + fmt17(t.states[k](i)); }
          for (Eigen::Index i = 0; i < sys.m(); ++i) { csv += "," + fmt17(t.inputs[k](i)); }
          for (Eigen::Index i = 0; i < sys.nw(); ++i) { csv += "," + fmt17(t.disturbances[k](i)); }
          csv += "," + fmt17(t.stage_costs[k]) + (t.in_xinf[k] ? ",1\n" : ",0\n");
        }
      }
      write_text(dir / "ensemble.csv", csv);
      r.files.push_back("ensemble.csv");
    }

    json sj = header(cfg_, "simulation");
    sj["steps"] = ss.steps;
    sj["n_traj"] = ss.n_traj;
    sj["infeasible_trajectories"] = ens.infeasible;
    sj["membership_curve"] = ens.membership_curve;
    sj["membership_final"] = ens.membership_curve.back();
    sj["membership_half"] = ens.membership_curve[static_cast<std::size_t>(ss.steps / 2)];
    sj["xinf"] = {{"epsilon", xinf.epsilon()}, {"circumradius", xinf.circumradius()}, {"truncation", xinf.truncation()}};
    json avg = json::array(), half = json::array(), entry = json::array();
    for (const auto & t : ens.trajectories) {
      avg.push_back(t.avg_cost);
      half.push_back(t.avg_cost_half);
      entry.push_back(t.entry_index ? json(*t.entry_index) : json(nullptr));
    }
    sj["time_average_cost"] = avg;
    sj["time_average_cost_half"] = half;
    sj["terminal_entry"] = entry;
    sj["l_ss"] = l_ss;
    try {
      const auto lln = sim::lln_report(ens, l_ss);
      sj["lln"] = {{"median_deviation", lln.median},
                   {"deviations", lln.deviations},
                   {"absolute", lln.absolute},
                   {"tolerance", ss.lln_tolerance},
                   {"pass", lln.median <= ss.lln_tolerance}};
    } catch (const Error & e) {
      sj["lln"] = {{"error", e.code()}, {"pass", false}};
    }
    write_text(dir / "summary.json", sj.dump(2) + "\n");
    r.files.push_back("summary.json");
    if (ens.infeasible > 0) {
      r.outcome = Outcome::simulation;
      r.error_code = "infeasible_trajectory";
      r.message = std::to_string(ens.infeasible) + " trajectories hit an infeasible solve";
    }
    return r;
  } catch (const Error & e) {
    return fail(e.code() == "io" ? Outcome::io : Outcome::simulation, e.code(), e.what());
  } catch (const std::exception & e) {
    return fail(Outcome::simulation, "internal", e.what());
  }
}

RunResult Experiment::report()
{
  const fs::path dir(cfg_.output_dir);
  json rj = header(cfg_, "report");
  std::ostringstream txt;
  txt << "experiment " << (cfg_.name.empty() ? "(unnamed)" : cfg_.name) << "  config " << cfg_.hash << "  seed "
      << cfg_.simulation.master_seed << "\n";
  bool any = false, all_pass = true;
  auto pass_line = [&](const char * file, const char * label) {
    const json j = read_json(dir / file);
    if (j.is_null()) { return j; }
    any = true;
    if (j.contains("config_hash") && j["config_hash"] != cfg_.hash) { txt << "  " << label << ": stale (config changed)\n"; }
    if (j.contains("pass")) {
      const bool p = j["pass"].get<bool>();
      all_pass = all_pass && p;
      txt << "  " << label << ": " << (p ? "pass" : "FAIL") << "\n";
      rj[label] = {{"pass", p}};
    }
    return j;
  };
  if (const json c = read_json(dir / "controller.json"); !c.is_null()) {
    any = true;
    txt << "  controller: " << c.value("controller", "?") << ", l_ss = " << fmt17(c.value("l_ss", 0.0)) << "\n";
    rj["controller_file"] = true;
  }
  if (const json d = pass_line("drift.json", "drift"); !d.is_null() && d.value("found", false)) {
    txt << "    b = " << fmt17(d["b"].get<double>()) << ", scale = " << fmt17(d["scale"].get<double>())
        << ", fresh violations = " << d["fresh_violations"].get<int>() << "\n";
  }
  if (const json s = pass_line("smallset.json", "small_set"); !s.is_null() && s.value("found", false)) {
    txt << "    r = " << fmt17(s["r"].get<double>()) << ", nu mass = " << fmt17(s["nu_mass"].get<double>()) << "\n";
  }
  if (const json i = pass_line("iss.json", "iss"); !i.is_null()) {
    txt << "    worst margin = " << fmt17(i.value("worst_margin", 0.0)) << " over " << i.value("samples", 0) << " states\n";
  }
  if (const json s = read_json(dir / "summary.json"); !s.is_null()) {
    any = true;
    const double fin = s.value("membership_final", 0.0);
    const bool feas = s.value("infeasible_trajectories", 1) == 0;
    all_pass = all_pass && feas;
    txt << "  simulation: " << s.value("n_traj", 0) << " x " << s.value("steps", 0) << " steps, infeasible "
        << s.value("infeasible_trajectories", 0) << ", membership final " << fmt17(fin) << ", l_ss " << fmt17(s.value("l_ss", 0.0));
    if (s.contains("lln") && s["lln"].contains("median_deviation")) {
      txt << ", LLN median deviation " << fmt17(s["lln"]["median_deviation"].get<double>());
    }
    txt << "\n";
    rj["simulation"] = {{"membership_final", fin}, {"feasible", feas}};
  }
  RunResult r;
  if (!any) {
    r.outcome = Outcome::io;
    r.error_code = "no_artifacts";
    r.message = "nothing to report in " + dir.string();
    return r;
  }
  rj["all_pass"] = all_pass;
  r.text = txt.str();
  try {
    write_text(dir / "report.json", rj.dump(2) + "\n");
  } catch (const Error & e) {
    r.outcome = Outcome::io;
    r.error_code = e.code();
    r.message = e.what();
    return r;
  }
  r.files = {"report.json"};
  return r;
}

}  // namespace smpc::app
