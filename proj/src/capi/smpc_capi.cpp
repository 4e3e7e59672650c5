#include "smpc/smpc.h"

#include <exception>
#include <memory>
#include <new>
#include <string>

#include <json.hpp>

#include "error.hpp"
#include "experiment.hpp"
#include "numerics.hpp"

struct smpc_experiment
{
  std::unique_ptr<smpc::app::Experiment> impl;
  std::string report_text;
};

namespace {

struct LastError
{
  std::string code;
  std::string message;
  std::string json;
};

thread_local LastError g_error;

void clear_error()
{
  g_error.code.clear();
  g_error.message.clear();
  g_error.json.clear();
}

smpc_status set_error(smpc_status status, const std::string & code, const std::string & message)
{
  g_error.code = code;
  g_error.message = message;
  g_error.json = nlohmann::json{{"error", code}, {"message", message}, {"exit_code", static_cast<int>(status)}}.dump();
  return status;
}

smpc_status from_outcome(const smpc::app::RunResult & r)
{
  const auto status = static_cast<smpc_status>(static_cast<int>(r.outcome));
  if (status == SMPC_OK) {
    clear_error();
    return SMPC_OK;
  }
  return set_error(status, r.error_code, r.message);
}

template <class Fn>
smpc_status guarded(Fn && fn)
{
  try {
    return fn();
  } catch (const smpc::Error & e) {
    const smpc_status s = e.code() == "io" ? SMPC_ERR_IO : SMPC_ERR_SYNTHESIS;
    return set_error(s, e.code(), e.what());
  } catch (const std::bad_alloc &) {
    return set_error(SMPC_ERR_INTERNAL, "out_of_memory", "allocation failed");
  } catch (const std::exception & e) {
    return set_error(SMPC_ERR_INTERNAL, "internal", e.what());
  }
}

smpc_status open_with(smpc::app::ExperimentConfig (*load)(const std::string &), const char * arg, smpc_experiment ** out)
{
  if (arg == nullptr || out == nullptr) { return set_error(SMPC_ERR_ARGUMENT, "argument", "null pointer"); }
  *out = nullptr;
  return guarded([&] {
    auto exp = std::make_unique<smpc_experiment>();
    exp->impl = std::make_unique<smpc::app::Experiment>(load(arg));
    *out = exp.release();
    clear_error();
    return SMPC_OK;
  });
}

Eigen::Map<const smpc::Matrix, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>> view(const double * p, size_t rows,
                                                                                      size_t cols)
{
  // Row-major input viewed through the column-major Matrix type.
  using Stride = Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>;
  return {p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols),
          Stride(1, static_cast<Eigen::Index>(cols))};
}

void store(const smpc::Matrix & m, double * out)
{
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) { out[r * m.cols() + c] = m(r, c); }
  }
}

}  // namespace

extern "C" {

const char * smpc_version(void) { return "1.0.0"; }

const char * smpc_status_name(smpc_status status)
{
  switch (status) {
    case SMPC_OK: return "ok";
    case SMPC_ERR_IO: return "io";
    case SMPC_ERR_SYNTHESIS: return "synthesis";
    case SMPC_ERR_VERIFICATION: return "verification";
    case SMPC_ERR_SIMULATION: return "simulation";
    case SMPC_ERR_ARGUMENT: return "argument";
    case SMPC_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char * smpc_last_error_code(void) { return g_error.code.c_str(); }
const char * smpc_last_error_message(void) { return g_error.message.c_str(); }
const char * smpc_last_error_json(void) { return g_error.json.c_str(); }

smpc_status smpc_experiment_open(const char * config_path, smpc_experiment ** out)
{
  return open_with(&smpc::app::load_config, config_path, out);
}

smpc_status smpc_experiment_open_json(const char * json_text, smpc_experiment ** out)
{
  return open_with(&smpc::app::parse_config, json_text, out);
}

void smpc_experiment_close(smpc_experiment * exp) { delete exp; }

smpc_status smpc_experiment_set_output_dir(smpc_experiment * exp, const char * dir)
{
  if (exp == nullptr || dir == nullptr || *dir == '\0') { return set_error(SMPC_ERR_ARGUMENT, "argument", "bad output dir"); }
  exp->impl->set_output_dir(dir);
  return SMPC_OK;
}

smpc_status smpc_experiment_set_threads(smpc_experiment * exp, int threads)
{
  if (exp == nullptr || threads < 1) { return set_error(SMPC_ERR_ARGUMENT, "argument", "threads must be >= 1"); }
  exp->impl->set_threads(threads);
  return SMPC_OK;
}

smpc_status smpc_experiment_set_master_seed(smpc_experiment * exp, uint64_t seed)
{
  if (exp == nullptr) { return set_error(SMPC_ERR_ARGUMENT, "argument", "null experiment"); }
  exp->impl->set_master_seed(seed);
  return SMPC_OK;
}

const char * smpc_experiment_config_hash(const smpc_experiment * exp)
{
  return exp == nullptr ? "" : exp->impl->config().hash.c_str();
}

const char * smpc_experiment_output_dir(const smpc_experiment * exp)
{
  return exp == nullptr ? "" : exp->impl->config().output_dir.c_str();
}

smpc_status smpc_experiment_synth(smpc_experiment * exp)
{
  if (exp == nullptr) { return set_error(SMPC_ERR_ARGUMENT, "argument", "null experiment"); }
  return guarded([&] { return from_outcome(exp->impl->synth()); });
}

smpc_status smpc_experiment_verify(smpc_experiment * exp)
{
  if (exp == nullptr) { return set_error(SMPC_ERR_ARGUMENT, "argument", "null experiment"); }
  return guarded([&] { return from_outcome(exp->impl->verify()); });
}

smpc_status smpc_experiment_simulate(smpc_experiment * exp)
{
  if (exp == nullptr) { return set_error(SMPC_ERR_ARGUMENT, "argument", "null experiment"); }
  return guarded([&] { return from_outcome(exp->impl->simulate()); });
}

smpc_status smpc_experiment_report(smpc_experiment * exp, const char ** text)
{
  if (exp == nullptr) { return set_error(SMPC_ERR_ARGUMENT, "argument", "null experiment"); }
  return guarded([&] {
    auto r = exp->impl->report();
    exp->report_text = r.text;
    if (text != nullptr) { *text = exp->report_text.c_str(); }
    return from_outcome(r);
  });
}

smpc_status smpc_experiment_dims(const smpc_experiment * exp, size_t * n, size_t * m, size_t * nw)
{
  if (exp == nullptr) { return set_error(SMPC_ERR_ARGUMENT, "argument", "null experiment"); }
  const auto & sys = exp->impl->config().system;
  if (n != nullptr) { *n = static_cast<size_t>(sys.n()); }
  if (m != nullptr) { *m = static_cast<size_t>(sys.m()); }
  if (nw != nullptr) { *nw = static_cast<size_t>(sys.nw()); }
  return SMPC_OK;
}

smpc_status smpc_experiment_control(smpc_experiment * exp, const double * x, double * u, int * feasible)
{
  if (exp == nullptr || x == nullptr || u == nullptr) { return set_error(SMPC_ERR_ARGUMENT, "argument", "null pointer"); }
  return guarded([&] {
    const smpc::Controller & c = exp->impl->controller();
    const auto n = c.system().n();
    const smpc::ControlResult r = c.control(Eigen::Map<const smpc::Vector>(x, n));
    if (feasible != nullptr) { *feasible = r.feasible ? 1 : 0; }
    for (Eigen::Index i = 0; i < c.system().m(); ++i) { u[i] = r.feasible ? r.u(i) : 0.0; }
    clear_error();
    return SMPC_OK;
  });
}

smpc_status smpc_experiment_gain(smpc_experiment * exp, double * K)
{
  if (exp == nullptr || K == nullptr) { return set_error(SMPC_ERR_ARGUMENT, "argument", "null pointer"); }
  return guarded([&] {
    store(exp->impl->controller().gain(), K);
    clear_error();
    return SMPC_OK;
  });
}

smpc_status smpc_dare(size_t n, size_t m, const double * A, const double * B, const double * Q, const double * R,
                      double * P, double * K, double * residual)
{
  if (n == 0 || m == 0 || !A || !B || !Q || !R || !P || !K) {
    return set_error(SMPC_ERR_ARGUMENT, "argument", "null pointer or empty dimension");
  }
  return guarded([&] {
    const auto sol = smpc::numerics::solve_dare(view(A, n, n), view(B, n, m), view(Q, n, n), view(R, m, m));
    store(sol.P, P);
    store(sol.K, K);
    if (residual != nullptr) { *residual = sol.residual; }
    clear_error();
    return SMPC_OK;
  });
}

}  // extern "C"
