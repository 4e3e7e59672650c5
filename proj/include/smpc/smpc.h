/*
 * smpc: stochastic MPC synthesis and closed-loop convergence checks.
 *
 * Plain C interface over the C++ core. Objects are opaque handles; every
 * call returns an smpc_status. On failure, smpc_last_error_code() and
 * smpc_last_error_message() describe the most recent error on the calling
 * thread. Matrices are dense, row-major.
 */
#ifndef SMPC_SMPC_H_
#define SMPC_SMPC_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define SMPC_API __declspec(dllexport)
#else
#  define SMPC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values 2..4 match the exit codes of the command-line tool. */
typedef enum smpc_status {
  SMPC_OK = 0,
  SMPC_ERR_IO = 1,
  SMPC_ERR_SYNTHESIS = 2,     /* includes config schema errors */
  SMPC_ERR_VERIFICATION = 3,
  SMPC_ERR_SIMULATION = 4,
  SMPC_ERR_ARGUMENT = 5,
  SMPC_ERR_INTERNAL = 6
} smpc_status;

typedef struct smpc_experiment smpc_experiment;

SMPC_API const char * smpc_version(void);
SMPC_API const char * smpc_status_name(smpc_status status);

/* Thread-local description of the last failure ("" when none). */
SMPC_API const char * smpc_last_error_code(void);
SMPC_API const char * smpc_last_error_message(void);
/* The same as a JSON object {"error": ..., "message": ..., "exit_code": ...}. */
SMPC_API const char * smpc_last_error_json(void);

/* Experiments: a validated JSON config plus its lazily synthesised controller. */
SMPC_API smpc_status smpc_experiment_open(const char * config_path, smpc_experiment ** out);
SMPC_API smpc_status smpc_experiment_open_json(const char * json_text, smpc_experiment ** out);
SMPC_API void smpc_experiment_close(smpc_experiment * exp);

SMPC_API smpc_status smpc_experiment_set_output_dir(smpc_experiment * exp, const char * dir);
SMPC_API smpc_status smpc_experiment_set_threads(smpc_experiment * exp, int threads);
SMPC_API smpc_status smpc_experiment_set_master_seed(smpc_experiment * exp, uint64_t seed);

/* Hex FNV-1a hash of the canonical config; valid while exp lives. */
SMPC_API const char * smpc_experiment_config_hash(const smpc_experiment * exp);
SMPC_API const char * smpc_experiment_output_dir(const smpc_experiment * exp);

/* Pipeline stages; artifacts go to the output directory. */
SMPC_API smpc_status smpc_experiment_synth(smpc_experiment * exp);
SMPC_API smpc_status smpc_experiment_verify(smpc_experiment * exp);
SMPC_API smpc_status smpc_experiment_simulate(smpc_experiment * exp);
/* Writes report.json; *text (optional) receives a summary valid while exp lives. */
SMPC_API smpc_status smpc_experiment_report(smpc_experiment * exp, const char ** text);

/* Dimensions of the configured system. */
SMPC_API smpc_status smpc_experiment_dims(const smpc_experiment * exp, size_t * n, size_t * m, size_t * nw);

/* One receding-horizon step: u (m entries) for state x (n entries).
 * *feasible is 0 when the online problem has no solution. */
SMPC_API smpc_status smpc_experiment_control(smpc_experiment * exp, const double * x, double * u, int * feasible);

/* Terminal gain K (m x n, row-major). */
SMPC_API smpc_status smpc_experiment_gain(smpc_experiment * exp, double * K);

/* Stabilising DARE solution. P is n x n, K is m x n; residual may be NULL. */
SMPC_API smpc_status smpc_dare(size_t n, size_t m, const double * A, const double * B, const double * Q,
                               const double * R, double * P, double * K, double * residual);

#ifdef __cplusplus
}
#endif

#endif /* SMPC_SMPC_H_ */
