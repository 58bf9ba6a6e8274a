/* adsim — anomaly-detection management simulator.
 *
 * C interface to the simulator core: backend profiles and the closed-form
 * throughput/detection-latency estimator, scenario configs, and full
 * closed-loop simulation runs. All functions return ADSIM_OK (0) on success;
 * on failure they return a nonzero status and adsim_last_error() carries a
 * thread-local message. Strings returned through char** outputs are owned by
 * the caller and released with adsim_string_free().
 */

#ifndef ADSIM_H
#define ADSIM_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef int adsim_status;

#define ADSIM_OK 0
#define ADSIM_ERR_INVALID_ARGUMENT 1
#define ADSIM_ERR_PARSE 2
#define ADSIM_ERR_RUNTIME 3
#define ADSIM_ERR_IO 4

const char* adsim_version(void);
const char* adsim_last_error(void);
void adsim_string_free(char* s);

/* ------------------------------------------------------------------ *
 * Backend profiles: batch-size -> evaluation-time curves.
 * ------------------------------------------------------------------ */

typedef struct adsim_profile adsim_profile;

/* "cpu-tf" or "gpu-caffe2". */
adsim_status adsim_profile_builtin(const char* name, adsim_profile** out);
adsim_status adsim_profile_create(const char* name, int64_t max_batch,
                                  adsim_profile** out);
adsim_status adsim_profile_add_anchor(adsim_profile* profile, int64_t batch_size,
                                      double t_ev);
void adsim_profile_free(adsim_profile* profile);

/* ------------------------------------------------------------------ *
 * Estimator.
 * ------------------------------------------------------------------ */

/* Batch evaluation time for the given batch size. */
adsim_status adsim_estimate_t_ev(const adsim_profile* profile, int64_t batch_size,
                                 double* out);
/* Mean time between feature emissions: offset / flow_rate. */
adsim_status adsim_estimate_t_bf(int64_t offset, double flow_rate, double* out);
/* Batch fill time min(t_limit, batch_size * offset / flow_rate). */
adsim_status adsim_estimate_t_fill(int64_t batch_size, int64_t offset, double t_limit,
                                   double flow_rate, double* out);
/* Detection lag bounds [t_bf + t_ev, t_fill + t_ev]. */
adsim_status adsim_estimate_bounds(const adsim_profile* profile, int64_t batch_size,
                                   int64_t offset, double t_limit, double flow_rate,
                                   double* lower, double* upper);
/* (t_bf + t_fill) / 2 + t_ev. */
adsim_status adsim_estimate_mean_detection(const adsim_profile* profile,
                                           int64_t batch_size, int64_t offset,
                                           double t_limit, double flow_rate, double* out);
/* Flow rate at which the batch fill time equals the evaluation time. */
adsim_status adsim_estimate_max_rate(const adsim_profile* profile, int64_t batch_size,
                                     int64_t offset, double* out);

/* ------------------------------------------------------------------ *
 * Scenario configuration.
 * ------------------------------------------------------------------ */

typedef struct adsim_config adsim_config;

adsim_status adsim_config_load_file(const char* path, adsim_config** out);
adsim_status adsim_config_load_string(const char* json_text, adsim_config** out);
/* "sigmoid-default" or "usecase-demo". */
adsim_status adsim_config_builtin(const char* name, adsim_config** out);
/* JSON text of a builtin config (caller frees). */
adsim_status adsim_config_builtin_text(const char* name, char** out);
void adsim_config_free(adsim_config* config);

/* ------------------------------------------------------------------ *
 * Simulation runs.
 * ------------------------------------------------------------------ */

typedef struct adsim_sim adsim_sim;

adsim_status adsim_sim_create(const adsim_config* config, uint64_t seed,
                              adsim_sim** out);
/* until_units < 0 runs the configured scenario duration. */
adsim_status adsim_sim_run(adsim_sim* sim, double until_units);
adsim_status adsim_sim_metrics_csv(const adsim_sim* sim, char** out);
adsim_status adsim_sim_workflow_log(const adsim_sim* sim, char** out);
adsim_status adsim_sim_summary_json(const adsim_sim* sim, char** out);
/* Writes metrics.csv, workflow.log and summary.json under dir. */
adsim_status adsim_sim_write_outputs(const adsim_sim* sim, const char* dir);
void adsim_sim_free(adsim_sim* sim);

#ifdef __cplusplus
}
#endif

#endif /* ADSIM_H */
