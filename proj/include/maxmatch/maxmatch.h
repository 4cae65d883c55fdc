/* SPDX-License-Identifier: Apache-2.0 */
/* Copyright 2026 The MaxMatch Lab Authors */

/*
 * C interface to the maxmatch library.
 *
 * Every function returns an mm_status. On failure, mm_last_error() returns a
 * description that stays valid until the next call on the same thread.
 * Strings returned through char** out-parameters are heap allocated and must
 * be released with mm_string_free. Handles are opaque and not thread-safe;
 * distinct handles may be used from distinct threads.
 */

#ifndef MAXMATCH_MAXMATCH_H_
#define MAXMATCH_MAXMATCH_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mm_status {
  MM_OK = 0,
  MM_ERR_INVALID_ARGUMENT = 1, /* null pointer or out-of-range argument */
  MM_ERR_CONFIG = 2,           /* configuration or shape validation */
  MM_ERR_NUMERIC = 3,          /* NaN loss, divergence, vacuous bound */
  MM_ERR_IO = 4,               /* file access or malformed file */
  MM_ERR_INTERNAL = 5
} mm_status;

const char* mm_version(void);
const char* mm_last_error(void);
void mm_string_free(char* s);

/* Parses a training config, fills defaults and returns the resolved JSON. */
mm_status mm_config_normalize(const char* train_config_json, char** resolved_json);

/* ---- training ---------------------------------------------------------- */

typedef struct mm_trainer mm_trainer;

typedef struct mm_metrics_row {
  uint64_t step;
  uint64_t epoch;
  double loss_l;
  double loss_u;
  double loss_u_mean;
  double loss_u_min;
  double loss_u_max;
  double mask_rate;
  double lr;
  double train_err;
  double test_err;
  double ema_test_err;
  int evaluated; /* nonzero when the error columns were computed */
} mm_metrics_row;

typedef void (*mm_row_callback)(const mm_metrics_row* row, void* user);

mm_status mm_trainer_create(const char* train_config_json, mm_trainer** out);
/* Restores a trainer from a snapshot written by mm_trainer_save_snapshot. */
mm_status mm_trainer_resume(const char* train_config_json, const char* snapshot_path, mm_trainer** out);
void mm_trainer_free(mm_trainer* t);

/* One optimization step. On MM_ERR_NUMERIC the state is unchanged. */
mm_status mm_trainer_step(mm_trainer* t, mm_metrics_row* row);
/* Runs to the configured step count; callback sees every evaluated row. */
mm_status mm_trainer_run(mm_trainer* t, mm_row_callback cb, void* user);
uint64_t mm_trainer_current_step(const mm_trainer* t);
/* Evaluated rows so far, as CSV / SVG plot. */
mm_status mm_trainer_metrics_csv(const mm_trainer* t, char** csv);
mm_status mm_trainer_metrics_svg(const mm_trainer* t, char** svg);
mm_status mm_trainer_config_json(const mm_trainer* t, char** json);
mm_status mm_trainer_save_snapshot(const mm_trainer* t, const char* path);
/* Diagnostic estimate of the Moreau-envelope gradient norm at the current
 * parameters (inner SGD solve on the next batch). Not a certified value. */
mm_status mm_trainer_envelope_estimate(const mm_trainer* t, double kappa, uint64_t inner_steps, double* norm);

/* ---- evaluation -------------------------------------------------------- */

/* spec_json: {"data": {...}, "split": "test" | "train" | "labeled"} or a
 * training config (its "data" block is used). Returns a JSON report with raw
 * and EMA error rates and per-class error counts. */
mm_status mm_evaluate(const char* snapshot_path, const char* spec_json, char** report_json);

/* ---- bounds ------------------------------------------------------------ */

/* bound_json: bound configuration, optionally with "risk-labeled" and
 * "risk-unlabeled". When snapshot_path and train_config_json are both given,
 * risks, counts and norm bounds are measured and override the config.
 * Either output pointer may be null. */
mm_status mm_bound_evaluate(const char* bound_json, const char* snapshot_path, const char* train_config_json,
                            char** report_json, char** table);
mm_status mm_bound_sweep(const char* bound_json, const char* field, double start, double stop, uint64_t steps,
                         char** csv);

/* ---- convergence testbed ------------------------------------------------ */

mm_status mm_converge_run(const char* instance_json, char** trace_csv, char** summary_json);

/* ---- augmentation preview ------------------------------------------------ */

/* Writes `count` samples with their weak view and k strong views to out_dir
 * (PGM grids for images, one SVG scatter for vectors). */
mm_status mm_augment_preview(const char* train_config_json, const char* out_dir, uint64_t count, uint64_t k,
                             uint64_t seed);

/* ---- self check -------------------------------------------------------- */

typedef void (*mm_check_callback)(int id, const char* name, int passed, double seconds, const char* detail,
                                  void* user);

/* Runs the given criteria (all when ids is null or n is 0). */
mm_status mm_selfcheck(const int* ids, size_t n, int quick, mm_check_callback cb, void* user, int* failures);

#ifdef __cplusplus
}
#endif

#endif /* MAXMATCH_MAXMATCH_H_ */
