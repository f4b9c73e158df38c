#ifndef TRURM_H
#define TRURM_H

#include <stddef.h>
#include <stdint.h>

#if defined(TRURM_BUILDING_LIBRARY)
#define TRURM_API __attribute__((visibility("default")))
#else
#define TRURM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum trurm_status {
  TRURM_OK = 0,
  TRURM_E_INVALID_ARGUMENT = 1,
  TRURM_E_IO = 2,
  TRURM_E_NUMERIC = 3,
  TRURM_E_NO_TARGET = 4,
  TRURM_E_NO_RESPIRATION = 5,
  TRURM_E_FORMAT = 6,
  TRURM_E_DIVERGED = 7,
  TRURM_E_INTERNAL = 99
} trurm_status;

/* Message for the last failing call on this thread; "" after a success. */
TRURM_API const char* trurm_last_error(void);
TRURM_API const char* trurm_status_name(trurm_status status);
TRURM_API const char* trurm_version(void);

/* ---- keys ---- */
typedef struct trurm_key trurm_key;

TRURM_API trurm_status trurm_key_from_hex(const char* hex, trurm_key** out);
TRURM_API trurm_status trurm_key_from_file(const char* path, trurm_key** out);
/* Deterministic pseudo-random key for tests and simulations. */
TRURM_API trurm_status trurm_key_from_seed(size_t bits, uint64_t seed, trurm_key** out);
TRURM_API size_t trurm_key_length(const trurm_key* key);
/* Writes 8 hex digits plus a terminator into out (capacity >= 9). */
TRURM_API trurm_status trurm_key_fingerprint(const trurm_key* key, char* out, size_t capacity);
TRURM_API void trurm_key_free(trurm_key* key);

/* bits = L - epsilon; attempts written as a decimal string of 2^bits. */
TRURM_API trurm_status trurm_irreversibility_budget(size_t key_length, size_t epsilon,
                                                    size_t* bits, char* attempts_decimal,
                                                    size_t capacity);

/* ---- kernels on caller buffers ---- */
TRURM_API trurm_status trurm_dtw_distance(const double* a, size_t na, const double* b, size_t nb,
                                          double* out);
TRURM_API trurm_status trurm_estimate_rate(const double* y, size_t n, double sample_rate,
                                           double* rate_bpm, double* prominence);

/* ---- PTN parameters ---- */
typedef struct trurm_ptn trurm_ptn;

/* SDAB off, TMB identity. */
TRURM_API trurm_status trurm_ptn_identity(trurm_ptn** out);
TRURM_API trurm_status trurm_ptn_load(const char* path, trurm_ptn** out);
TRURM_API trurm_status trurm_ptn_save(const trurm_ptn* ptn, const char* path);
TRURM_API trurm_status trurm_ptn_monitor(const trurm_ptn* ptn, const double* y, size_t n,
                                         double sample_rate, double* rate_bpm);
TRURM_API void trurm_ptn_free(trurm_ptn* ptn);

/* ---- file pipeline ---- */
typedef struct trurm_simulate_options {
  const char* radar_config_path; /* NULL: default radar */
  const char* persona_path;      /* NULL: built-in persona persona_index */
  size_t persona_index;
  double duration_s;
  uint64_t seed;
  double distance_m; /* sets the SNR; <= 0 keeps the persona range and 20 dB */
} trurm_simulate_options;

TRURM_API void trurm_simulate_options_init(trurm_simulate_options* opt);
/* Writes the cube payload to out_path and the sidecar to out_path + ".json". */
TRURM_API trurm_status trurm_simulate(const trurm_simulate_options* opt, const char* out_path);

typedef struct trurm_cohort_options {
  const char* config_path; /* cohort config JSON; NULL: defaults */
  size_t personas;         /* 0 keeps the config value */
  size_t sessions;         /* 0 keeps the config value */
  uint64_t seed;
  int seed_set;
} trurm_cohort_options;

TRURM_API void trurm_cohort_options_init(trurm_cohort_options* opt);
/* Writes out_dir/cohort.json and out_dir/samples.decomp. */
TRURM_API trurm_status trurm_simulate_cohort(const trurm_cohort_options* opt, const char* out_dir);

TRURM_API trurm_status trurm_preprocess(const char* cube_path, double window_s, double overlap,
                                        size_t exclude_dc_bins, const char* out_path);
TRURM_API trurm_status trurm_decompose(const char* segments_path, size_t K, double band_low_hz,
                                       double band_high_hz, const char* out_path);
/* epsilon = 0 picks 32 when L > 32, else L / 4. */
TRURM_API trurm_status trurm_encrypt(const char* decomp_path, const trurm_key* key,
                                     double beta_amp, double beta_phase, size_t epsilon,
                                     const char* out_path);
/* ptn = NULL uses the identity PTN. Writes the rates CSV. */
TRURM_API trurm_status trurm_monitor(const char* series_path, const trurm_ptn* ptn,
                                     const char* out_csv);
/* Train and test files carry labels; writes the attack report JSON. */
TRURM_API trurm_status trurm_attack(const char* train_path, const char* test_path,
                                    const char* out_json);

typedef struct trurm_sweep_options {
  const char* grid_beta_amp;   /* "lo:hi:n" */
  const char* grid_beta_phase; /* "lo:hi:n" */
  const char* key_path;        /* NULL: built-in 16-bit cohort key */
  size_t epsilon;              /* 0: default for the key length */
  double mae_budget_bpm;
  double std_budget_bpm;
  double delta_a;
  const char* csv_path;        /* optional per-point CSV */
  const char* ptn_out_path;    /* optional calibrated PTN parameters */
} trurm_sweep_options;

TRURM_API void trurm_sweep_options_init(trurm_sweep_options* opt);
TRURM_API trurm_status trurm_sweep(const char* cohort_dir, const trurm_sweep_options* opt,
                                   const char* out_json);

typedef struct trurm_scenario_options {
  const char* config_path; /* scenario JSON; NULL: defaults */
  uint64_t first_seed;
  size_t seed_count;
  size_t sessions; /* per persona; 0 keeps the config value */
  double beta_amp;
  double beta_phase;
  int sigma_as_written;
} trurm_scenario_options;

TRURM_API void trurm_scenario_options_init(trurm_scenario_options* opt);
/* Writes out_prefix.csv, out_prefix.json and out_prefix.txt. */
TRURM_API trurm_status trurm_sweep_scenarios(const trurm_scenario_options* opt,
                                             const char* out_prefix);

/* Metrics from a rates CSV (truth column required) and an optional attack
 * report. sigma_as_written = 0 selects the std of absolute errors. */
TRURM_API trurm_status trurm_evaluate(const char* rates_csv, const char* attack_json,
                                      int sigma_as_written, const char* out_json);

#ifdef __cplusplus
}
#endif

#endif
