/* ehrelay: relay-topology planning for energy-harvesting TDMA networks.
 *
 * Plain C surface over the C++ core. All objects are opaque handles created
 * and destroyed here; functions return ehr_status and leave a human-readable
 * message in ehr_last_error() (thread local) on failure. Strings returned
 * through char** are malloc'd by the library and must be released with
 * ehr_string_free().
 */
#ifndef EHRELAY_H
#define EHRELAY_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ehr_status {
    EHR_OK = 0,
    EHR_ERR_INVALID_ARG = 1,   /* bad parameter, malformed input text, unknown scheme */
    EHR_ERR_IO = 2,            /* file could not be read or written */
    EHR_ERR_NO_CONVERGE = 3,   /* slot balancing hit its iteration cap */
    EHR_ERR_INTERNAL = 4
} ehr_status;

typedef struct ehr_instance ehr_instance;
typedef struct ehr_solution ehr_solution;
typedef struct ehr_training ehr_training;

/* Deployment constants. Zero-initialize then ehr_params_default(). */
typedef struct ehr_params {
    double pathloss_exponent;
    double bandwidth_hz;
    double noise_figure_db;
    double pb_power_w;
    double conversion_efficiency;
    double frame_s;
    double radius_km;
    double min_distance_km;
} ehr_params;

/* Solver and trainer knobs shared by every scheme. */
typedef struct ehr_options {
    double ib_eps1;            /* balance gap target, bits/Hz */
    double ib_eps2;            /* slot floor, seconds */
    long ib_max_outer;         /* balancer iteration cap */
    double pt_slot_scale;      /* <= 0: frame / n_devices */
    double pt_budget_threshold;
    int pt_include_fading;     /* 0 or 1 */
    double adam_learning_rate;
    double adam_beta1;
    double adam_beta2;
    double adam_epsilon;
    int max_epochs;
    int patience;              /* <= 0: trainer default */
    int extra_epochs;          /* train past the stopping point (diagnostics) */
    uint64_t seed;             /* greedy shuffle / training streams */
} ehr_options;

const char* ehr_version(void);
/* Message for the most recent failure on this thread; empty if none. */
const char* ehr_last_error(void);
void ehr_string_free(char* s);

void ehr_params_default(ehr_params* p);
void ehr_options_default(ehr_options* o);

/* ----- instances ----------------------------------------------------------*/

ehr_status ehr_instance_generate(uint64_t seed, int n_devices, int n_beacons,
                                 const ehr_params* params, ehr_instance** out);
ehr_status ehr_instance_save(const ehr_instance* inst, const char* path);
ehr_status ehr_instance_load(const char* path, ehr_instance** out);
ehr_status ehr_instance_to_string(const ehr_instance* inst, char** out);

int ehr_instance_devices(const ehr_instance* inst);    /* < 0 on null handle */
int ehr_instance_beacons(const ehr_instance* inst);
uint64_t ehr_instance_seed(const ehr_instance* inst);
ehr_status ehr_instance_energy(const ehr_instance* inst, int device, double* out_joules);

void ehr_instance_free(ehr_instance* inst);

/* ----- solving ------------------------------------------------------------*/

/* scheme: "direct", "mst", "greedy", "opt" (<= 8 devices) or "proposed". */
ehr_status ehr_solve(const ehr_instance* inst, const char* scheme, const ehr_options* opts,
                     ehr_solution** out);

double ehr_solution_min_bits(const ehr_solution* sol);  /* worst-device budget */
double ehr_solution_max_bits(const ehr_solution* sol);
/* Parent node of `device`: another device index, or n_devices for the sink.
 * Negative on bad arguments. */
int ehr_solution_parent(const ehr_solution* sol, int device);
double ehr_solution_slot(const ehr_solution* sol, int device);  /* seconds, NaN on error */
int ehr_solution_valid(const ehr_solution* sol);
int ehr_solution_used_fallback(const ehr_solution* sol);
int ehr_solution_epochs(const ehr_solution* sol);

ehr_status ehr_solution_save(const ehr_solution* sol, const char* path);
/* Graphviz text for the solved topology. */
ehr_status ehr_solution_dot(const ehr_instance* inst, const ehr_solution* sol, char** out);

void ehr_solution_free(ehr_solution* sol);

/* ----- training -----------------------------------------------------------*/

ehr_status ehr_train(const ehr_instance* inst, const ehr_options* opts, ehr_training** out);

int ehr_training_epochs(const ehr_training* tr);
int ehr_training_stop_epoch(const ehr_training* tr);
ehr_status ehr_training_curve(const ehr_training* tr, int epoch, double* loss,
                              double* running_min, double* b_min);
/* epoch,loss,running_min_loss,b_min CSV over all trained epochs. */
ehr_status ehr_training_curves_csv(const ehr_training* tr, char** out);
ehr_status ehr_training_save_checkpoint(const ehr_training* tr, const char* path);
/* Harden the champion adjacency into a solution for `inst` (the instance the
 * training ran on). */
ehr_status ehr_training_solution(const ehr_training* tr, const ehr_instance* inst,
                                 const ehr_options* opts, ehr_solution** out);

void ehr_training_free(ehr_training* tr);

/* ----- benchmarking -------------------------------------------------------*/

/* config_text uses the key = value sweep format; see the project README.
 * workers > 0 overrides both the config and the hardware default. */
ehr_status ehr_bench_run(const char* config_text, int workers, char** csv_out);
ehr_status ehr_bench_run_to_file(const char* config_text, int workers, const char* csv_path);

#ifdef __cplusplus
}
#endif

#endif /* EHRELAY_H */
