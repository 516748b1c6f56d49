#ifndef MTS_MTS_H
#define MTS_MTS_H

/* C interface to the mts library. Objects are opaque handles; every call
 * returns a status and, on failure, leaves a message for mts_last_error()
 * on the calling thread. Strings returned through char** are owned by the
 * caller and released with mts_string_free(). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MTS_API __declspec(dllexport)
#else
#define MTS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct mts_tree mts_tree;
typedef struct mts_metric mts_metric;

typedef enum mts_status {
  MTS_OK = 0,
  MTS_ERR_STRUCTURE = 1, /* malformed tree */
  MTS_ERR_DOMAIN = 2,    /* input outside the supported domain */
  MTS_ERR_SOLVER = 3,
  MTS_ERR_PARSE = 4,
  MTS_ERR_IO = 5,
  MTS_ERR_ARGUMENT = 6, /* null pointer or bad size */
  MTS_ERR_INTERNAL = 7,
  MTS_VIOLATION = 8 /* a certified inequality failed */
} mts_status;

MTS_API const char* mts_last_error(void);
MTS_API void mts_string_free(char* s);
MTS_API const char* mts_status_name(mts_status s);

MTS_API mts_status mts_tree_from_json(const char* json, mts_tree** out);
MTS_API mts_status mts_tree_load(const char* path, mts_tree** out);
MTS_API void mts_tree_free(mts_tree* t);
MTS_API mts_status mts_tree_to_json(const mts_tree* t, char** out);
MTS_API size_t mts_tree_leaf_count(const mts_tree* t);
MTS_API int mts_tree_depth(const mts_tree* t);
/* *valid is 1 iff the tree is a tau-HST; report lists the violating edges. */
MTS_API mts_status mts_tree_validate(const mts_tree* t, double tau, int* valid, char** report);
MTS_API mts_status mts_tree_epsilon(const mts_tree* t, double kappa, double tau, double* out);

MTS_API mts_status mts_reshape(const mts_tree* t, mts_tree** out, char** report);

/* start: leaf label, "uniform", or NULL for the first leaf. */
MTS_API mts_status mts_run(const mts_tree* t, const char* costs_json, double kappa, double tau,
                           const char* start, char** trajectory);
/* start: leaf label or NULL for the first leaf. */
MTS_API mts_status mts_offline(const mts_tree* t, const char* costs_json, const char* start, char** offline);
/* Returns MTS_VIOLATION (with the report filled in) when any check fails. */
MTS_API mts_status mts_check(const char* trajectory, const char* offline, char** audit);

MTS_API mts_status mts_metric_from_json(const char* json, mts_metric** out);
MTS_API mts_status mts_metric_load(const char* path, mts_metric** out);
MTS_API void mts_metric_free(mts_metric* m);
MTS_API mts_status mts_embed(const mts_metric* m, uint64_t seed, mts_tree** out);
MTS_API mts_status mts_stretch(const mts_metric* m, size_t samples, uint64_t seed, double* max_mean);

/* CSV of the refinement distances, starting from the uniform state. */
MTS_API mts_status mts_converge(const mts_tree* t, const char* schedule_json, const size_t* m_list, size_t count,
                                double kappa, char** csv);

/* Runs every experiment in config_json (one object, an array, or
 * {"experiments": [...]}) on up to `jobs` threads, writes artifacts under
 * out_dir and appends certified rows to out_dir/ratios.csv in config order.
 * summary receives a JSON array with one entry per experiment. */
MTS_API mts_status mts_experiment(const char* config_json, const char* base_dir, const char* out_dir,
                                  unsigned jobs, char** summary);

/* One node projection with k children; p and alpha receive k values. */
MTS_API mts_status mts_project_node(size_t k, const double* q, const double* cost, const double* weight,
                                    const double* eta, const double* delta, double kappa, double* p,
                                    double* alpha, double* beta);

#ifdef __cplusplus
}
#endif

#endif
