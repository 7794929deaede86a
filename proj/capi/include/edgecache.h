/*
 * edgecache: proactive edge-caching placement toolkit.
 *
 * C interface of the shared library. All functions return EC_OK on success
 * or a negative ec_status; ec_last_error() describes the most recent failure
 * on the calling thread. Strings and buffers returned through out-parameters
 * are owned by the caller and released with ec_string_free / ec_buffer_free.
 */
#ifndef EDGECACHE_H
#define EDGECACHE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define EDGECACHE_API __declspec(dllexport)
#else
#define EDGECACHE_API __attribute__((visibility("default")))
#endif

typedef enum ec_status {
  EC_OK = 0,
  EC_ERROR_INVALID_ARGUMENT = -1,
  EC_ERROR_PARSE = -2,
  EC_ERROR_IO = -3,
  EC_ERROR_RUNTIME = -4
} ec_status;

typedef struct ec_topology ec_topology;
typedef struct ec_instance ec_instance;
typedef struct ec_models ec_models;

EDGECACHE_API const char* ec_version(void);

/* Message for the last failing call on this thread; empty string if none. */
EDGECACHE_API const char* ec_last_error(void);

EDGECACHE_API void ec_string_free(char* s);
EDGECACHE_API void ec_buffer_free(uint8_t* p);

/* ---- topology ---------------------------------------------------------- */

EDGECACHE_API ec_status ec_topology_generate(uint64_t seed, int32_t num_ars, int32_t num_ecs,
                                             int32_t num_links, int32_t num_routers,
                                             int32_t n_backhaul, ec_topology** out);
EDGECACHE_API ec_status ec_topology_from_json(const char* json, ec_topology** out);
EDGECACHE_API ec_status ec_topology_to_json(const ec_topology* topology, char** json_out);
EDGECACHE_API void ec_topology_free(ec_topology* topology);

/* ---- instances --------------------------------------------------------- */

EDGECACHE_API ec_status ec_instance_generate(const ec_topology* topology, uint64_t seed,
                                             int32_t num_flows, double alpha, double beta,
                                             ec_instance** out);
/* Two-EC / one-AR instance whose link capacities encode a balanced
 * set-partition question over the given bandwidths. */
EDGECACHE_API ec_status ec_instance_partition_gadget(const double* bandwidths, int32_t count,
                                                     ec_instance** out);
EDGECACHE_API ec_status ec_instance_from_json(const char* json, ec_instance** out);
EDGECACHE_API ec_status ec_instance_to_json(const ec_instance* instance, char** json_out);
EDGECACHE_API void ec_instance_free(ec_instance* instance);

/* ---- models ------------------------------------------------------------ */

EDGECACHE_API ec_status ec_models_from_json(const char* json, ec_models** out);
EDGECACHE_API ec_status ec_models_to_json(const ec_models* models, char** json_out);
EDGECACHE_API void ec_models_free(ec_models* models);

/* ---- pipeline operations ------------------------------------------------ */

/* policy: benchmark | pure-cnn | cnn-rmilp | cnn-hcls | gca (underscores
 * also accepted). models may be NULL for benchmark and gca. The outcome is
 * a JSON document with the placement, routing, objective, penalty score,
 * feasibility verdict and per-policy diagnostics. */
EDGECACHE_API ec_status ec_solve(const ec_instance* instance, const char* policy,
                                 const ec_models* models, double delta, double gamma,
                                 char** outcome_json_out);

/* mask_json: optional 0/1 matrix document ({"format_version":1,"mask":[[...]]});
 * pass NULL for the unmasked model. */
EDGECACHE_API ec_status ec_export_milp(const ec_instance* instance, const char* mask_json,
                                       double big_m, char** lp_out);
EDGECACHE_API ec_status ec_count_variables(const ec_instance* instance, const char* mask_json,
                                           int64_t* count_out);

EDGECACHE_API ec_status ec_encode_image_json(const ec_instance* instance, char** json_out);
/* Binary PGM (P5) rendering of the feature image. */
EDGECACHE_API ec_status ec_render_pgm(const ec_instance* instance, uint8_t** bytes_out,
                                      size_t* size_out);

/* ---- dataset / training / evaluation ------------------------------------ */

/* Generates train+val+test instances on the topology, solves each to
 * optimality for labels, and persists everything under out_dir. */
EDGECACHE_API ec_status ec_dataset_build(const ec_topology* topology, uint64_t seed,
                                         int32_t num_flows, int32_t train_count,
                                         int32_t val_count, int32_t test_count, double alpha,
                                         double beta, int32_t jobs, const char* out_dir);

typedef struct ec_train_options {
  int32_t epochs;
  int32_t batch_size;
  double learning_rate;
  int32_t conv_layers;
  int32_t filters;
  int32_t kernel_h;
  int32_t kernel_w;
  double l2_lambda;
  double momentum;
  uint64_t seed;
  int32_t jobs;
} ec_train_options;

EDGECACHE_API void ec_train_options_init(ec_train_options* options);

/* Trains one model per flow row of the stored dataset. loss_csv_out gets a
 * model,epoch,train_loss,val_loss table. */
EDGECACHE_API ec_status ec_train_dataset(const char* dataset_dir,
                                         const ec_train_options* options, char** models_json_out,
                                         char** loss_csv_out);

/* Runs the five-policy comparison over the stored dataset's test split plus
 * freshly generated sets for the other flow counts. Returns the metrics CSV
 * and a rendered table; min_benchmark_feasible_ratio_out (optional) reports
 * the smallest benchmark feasible ratio across flow counts. */
EDGECACHE_API ec_status ec_evaluate(const char* dataset_dir, const ec_models* models,
                                    uint64_t seed, const int32_t* flow_counts,
                                    int32_t num_flow_counts, int32_t test_count, double delta,
                                    double gamma, int32_t jobs, char** csv_out, char** table_out,
                                    double* min_benchmark_feasible_ratio_out);

#ifdef __cplusplus
}
#endif

#endif /* EDGECACHE_H */
