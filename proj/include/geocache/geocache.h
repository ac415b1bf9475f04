#ifndef GEOCACHE_GEOCACHE_H
#define GEOCACHE_GEOCACHE_H

/* C interface of the geocache library.
 *
 * Objects are opaque handles created by *_create / factory functions and
 * released with the matching *_free function. Every fallible call returns a
 * geocache_status; on failure geocache_last_error() describes the problem
 * (the message is thread-local and valid until the next failing call on the
 * same thread). Cache and file ids are one-based, as in the CSV formats. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GEOCACHE_API __declspec(dllexport)
#else
#define GEOCACHE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum geocache_status {
  GEOCACHE_OK = 0,
  GEOCACHE_INVALID_ARGUMENT = 1,
  GEOCACHE_DIMENSION_MISMATCH = 2,
  GEOCACHE_INFEASIBLE = 3,
  GEOCACHE_PARSE_ERROR = 4,
  GEOCACHE_IO_ERROR = 5,
  GEOCACHE_EMPTY_TOPOLOGY = 6,
  GEOCACHE_UNCOVERED_WINDOW = 7,
  GEOCACHE_ENUMERATION_CAP = 8,
  GEOCACHE_CONFIG_ERROR = 9,
  GEOCACHE_INTERNAL_ERROR = 10,
  GEOCACHE_NULL_ARGUMENT = 11
} geocache_status;

typedef struct geocache_topology geocache_topology;
typedef struct geocache_popularity geocache_popularity;
typedef struct geocache_placement geocache_placement;
typedef struct geocache_trace geocache_trace;
typedef struct geocache_config geocache_config;
typedef struct geocache_results geocache_results;

typedef enum geocache_schedule {
  GEOCACHE_ROUND_ROBIN = 0,
  GEOCACHE_UNIFORM_RANDOM = 1
} geocache_schedule;

typedef enum geocache_nash_method {
  GEOCACHE_NASH_THRESHOLD = 0,
  GEOCACHE_NASH_BRUTE_FORCE = 1
} geocache_nash_method;

GEOCACHE_API const char* geocache_version(void);
GEOCACHE_API const char* geocache_last_error(void);
GEOCACHE_API const char* geocache_status_name(geocache_status status);
/* Frees strings returned through char** out-parameters. */
GEOCACHE_API void geocache_string_free(char* text);

/* Topology */
GEOCACHE_API geocache_status geocache_topology_poisson(double intensity, double width,
                                                       double height, double radius,
                                                       uint64_t seed,
                                                       geocache_topology** out);
GEOCACHE_API geocache_status geocache_topology_grid_torus(size_t rows, size_t cols,
                                                          double spacing, double radius,
                                                          geocache_topology** out);
/* Reads an `id,x,y,radius` CSV; torus != 0 wraps the width x height window. */
GEOCACHE_API geocache_status geocache_topology_load_csv(const char* path, double width,
                                                        double height, int torus,
                                                        geocache_topology** out);
GEOCACHE_API geocache_status geocache_topology_compute_cells(geocache_topology* topology,
                                                             uint64_t samples, uint64_t seed,
                                                             unsigned threads);
GEOCACHE_API size_t geocache_topology_size(const geocache_topology* topology);
/* Requires computed cells. */
GEOCACHE_API geocache_status geocache_topology_cell_count(const geocache_topology* topology,
                                                          size_t* out);
GEOCACHE_API geocache_status geocache_topology_covered_fraction(
    const geocache_topology* topology, double* out);
/* Writes the one-based neighbour ids of cache `id` (including itself). */
GEOCACHE_API geocache_status geocache_topology_neighbors(const geocache_topology* topology,
                                                         uint32_t id, uint32_t* ids,
                                                         size_t capacity, size_t* count);
GEOCACHE_API geocache_status geocache_topology_write_sites(const geocache_topology* topology,
                                                           const char* path);
GEOCACHE_API geocache_status geocache_topology_write_cells(const geocache_topology* topology,
                                                           const char* path);
GEOCACHE_API void geocache_topology_free(geocache_topology* topology);

/* Popularity */
GEOCACHE_API geocache_status geocache_popularity_zipf(size_t files, double gamma,
                                                      geocache_popularity** out);
GEOCACHE_API geocache_status geocache_popularity_from_array(const double* probs, size_t files,
                                                            geocache_popularity** out);
GEOCACHE_API size_t geocache_popularity_size(const geocache_popularity* pop);
GEOCACHE_API geocache_status geocache_popularity_tail_mass(const geocache_popularity* pop,
                                                           size_t n, double* out);
GEOCACHE_API void geocache_popularity_free(geocache_popularity* pop);

/* Placements */
GEOCACHE_API geocache_status geocache_placement_most_popular(size_t caches, size_t files,
                                                             size_t capacity,
                                                             geocache_placement** out);
/* Sets the row of cache `id` from `count` one-based file ids. */
GEOCACHE_API geocache_status geocache_placement_set_row(geocache_placement* placement,
                                                        uint32_t id, const uint32_t* files,
                                                        size_t count);
GEOCACHE_API geocache_status geocache_placement_get_row(const geocache_placement* placement,
                                                        uint32_t id, uint32_t* files,
                                                        size_t capacity, size_t* count);
GEOCACHE_API geocache_status geocache_placement_evaluate(const geocache_placement* placement,
                                                         const geocache_topology* topology,
                                                         const geocache_popularity* pop,
                                                         double* miss);
GEOCACHE_API geocache_status geocache_placement_is_nash(const geocache_placement* placement,
                                                        const geocache_topology* topology,
                                                        const geocache_popularity* pop,
                                                        geocache_nash_method method,
                                                        int* out);
GEOCACHE_API geocache_status geocache_placement_write_csv(const geocache_placement* placement,
                                                          const char* path);
GEOCACHE_API void geocache_placement_free(geocache_placement* placement);

/* Dynamics; every run starts from the most-popular placement. */
GEOCACHE_API geocache_status geocache_run_best_response(const geocache_topology* topology,
                                                        const geocache_popularity* pop,
                                                        size_t capacity,
                                                        geocache_schedule schedule,
                                                        uint64_t seed, uint64_t step_cap,
                                                        geocache_trace** out);
GEOCACHE_API geocache_status geocache_run_ssa(const geocache_topology* topology,
                                              const geocache_popularity* pop, size_t capacity,
                                              double depth, double p_tilde, uint64_t steps,
                                              uint64_t seed, geocache_trace** out);
GEOCACHE_API geocache_status geocache_run_dsa(const geocache_topology* topology,
                                              const geocache_popularity* pop, size_t capacity,
                                              double tau0, double tau_ref, uint64_t ref_step,
                                              uint64_t seed, geocache_trace** out);
GEOCACHE_API size_t geocache_trace_length(const geocache_trace* trace);
GEOCACHE_API geocache_status geocache_trace_step(const geocache_trace* trace, size_t index,
                                                 uint32_t* cache, double* f_before,
                                                 double* f_after, int* changed);
/* f of the reported placement: terminal for best response, best visited for
 * SSA, rounded for DSA. */
GEOCACHE_API double geocache_trace_final_miss(const geocache_trace* trace);
GEOCACHE_API geocache_status geocache_trace_placement(const geocache_trace* trace,
                                                      geocache_placement** out);
GEOCACHE_API geocache_status geocache_trace_write_csv(const geocache_trace* trace,
                                                      const char* path);
GEOCACHE_API void geocache_trace_free(geocache_trace* trace);

/* Experiments */
GEOCACHE_API geocache_status geocache_config_read(const char* path, geocache_config** out);
GEOCACHE_API geocache_status geocache_config_parse(const char* text, geocache_config** out);
GEOCACHE_API geocache_status geocache_config_set(geocache_config* config, const char* key,
                                                 const char* value);
/* Canonical text of the config (caller frees with geocache_string_free). */
GEOCACHE_API geocache_status geocache_config_canonical(const geocache_config* config,
                                                       char** out);
GEOCACHE_API geocache_status geocache_config_output(const geocache_config* config,
                                                    char** out);
/* Topology of replica `replica` with cells computed. */
GEOCACHE_API geocache_status geocache_config_topology(const geocache_config* config,
                                                      uint64_t replica,
                                                      geocache_topology** out);
GEOCACHE_API void geocache_config_free(geocache_config* config);

GEOCACHE_API geocache_status geocache_experiment_run(const geocache_config* config,
                                                     geocache_results** out);
GEOCACHE_API size_t geocache_results_count(const geocache_results* results);
GEOCACHE_API geocache_status geocache_results_get(const geocache_results* results,
                                                  size_t index, const char** algorithm,
                                                  uint64_t* replica, double* final_hit,
                                                  uint64_t* iterations, double* wall_seconds);
GEOCACHE_API geocache_status geocache_results_emit(const geocache_results* results,
                                                   const char* dir);
GEOCACHE_API void geocache_results_free(geocache_results* results);

/* Compares summary.csv files; every algorithm of every file is one record
 * set. Returns the report as CSV text. */
GEOCACHE_API geocache_status geocache_report(const char* const* summary_paths, size_t count,
                                             char** out);

#ifdef __cplusplus
}
#endif

#endif
