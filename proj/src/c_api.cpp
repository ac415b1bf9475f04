#include "geocache/geocache.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "geocache/annealing.hpp"
#include "geocache/baselines.hpp"
#include "geocache/error.hpp"
#include "geocache/game.hpp"
#include "geocache/harness.hpp"

using namespace geocache;

struct geocache_topology {
  Topology value;
};
struct geocache_popularity {
  Popularity value;
};
struct geocache_placement {
  Placement value;
};
struct geocache_trace {
  DynamicsTrace trace;
  Placement reported;
  double reported_f;
  bool annealing;
};
struct geocache_config {
  ExperimentConfig value;
};
struct geocache_results {
  std::vector<ResultRecord> records;
  std::vector<std::string> names;
};

namespace {

thread_local std::string last_error;

geocache_status set_error(geocache_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <typename F>
geocache_status guarded(F&& body) {
  try {
    body();
    return GEOCACHE_OK;
  } catch (const Error& e) {
    return set_error(static_cast<geocache_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(GEOCACHE_INTERNAL_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return set_error(GEOCACHE_INTERNAL_ERROR, e.what());
  }
}

#define GEOCACHE_NOT_NULL(ptr)                                               \
  do {                                                                       \
    if ((ptr) == nullptr)                                                    \
      return set_error(GEOCACHE_NULL_ARGUMENT, #ptr " must not be null");    \
  } while (0)

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

CacheIndex cache_index(std::size_t caches, uint32_t id) {
  require(id >= 1 && id <= caches, ErrorCode::InvalidArgument,
          "cache id " + std::to_string(id) + " out of range");
  return id - 1;
}

void write_to(const char* path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, std::string("cannot write ") + path);
  out << text;
}

}  // namespace

extern "C" {

const char* geocache_version(void) { return "1.0.0"; }

const char* geocache_last_error(void) { return last_error.c_str(); }

const char* geocache_status_name(geocache_status status) {
  switch (status) {
    case GEOCACHE_OK: return "ok";
    case GEOCACHE_INVALID_ARGUMENT: return "invalid argument";
    case GEOCACHE_DIMENSION_MISMATCH: return "dimension mismatch";
    case GEOCACHE_INFEASIBLE: return "infeasible";
    case GEOCACHE_PARSE_ERROR: return "parse error";
    case GEOCACHE_IO_ERROR: return "i/o error";
    case GEOCACHE_EMPTY_TOPOLOGY: return "empty topology";
    case GEOCACHE_UNCOVERED_WINDOW: return "uncovered window";
    case GEOCACHE_ENUMERATION_CAP: return "enumeration cap exceeded";
    case GEOCACHE_CONFIG_ERROR: return "config error";
    case GEOCACHE_INTERNAL_ERROR: return "internal error";
    case GEOCACHE_NULL_ARGUMENT: return "null argument";
  }
  return "unknown status";
}

void geocache_string_free(char* text) { std::free(text); }

// ---------------------------------------------------------------------------

geocache_status geocache_topology_poisson(double intensity, double width, double height,
                                          double radius, uint64_t seed,
                                          geocache_topology** out) {
  GEOCACHE_NOT_NULL(out);
  return guarded([&] {
    *out = new geocache_topology{
        generate_poisson(intensity, Geometry::plane(width, height), radius, seed)};
  });
}

geocache_status geocache_topology_grid_torus(size_t rows, size_t cols, double spacing,
                                             double radius, geocache_topology** out) {
  GEOCACHE_NOT_NULL(out);
  return guarded(
      [&] { *out = new geocache_topology{generate_grid_torus(rows, cols, spacing, radius)}; });
}

geocache_status geocache_topology_load_csv(const char* path, double width, double height,
                                           int torus, geocache_topology** out) {
  GEOCACHE_NOT_NULL(path);
  GEOCACHE_NOT_NULL(out);
  return guarded([&] {
    const auto records = read_topology_csv(path);
    const Geometry g = torus ? Geometry::torus(width, height) : Geometry::plane(width, height);
    *out = new geocache_topology{load_topology(records, g)};
  });
}

geocache_status geocache_topology_compute_cells(geocache_topology* topology, uint64_t samples,
                                                uint64_t seed, unsigned threads) {
  GEOCACHE_NOT_NULL(topology);
  return guarded([&] {
    topology->value.set_cells(compute_cells(topology->value, samples, seed, threads));
  });
}

size_t geocache_topology_size(const geocache_topology* topology) {
  return topology ? topology->value.size() : 0;
}

geocache_status geocache_topology_cell_count(const geocache_topology* topology, size_t* out) {
  GEOCACHE_NOT_NULL(topology);
  GEOCACHE_NOT_NULL(out);
  return guarded([&] { *out = topology->value.cells().cells().size(); });
}

geocache_status geocache_topology_covered_fraction(const geocache_topology* topology,
                                                   double* out) {
  GEOCACHE_NOT_NULL(topology);
  GEOCACHE_NOT_NULL(out);
  return guarded([&] { *out = topology->value.cells().covered_fraction(); });
}

geocache_status geocache_topology_neighbors(const geocache_topology* topology, uint32_t id,
                                            uint32_t* ids, size_t capacity, size_t* count) {
  GEOCACHE_NOT_NULL(topology);
  GEOCACHE_NOT_NULL(count);
  return guarded([&] {
    const auto& nb = topology->value.cells().neighbors(cache_index(topology->value.size(), id));
    *count = nb.size();
    require(ids != nullptr || capacity == 0, ErrorCode::InvalidArgument, "ids is null");
    require(capacity >= nb.size(), ErrorCode::InvalidArgument, "ids buffer too small");
    for (std::size_t i = 0; i < nb.size(); ++i) ids[i] = nb[i] + 1;
  });
}

geocache_status geocache_topology_write_sites(const geocache_topology* topology,
                                              const char* path) {
  GEOCACHE_NOT_NULL(topology);
  GEOCACHE_NOT_NULL(path);
  return guarded([&] {
    std::ostringstream out;
    write_sites_csv(topology->value, out);
    write_to(path, out.str());
  });
}

geocache_status geocache_topology_write_cells(const geocache_topology* topology,
                                              const char* path) {
  GEOCACHE_NOT_NULL(topology);
  GEOCACHE_NOT_NULL(path);
  return guarded([&] {
    std::ostringstream out;
    write_cells_csv(topology->value.cells(), out);
    write_to(path, out.str());
  });
}

void geocache_topology_free(geocache_topology* topology) { delete topology; }

// ---------------------------------------------------------------------------

geocache_status geocache_popularity_zipf(size_t files, double gamma,
                                         geocache_popularity** out) {
  GEOCACHE_NOT_NULL(out);
  return guarded([&] { *out = new geocache_popularity{zipf_popularity(files, gamma)}; });
}

geocache_status geocache_popularity_from_array(const double* probs, size_t files,
                                               geocache_popularity** out) {
  GEOCACHE_NOT_NULL(probs);
  GEOCACHE_NOT_NULL(out);
  return guarded([&] {
    *out = new geocache_popularity{Popularity(std::vector<double>(probs, probs + files))};
  });
}

size_t geocache_popularity_size(const geocache_popularity* pop) {
  return pop ? pop->value.size() : 0;
}

geocache_status geocache_popularity_tail_mass(const geocache_popularity* pop, size_t n,
                                              double* out) {
  GEOCACHE_NOT_NULL(pop);
  GEOCACHE_NOT_NULL(out);
  return guarded([&] { *out = tail_mass(pop->value, n); });
}

void geocache_popularity_free(geocache_popularity* pop) { delete pop; }

// ---------------------------------------------------------------------------

geocache_status geocache_placement_most_popular(size_t caches, size_t files, size_t capacity,
                                                geocache_placement** out) {
  GEOCACHE_NOT_NULL(out);
  return guarded(
      [&] { *out = new geocache_placement{most_popular_placement(caches, files, capacity)}; });
}

geocache_status geocache_placement_set_row(geocache_placement* placement, uint32_t id,
                                           const uint32_t* files, size_t count) {
  GEOCACHE_NOT_NULL(placement);
  if (count > 0) GEOCACHE_NOT_NULL(files);
  return guarded([&] {
    Placement& b = placement->value;
    Row row;
    for (size_t i = 0; i < count; ++i) {
      require(files[i] >= 1 && files[i] <= b.files(), ErrorCode::DimensionMismatch,
              "file id " + std::to_string(files[i]) + " out of range");
      row.push_back(files[i] - 1);
    }
    b.set_row(cache_index(b.caches(), id), std::move(row));
  });
}

geocache_status geocache_placement_get_row(const geocache_placement* placement, uint32_t id,
                                           uint32_t* files, size_t capacity, size_t* count) {
  GEOCACHE_NOT_NULL(placement);
  GEOCACHE_NOT_NULL(count);
  return guarded([&] {
    const Row& row = placement->value.row(cache_index(placement->value.caches(), id));
    *count = row.size();
    require(files != nullptr || capacity == 0, ErrorCode::InvalidArgument, "files is null");
    require(capacity >= row.size(), ErrorCode::InvalidArgument, "files buffer too small");
    for (size_t i = 0; i < row.size(); ++i) files[i] = row[i] + 1;
  });
}

geocache_status geocache_placement_evaluate(const geocache_placement* placement,
                                            const geocache_topology* topology,
                                            const geocache_popularity* pop, double* miss) {
  GEOCACHE_NOT_NULL(placement);
  GEOCACHE_NOT_NULL(topology);
  GEOCACHE_NOT_NULL(pop);
  GEOCACHE_NOT_NULL(miss);
  return guarded([&] {
    *miss = evaluate_miss(placement->value, topology->value.cells(), pop->value);
  });
}

geocache_status geocache_placement_is_nash(const geocache_placement* placement,
                                           const geocache_topology* topology,
                                           const geocache_popularity* pop,
                                           geocache_nash_method method, int* out) {
  GEOCACHE_NOT_NULL(placement);
  GEOCACHE_NOT_NULL(topology);
  GEOCACHE_NOT_NULL(pop);
  GEOCACHE_NOT_NULL(out);
  return guarded([&] {
    const NashMethod m =
        method == GEOCACHE_NASH_BRUTE_FORCE ? NashMethod::BruteForce : NashMethod::Threshold;
    *out = is_nash(placement->value, topology->value.cells(), pop->value, m) ? 1 : 0;
  });
}

geocache_status geocache_placement_write_csv(const geocache_placement* placement,
                                             const char* path) {
  GEOCACHE_NOT_NULL(placement);
  GEOCACHE_NOT_NULL(path);
  return guarded([&] {
    std::ostringstream out;
    write_placement_csv(placement->value, out);
    write_to(path, out.str());
  });
}

void geocache_placement_free(geocache_placement* placement) { delete placement; }

// ---------------------------------------------------------------------------

geocache_status geocache_run_best_response(const geocache_topology* topology,
                                           const geocache_popularity* pop, size_t capacity,
                                           geocache_schedule schedule, uint64_t seed,
                                           uint64_t step_cap, geocache_trace** out) {
  GEOCACHE_NOT_NULL(topology);
  GEOCACHE_NOT_NULL(pop);
  GEOCACHE_NOT_NULL(out);
  return guarded([&] {
    DynamicsOptions opts;
    opts.schedule.kind = schedule == GEOCACHE_UNIFORM_RANDOM ? ScheduleKind::UniformRandom
                                                             : ScheduleKind::RoundRobin;
    opts.schedule.seed = seed;
    opts.step_cap = step_cap;
    const CellTable& cells = topology->value.cells();
    DynamicsTrace trace = run_dynamics(
        Placement::top_k(topology->value.size(), pop->value.size(), capacity), cells,
        pop->value, opts);
    Placement reported = trace.terminal;
    const double f = trace.final_f;
    *out = new geocache_trace{std::move(trace), std::move(reported), f, false};
  });
}

geocache_status geocache_run_ssa(const geocache_topology* topology,
                                 const geocache_popularity* pop, size_t capacity, double depth,
                                 double p_tilde, uint64_t steps, uint64_t seed,
                                 geocache_trace** out) {
  GEOCACHE_NOT_NULL(topology);
  GEOCACHE_NOT_NULL(pop);
  GEOCACHE_NOT_NULL(out);
  return guarded([&] {
    SsaConfig config;
    config.cooling.depth = depth;
    config.p_tilde = p_tilde;
    config.steps = steps;
    config.seed = seed;
    SsaResult res =
        run_ssa(Placement::top_k(topology->value.size(), pop->value.size(), capacity),
                topology->value.cells(), pop->value, config);
    *out = new geocache_trace{std::move(res.trace), std::move(res.best), res.best_f, true};
  });
}

geocache_status geocache_run_dsa(const geocache_topology* topology,
                                 const geocache_popularity* pop, size_t capacity, double tau0,
                                 double tau_ref, uint64_t ref_step, uint64_t seed,
                                 geocache_trace** out) {
  GEOCACHE_NOT_NULL(topology);
  GEOCACHE_NOT_NULL(pop);
  GEOCACHE_NOT_NULL(out);
  return guarded([&] {
    DsaOptions opts;
    opts.tau = {tau0, tau_ref, ref_step};
    opts.seed = seed;
    DsaResult res = run_dsa(topology->value.cells(), pop->value, capacity, opts);
    Placement reported = res.trace.terminal;
    *out = new geocache_trace{std::move(res.trace), std::move(reported), res.rounded_f, true};
  });
}

size_t geocache_trace_length(const geocache_trace* trace) {
  return trace ? trace->trace.steps.size() : 0;
}

geocache_status geocache_trace_step(const geocache_trace* trace, size_t index,
                                    uint32_t* cache, double* f_before, double* f_after,
                                    int* changed) {
  GEOCACHE_NOT_NULL(trace);
  if (index >= trace->trace.steps.size())
    return set_error(GEOCACHE_INVALID_ARGUMENT, "trace index out of range");
  const TraceStep& s = trace->trace.steps[index];
  if (cache) *cache = s.cache + 1;
  if (f_before) *f_before = s.f_before;
  if (f_after) *f_after = s.f_after;
  if (changed) *changed = s.changed ? 1 : 0;
  return GEOCACHE_OK;
}

double geocache_trace_final_miss(const geocache_trace* trace) {
  return trace ? trace->reported_f : 0.0;
}

geocache_status geocache_trace_placement(const geocache_trace* trace,
                                         geocache_placement** out) {
  GEOCACHE_NOT_NULL(trace);
  GEOCACHE_NOT_NULL(out);
  return guarded([&] { *out = new geocache_placement{trace->reported}; });
}

geocache_status geocache_trace_write_csv(const geocache_trace* trace, const char* path) {
  GEOCACHE_NOT_NULL(trace);
  GEOCACHE_NOT_NULL(path);
  return guarded([&] {
    std::ostringstream out;
    write_trace_csv(trace->trace, out, trace->annealing);
    write_to(path, out.str());
  });
}

void geocache_trace_free(geocache_trace* trace) { delete trace; }

// ---------------------------------------------------------------------------

geocache_status geocache_config_read(const char* path, geocache_config** out) {
  GEOCACHE_NOT_NULL(path);
  GEOCACHE_NOT_NULL(out);
  return guarded([&] { *out = new geocache_config{read_config(path)}; });
}

geocache_status geocache_config_parse(const char* text, geocache_config** out) {
  GEOCACHE_NOT_NULL(text);
  GEOCACHE_NOT_NULL(out);
  return guarded([&] {
    std::istringstream in(text);
    *out = new geocache_config{parse_config(in)};
  });
}

geocache_status geocache_config_set(geocache_config* config, const char* key,
                                    const char* value) {
  GEOCACHE_NOT_NULL(config);
  GEOCACHE_NOT_NULL(key);
  GEOCACHE_NOT_NULL(value);
  return guarded([&] {
    try {
      set_config_value(config->value, key, value);
    } catch (const Error& e) {
      fail(ErrorCode::Config, e.what());
    }
  });
}

geocache_status geocache_config_canonical(const geocache_config* config, char** out) {
  GEOCACHE_NOT_NULL(config);
  GEOCACHE_NOT_NULL(out);
  return guarded([&] { *out = copy_string(canonical_config(config->value)); });
}

geocache_status geocache_config_output(const geocache_config* config, char** out) {
  GEOCACHE_NOT_NULL(config);
  GEOCACHE_NOT_NULL(out);
  return guarded([&] { *out = copy_string(config->value.output); });
}

geocache_status geocache_config_topology(const geocache_config* config, uint64_t replica,
                                         geocache_topology** out) {
  GEOCACHE_NOT_NULL(config);
  GEOCACHE_NOT_NULL(out);
  return guarded([&] { *out = new geocache_topology{build_topology(config->value, replica)}; });
}

void geocache_config_free(geocache_config* config) { delete config; }

geocache_status geocache_experiment_run(const geocache_config* config,
                                        geocache_results** out) {
  GEOCACHE_NOT_NULL(config);
  GEOCACHE_NOT_NULL(out);
  return guarded([&] {
    auto results = std::make_unique<geocache_results>();
    results->records = run_experiment(config->value);
    for (const auto& r : results->records) results->names.emplace_back(to_string(r.algorithm));
    *out = results.release();
  });
}

size_t geocache_results_count(const geocache_results* results) {
  return results ? results->records.size() : 0;
}

geocache_status geocache_results_get(const geocache_results* results, size_t index,
                                     const char** algorithm, uint64_t* replica,
                                     double* final_hit, uint64_t* iterations,
                                     double* wall_seconds) {
  GEOCACHE_NOT_NULL(results);
  if (index >= results->records.size())
    return set_error(GEOCACHE_INVALID_ARGUMENT, "result index out of range");
  const ResultRecord& r = results->records[index];
  if (algorithm) *algorithm = results->names[index].c_str();
  if (replica) *replica = r.replica;
  if (final_hit) *final_hit = r.final_hit;
  if (iterations) *iterations = r.iterations;
  if (wall_seconds) *wall_seconds = r.wall_seconds;
  return GEOCACHE_OK;
}

geocache_status geocache_results_emit(const geocache_results* results, const char* dir) {
  GEOCACHE_NOT_NULL(results);
  GEOCACHE_NOT_NULL(dir);
  return guarded([&] { emit_series(results->records, dir); });
}

void geocache_results_free(geocache_results* results) { delete results; }

geocache_status geocache_report(const char* const* summary_paths, size_t count, char** out) {
  GEOCACHE_NOT_NULL(summary_paths);
  GEOCACHE_NOT_NULL(out);
  return guarded([&] {
    std::vector<RecordSet> sets;
    for (size_t i = 0; i < count; ++i) {
      require(summary_paths[i] != nullptr, ErrorCode::InvalidArgument, "summary path is null");
      const std::string prefix = count > 1 ? std::string(summary_paths[i]) + ":" : "";
      for (auto& set : group_by_algorithm(read_summary_csv(summary_paths[i]), prefix))
        sets.push_back(std::move(set));
    }
    *out = copy_string(compare_report(sets));
  });
}

}  // extern "C"
