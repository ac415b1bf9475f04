#include "geocache/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "geocache/annealing.hpp"
#include "geocache/baselines.hpp"
#include "geocache/catalog.hpp"
#include "geocache/error.hpp"
#include "geocache/placement.hpp"
#include "geocache/rng.hpp"
#include "text_util.hpp"

namespace geocache {

namespace fs = std::filesystem;
using detail::format_double;

const char* to_string(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::Robr: return "robr";
    case AlgorithmKind::Rrbr: return "rrbr";
    case AlgorithmKind::Ssa: return "ssa";
    case AlgorithmKind::Dsa: return "dsa";
    case AlgorithmKind::MostPopular: return "most-popular";
    case AlgorithmKind::Probabilistic: return "probabilistic";
    case AlgorithmKind::MultiLruOne: return "multi-lru-one";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Config

namespace {

const std::map<std::string, AlgorithmKind>& algorithm_names() {
  static const std::map<std::string, AlgorithmKind> names{
      {"robr", AlgorithmKind::Robr},
      {"rrbr", AlgorithmKind::Rrbr},
      {"ssa", AlgorithmKind::Ssa},
      {"dsa", AlgorithmKind::Dsa},
      {"most-popular", AlgorithmKind::MostPopular},
      {"probabilistic", AlgorithmKind::Probabilistic},
      {"multi-lru-one", AlgorithmKind::MultiLruOne},
  };
  return names;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  fail(ErrorCode::Config, key + ": invalid value '" + value + "' (expected " + expected + ")");
}

double to_double(const std::string& key, const std::string& value) {
  const auto v = detail::parse_double(value);
  if (!v || !std::isfinite(*v)) bad_value(key, value, "a number");
  return *v;
}

double to_positive(const std::string& key, const std::string& value) {
  const double v = to_double(key, value);
  if (!(v > 0.0)) bad_value(key, value, "a positive number");
  return v;
}

std::uint64_t to_uint(const std::string& key, const std::string& value) {
  const auto v = detail::parse_uint(value);
  if (!v) bad_value(key, value, "a non-negative integer");
  return *v;
}

std::uint64_t to_count(const std::string& key, const std::string& value) {
  const auto v = to_uint(key, value);
  if (v == 0) bad_value(key, value, "a positive integer");
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "true or false");
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

std::string opt_double(const std::optional<double>& v) {
  return v ? format_double(*v) : "auto";
}

const std::vector<std::pair<std::string, Field>>& fields() {
  using C = ExperimentConfig;
  using S = const std::string&;
  static const std::vector<std::pair<std::string, Field>> table{
      {"name", {[](C& c, S v) { c.name = v; }, [](const C& c) { return c.name; }}},
      {"seed",
       {[](C& c, S v) { c.seed = to_uint("seed", v); },
        [](const C& c) { return std::to_string(c.seed); }}},
      {"replicas",
       {[](C& c, S v) { c.replicas = to_count("replicas", v); },
        [](const C& c) { return std::to_string(c.replicas); }}},
      {"threads",
       {[](C& c, S v) { c.threads = static_cast<unsigned>(to_uint("threads", v)); },
        [](const C& c) { return std::to_string(c.threads); }}},
      {"output", {[](C& c, S v) { c.output = v; }, [](const C& c) { return c.output; }}},
      {"capacity",
       {[](C& c, S v) { c.capacity = to_count("capacity", v); },
        [](const C& c) { return std::to_string(c.capacity); }}},
      {"cells.samples",
       {[](C& c, S v) { c.cell_samples = to_count("cells.samples", v); },
        [](const C& c) { return std::to_string(c.cell_samples); }}},
      {"series.stride",
       {[](C& c, S v) { c.series_stride = to_count("series.stride", v); },
        [](const C& c) { return std::to_string(c.series_stride); }}},
      {"algorithm",
       {[](C& c, S v) {
          std::vector<AlgorithmKind> out;
          for (auto part : detail::split(v, ',')) {
            const auto it = algorithm_names().find(std::string(part));
            if (it == algorithm_names().end())
              bad_value("algorithm", std::string(part),
                        "robr, rrbr, ssa, dsa, most-popular, probabilistic or multi-lru-one");
            if (std::find(out.begin(), out.end(), it->second) == out.end())
              out.push_back(it->second);
          }
          c.algorithms = std::move(out);
        },
        [](const C& c) {
          std::string s;
          for (auto a : c.algorithms) s += (s.empty() ? "" : ",") + std::string(to_string(a));
          return s;
        }}},
      {"topology.kind",
       {[](C& c, S v) {
          if (v == "poisson")
            c.topology.kind = TopologyKind::Poisson;
          else if (v == "grid-torus")
            c.topology.kind = TopologyKind::GridTorus;
          else if (v == "import")
            c.topology.kind = TopologyKind::Import;
          else
            bad_value("topology.kind", v, "poisson, grid-torus or import");
        },
        [](const C& c) -> std::string {
          switch (c.topology.kind) {
            case TopologyKind::Poisson: return "poisson";
            case TopologyKind::GridTorus: return "grid-torus";
            case TopologyKind::Import: return "import";
          }
          return "";
        }}},
      {"topology.intensity",
       {[](C& c, S v) { c.topology.intensity = to_positive("topology.intensity", v); },
        [](const C& c) { return format_double(c.topology.intensity); }}},
      {"topology.width",
       {[](C& c, S v) { c.topology.width = to_positive("topology.width", v); },
        [](const C& c) { return format_double(c.topology.width); }}},
      {"topology.height",
       {[](C& c, S v) { c.topology.height = to_positive("topology.height", v); },
        [](const C& c) { return format_double(c.topology.height); }}},
      {"topology.radius",
       {[](C& c, S v) { c.topology.radius = to_positive("topology.radius", v); },
        [](const C& c) { return format_double(c.topology.radius); }}},
      {"topology.torus",
       {[](C& c, S v) { c.topology.torus = to_bool("topology.torus", v); },
        [](const C& c) { return std::string(c.topology.torus ? "true" : "false"); }}},
      {"topology.rows",
       {[](C& c, S v) { c.topology.rows = to_count("topology.rows", v); },
        [](const C& c) { return std::to_string(c.topology.rows); }}},
      {"topology.cols",
       {[](C& c, S v) { c.topology.cols = to_count("topology.cols", v); },
        [](const C& c) { return std::to_string(c.topology.cols); }}},
      {"topology.spacing",
       {[](C& c, S v) {
          c.topology.spacing = v == "auto" ? 0.0 : to_positive("topology.spacing", v);
        },
        [](const C& c) {
          return c.topology.spacing == 0.0 ? std::string("auto")
                                           : format_double(c.topology.spacing);
        }}},
      {"topology.path",
       {[](C& c, S v) { c.topology.path = v; }, [](const C& c) { return c.topology.path; }}},
      {"topology.seed",
       {[](C& c, S v) {
          if (v == "auto")
            c.topology.seed.reset();
          else
            c.topology.seed = to_uint("topology.seed", v);
        },
        [](const C& c) {
          return c.topology.seed ? std::to_string(*c.topology.seed) : std::string("auto");
        }}},
      {"catalog.files",
       {[](C& c, S v) { c.catalog.files = to_count("catalog.files", v); },
        [](const C& c) { return std::to_string(c.catalog.files); }}},
      {"catalog.gamma",
       {[](C& c, S v) {
          c.catalog.gamma = to_double("catalog.gamma", v);
          if (c.catalog.gamma < 0.0) bad_value("catalog.gamma", v, "a number >= 0");
        },
        [](const C& c) { return format_double(c.catalog.gamma); }}},
      {"catalog.path",
       {[](C& c, S v) { c.catalog.path = v; }, [](const C& c) { return c.catalog.path; }}},
      {"catalog.sizes",
       {[](C& c, S v) {
          if (v == "none")
            c.catalog.sizes = SizeModel::None;
          else if (v == "lognormal")
            c.catalog.sizes = SizeModel::Lognormal;
          else
            bad_value("catalog.sizes", v, "none or lognormal");
        },
        [](const C& c) {
          return std::string(c.catalog.sizes == SizeModel::None ? "none" : "lognormal");
        }}},
      {"catalog.sigma2",
       {[](C& c, S v) {
          c.catalog.sigma2 = to_double("catalog.sigma2", v);
          if (c.catalog.sigma2 < 0.0) bad_value("catalog.sigma2", v, "a number >= 0");
        },
        [](const C& c) { return format_double(c.catalog.sigma2); }}},
      {"dynamics.stop",
       {[](C& c, S v) {
          if (v == "flags")
            c.params.stop = RandomStop::FlagVector;
          else if (v == "consecutive")
            c.params.stop = RandomStop::ConsecutiveDraws;
          else
            bad_value("dynamics.stop", v, "flags or consecutive");
        },
        [](const C& c) {
          return std::string(c.params.stop == RandomStop::FlagVector ? "flags" : "consecutive");
        }}},
      {"dynamics.step_cap",
       {[](C& c, S v) { c.params.step_cap = to_count("dynamics.step_cap", v); },
        [](const C& c) { return std::to_string(c.params.step_cap); }}},
      {"dynamics.epsilon",
       {[](C& c, S v) {
          c.params.epsilon = to_double("dynamics.epsilon", v);
          if (c.params.epsilon < 0.0) bad_value("dynamics.epsilon", v, "a number >= 0");
        },
        [](const C& c) { return format_double(c.params.epsilon); }}},
      {"ssa.depth",
       {[](C& c, S v) { c.params.ssa_depth = to_positive("ssa.depth", v); },
        [](const C& c) { return format_double(c.params.ssa_depth); }}},
      {"ssa.p_tilde",
       {[](C& c, S v) {
          c.params.ssa_p_tilde = to_double("ssa.p_tilde", v);
          if (!(c.params.ssa_p_tilde > 0.0 && c.params.ssa_p_tilde < 1.0))
            bad_value("ssa.p_tilde", v, "a number in (0,1)");
        },
        [](const C& c) { return format_double(c.params.ssa_p_tilde); }}},
      {"ssa.steps",
       {[](C& c, S v) { c.params.ssa_steps = to_count("ssa.steps", v); },
        [](const C& c) { return std::to_string(c.params.ssa_steps); }}},
      {"dsa.tau0",
       {[](C& c, S v) { c.params.dsa_tau0 = to_positive("dsa.tau0", v); },
        [](const C& c) { return format_double(c.params.dsa_tau0); }}},
      {"dsa.tau_ref",
       {[](C& c, S v) { c.params.dsa_tau_ref = to_positive("dsa.tau_ref", v); },
        [](const C& c) { return format_double(c.params.dsa_tau_ref); }}},
      {"dsa.ref_step",
       {[](C& c, S v) { c.params.dsa_ref_step = to_count("dsa.ref_step", v); },
        [](const C& c) { return std::to_string(c.params.dsa_ref_step); }}},
      {"lru.requests",
       {[](C& c, S v) { c.params.lru_requests = to_count("lru.requests", v); },
        [](const C& c) { return std::to_string(c.params.lru_requests); }}},
      {"lru.warmup",
       {[](C& c, S v) {
          c.params.lru_warmup = to_double("lru.warmup", v);
          if (!(c.params.lru_warmup >= 0.0 && c.params.lru_warmup < 1.0))
            bad_value("lru.warmup", v, "a number in [0,1)");
        },
        [](const C& c) { return format_double(c.params.lru_warmup); }}},
      {"probabilistic.intensity",
       {[](C& c, S v) {
          if (v == "auto")
            c.params.probabilistic_intensity.reset();
          else
            c.params.probabilistic_intensity = to_positive("probabilistic.intensity", v);
        },
        [](const C& c) { return opt_double(c.params.probabilistic_intensity); }}},
  };
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& [name, field] : fields())
    if (name == key) return &field;
  return nullptr;
}

void validate(const ExperimentConfig& c) {
  require(!c.algorithms.empty(), ErrorCode::Config, "algorithm: at least one is required");
  if (c.topology.kind == TopologyKind::Import)
    require(!c.topology.path.empty(), ErrorCode::Config,
            "topology.path: required for topology.kind = import");
  if (c.catalog.path.empty())
    require(c.capacity <= c.catalog.files, ErrorCode::Config,
            "capacity: must not exceed catalog.files");
  require(c.params.dsa_tau_ref < c.params.dsa_tau0, ErrorCode::Config,
          "dsa.tau_ref: must be below dsa.tau0");
}

}  // namespace

void set_config_value(ExperimentConfig& config, const std::string& key,
                      const std::string& value) {
  const Field* field = find_field(key);
  require(field != nullptr, ErrorCode::Config, "unknown key '" + key + "'");
  field->set(config, value);
}

ExperimentConfig parse_config(std::istream& in, const std::string& base_dir) {
  ExperimentConfig config;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const auto view = detail::trim(std::string_view(line).substr(0, hash));
    if (view.empty()) continue;
    const auto eq = view.find('=');
    const std::string where = "line " + std::to_string(lineno) + ": ";
    require(eq != std::string_view::npos, ErrorCode::Config, where + "expected key = value");
    const std::string key(detail::trim(view.substr(0, eq)));
    const std::string value(detail::trim(view.substr(eq + 1)));
    if (key == "schema") {
      require(value == "1", ErrorCode::Config, where + "schema: only version 1 is supported");
      continue;
    }
    require(seen.insert(key).second, ErrorCode::Config, where + key + ": duplicate key");
    try {
      set_config_value(config, key, value);
    } catch (const Error& e) {
      fail(ErrorCode::Config, where + e.what());
    }
  }
  auto resolve = [&](std::string& path) {
    if (!path.empty() && !base_dir.empty() && fs::path(path).is_relative())
      path = (fs::path(base_dir) / path).lexically_normal().string();
  };
  resolve(config.topology.path);
  resolve(config.catalog.path);
  validate(config);
  return config;
}

ExperimentConfig read_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Config, "cannot open config file " + path);
  return parse_config(in, fs::path(path).parent_path().string());
}

std::string canonical_config(const ExperimentConfig& config) {
  std::string out = "schema = 1\n";
  for (const auto& [name, field] : fields()) {
    if (name == "output" || name == "threads") continue;  // do not affect results
    out += name + " = " + field.get(config) + "\n";
  }
  return out;
}

std::uint64_t config_digest(const ExperimentConfig& config) {
  return fnv1a(canonical_config(config));
}

// ---------------------------------------------------------------------------
// Running

namespace {

std::uint64_t replica_seed(const ExperimentConfig& config, std::uint64_t replica) {
  return derive_seed(config.seed, replica);
}

Popularity build_popularity(const ExperimentConfig& config) {
  if (!config.catalog.path.empty()) return read_popularity_csv(config.catalog.path);
  return zipf_popularity(config.catalog.files, config.catalog.gamma);
}

Topology build_sites(const ExperimentConfig& config, std::uint64_t replica) {
  const TopologySpec& t = config.topology;
  switch (t.kind) {
    case TopologyKind::Poisson: {
      const std::uint64_t seed =
          t.seed ? *t.seed : derive_seed(replica_seed(config, replica), "topology");
      return generate_poisson(t.intensity, Geometry::plane(t.width, t.height), t.radius, seed);
    }
    case TopologyKind::GridTorus: {
      const double spacing = t.spacing > 0.0 ? t.spacing : t.radius * std::sqrt(2.0);
      return generate_grid_torus(t.rows, t.cols, spacing, t.radius);
    }
    case TopologyKind::Import: {
      const auto records = read_topology_csv(t.path);
      const Geometry g = t.torus ? Geometry::torus(t.width, t.height)
                                 : Geometry::plane(t.width, t.height);
      return load_topology(records, g);
    }
  }
  fail(ErrorCode::Config, "topology.kind: unsupported");
}

Topology build_topology_with(const ExperimentConfig& config, std::uint64_t replica,
                             unsigned threads) {
  Topology topology = build_sites(config, replica);
  std::uint64_t seed = derive_seed(replica_seed(config, replica), "cells");
  if (config.topology.seed) seed = derive_seed(*config.topology.seed, "cells");
  topology.set_cells(compute_cells(topology, config.cell_samples, seed, threads));
  return topology;
}

std::vector<SeriesPoint> thin(std::vector<SeriesPoint> series, std::uint64_t stride) {
  if (stride <= 1 || series.size() <= 2) return series;
  std::vector<SeriesPoint> out;
  for (std::size_t i = 0; i < series.size(); ++i)
    if (i % stride == 0 || i + 1 == series.size()) out.push_back(series[i]);
  return out;
}

std::vector<SeriesPoint> trace_series(const DynamicsTrace& trace) {
  std::vector<SeriesPoint> series;
  series.reserve(trace.steps.size() + 1);
  series.push_back({0, 1.0 - trace.initial_f});
  for (const TraceStep& s : trace.steps) series.push_back({s.index, 1.0 - s.f_after});
  return series;
}

// Evaluates a slot-model placement after converting each row to the sized model.
double sized_miss(const Placement& b, const CellTable& cells, const Popularity& pop,
                  const FileSizes& sizes) {
  Placement sized(b.caches(), b.files(), b.capacity(0), Placement::RowRule::AtMost);
  for (CacheIndex m = 0; m < b.caches(); ++m)
    sized.set_row(m, greedy_size_fill(b.row(m), sizes, static_cast<double>(b.capacity(m))));
  return evaluate_miss(sized, cells, pop);
}

struct ReplicaContext {
  const ExperimentConfig& config;
  const Topology& topology;
  const CellTable& cells;
  const Popularity& pop;
  const std::optional<FileSizes>& sizes;
  std::uint64_t seed;
};

ResultRecord run_algorithm(const ReplicaContext& ctx, AlgorithmKind kind) {
  const ExperimentConfig& config = ctx.config;
  const AlgorithmParams& p = config.params;
  const std::size_t n = ctx.topology.size();
  const std::size_t files = ctx.pop.size();
  const std::size_t k = config.capacity;
  require(k <= files, ErrorCode::Config, "capacity: must not exceed the catalog size");
  const std::uint64_t seed = derive_seed(ctx.seed, to_string(kind));

  ResultRecord rec;
  rec.algorithm = kind;
  rec.caches = n;
  std::optional<Placement> terminal;

  switch (kind) {
    case AlgorithmKind::Robr:
    case AlgorithmKind::Rrbr: {
      DynamicsOptions opts;
      opts.schedule.kind =
          kind == AlgorithmKind::Robr ? ScheduleKind::UniformRandom : ScheduleKind::RoundRobin;
      opts.schedule.seed = seed;
      opts.schedule.stop = p.stop;
      opts.step_cap = p.step_cap;
      opts.epsilon = p.epsilon;
      DynamicsTrace trace = run_dynamics(Placement::top_k(n, files, k), ctx.cells, ctx.pop, opts);
      rec.series = trace_series(trace);
      rec.final_f = trace.final_f;
      rec.iterations = trace.steps.size();
      rec.termination = to_string(trace.reason);
      terminal = std::move(trace.terminal);
      break;
    }
    case AlgorithmKind::Ssa: {
      SsaConfig sc;
      sc.p_tilde = p.ssa_p_tilde;
      sc.cooling.depth = p.ssa_depth;
      sc.steps = p.ssa_steps;
      sc.seed = seed;
      SsaResult res = run_ssa(Placement::top_k(n, files, k), ctx.cells, ctx.pop, sc);
      rec.series = trace_series(res.trace);
      rec.final_f = res.best_f;
      rec.iterations = res.trace.steps.size();
      rec.termination = to_string(res.trace.reason);
      terminal = std::move(res.best);
      break;
    }
    case AlgorithmKind::Dsa: {
      DsaOptions opts;
      opts.tau = {p.dsa_tau0, p.dsa_tau_ref, p.dsa_ref_step};
      opts.seed = seed;
      opts.step_cap = p.step_cap;
      DsaResult res = run_dsa(ctx.cells, ctx.pop, k, opts);
      rec.series = trace_series(res.trace);
      rec.final_f = res.rounded_f;
      rec.iterations = res.trace.steps.size();
      rec.termination = to_string(res.trace.reason);
      terminal = std::move(res.trace.terminal);
      break;
    }
    case AlgorithmKind::MostPopular: {
      terminal = most_popular_placement(n, files, k);
      rec.final_f = evaluate_miss(*terminal, ctx.cells, ctx.pop);
      rec.series = {{0, 1.0 - rec.final_f}};
      rec.termination = "static";
      break;
    }
    case AlgorithmKind::Probabilistic: {
      double intensity = 0.0;
      if (p.probabilistic_intensity)
        intensity = *p.probabilistic_intensity;
      else if (config.topology.kind == TopologyKind::Poisson)
        intensity = config.topology.intensity;
      else
        intensity = static_cast<double>(n) / ctx.topology.geometry().area();
      const auto marginals =
          probabilistic_marginals(ctx.pop, intensity, config.topology.radius, k);
      // Expected miss over the independent per-cache draws: every row equals
      // the marginals in the multilinear objective.
      RelaxedPlacement expected(n, files, k);
      for (CacheIndex m = 0; m < n; ++m) expected.set_row(m, marginals);
      rec.final_f = evaluate_miss(expected, ctx.cells, ctx.pop);
      rec.series = {{0, 1.0 - rec.final_f}};
      rec.termination = "static";
      if (ctx.sizes) terminal = sample_probabilistic_placement(marginals, n, k, seed);
      break;
    }
    case AlgorithmKind::MultiLruOne: {
      LruOptions opts;
      opts.requests = p.lru_requests;
      opts.warmup_fraction = p.lru_warmup;
      opts.seed = seed;
      opts.series_stride = config.series_stride;
      const HitEstimate est = simulate_multi_lru_one(ctx.topology, ctx.pop, k, opts);
      rec.final_f = 1.0 - est.hit_ratio;
      rec.hit_stderr = est.std_error;
      for (const auto& pt : est.series) rec.series.push_back({pt.request, pt.cumulative_hit_ratio});
      rec.iterations = p.lru_requests;
      rec.termination = "requests";
      break;
    }
  }
  if (ctx.sizes && terminal) rec.final_f = sized_miss(*terminal, ctx.cells, ctx.pop, *ctx.sizes);
  rec.final_hit = 1.0 - rec.final_f;
  if (kind != AlgorithmKind::MultiLruOne) rec.series = thin(std::move(rec.series), config.series_stride);
  return rec;
}

}  // namespace

Topology build_topology(const ExperimentConfig& config, std::uint64_t replica) {
  const unsigned threads =
      config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  return build_topology_with(config, replica, threads);
}

std::vector<ResultRecord> run_experiment(const ExperimentConfig& config) {
  validate(config);
  const std::uint64_t digest = config_digest(config);
  const Popularity pop = build_popularity(config);
  require(config.capacity <= pop.size(), ErrorCode::Config,
          "capacity: must not exceed the catalog size");
  std::optional<FileSizes> sizes;
  if (config.catalog.sizes == SizeModel::Lognormal)
    sizes = lognormal_sizes(pop.size(), config.catalog.sigma2, derive_seed(config.seed, "sizes"));

  const unsigned hw = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers =
      static_cast<unsigned>(std::min<std::uint64_t>(hw, config.replicas));
  const unsigned inner = workers > 1 ? 1u : hw;

  std::vector<std::vector<ResultRecord>> per_replica(config.replicas);
  std::vector<std::exception_ptr> errors(config.replicas);
  std::atomic<std::uint64_t> next{0};
  auto work = [&] {
    for (;;) {
      const std::uint64_t r = next.fetch_add(1);
      if (r >= config.replicas) return;
      try {
        const Topology topology = build_topology_with(config, r, inner);
        const ReplicaContext ctx{config, topology, topology.cells(), pop, sizes,
                                 replica_seed(config, r)};
        for (AlgorithmKind kind : config.algorithms) {
          const auto start = std::chrono::steady_clock::now();
          ResultRecord rec = run_algorithm(ctx, kind);
          rec.wall_seconds = std::chrono::duration<double>(
                                 std::chrono::steady_clock::now() - start).count();
          rec.replica = r;
          rec.config_digest = digest;
          rec.topology_digest = topology.digest();
          per_replica[r].push_back(std::move(rec));
        }
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<ResultRecord> records;
  for (auto& batch : per_replica)
    for (auto& rec : batch) records.push_back(std::move(rec));
  return records;
}

// ---------------------------------------------------------------------------
// Output

namespace {

std::string record_file(const ResultRecord& rec) {
  std::ostringstream name;
  name << to_string(rec.algorithm) << "_r" << std::setw(3) << std::setfill('0') << rec.replica
       << ".csv";
  return name.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorCode::Io, "failed writing " + path.string());
}

}  // namespace

void write_summary_csv(const std::vector<ResultRecord>& records, std::ostream& out) {
  out << "# geocache summary v1: one row per (algorithm, replica); final values of the "
         "reported placement\n";
  out << "algorithm,replica,caches,final_f,final_hit,hit_stderr,iterations,termination,"
         "config_digest,topology_digest\n";
  for (const auto& r : records)
    out << to_string(r.algorithm) << ',' << r.replica << ',' << r.caches << ','
        << format_double(r.final_f) << ',' << format_double(r.final_hit) << ','
        << format_double(r.hit_stderr) << ',' << r.iterations << ',' << r.termination << ','
        << detail::hex64(r.config_digest) << ',' << detail::hex64(r.topology_digest) << '\n';
}

void emit_series(const std::vector<ResultRecord>& records, const std::string& dir) {
  require(!records.empty(), ErrorCode::InvalidArgument, "no records to emit");
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorCode::Io, "cannot create output directory " + dir);

  std::vector<AlgorithmKind> order;
  for (const auto& rec : records) {
    if (std::find(order.begin(), order.end(), rec.algorithm) == order.end())
      order.push_back(rec.algorithm);
    std::ostringstream out;
    out << "# geocache series v1; algorithm=" << to_string(rec.algorithm)
        << "; replica=" << rec.replica << "; config=" << detail::hex64(rec.config_digest)
        << "; topology=" << detail::hex64(rec.topology_digest)
        << "; iteration counts cache-update attempts (requests for multi-lru-one); hit = 1 - f\n";
    out << "iteration,hit,f\n";
    for (const auto& pt : rec.series)
      out << pt.iteration << ',' << format_double(pt.hit) << ',' << format_double(1.0 - pt.hit)
          << '\n';
    write_file(fs::path(dir) / record_file(rec), out.str());
  }

  for (AlgorithmKind kind : order) {
    std::vector<const ResultRecord*> group;
    for (const auto& rec : records)
      if (rec.algorithm == kind) group.push_back(&rec);
    std::set<std::uint64_t> grid;
    for (const auto* rec : group)
      for (const auto& pt : rec->series) grid.insert(pt.iteration);
    std::vector<std::size_t> cursor(group.size(), 0);
    std::ostringstream out;
    out << "# geocache mean series v1; algorithm=" << to_string(kind)
        << "; replicas=" << group.size()
        << "; a replica without a point at an iteration contributes its latest value "
           "(padded with its terminal value after it ends)\n";
    out << "iteration,mean_hit,active\n";
    for (std::uint64_t it : grid) {
      double sum = 0.0;
      std::size_t active = 0;
      for (std::size_t g = 0; g < group.size(); ++g) {
        const auto& series = group[g]->series;
        while (cursor[g] + 1 < series.size() && series[cursor[g] + 1].iteration <= it)
          ++cursor[g];
        sum += series[cursor[g]].hit;
        if (series.back().iteration >= it) ++active;
      }
      out << it << ',' << format_double(sum / static_cast<double>(group.size())) << ','
          << active << '\n';
    }
    write_file(fs::path(dir) / (std::string(to_string(kind)) + "_mean.csv"), out.str());
  }

  std::ostringstream summary;
  write_summary_csv(records, summary);
  write_file(fs::path(dir) / "summary.csv", summary.str());
}

std::vector<SummaryRow> parse_summary_csv(std::istream& in) {
  std::vector<SummaryRow> rows;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto view = detail::trim(line);
    if (view.empty() || view.front() == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    const auto cols = detail::split(view, ',');
    const std::string where = "line " + std::to_string(lineno) + ": ";
    require(cols.size() == 10, ErrorCode::Parse, where + "expected 10 columns");
    SummaryRow row;
    row.algorithm = std::string(cols[0]);
    const auto replica = detail::parse_uint(cols[1]);
    const auto caches = detail::parse_uint(cols[2]);
    const auto f = detail::parse_double(cols[3]);
    const auto hit = detail::parse_double(cols[4]);
    const auto se = detail::parse_double(cols[5]);
    const auto iters = detail::parse_uint(cols[6]);
    require(replica && caches && f && hit && se && iters, ErrorCode::Parse,
            where + "malformed summary row");
    row.replica = *replica;
    row.caches = *caches;
    row.final_f = *f;
    row.final_hit = *hit;
    row.hit_stderr = *se;
    row.iterations = *iters;
    row.termination = std::string(cols[7]);
    row.config_digest = std::string(cols[8]);
    row.topology_digest = std::string(cols[9]);
    rows.push_back(std::move(row));
  }
  require(header, ErrorCode::Parse, "summary file has no header");
  return rows;
}

std::vector<SummaryRow> read_summary_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path);
  return parse_summary_csv(in);
}

std::vector<RecordSet> group_by_algorithm(const std::vector<SummaryRow>& rows,
                                          const std::string& prefix) {
  std::vector<RecordSet> sets;
  for (const auto& row : rows) {
    auto it = std::find_if(sets.begin(), sets.end(), [&](const RecordSet& s) {
      return s.label == prefix + row.algorithm;
    });
    if (it == sets.end()) {
      sets.push_back({prefix + row.algorithm, {}});
      it = sets.end() - 1;
    }
    it->rows.push_back(row);
  }
  return sets;
}

std::string compare_report(const std::vector<RecordSet>& sets) {
  require(sets.size() >= 2, ErrorCode::InvalidArgument, "need at least two record sets");
  std::ostringstream out;
  std::set<std::pair<std::uint64_t, std::string>> reference;
  bool mismatch = false;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    std::set<std::pair<std::uint64_t, std::string>> topologies;
    for (const auto& row : sets[i].rows) topologies.insert({row.replica, row.topology_digest});
    if (i == 0)
      reference = topologies;
    else if (topologies != reference)
      mismatch = true;
  }
  if (mismatch) out << "# warning: record sets were produced on different topologies\n";
  out << "set,runs,mean_hit,stderr_hit,mean_iterations\n";
  for (const auto& set : sets) {
    require(!set.rows.empty(), ErrorCode::InvalidArgument, "record set " + set.label + " is empty");
    const double n = static_cast<double>(set.rows.size());
    double mean = 0.0, iters = 0.0;
    for (const auto& row : set.rows) {
      mean += row.final_hit;
      iters += static_cast<double>(row.iterations);
    }
    mean /= n;
    iters /= n;
    double se = set.rows.front().hit_stderr;
    if (set.rows.size() > 1) {
      double var = 0.0;
      for (const auto& row : set.rows) var += (row.final_hit - mean) * (row.final_hit - mean);
      se = std::sqrt(var / (n - 1.0) / n);
    }
    out << set.label << ',' << set.rows.size() << ',' << format_double(mean) << ','
        << format_double(se) << ',' << format_double(iters) << '\n';
  }
  return out.str();
}

}  // namespace geocache
