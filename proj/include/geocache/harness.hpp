#pragma once

// Declarative experiments: a flat `key = value` config, a replica runner and
// CSV emission. The config grammar is documented in README.md.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "geocache/game.hpp"
#include "geocache/topology.hpp"

namespace geocache {

enum class TopologyKind { Poisson, GridTorus, Import };
enum class AlgorithmKind { Robr, Rrbr, Ssa, Dsa, MostPopular, Probabilistic, MultiLruOne };
enum class SizeModel { None, Lognormal };

const char* to_string(AlgorithmKind kind);

struct TopologySpec {
  TopologyKind kind = TopologyKind::Poisson;
  double intensity = 8e-6;
  double width = 2000.0;
  double height = 2000.0;
  double radius = 1000.0;
  bool torus = false;  // import only
  std::size_t rows = 4;
  std::size_t cols = 4;
  double spacing = 0.0;  // grid; 0 means radius * sqrt(2)
  std::string path;
  /// Fixes the Poisson realisation independently of the replica seed.
  std::optional<std::uint64_t> seed;
};

struct CatalogSpec {
  std::size_t files = 100;
  double gamma = 1.0;
  std::string path;  // popularity CSV; overrides files/gamma
  SizeModel sizes = SizeModel::None;
  double sigma2 = 0.0;
};

struct AlgorithmParams {
  RandomStop stop = RandomStop::FlagVector;
  std::uint64_t step_cap = 1'000'000;
  double epsilon = 0.0;
  double ssa_depth = 1.0;
  double ssa_p_tilde = 0.9;
  std::uint64_t ssa_steps = 100'000;
  double dsa_tau0 = 1e-3;
  double dsa_tau_ref = 1e-6;
  std::uint64_t dsa_ref_step = 1500;
  std::uint64_t lru_requests = 1'000'000;
  double lru_warmup = 0.5;
  std::optional<double> probabilistic_intensity;  // default: sites per window area
};

struct ExperimentConfig {
  std::string name = "experiment";
  TopologySpec topology;
  CatalogSpec catalog;
  std::size_t capacity = 3;
  std::vector<AlgorithmKind> algorithms{AlgorithmKind::Robr};
  AlgorithmParams params;
  std::uint64_t cell_samples = 1'000'000;
  std::uint64_t replicas = 1;
  std::uint64_t seed = 1;
  std::string output = "out";
  unsigned threads = 0;  // 0: hardware concurrency
  /// Keep every n-th point of per-step series (the last point is always kept).
  std::uint64_t series_stride = 1;
};

/// Parses the config text; errors carry ErrorCode::Config and name the line
/// and key. Relative paths are resolved against `base_dir` when given.
ExperimentConfig parse_config(std::istream& in, const std::string& base_dir = "");
ExperimentConfig read_config(const std::string& path);
/// Applies one `key = value` assignment (used for command-line overrides).
void set_config_value(ExperimentConfig& config, const std::string& key,
                      const std::string& value);
/// Canonical text form: every key, fixed order. Parsing it gives the same config.
std::string canonical_config(const ExperimentConfig& config);
std::uint64_t config_digest(const ExperimentConfig& config);

struct SeriesPoint {
  std::uint64_t iteration = 0;
  double hit = 0.0;
};

struct ResultRecord {
  AlgorithmKind algorithm = AlgorithmKind::Robr;
  std::uint64_t replica = 0;
  std::uint64_t config_digest = 0;
  std::uint64_t topology_digest = 0;
  std::size_t caches = 0;
  std::vector<SeriesPoint> series;  // iteration = cache-update attempt
  double final_f = 0.0;
  double final_hit = 0.0;
  /// Monte Carlo standard error of final_hit (request simulation); 0 when exact.
  double hit_stderr = 0.0;
  std::uint64_t iterations = 0;
  std::string termination;
  double wall_seconds = 0.0;  // kept out of the CSV files
};

/// Builds the topology of one replica (cells included).
Topology build_topology(const ExperimentConfig& config, std::uint64_t replica);

/// Runs every algorithm on every replica. Replicas run in parallel; the
/// records come back sorted by (replica, algorithm order) and do not depend
/// on the thread count.
std::vector<ResultRecord> run_experiment(const ExperimentConfig& config);

/// Writes one CSV per record, one mean series per algorithm, and summary.csv
/// into `dir` (created if missing).
void emit_series(const std::vector<ResultRecord>& records, const std::string& dir);

struct SummaryRow {
  std::string algorithm;
  std::uint64_t replica = 0;
  std::size_t caches = 0;
  double final_f = 0.0;
  double final_hit = 0.0;
  double hit_stderr = 0.0;
  std::uint64_t iterations = 0;
  std::string termination;
  std::string config_digest;
  std::string topology_digest;
};

void write_summary_csv(const std::vector<ResultRecord>& records, std::ostream& out);
std::vector<SummaryRow> parse_summary_csv(std::istream& in);
std::vector<SummaryRow> read_summary_csv(const std::string& path);

struct RecordSet {
  std::string label;
  std::vector<SummaryRow> rows;
};

/// Groups rows by algorithm, labelling each group `<prefix><algorithm>`.
std::vector<RecordSet> group_by_algorithm(const std::vector<SummaryRow>& rows,
                                          const std::string& prefix = "");

/// CSV table `set,runs,mean_hit,stderr_hit,mean_iterations`; a `# warning`
/// line is added when the sets were run on different topologies.
std::string compare_report(const std::vector<RecordSet>& sets);

}  // namespace geocache
