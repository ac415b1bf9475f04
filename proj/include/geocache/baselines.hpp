#pragma once

#include <cstdint>
#include <vector>

#include "geocache/catalog.hpp"
#include "geocache/placement.hpp"
#include "geocache/rng.hpp"
#include "geocache/topology.hpp"

namespace geocache {

/// Every cache stores files 0..K-1.
Placement most_popular_placement(std::size_t caches, std::size_t files, std::size_t capacity);

/// Per-file storage probabilities maximising sum_j a_j (1 - exp(-b_j c)),
/// c = intensity * pi * radius^2, subject to sum b_j = K and 0 <= b_j <= 1:
/// b_j = clamp(ln(a_j c / nu) / c, 0, 1) with nu found by bisection.
std::vector<double> probabilistic_marginals(const Popularity& pop, double intensity,
                                            double radius, std::size_t capacity);

/// Each cache independently draws exactly K files with the given marginals by
/// systematic sampling over the cumulative marginals.
Placement sample_probabilistic_placement(const std::vector<double>& marginals,
                                         std::size_t caches, std::size_t capacity,
                                         std::uint64_t seed);

/// Uniform points on the covered part of the window, by rejection.
class UserPositionSampler {
 public:
  UserPositionSampler(const Topology& topology, std::uint64_t seed);

  /// Next covered point; `covering` receives the caches covering it.
  Point next(std::vector<CacheIndex>& covering);

 private:
  const Topology& topology_;
  Rng rng_;
};

/// Draws file indices from a popularity vector by inverse CDF.
class FileSampler {
 public:
  explicit FileSampler(const Popularity& pop);
  FileIndex operator()(Rng& rng) const;

 private:
  std::vector<double> cdf_;
};

struct HitSeriesPoint {
  std::uint64_t request = 0;  // one-based
  double cumulative_hit_ratio = 0.0;
  bool post_warmup = false;
};

struct HitEstimate {
  double hit_ratio = 0.0;  // over the measured window
  double std_error = 0.0;  // batch means
  std::uint64_t measured = 0;
  std::uint64_t hits = 0;
  std::vector<HitSeriesPoint> series;
};

struct LruOptions {
  std::uint64_t requests = 1'000'000;
  double warmup_fraction = 0.5;
  std::uint64_t seed = 0;
  /// Series sampling stride; 0 picks about a thousand points.
  std::uint64_t series_stride = 0;
};

/// Multi-LRU-One: a request hits if any covering cache holds the file; on a
/// hit one uniformly chosen holder moves it to the front, on a miss one
/// uniformly chosen covering cache inserts it, evicting its LRU entry.
HitEstimate simulate_multi_lru_one(const Topology& topology, const Popularity& pop,
                                   std::size_t capacity, const LruOptions& options);

/// Request-driven hit ratio of a fixed placement (no warmup).
HitEstimate simulate_static_placement(const Topology& topology, const Placement& placement,
                                      const Popularity& pop, std::uint64_t requests,
                                      std::uint64_t seed);

/// CSV `request_index,cumulative_hit_ratio,post_warmup`.
void write_hit_series_csv(const HitEstimate& estimate, std::ostream& out);

}  // namespace geocache
