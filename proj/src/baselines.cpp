#include "geocache/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "geocache/error.hpp"
#include "text_util.hpp"

namespace geocache {

Placement most_popular_placement(std::size_t caches, std::size_t files, std::size_t capacity) {
  return Placement::top_k(caches, files, capacity);
}

std::vector<double> probabilistic_marginals(const Popularity& pop, double intensity,
                                            double radius, std::size_t capacity) {
  const double c = intensity * std::numbers::pi * radius * radius;
  require(c > 0.0 && std::isfinite(c), ErrorCode::InvalidArgument,
          "mean coverage number must be positive");
  require(capacity >= 1, ErrorCode::Infeasible, "capacity must be at least one slot");
  const std::size_t files = pop.size();
  if (capacity >= files) return std::vector<double>(files, 1.0);

  auto marginals = [&](double log_nu) {
    std::vector<double> b(files);
    for (std::size_t j = 0; j < files; ++j) {
      const double a = pop[j];
      b[j] = a > 0.0 ? std::clamp((std::log(a * c) - log_nu) / c, 0.0, 1.0) : 0.0;
    }
    return b;
  };
  auto total = [](const std::vector<double>& b) {
    double s = 0.0;
    for (auto it = b.rbegin(); it != b.rend(); ++it) s += *it;
    return s;
  };

  // The sum is non-increasing in nu: all ones below lo, all zeros above hi.
  double smallest = pop[0];
  for (std::size_t j = 0; j < files; ++j)
    if (pop[j] > 0.0) smallest = pop[j];
  double lo = std::log(smallest * c) - c - 1.0;
  double hi = std::log(pop[0] * c) + 1.0;
  const double k = static_cast<double>(capacity);
  std::vector<double> b = marginals(0.5 * (lo + hi));
  for (int iter = 0; iter < 400; ++iter) {
    const double mid = 0.5 * (lo + hi);
    b = marginals(mid);
    const double s = total(b);
    if (std::abs(s - k) <= 1e-10) break;
    if (s > k)
      lo = mid;
    else
      hi = mid;
  }
  require(std::abs(total(b) - k) <= 1e-9, ErrorCode::Internal,
          "probabilistic marginals did not reach the capacity");
  return b;
}

Placement sample_probabilistic_placement(const std::vector<double>& marginals,
                                         std::size_t caches, std::size_t capacity,
                                         std::uint64_t seed) {
  require(!marginals.empty(), ErrorCode::InvalidArgument, "marginals are empty");
  double sum = 0.0;
  for (double v : marginals) {
    require(v >= 0.0 && v <= 1.0 + 1e-12, ErrorCode::InvalidArgument,
            "marginals must lie in [0,1]");
    sum += v;
  }
  const double k = static_cast<double>(capacity);
  require(std::abs(sum - k) <= 1e-9, ErrorCode::InvalidArgument,
          "marginals must sum to the capacity");

  // Cumulative boundaries rescaled so the last one is exactly K.
  std::vector<double> bound(marginals.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < marginals.size(); ++j) {
    acc += marginals[j];
    bound[j] = acc * (k / sum);
  }
  bound.back() = k;

  Placement b(caches, marginals.size(), capacity);
  Rng rng = make_rng(seed);
  for (CacheIndex m = 0; m < caches; ++m) {
    const double u = uniform01(rng);
    Row row;
    std::size_t j = 0;
    for (std::size_t i = 0; i < capacity; ++i) {
      const double point = u + static_cast<double>(i);
      while (bound[j] <= point) ++j;
      if (row.empty() || row.back() != j) row.push_back(static_cast<FileIndex>(j));
    }
    require(row.size() == capacity, ErrorCode::Internal,
            "systematic sampling selected a file twice");
    b.set_row(m, std::move(row));
  }
  return b;
}

UserPositionSampler::UserPositionSampler(const Topology& topology, std::uint64_t seed)
    : topology_(topology), rng_(make_rng(seed)) {
  require(!topology.has_cells() || topology.cells().covered_fraction() > 0.0,
          ErrorCode::UncoveredWindow, "objective undefined on uncovered window");
}

Point UserPositionSampler::next(std::vector<CacheIndex>& covering) {
  const Geometry& g = topology_.geometry();
  for (std::uint64_t attempt = 0; attempt < 100'000'000; ++attempt) {
    const Point p{uniform01(rng_) * g.width, uniform01(rng_) * g.height};
    topology_.covering(p, covering);
    if (!covering.empty()) return p;
  }
  fail(ErrorCode::UncoveredWindow, "objective undefined on uncovered window");
}

FileSampler::FileSampler(const Popularity& pop) : cdf_(pop.size()) {
  double acc = 0.0;
  for (std::size_t j = 0; j < pop.size(); ++j) {
    acc += pop[j];
    cdf_[j] = acc;
  }
}

FileIndex FileSampler::operator()(Rng& rng) const {
  const double u = uniform01(rng) * cdf_.back();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return static_cast<FileIndex>(std::min<std::size_t>(it - cdf_.begin(), cdf_.size() - 1));
}

namespace {

constexpr std::uint64_t kBatches = 20;

double batch_std_error(const std::vector<std::uint64_t>& batch_hits,
                       const std::vector<std::uint64_t>& batch_sizes) {
  std::vector<double> means;
  for (std::size_t i = 0; i < batch_hits.size(); ++i)
    if (batch_sizes[i] > 0)
      means.push_back(static_cast<double>(batch_hits[i]) / static_cast<double>(batch_sizes[i]));
  if (means.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : means) mean += v;
  mean /= static_cast<double>(means.size());
  double var = 0.0;
  for (double v : means) var += (v - mean) * (v - mean);
  var /= static_cast<double>(means.size() - 1);
  return std::sqrt(var / static_cast<double>(means.size()));
}

// Shared request loop: `serve` returns whether the request hit.
template <typename Serve>
HitEstimate run_requests(const Topology& topology, const Popularity& pop,
                         std::uint64_t requests, double warmup_fraction, std::uint64_t seed,
                         std::uint64_t stride, Serve serve) {
  require(requests >= 1, ErrorCode::InvalidArgument, "need at least one request");
  require(warmup_fraction >= 0.0 && warmup_fraction < 1.0, ErrorCode::InvalidArgument,
          "warmup fraction must lie in [0,1)");
  UserPositionSampler positions(topology, derive_seed(seed, "positions"));
  FileSampler files(pop);
  Rng file_rng = make_rng(derive_seed(seed, "files"));
  Rng policy_rng = make_rng(derive_seed(seed, "policy"));

  const auto warmup = static_cast<std::uint64_t>(std::floor(warmup_fraction * requests));
  const std::uint64_t measured = requests - warmup;
  if (stride == 0) stride = std::max<std::uint64_t>(1, requests / 1000);

  HitEstimate out;
  out.measured = measured;
  std::vector<std::uint64_t> batch_hits(kBatches, 0), batch_sizes(kBatches, 0);
  std::vector<CacheIndex> covering;
  std::uint64_t phase_hits = 0, phase_count = 0;
  for (std::uint64_t r = 1; r <= requests; ++r) {
    positions.next(covering);
    const FileIndex j = files(file_rng);
    const bool hit = serve(covering, j, policy_rng);
    const bool post = r > warmup;
    if (r == warmup + 1) phase_hits = phase_count = 0;
    ++phase_count;
    if (hit) ++phase_hits;
    if (post) {
      const std::uint64_t batch = (r - warmup - 1) * kBatches / measured;
      ++batch_sizes[batch];
      if (hit) {
        ++batch_hits[batch];
        ++out.hits;
      }
    }
    if (r % stride == 0 || r == requests)
      out.series.push_back({r, static_cast<double>(phase_hits) / static_cast<double>(phase_count), post});
  }
  out.hit_ratio = static_cast<double>(out.hits) / static_cast<double>(measured);
  out.std_error = batch_std_error(batch_hits, batch_sizes);
  return out;
}

}  // namespace

HitEstimate simulate_multi_lru_one(const Topology& topology, const Popularity& pop,
                                   std::size_t capacity, const LruOptions& options) {
  require(capacity >= 1, ErrorCode::Infeasible, "capacity must be at least one slot");
  // Most recent first; at most `capacity` entries.
  std::vector<std::vector<FileIndex>> lru(topology.size());
  std::vector<CacheIndex> holders;
  auto serve = [&](const std::vector<CacheIndex>& covering, FileIndex j, Rng& rng) {
    holders.clear();
    for (CacheIndex m : covering)
      if (std::find(lru[m].begin(), lru[m].end(), j) != lru[m].end()) holders.push_back(m);
    if (!holders.empty()) {
      auto& list = lru[holders[uniform_index(rng, holders.size())]];
      const auto it = std::find(list.begin(), list.end(), j);
      std::rotate(list.begin(), it, it + 1);
      return true;
    }
    auto& list = lru[covering[uniform_index(rng, covering.size())]];
    if (list.size() == capacity) list.pop_back();
    list.insert(list.begin(), j);
    return false;
  };
  return run_requests(topology, pop, options.requests, options.warmup_fraction, options.seed,
                      options.series_stride, serve);
}

HitEstimate simulate_static_placement(const Topology& topology, const Placement& placement,
                                      const Popularity& pop, std::uint64_t requests,
                                      std::uint64_t seed) {
  require(placement.caches() == topology.size() && placement.files() == pop.size(),
          ErrorCode::DimensionMismatch, "placement does not match topology and catalog");
  auto serve = [&](const std::vector<CacheIndex>& covering, FileIndex j, Rng&) {
    for (CacheIndex m : covering)
      if (placement.stores(m, j)) return true;
    return false;
  };
  return run_requests(topology, pop, requests, 0.0, seed, 0, serve);
}

void write_hit_series_csv(const HitEstimate& estimate, std::ostream& out) {
  out << "request_index,cumulative_hit_ratio,post_warmup\n";
  for (const auto& p : estimate.series)
    out << p.request << ',' << detail::format_double(p.cumulative_hit_ratio) << ','
        << (p.post_warmup ? 1 : 0) << '\n';
}

}  // namespace geocache
