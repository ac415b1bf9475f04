#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "geocache/baselines.hpp"
#include "geocache/error.hpp"
#include "oracles.hpp"

using namespace geocache;

namespace {

double coverage_objective(const Popularity& pop, const std::vector<double>& b, double c) {
  double v = 0.0;
  for (std::size_t j = 0; j < b.size(); ++j) v += pop[j] * (1.0 - std::exp(-b[j] * c));
  return v;
}

}  // namespace

TEST_CASE("most popular placement") {
  const Placement b = most_popular_placement(4, 10, 3);
  for (CacheIndex m = 0; m < 4; ++m) CHECK(b.row(m) == Row{0, 1, 2});
  Rng rng = make_rng(1);
  const CellTable cells = oracle::random_cells(4, rng);
  const Popularity pop = zipf_popularity(10, 1.0);
  CHECK(evaluate_miss(b, cells, pop) == doctest::Approx(tail_mass(pop, 3)).epsilon(1e-12));
}

TEST_CASE("probabilistic marginals: degenerate cases") {
  const auto u = probabilistic_marginals(zipf_popularity(8, 0.0), 1e-5, 500.0, 3);
  for (double v : u) CHECK(v == doctest::Approx(3.0 / 8.0).epsilon(1e-9));
  const auto full = probabilistic_marginals(zipf_popularity(4, 1.0), 1e-5, 500.0, 4);
  for (double v : full) CHECK(v == 1.0);
  CHECK_THROWS_AS(probabilistic_marginals(zipf_popularity(4, 1.0), 0.0, 500.0, 2), Error);
}

TEST_CASE("probabilistic marginals satisfy KKT and beat a grid search") {
  const Popularity pop({0.6, 0.3, 0.1});
  const double radius = 1.0;
  const double intensity = 1.0 / std::numbers::pi;  // mean coverage number one
  const double c = 1.0;
  const auto b = probabilistic_marginals(pop, intensity, radius, 1);
  REQUIRE(b.size() == 3);
  CHECK(std::abs(b[0] + b[1] + b[2] - 1.0) <= 1e-9);

  // Stationarity: marginal gains equal on interior entries, no larger on
  // entries clamped at zero, no smaller on entries clamped at one.
  double nu = -1.0;
  for (std::size_t j = 0; j < 3; ++j)
    if (b[j] > 0.0 && b[j] < 1.0) nu = pop[j] * c * std::exp(-c * b[j]);
  REQUIRE(nu > 0.0);
  for (std::size_t j = 0; j < 3; ++j) {
    const double g = pop[j] * c * std::exp(-c * b[j]);
    if (b[j] > 0.0 && b[j] < 1.0) CHECK(std::abs(g - nu) <= 1e-9);
    if (b[j] == 0.0) CHECK(g <= nu + 1e-9);
    if (b[j] == 1.0) CHECK(g >= nu - 1e-9);
  }

  const double value = coverage_objective(pop, b, c);
  const int steps = 4000;
  double best = 0.0;
  std::vector<double> arg;
  for (int i = 0; i <= steps; ++i)
    for (int k = 0; i + k <= steps; ++k) {
      const std::vector<double> x{static_cast<double>(i) / steps, static_cast<double>(k) / steps,
                                  static_cast<double>(steps - i - k) / steps};
      const double v = coverage_objective(pop, x, c);
      if (v > best) best = v, arg = x;
    }
  CHECK(best <= value + 1e-12);
  CHECK(value - best <= 1e-6);
  for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(arg[j] - b[j]) <= 2.0 / steps);
}

TEST_CASE("probabilistic marginals are monotone and sum to K") {
  for (double gamma : {0.5, 1.0, 1.5})
    for (std::size_t k : {1u, 3u, 10u}) {
      const Popularity pop = zipf_popularity(200, gamma);
      const auto b = probabilistic_marginals(pop, 1.8324e-5, 700.0, k);
      double sum = 0.0;
      for (std::size_t j = 0; j < b.size(); ++j) {
        CHECK(b[j] >= 0.0);
        CHECK(b[j] <= 1.0);
        if (j > 0) CHECK(b[j] <= b[j - 1]);
        sum += b[j];
      }
      CHECK(std::abs(sum - static_cast<double>(k)) <= 1e-9);
    }
}

TEST_CASE("systematic sampling matches the marginals") {
  const std::vector<double> b{0.9, 0.6, 0.3, 0.2};
  const std::size_t n = 100'000;
  const Placement p = sample_probabilistic_placement(b, n, 2, 4);
  std::vector<double> freq(4, 0.0);
  for (CacheIndex m = 0; m < n; ++m) {
    REQUIRE(p.row(m).size() == 2);
    for (FileIndex j : p.row(m)) freq[j] += 1.0;
  }
  for (std::size_t j = 0; j < 4; ++j) {
    const double f = freq[j] / n;
    CHECK(std::abs(f - b[j]) <= 3.0 * std::sqrt(b[j] * (1 - b[j]) / n));
  }

  const Placement top = sample_probabilistic_placement({1.0, 1.0, 0.0, 0.0}, 50, 2, 1);
  for (CacheIndex m = 0; m < 50; ++m) CHECK(top.row(m) == Row{0, 1});
  const Placement all = sample_probabilistic_placement({1.0, 1.0, 1.0}, 5, 3, 1);
  CHECK(all.row(4) == Row{0, 1, 2});
  CHECK_THROWS_AS(sample_probabilistic_placement({0.5, 0.4}, 3, 1, 1), Error);
}

TEST_CASE("user positions") {
  SUBCASE("two disjoint discs receive equal shares") {
    std::vector<SiteRecord> recs{{1, 2, 2, 1}, {2, 6, 2, 1}};
    const Topology t = load_topology(recs, Geometry::plane(8, 4));
    UserPositionSampler s(t, 3);
    std::vector<CacheIndex> cov;
    const int n = 40'000;
    int first = 0;
    for (int i = 0; i < n; ++i) {
      const Point p = s.next(cov);
      REQUIRE(cov.size() == 1);
      if (cov[0] == 0) {
        ++first;
        CHECK(std::hypot(p.x - 2, p.y - 2) <= 1.0);
      }
    }
    CHECK(std::abs(static_cast<double>(first) / n - 0.5) <= 3.0 * std::sqrt(0.25 / n));
  }
  SUBCASE("full coverage gives uniform marginals") {
    const Topology t = generate_grid_torus(1, 1, 1000.0, 800.0);
    UserPositionSampler s(t, 5);
    std::vector<CacheIndex> cov;
    std::vector<double> xs;
    const int n = 20'000;
    for (int i = 0; i < n; ++i) xs.push_back(s.next(cov).x / 1000.0);
    std::sort(xs.begin(), xs.end());
    double d = 0.0;
    for (int i = 0; i < n; ++i)
      d = std::max({d, std::abs(xs[i] - static_cast<double>(i) / n),
                    std::abs(xs[i] - static_cast<double>(i + 1) / n)});
    // Kolmogorov-Smirnov at the 1% level.
    CHECK(d * std::sqrt(static_cast<double>(n)) < 1.63);
  }
  SUBCASE("same seed, same stream") {
    const Topology t = generate_grid_torus(2, 2, 1000.0, 700.0);
    UserPositionSampler a(t, 9), b(t, 9);
    std::vector<CacheIndex> ca, cb;
    for (int i = 0; i < 100; ++i) {
      const Point p = a.next(ca), q = b.next(cb);
      CHECK(p.x == q.x);
      CHECK(ca == cb);
    }
  }
}

TEST_CASE("file sampler follows the popularity") {
  const Popularity pop({0.5, 0.25, 0.15, 0.1});
  FileSampler s(pop);
  Rng rng = make_rng(8);
  std::vector<int> counts(4, 0);
  const int n = 100'000;
  for (int i = 0; i < n; ++i) ++counts[s(rng)];
  double chi2 = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    const double expected = pop[j] * n;
    chi2 += (counts[j] - expected) * (counts[j] - expected) / expected;
  }
  // Chi-square with 3 degrees of freedom, 0.1% level.
  CHECK(chi2 < 16.27);
}

TEST_CASE("Multi-LRU-One on a single cache") {
  std::vector<SiteRecord> one{{1, 5, 5, 10}};
  const Topology t = load_topology(one, Geometry::plane(10, 10));
  LruOptions opts;
  opts.requests = 1000;
  opts.warmup_fraction = 0.0;
  opts.seed = 1;
  const HitEstimate single = simulate_multi_lru_one(t, Popularity({1.0}), 1, opts);
  CHECK(single.hits == 999);

  opts.requests = 20'000;
  opts.warmup_fraction = 0.5;
  const HitEstimate full = simulate_multi_lru_one(t, zipf_popularity(10, 1.0), 10, opts);
  CHECK(full.measured == 10'000);
  CHECK(full.hit_ratio == 1.0);

  // With K < J the cache behaves as a single LRU: hit ratio well below one.
  const HitEstimate partial = simulate_multi_lru_one(t, zipf_popularity(50, 1.0), 3, opts);
  CHECK(partial.hit_ratio > 0.0);
  CHECK(partial.hit_ratio < 1.0 - tail_mass(zipf_popularity(50, 1.0), 3) + 0.02);
  CHECK(partial.std_error > 0.0);
  REQUIRE(!partial.series.empty());
  CHECK(partial.series.back().request == 20'000);
  CHECK(partial.series.back().cumulative_hit_ratio == doctest::Approx(partial.hit_ratio));
  CHECK(partial.series.back().post_warmup);
  CHECK_FALSE(partial.series.front().post_warmup);

  const HitEstimate again = simulate_multi_lru_one(t, zipf_popularity(50, 1.0), 3, opts);
  CHECK(again.hits == partial.hits);
  std::ostringstream a, b;
  write_hit_series_csv(partial, a);
  write_hit_series_csv(again, b);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("request_index,cumulative_hit_ratio,post_warmup\n", 0) == 0);
}

TEST_CASE("static placement simulation agrees with the analytic hit probability") {
  Topology t = generate_poisson(8e-6, Geometry::plane(2000, 2000), 1000, 21);
  t.set_cells(compute_cells(t, 2'000'000, 22));
  const Popularity pop = zipf_popularity(100, 1.0);
  const Placement b = sample_probabilistic_placement(
      probabilistic_marginals(pop, 8e-6, 1000, 3), t.size(), 3, 23);
  const double analytic = 1.0 - evaluate_miss(b, t.cells(), pop);
  const std::uint64_t requests = 200'000;
  const HitEstimate est = simulate_static_placement(t, b, pop, requests, 24);
  const double se = std::sqrt(analytic * (1 - analytic) / requests);
  // Cell masses carry their own sampling noise; allow a small extra margin.
  CHECK(std::abs(est.hit_ratio - analytic) <= 3.0 * se + 2e-3);
}
