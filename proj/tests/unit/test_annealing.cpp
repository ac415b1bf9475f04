#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "geocache/annealing.hpp"
#include "geocache/error.hpp"
#include "oracles.hpp"

using namespace geocache;

TEST_CASE("acceptance probability") {
  const CoolingSchedule half{0.5};
  const auto t = static_cast<std::uint64_t>(std::round(std::exp(2.0) - 1.0));
  // Integer t closest to e^2 - 1; check the formula at the exact temperature too.
  CHECK(std::exp(-0.1 / 0.25) == doctest::Approx(0.6703).epsilon(1e-4));
  CHECK(acceptance_prob(0.2, 0.1, t, half) ==
        doctest::Approx(std::exp(-0.1 * std::log(t + 1.0) / 0.5)).epsilon(1e-12));

  const CoolingSchedule unit{1.0};
  CHECK(unit.temperature(1) == doctest::Approx(1.0 / std::numbers::ln2).epsilon(1e-12));
  CHECK(acceptance_prob(1.0, 0.0, 1, unit) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(acceptance_prob(0.1, 0.2, 5, unit) == 1.0);
  CHECK(acceptance_prob(0.2, 0.2, 5, unit) == 1.0);
  CHECK(unit.guaranteed());
  CHECK_FALSE(half.guaranteed());
  CHECK_THROWS_AS(unit.temperature(0), Error);

  double prev = 1.0;
  for (double delta = 0.01; delta < 1.0; delta += 0.05) {
    const double p = acceptance_prob(delta, 0.0, 10, unit);
    CHECK(p > 0.0);
    CHECK(p < prev);
    prev = p;
  }
  prev = 1.0;
  for (std::uint64_t step = 1; step < 10'000; step *= 3) {
    const double p = acceptance_prob(0.05, 0.0, step, unit);
    CHECK(p < prev);
    CHECK(unit.temperature(step + 1) < unit.temperature(step));
    prev = p;
  }
}

TEST_CASE("random K-subsets are uniform") {
  Rng rng = make_rng(99);
  const int draws = 60'000;
  std::map<Row, int> counts;
  for (int i = 0; i < draws; ++i) {
    const Row r = random_k_subset(4, 2, rng);
    REQUIRE(r.size() == 2);
    CHECK(r[0] < r[1]);
    ++counts[r];
  }
  REQUIRE(counts.size() == 6);
  const double p = 1.0 / 6.0;
  const double sigma = std::sqrt(p * (1 - p) / draws);
  for (const auto& [row, c] : counts) CHECK(std::abs(static_cast<double>(c) / draws - p) <= 3 * sigma);

  CHECK(random_k_subset(5, 5, 1) == Row{0, 1, 2, 3, 4});
  CHECK(random_k_subset(50, 7, 12) == random_k_subset(50, 7, 12));
  CHECK_THROWS_AS(random_k_subset(5, 0, 1), Error);
  CHECK_THROWS_AS(random_k_subset(5, 6, 1), Error);
}

TEST_CASE("three-level relaxed row") {
  const CellTable single(1, {{{0}, 1.0, 0}});
  const Popularity pop = zipf_popularity(10, 1.0);
  const RelaxedPlacement zero(1, 10, 3);
  const auto row = dsa_best_response(zero, 0, single, pop, 0.1);
  const double expected[] = {0.9, 0.9, 0.5, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1};
  double sum = 0.0;
  for (int j = 0; j < 10; ++j) {
    CHECK(row[j] == doctest::Approx(expected[j]).epsilon(1e-12));
    sum += row[j];
  }
  CHECK(std::abs(sum - 3.0) <= 1e-12);

  const auto sharp = dsa_best_response(zero, 0, single, pop, 1e-9);
  for (int j = 0; j < 10; ++j) CHECK(std::round(sharp[j]) == (j < 3 ? 1.0 : 0.0));

  CHECK(tau_upper_bound(10, 3) == doctest::Approx(0.3));
  CHECK(tau_upper_bound(10, 8) == doctest::Approx(0.2));
  CHECK(tau_upper_bound(4, 2) == doctest::Approx(0.5));
  CHECK_THROWS_AS(dsa_best_response(zero, 0, single, pop, 0.3), Error);
}

TEST_CASE("relaxed rows sum to K on random instances") {
  Rng rng = make_rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 5);
    const std::size_t j = 3 + uniform_index(rng, 30);
    const std::size_t k = 1 + uniform_index(rng, j - 1);
    const CellTable cells = oracle::random_cells(n, rng);
    const Popularity pop = oracle::random_popularity(j, rng);
    RelaxedPlacement b(n, j, k);
    const double tau = 0.99 * uniform01(rng) * tau_upper_bound(j, k) + 1e-9;
    for (int step = 0; step < 3 * static_cast<int>(n); ++step) {
      const CacheIndex m = static_cast<CacheIndex>(uniform_index(rng, n));
      const auto row = dsa_best_response(b, m, cells, pop, tau);
      double sum = 0.0;
      for (double v : row) {
        CHECK(v >= tau - 1e-12);
        CHECK(v <= 1.0 - tau + 1e-12);
        sum += v;
      }
      CHECK(std::abs(sum - static_cast<double>(k)) <= 1e-12);
      b.set_row(m, row);
    }
  }
}

TEST_CASE("frozen-floor sweeps never increase the relaxed objective") {
  Rng rng = make_rng(321);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 4), j = 12, k = 3;
    const CellTable cells = oracle::random_cells(n, rng);
    const Popularity pop = oracle::random_popularity(j, rng);
    RelaxedPlacement b(n, j, k);
    const double tau = 0.05;
    double prev = evaluate_miss(b, cells, pop);
    for (int sweep = 0; sweep < 4; ++sweep)
      for (CacheIndex m = 0; m < n; ++m) {
        b.set_row(m, dsa_best_response(b, m, cells, pop, tau));
        const double f = evaluate_miss(b, cells, pop);
        CHECK(f <= prev + 1e-12);
        prev = f;
      }
  }
}

TEST_CASE("tau schedule") {
  const TauSchedule s;
  CHECK(s.at(0) == doctest::Approx(1e-3));
  CHECK(s.at(1500) == doctest::Approx(1e-6).epsilon(1e-9));
  for (std::uint64_t t = 0; t < 3000; t += 100) CHECK(s.at(t + 1) < s.at(t));
}

TEST_CASE("DSA on small instances") {
  const Popularity pop = zipf_popularity(20, 1.0);
  const DsaResult one = run_dsa(CellTable(1, {{{0}, 1.0, 0}}), pop, 4);
  CHECK(one.trace.terminal.row(0) == Row{0, 1, 2, 3});
  CHECK(one.rounded_f == doctest::Approx(tail_mass(pop, 4)).epsilon(1e-12));

  const CellTable cells = oracle::two_cache_cells();
  const Popularity two = oracle::two_file_popularity();
  const double best = oracle::global_minimum(2, 2, 1, cells, two);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    DsaOptions opts;
    opts.seed = seed;
    // Two files, K = 1: the floor must stay below 1/2.
    const DsaResult r = run_dsa(cells, two, 1, opts);
    CHECK(std::abs(r.rounded_f - best) <= 1e-12);
    CHECK(r.trace.reason == Termination::FullRoundNoImprovement);
    for (const TraceStep& s : r.trace.steps) CHECK(s.tau > 0.0);
  }
}

TEST_CASE("SSA keeps rows feasible and reports its best placement") {
  Rng rng = make_rng(2);
  const CellTable cells = oracle::random_cells(4, rng);
  const Popularity pop = zipf_popularity(8, 1.0);
  SsaConfig cfg;
  cfg.steps = 3000;
  cfg.seed = 17;
  const SsaResult r = run_ssa(Placement::top_k(4, 8, 2), cells, pop, cfg);
  CHECK(r.trace.reason == Termination::Horizon);
  CHECK(r.trace.steps.size() == 3000);
  CHECK(r.trace.terminal.is_feasible());
  CHECK(r.best.is_feasible());
  CHECK(std::abs(r.best_f - oracle::miss(r.best, cells, pop)) <= 1e-12);
  CHECK(std::abs(r.trace.final_f - oracle::miss(r.trace.terminal, cells, pop)) <= 1e-12);
  double lowest = r.trace.initial_f;
  int random_props = 0;
  for (const TraceStep& s : r.trace.steps) {
    lowest = std::min(lowest, s.f_after);
    if (!s.accepted) CHECK(s.f_after == s.f_before);
    if (s.proposal == ProposalKind::Random) ++random_props;
    CHECK(s.temperature == doctest::Approx(cfg.cooling.temperature(s.index)));
  }
  CHECK(std::abs(lowest - r.best_f) <= 1e-12);
  CHECK(random_props > 150);
  CHECK(random_props < 450);

  const SsaResult again = run_ssa(Placement::top_k(4, 8, 2), cells, pop, cfg);
  CHECK(again.trace.terminal == r.trace.terminal);
  CHECK(again.best_f == r.best_f);
}

TEST_CASE("SSA finds the two-cache optimum") {
  const CellTable cells = oracle::two_cache_cells();
  const Popularity pop = oracle::two_file_popularity();
  const double best = oracle::global_minimum(2, 2, 1, cells, pop);
  SsaConfig cfg;
  cfg.steps = 20'000;
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    cfg.seed = seed;
    const SsaResult r = run_ssa(Placement::top_k(2, 2, 1), cells, pop, cfg);
    CHECK(std::abs(r.best_f - best) <= 1e-12);
    if (std::abs(r.trace.final_f - best) <= 1e-12) ++hits;
  }
  CHECK(hits >= 15);
}

TEST_CASE("neighbourhood of single-row changes is symmetric") {
  // Y differs from B in one row exactly when B differs from Y in one row.
  Rng rng = make_rng(66);
  for (int trial = 0; trial < 200; ++trial) {
    const Placement b = oracle::random_placement(3, 6, 2, rng);
    Placement y = b;
    const CacheIndex m = static_cast<CacheIndex>(uniform_index(rng, 3));
    y.set_row(m, random_k_subset(6, 2, rng));
    int diff_by = 0, diff_yb = 0;
    for (CacheIndex l = 0; l < 3; ++l) {
      diff_by += b.row(l) != y.row(l);
      diff_yb += y.row(l) != b.row(l);
    }
    CHECK(diff_by <= 1);
    CHECK(diff_by == diff_yb);
  }
}
