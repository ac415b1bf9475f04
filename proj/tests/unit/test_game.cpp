#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "geocache/error.hpp"
#include "geocache/game.hpp"
#include "oracles.hpp"

using namespace geocache;

namespace {

Placement from_rows(std::size_t files, std::size_t k, std::vector<Row> r) {
  Placement b(r.size(), files, k);
  for (CacheIndex m = 0; m < r.size(); ++m) b.set_row(m, r[m]);
  return b;
}

double oracle_local(const Placement& b, CacheIndex m, const Row& row, const CellTable& cells,
                    const Popularity& pop) {
  Placement x = b;
  x.set_row(m, row);
  return oracle::local_miss(oracle::dense(x), m, cells, pop);
}

double oracle_best_local(const Placement& b, CacheIndex m, const CellTable& cells,
                         const Popularity& pop) {
  double best = 2.0;
  for (const Row& row : oracle::all_rows(pop.size(), b.capacity(m)))
    best = std::min(best, oracle_local(b, m, row, cells, pop));
  return best;
}

}  // namespace

TEST_CASE("two-cache best response follows the scores") {
  const CellTable cells = oracle::two_cache_cells();
  const Popularity pop = oracle::two_file_popularity();
  const Placement b = from_rows(2, 1, {{0}, {0}});
  const BestResponse br = best_response_detail(b, 0, cells, pop);
  CHECK(br.row == Row{1});
  CHECK(br.changed);
  CHECK(br.added == Row{1});
  CHECK(br.removed == Row{0});
  // Scores 2/3 * 0.3 = 0.2 and 1/3 * 0.7.
  CHECK(br.improvement == doctest::Approx(0.7 / 3.0 - 0.2).epsilon(1e-12));
  CHECK(br.swap_gap == doctest::Approx(0.7 / 3.0 - 0.2).epsilon(1e-12));
  CHECK(brute_force_best_response(b, 0, cells, pop) == Row{1});
}

TEST_CASE("isolated caches store the most popular files") {
  const CellTable cells(3, {{{0}, 0.2, 0}, {{1}, 0.5, 0}, {{2}, 0.3, 0}});
  const Popularity pop = zipf_popularity(12, 0.8);
  Rng rng = make_rng(4);
  const Placement b = oracle::random_placement(3, 12, 4, rng);
  for (CacheIndex m = 0; m < 3; ++m) CHECK(best_response(b, m, cells, pop) == Row{0, 1, 2, 3});

  const Placement full = from_rows(3, 3, {{0, 1, 2}});
  CHECK(brute_force_best_response(full, 0, CellTable(1, {{{0}, 1.0, 0}}), Popularity({0.5, 0.3, 0.2})) ==
        Row{0, 1, 2});
}

TEST_CASE("threshold rule matches enumeration on small instances") {
  Rng rng = make_rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 3);
    const std::size_t j = 2 + uniform_index(rng, 7);
    const std::size_t k = 1 + uniform_index(rng, std::min<std::size_t>(3, j));
    const CellTable cells = oracle::random_cells(n, rng);
    const Popularity pop = oracle::random_popularity(j, rng);
    const Placement b = oracle::random_placement(n, j, k, rng);
    const CacheIndex m = static_cast<CacheIndex>(uniform_index(rng, n));
    const Row br = best_response(b, m, cells, pop);
    const Row bf = brute_force_best_response(b, m, cells, pop);
    const double opt = oracle_best_local(b, m, cells, pop);
    CHECK(std::abs(oracle_local(b, m, br, cells, pop) - opt) <= 1e-12);
    CHECK(std::abs(oracle_local(b, m, bf, cells, pop) - opt) <= 1e-12);
    CHECK(std::abs(naive_local_miss(b, m, br, cells, pop) - opt) <= 1e-12);
  }
}

TEST_CASE("enumeration cap") {
  const Placement b = Placement::top_k(1, 60, 10);
  CHECK_THROWS_AS(brute_force_best_response(b, 0, CellTable(1, {{{0}, 1.0, 0}}),
                                            zipf_popularity(60, 1.0), 1000),
                  Error);
}

TEST_CASE("truncated candidates give the full-catalog answer") {
  Rng rng = make_rng(77);
  const Popularity pop = zipf_popularity(10'000, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 5);
    const std::size_t k = 1 + uniform_index(rng, 5);
    const CellTable cells = oracle::random_cells(n, rng);
    Placement b(n, pop.size(), k);
    for (CacheIndex m = 0; m < n; ++m) {
      // Mostly popular files with the odd deep one, as dynamics produce.
      Row row;
      while (row.size() < k) {
        const FileIndex f = static_cast<FileIndex>(uniform01(rng) < 0.8 ? uniform_index(rng, 30)
                                                                          : uniform_index(rng, 10'000));
        if (std::find(row.begin(), row.end(), f) == row.end()) row.push_back(f);
      }
      b.set_row(m, row);
    }
    const CacheIndex m = static_cast<CacheIndex>(uniform_index(rng, n));
    BestResponseOptions full;
    full.truncate = false;
    full.local_values = true;
    BestResponseOptions cut;
    cut.local_values = true;
    const BestResponse a = best_response_detail(b, m, cells, pop, full);
    const BestResponse c = best_response_detail(b, m, cells, pop, cut);
    CHECK(std::abs(a.local_after - c.local_after) <= 1e-12);
    CHECK(a.row == c.row);
  }
}

TEST_CASE("argmax is invariant to scaling the scores") {
  Rng rng = make_rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3, j = 10, k = 3;
    const CellTable cells = oracle::random_cells(n, rng);
    // Uniform popularity produces exact ties.
    const Popularity pop = trial % 2 ? zipf_popularity(j, 0.0) : oracle::random_popularity(j, rng);
    const Placement b = oracle::random_placement(n, j, k, rng);
    std::vector<FileIndex> all(j);
    std::iota(all.begin(), all.end(), 0);
    const auto q = exposure_at(b, 0, cells, all);
    auto top = [&](double scale) {
      std::vector<FileIndex> order = all;
      std::stable_sort(order.begin(), order.end(), [&](FileIndex x, FileIndex y) {
        return scale * pop[x] * q[x] > scale * pop[y] * q[y];
      });
      Row r(order.begin(), order.begin() + k);
      std::sort(r.begin(), r.end());
      return r;
    };
    const Row base = top(1.0);
    for (double scale : {0.25, 8.0, 0x1p-20}) CHECK(top(scale) == base);
    // Ignoring the incumbent, best response picks the same set.
    Placement other = b;
    Row worst(all.end() - k, all.end());
    other.set_row(0, worst);
    const BestResponse br = best_response_detail(other, 0, cells, pop);
    CHECK(std::abs(naive_local_miss(b, 0, br.row, cells, pop) -
                   naive_local_miss(b, 0, base, cells, pop)) <= 1e-12);
  }
}

TEST_CASE("single-swap improvement equals the score gap") {
  Rng rng = make_rng(12);
  int swaps = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 4);
    const std::size_t j = 4 + uniform_index(rng, 10);
    const CellTable cells = oracle::random_cells(n, rng);
    const Popularity pop = oracle::random_popularity(j, rng);
    const Placement b = oracle::random_placement(n, j, 2, rng);
    BestResponseOptions opts;
    opts.local_values = true;
    const BestResponse br = best_response_detail(b, 0, cells, pop, opts);
    if (!br.changed) continue;
    CHECK(br.local_before - br.local_after == doctest::Approx(br.improvement).epsilon(1e-9));
    CHECK(br.improvement >= br.swap_gap - 1e-12);
    if (br.added.size() != 1) continue;
    ++swaps;
    const auto q = exposure_at(b, 0, cells, std::vector<FileIndex>{br.added[0], br.removed[0]});
    const double gap = pop[br.added[0]] * q[0] - pop[br.removed[0]] * q[1];
    CHECK(std::abs(br.improvement - gap) <= 1e-12);
    CHECK(std::abs(br.swap_gap - gap) <= 1e-12);
  }
  CHECK(swaps > 20);
}

TEST_CASE("dynamics on trivial topologies") {
  const Popularity pop = zipf_popularity(20, 1.0);
  for (ScheduleKind kind : {ScheduleKind::RoundRobin, ScheduleKind::UniformRandom}) {
    DynamicsOptions opts;
    opts.schedule.kind = kind;
    opts.schedule.seed = 3;
    Placement start(1, 20, 3);
    start.set_row(0, {17, 18, 19});
    const DynamicsTrace one = run_dynamics(start, CellTable(1, {{{0}, 1.0, 0}}), pop, opts);
    CHECK(one.terminal.row(0) == Row{0, 1, 2});
    CHECK(one.final_f == doctest::Approx(tail_mass(pop, 3)).epsilon(1e-12));
    CHECK(one.reason == Termination::FullRoundNoImprovement);

    Rng rng = make_rng(8);
    const CellTable disjoint(3, {{{0}, 0.2, 0}, {{1}, 0.3, 0}, {{2}, 0.5, 0}});
    const DynamicsTrace d =
        run_dynamics(oracle::random_placement(3, 20, 3, rng), disjoint, pop, opts);
    for (CacheIndex m = 0; m < 3; ++m) CHECK(d.terminal.row(m) == Row{0, 1, 2});
    CHECK(d.final_f == doctest::Approx(tail_mass(pop, 3)).epsilon(1e-12));
  }
}

TEST_CASE("two-cache dynamics reach the global optimum from every start") {
  const CellTable cells = oracle::two_cache_cells();
  const Popularity pop = oracle::two_file_popularity();
  const double best = oracle::global_minimum(2, 2, 1, cells, pop);
  // Distinct files: cache 0 misses file 1 on its own cell, cache 1 misses file 0 on its own.
  CHECK(best == doctest::Approx(0.3 / 3.0 + 0.3 * 2.0 / 3.0).epsilon(1e-12));
  for (const Row& r0 : oracle::all_rows(2, 1))
    for (const Row& r1 : oracle::all_rows(2, 1))
      for (ScheduleKind kind : {ScheduleKind::RoundRobin, ScheduleKind::UniformRandom}) {
        DynamicsOptions opts;
        opts.schedule.kind = kind;
        opts.schedule.seed = r0[0] * 2 + r1[0];
        const DynamicsTrace t = run_dynamics(from_rows(2, 1, {r0, r1}), cells, pop, opts);
        CHECK(std::abs(t.final_f - best) <= 1e-12);
        CHECK(t.terminal.row(0) != t.terminal.row(1));
        CHECK(is_nash(t.terminal, cells, pop, NashMethod::BruteForce));
      }
}

TEST_CASE("random dynamics: monotone traces and Nash terminals") {
  Rng rng = make_rng(909);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 4);
    const std::size_t j = 3 + uniform_index(rng, 6);
    const std::size_t k = 1 + uniform_index(rng, std::min<std::size_t>(3, j - 1));
    const CellTable cells = oracle::random_cells(n, rng);
    const Popularity pop = oracle::random_popularity(j, rng);
    DynamicsOptions opts;
    opts.schedule.kind = trial % 2 ? ScheduleKind::RoundRobin : ScheduleKind::UniformRandom;
    opts.schedule.stop = trial % 4 == 0 ? RandomStop::ConsecutiveDraws : RandomStop::FlagVector;
    opts.schedule.seed = static_cast<std::uint64_t>(trial);
    const DynamicsTrace t = run_dynamics(Placement::top_k(n, j, k), cells, pop, opts);
    REQUIRE(t.reason == Termination::FullRoundNoImprovement);
    for (const TraceStep& s : t.steps) {
      CHECK(s.f_after <= s.f_before + 1e-12);
      if (s.changed) CHECK(s.f_after < s.f_before);
    }
    CHECK(std::abs(t.final_f - oracle::miss(t.terminal, cells, pop)) <= 1e-12);
    INFO("trial " << trial);
    // A run of N quiet draws need not visit every cache, so only the
    // flag-vector and round-robin rules certify an equilibrium.
    if (opts.schedule.stop == RandomStop::ConsecutiveDraws) continue;
    CHECK(is_nash(t.terminal, cells, pop, NashMethod::BruteForce));
    CHECK(is_nash(t.terminal, cells, pop, NashMethod::Threshold));
    CHECK(max_unilateral_improvement(t.terminal, cells, pop) <= 1e-12);
  }
}

TEST_CASE("round robin stops after a full quiet round") {
  const CellTable cells = oracle::two_cache_cells();
  const Popularity pop = oracle::two_file_popularity();
  const DynamicsTrace t = run_dynamics(Placement::top_k(2, 2, 1), cells, pop);
  // Cache 0 switches to file 1 and cache 1 keeps file 0; the second round is quiet.
  REQUIRE(t.steps.size() == 4);
  CHECK(t.steps[0].cache == 0);
  CHECK(t.steps[0].changed);
  for (std::size_t i = 1; i < 4; ++i) CHECK_FALSE(t.steps[i].changed);
  CHECK(t.steps[3].cache == 1);

  DynamicsOptions capped;
  capped.step_cap = 1;
  CHECK(run_dynamics(Placement::top_k(2, 2, 1), cells, pop, capped).reason == Termination::StepCap);
}

TEST_CASE("nash check") {
  const Popularity pop = zipf_popularity(6, 1.0);
  const CellTable single(1, {{{0}, 1.0, 0}});
  const Placement worst = from_rows(6, 2, {{4, 5}});
  CHECK_FALSE(is_nash(worst, single, pop, NashMethod::Threshold));
  CHECK_FALSE(is_nash(worst, single, pop, NashMethod::BruteForce));
  CHECK(is_nash(Placement::top_k(1, 6, 2), single, pop, NashMethod::BruteForce));
  CHECK(max_unilateral_improvement(worst, single, pop) ==
        doctest::Approx(pop[0] + pop[1] - pop[4] - pop[5]).epsilon(1e-12));
}

TEST_CASE("improvement bound") {
  const Popularity pop({0.4, 0.35, 0.25});
  const CellTable single(1, {{{0}, 1.0, 0}});
  const ImprovementBound b = min_improvement_bound(Placement::top_k(1, 3, 1), single, pop);
  CHECK_FALSE(b.degenerate);
  CHECK(b.epsilon_lower == doctest::Approx(0.05).epsilon(1e-12));

  const CellTable halves(2, {{{0}, 0.5, 0}, {{1}, 0.5, 0}});
  const ImprovementBound u =
      min_improvement_bound(Placement::top_k(2, 4, 1), halves, zipf_popularity(4, 0.0));
  // Uniform popularity on disjoint equal cells: every score ties.
  CHECK(u.degenerate);

  Rng rng = make_rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 4), j = 6;
    const CellTable cells = oracle::random_cells(n, rng);
    const Popularity p = oracle::random_popularity(j, rng);
    DynamicsOptions opts;
    opts.schedule.kind = ScheduleKind::UniformRandom;
    opts.schedule.seed = static_cast<std::uint64_t>(trial);
    Placement b = Placement::top_k(n, j, 2);
    const DynamicsTrace t = run_dynamics(b, cells, p, opts);
    for (const TraceStep& s : t.steps)
      if (s.changed) CHECK(s.f_before - s.f_after >= s.swap_gap - 1e-12);
  }
}

TEST_CASE("epsilon stopping") {
  const CellTable cells = oracle::two_cache_cells();
  const Popularity pop = zipf_popularity(3, 1.0);
  Placement start(2, 3, 1);
  start.set_row(0, {2});
  start.set_row(1, {2});
  const DynamicsTrace t = run_dynamics(start, cells, pop);
  std::vector<double> gains;
  for (const TraceStep& s : t.steps)
    if (s.changed) gains.push_back(s.f_before - s.f_after);
  REQUIRE(gains.size() >= 2);
  CHECK(epsilon_nash_stop(t, 10.0) == 0);
  std::uint64_t last = 0;
  for (const TraceStep& s : t.steps)
    if (s.changed) last = s.index;
  CHECK(epsilon_nash_stop(t, 1e-15) == last);

  const double lo = std::min(gains[0], gains[1]), hi = std::max(gains[0], gains[1]);
  const std::uint64_t cut = epsilon_nash_stop(t, 0.5 * (lo + hi));
  CHECK(cut >= 1);
  CHECK(cut < last);

  DynamicsOptions opts;
  opts.epsilon = 10.0;
  CHECK(run_dynamics(start, cells, pop, opts).terminal == start);
}

TEST_CASE("trace CSV") {
  const DynamicsTrace t =
      run_dynamics(Placement::top_k(2, 2, 1), oracle::two_cache_cells(), oracle::two_file_popularity());
  std::ostringstream out;
  write_trace_csv(t, out);
  CHECK(out.str().rfind("step,cache,f_before,f_after,changed\n1,1,", 0) == 0);
  std::ostringstream ann;
  write_trace_csv(t, ann, true);
  CHECK(ann.str().rfind("step,cache,f_before,f_after,changed,temperature,tau,accepted,proposal_kind\n", 0) == 0);
}
