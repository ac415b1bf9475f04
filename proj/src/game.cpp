#include "geocache/game.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "geocache/error.hpp"
#include "geocache/rng.hpp"
#include "text_util.hpp"

namespace geocache {

namespace {

std::size_t candidate_limit(const Placement& b, CacheIndex m, const CellTable& cells,
                            bool truncate) {
  if (!truncate) return b.files();
  std::size_t end = 0;
  for (CacheIndex l : cells.neighbors(m))
    if (l != m) end = std::max<std::size_t>(end, b.row_end(l));
  return std::min(b.files(), end + b.capacity(m));
}

// True when file x ranks strictly before file y.
struct RankOrder {
  const std::vector<double>& score;
  bool operator()(FileIndex x, FileIndex y) const {
    if (score[x] != score[y]) return score[x] > score[y];
    return x < y;
  }
};

std::uint64_t binomial_capped(std::uint64_t n, std::uint64_t k, std::uint64_t cap) {
  k = std::min(k, n - k);
  double c = 1.0;
  for (std::uint64_t i = 1; i <= k; ++i) {
    c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    if (c > static_cast<double>(cap)) return cap + 1;
  }
  return static_cast<std::uint64_t>(std::llround(c));
}

}  // namespace

BestResponse best_response_detail(const Placement& b, CacheIndex m, const CellTable& cells,
                                  const Popularity& pop, const BestResponseOptions& opts) {
  check_dimensions(b, cells, pop);
  require(m < b.caches(), ErrorCode::InvalidArgument, "unknown cache index");
  const std::size_t k = b.capacity(m);
  require(k <= b.files(), ErrorCode::Infeasible, "capacity exceeds catalog size");

  const std::size_t limit = candidate_limit(b, m, cells, opts.truncate);
  const ExposureVector q = exposure_prefix(b, m, cells, limit);

  std::vector<double> score(limit);
  for (std::size_t j = 0; j < limit; ++j) score[j] = pop[j] * q.values[j];
  auto score_of = [&](FileIndex j) { return j < limit ? score[j] : pop[j] * q.base; };

  std::vector<FileIndex> order(limit);
  std::iota(order.begin(), order.end(), FileIndex{0});
  RankOrder before{score};
  if (k < limit) std::nth_element(order.begin(), order.begin() + k - 1, order.end(), before);
  order.resize(k);
  std::sort(order.begin(), order.end());

  const Row& incumbent = b.row(m);
  double best_sum = 0.0;
  for (FileIndex j : order) best_sum += score[j];
  double inc_sum = 0.0;
  for (FileIndex j : incumbent) inc_sum += score_of(j);

  BestResponse out;
  if (incumbent.size() == k && (incumbent == order || best_sum - inc_sum <= opts.tolerance)) {
    out.row = incumbent;
  } else {
    out.row = std::move(order);
    out.changed = out.row != incumbent;
    out.improvement = std::max(0.0, best_sum - inc_sum);
    std::set_difference(out.row.begin(), out.row.end(), incumbent.begin(), incumbent.end(),
                        std::back_inserter(out.added));
    std::set_difference(incumbent.begin(), incumbent.end(), out.row.begin(), out.row.end(),
                        std::back_inserter(out.removed));
    for (FileIndex i : out.added)
      for (FileIndex j : out.removed) {
        const double gap = std::abs(score_of(i) - score_of(j));
        if (std::isnan(out.swap_gap) || gap < out.swap_gap) out.swap_gap = gap;
      }
  }
  if (opts.local_values) {
    out.local_before = local_miss(b, m, cells, pop);
    out.local_after = std::max(0.0, out.local_before - out.improvement);
  }
  return out;
}

Row best_response(const Placement& b, CacheIndex m, const CellTable& cells,
                  const Popularity& pop) {
  return best_response_detail(b, m, cells, pop).row;
}

double naive_local_miss(const Placement& b, CacheIndex m, const Row& row,
                        const CellTable& cells, const Popularity& pop) {
  check_dimensions(b, cells, pop);
  std::vector<std::uint8_t> own(b.files(), 0);
  for (FileIndex j : row) own[j] = 1;
  double f = 0.0;
  for (FileIndex j = 0; j < b.files(); ++j) {
    if (own[j]) continue;
    double q = 0.0;
    for (const Cell& cell : cells.cells()) {
      if (!std::binary_search(cell.members.begin(), cell.members.end(), m)) continue;
      double prod = 1.0;
      for (CacheIndex l : cell.members)
        if (l != m && b.stores(l, j)) prod = 0.0;
      q += cell.p * prod;
    }
    f += pop[j] * q;
  }
  return f;
}

Row brute_force_best_response(const Placement& b, CacheIndex m, const CellTable& cells,
                              const Popularity& pop, std::uint64_t cap) {
  check_dimensions(b, cells, pop);
  require(m < b.caches(), ErrorCode::InvalidArgument, "unknown cache index");
  const std::size_t n = b.files();
  const std::size_t k = b.capacity(m);
  require(k <= n, ErrorCode::Infeasible, "capacity exceeds catalog size");
  require(binomial_capped(n, k, cap) <= cap, ErrorCode::EnumerationCap,
          "C(J,K) exceeds the enumeration cap");

  Row current(k);
  std::iota(current.begin(), current.end(), FileIndex{0});
  Row best = current;
  double best_f = naive_local_miss(b, m, current, cells, pop);
  for (;;) {
    // Next combination in lexicographic order.
    std::size_t i = k;
    while (i > 0 && current[i - 1] == n - k + i - 1) --i;
    if (i == 0) break;
    ++current[i - 1];
    for (std::size_t t = i; t < k; ++t) current[t] = current[t - 1] + 1;
    const double f = naive_local_miss(b, m, current, cells, pop);
    if (f < best_f - 1e-15) {
      best_f = f;
      best = current;
    }
  }
  return best;
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::FullRoundNoImprovement: return "full-round-no-improvement";
    case Termination::StepCap: return "step-cap";
    case Termination::Horizon: return "horizon";
  }
  return "unknown";
}

DynamicsTrace run_dynamics(Placement b0, const CellTable& cells, const Popularity& pop,
                           const DynamicsOptions& opts) {
  check_dimensions(b0, cells, pop);
  require(b0.is_feasible(), ErrorCode::Infeasible, "initial placement is infeasible");
  require(opts.epsilon >= 0.0, ErrorCode::InvalidArgument, "epsilon must be non-negative");
  const std::size_t n = b0.caches();

  DynamicsTrace trace{{}, std::move(b0), Termination::StepCap, 0.0, 0.0};
  Placement& b = trace.terminal;
  trace.initial_f = evaluate_miss(b, cells, pop);
  double f = trace.initial_f;

  BestResponseOptions br_opts;
  br_opts.tolerance = std::max(kImprovementTolerance, opts.epsilon);

  const bool random = opts.schedule.kind == ScheduleKind::UniformRandom;
  Rng rng = make_rng(opts.schedule.seed);
  std::vector<std::uint8_t> flags(n, 1);
  std::size_t raised = n;
  std::size_t quiet = 0;  // consecutive non-improving draws
  bool round_changed = false;

  for (std::uint64_t step = 1; step <= opts.step_cap; ++step) {
    const CacheIndex m = random ? static_cast<CacheIndex>(uniform_index(rng, n))
                                : static_cast<CacheIndex>((step - 1) % n);
    BestResponse br = best_response_detail(b, m, cells, pop, br_opts);
    TraceStep rec;
    rec.index = step;
    rec.cache = m;
    rec.f_before = f;
    rec.changed = br.changed;
    if (br.changed) {
      b.set_row(m, std::move(br.row));
      f = std::max(0.0, f - br.improvement);
      rec.swap_gap = br.swap_gap;
    }
    rec.f_after = f;
    trace.steps.push_back(rec);

    bool done = false;
    if (!random) {
      // Rounds start at cache 0; stop at the end of a round without change.
      if (m == 0) round_changed = false;
      round_changed = round_changed || br.changed;
      done = m + 1 == n && !round_changed;
    } else if (opts.schedule.stop == RandomStop::ConsecutiveDraws) {
      quiet = br.changed ? 0 : quiet + 1;
      done = quiet >= n;
    } else {
      if (flags[m]) {
        flags[m] = 0;
        --raised;
      }
      if (br.changed) {
        for (CacheIndex l : cells.neighbors(m))
          if (!flags[l]) {
            flags[l] = 1;
            ++raised;
          }
      }
      done = raised == 0;
    }
    if (done) {
      trace.reason = Termination::FullRoundNoImprovement;
      break;
    }
  }
  trace.final_f = evaluate_miss(b, cells, pop);
  return trace;
}

bool is_nash(const Placement& b, const CellTable& cells, const Popularity& pop,
             NashMethod method, double tolerance, std::uint64_t cap) {
  check_dimensions(b, cells, pop);
  require(b.is_feasible(), ErrorCode::Infeasible, "placement is infeasible");
  for (CacheIndex m = 0; m < b.caches(); ++m) {
    if (method == NashMethod::Threshold) {
      BestResponseOptions opts;
      opts.tolerance = tolerance;
      if (best_response_detail(b, m, cells, pop, opts).changed) return false;
    } else {
      const Row best = brute_force_best_response(b, m, cells, pop, cap);
      const double current = naive_local_miss(b, m, b.row(m), cells, pop);
      const double optimum = naive_local_miss(b, m, best, cells, pop);
      if (current - optimum > tolerance) return false;
    }
  }
  return true;
}

double max_unilateral_improvement(const Placement& b, const CellTable& cells,
                                  const Popularity& pop) {
  BestResponseOptions opts;
  opts.tolerance = 0.0;
  double worst = 0.0;
  for (CacheIndex m = 0; m < b.caches(); ++m)
    worst = std::max(worst, best_response_detail(b, m, cells, pop, opts).improvement);
  return worst;
}

ImprovementBound min_improvement_bound(const Placement& b, const CellTable& cells,
                                       const Popularity& pop) {
  check_dimensions(b, cells, pop);
  ImprovementBound bound;
  for (CacheIndex m = 0; m < b.caches(); ++m) {
    const ExposureVector q = exposure(b, m, cells);
    std::vector<double> score(b.files());
    for (FileIndex j = 0; j < b.files(); ++j) score[j] = pop[j] * q.values[j];
    std::vector<FileIndex> order(b.files());
    std::iota(order.begin(), order.end(), FileIndex{0});
    std::sort(order.begin(), order.end(), RankOrder{score});
    for (std::size_t i = 1; i < order.size(); ++i) {
      const double gap = score[order[i - 1]] - score[order[i]];
      if (gap <= 1e-15) continue;
      if (bound.degenerate || gap < bound.epsilon_lower) {
        bound.degenerate = false;
        bound.epsilon_lower = gap;
        bound.cache = m;
        bound.file_i = order[i - 1];
        bound.file_j = order[i];
      }
    }
  }
  std::vector<double> masses;
  for (const Cell& cell : cells.cells()) masses.push_back(cell.p);
  std::sort(masses.begin(), masses.end());
  bool have_gap = false;
  for (std::size_t i = 1; i < masses.size(); ++i) {
    const double gap = masses[i] - masses[i - 1];
    if (gap > 1e-15 && (!have_gap || gap < bound.cell_mass_gap)) {
      bound.cell_mass_gap = gap;
      have_gap = true;
    }
  }
  if (!have_gap && !masses.empty()) bound.cell_mass_gap = masses.front();
  bound.min_popularity = pop[pop.size() - 1];
  bound.kappa_product = bound.cell_mass_gap * bound.min_popularity;
  return bound;
}

std::uint64_t epsilon_nash_stop(const DynamicsTrace& trace, double epsilon) {
  require(epsilon > 0.0, ErrorCode::InvalidArgument, "epsilon must be positive");
  std::uint64_t stop = 0;
  for (const TraceStep& s : trace.steps)
    if (s.f_before - s.f_after > epsilon) stop = s.index;
  return stop;
}

void write_trace_csv(const DynamicsTrace& trace, std::ostream& out, bool annealing) {
  using detail::format_double;
  out << "step,cache,f_before,f_after,changed";
  if (annealing) out << ",temperature,tau,accepted,proposal_kind";
  out << '\n';
  for (const TraceStep& s : trace.steps) {
    out << s.index << ',' << s.cache + 1 << ',' << format_double(s.f_before) << ','
        << format_double(s.f_after) << ',' << (s.changed ? 1 : 0);
    if (annealing) {
      out << ',' << (std::isnan(s.temperature) ? "" : format_double(s.temperature)) << ','
          << (std::isnan(s.tau) ? "" : format_double(s.tau)) << ',' << (s.accepted ? 1 : 0)
          << ',' << (s.proposal == ProposalKind::BestResponse ? "best-response" : "random");
    }
    out << '\n';
  }
}

}  // namespace geocache
