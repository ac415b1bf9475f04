#include "geocache/annealing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "geocache/error.hpp"

namespace geocache {

double CoolingSchedule::temperature(std::uint64_t t) const {
  require(t >= 1, ErrorCode::InvalidArgument, "annealing time starts at 1");
  require(depth > 0.0, ErrorCode::InvalidArgument, "cooling depth must be positive");
  return depth / std::log(static_cast<double>(t) + 1.0);
}

double acceptance_prob(double f_proposal, double f_current, std::uint64_t t,
                       const CoolingSchedule& cooling) {
  const double delta = std::max(f_proposal - f_current, 0.0);
  if (delta == 0.0) return 1.0;
  return std::exp(-delta / cooling.temperature(t));
}

Row random_k_subset(std::size_t files, std::size_t k, Rng& rng) {
  require(k >= 1, ErrorCode::Infeasible, "subset size must be at least one");
  require(k <= files, ErrorCode::Infeasible, "subset size exceeds catalog size");
  Row perm(files);
  std::iota(perm.begin(), perm.end(), FileIndex{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_index(rng, files - i);
    std::swap(perm[i], perm[j]);
  }
  perm.resize(k);
  std::sort(perm.begin(), perm.end());
  return perm;
}

Row random_k_subset(std::size_t files, std::size_t k, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return random_k_subset(files, k, rng);
}

SsaResult run_ssa(Placement b0, const CellTable& cells, const Popularity& pop,
                  const SsaConfig& config) {
  check_dimensions(b0, cells, pop);
  require(b0.is_feasible(), ErrorCode::Infeasible, "initial placement is infeasible");
  require(config.p_tilde > 0.0 && config.p_tilde < 1.0, ErrorCode::InvalidArgument,
          "best-response proposal probability must lie in (0,1)");
  require(config.cooling.depth > 0.0, ErrorCode::InvalidArgument,
          "cooling depth must be positive");

  const std::size_t n = b0.caches();
  const std::size_t files = b0.files();
  SsaResult result{{{}, std::move(b0), Termination::Horizon, 0.0, 0.0}, Placement(1, 1, 1), 0.0};
  Placement& b = result.trace.terminal;
  double f = evaluate_miss(b, cells, pop);
  result.trace.initial_f = f;
  result.best = b;
  result.best_f = f;
  result.trace.steps.reserve(config.steps);

  Rng rng = make_rng(config.seed);
  for (std::uint64_t t = 1; t <= config.steps; ++t) {
    const CacheIndex m = static_cast<CacheIndex>(uniform_index(rng, n));
    const double temperature = config.cooling.temperature(t);
    const double rho = uniform01(rng);
    const Row br = best_response(b, m, cells, pop);

    TraceStep rec;
    rec.index = t;
    rec.cache = m;
    rec.f_before = f;
    rec.temperature = temperature;

    Row proposal;
    const std::size_t k = b.capacity(m);
    if (rho < config.p_tilde || k == files) {
      proposal = br;
      rec.proposal = ProposalKind::BestResponse;
    } else {
      do {
        proposal = random_k_subset(files, k, rng);
      } while (proposal == br);
      rec.proposal = ProposalKind::Random;
    }

    // Change of f through the potential identity: only the swapped files of m matter.
    const Row& current = b.row(m);
    Row added, removed;
    std::set_difference(proposal.begin(), proposal.end(), current.begin(), current.end(),
                        std::back_inserter(added));
    std::set_difference(current.begin(), current.end(), proposal.begin(), proposal.end(),
                        std::back_inserter(removed));
    double delta = 0.0;
    if (!added.empty()) {
      const auto qa = exposure_at(b, m, cells, added);
      const auto qr = exposure_at(b, m, cells, removed);
      for (std::size_t i = 0; i < removed.size(); ++i) delta += pop[removed[i]] * qr[i];
      for (std::size_t i = 0; i < added.size(); ++i) delta -= pop[added[i]] * qa[i];
    }

    const double accept = acceptance_prob(f + delta, f, t, config.cooling);
    const double mu = uniform01(rng);
    rec.accepted = mu < accept;
    if (rec.accepted && !added.empty()) {
      b.set_row(m, std::move(proposal));
      f = std::max(0.0, f + delta);
      rec.changed = true;
      if (f < result.best_f) {
        result.best_f = f;
        result.best = b;
      }
    }
    rec.f_after = f;
    result.trace.steps.push_back(rec);
  }
  result.trace.final_f = evaluate_miss(b, cells, pop);
  result.best_f = evaluate_miss(result.best, cells, pop);
  return result;
}

double TauSchedule::at(std::uint64_t t) const {
  require(tau0 > 0.0 && tau_ref > 0.0 && tau_ref < tau0 && ref_step >= 1,
          ErrorCode::InvalidArgument, "tau schedule must decrease from a positive start");
  return tau0 * std::pow(tau_ref / tau0, static_cast<double>(t) / static_cast<double>(ref_step));
}

double tau_upper_bound(std::size_t files, std::size_t k) {
  const double ratio = static_cast<double>(k) / static_cast<double>(files);
  return std::min({ratio, 1.0 - ratio, 0.5});
}

std::vector<double> dsa_best_response(const RelaxedPlacement& b, CacheIndex m,
                                      const CellTable& cells, const Popularity& pop,
                                      double tau) {
  const std::size_t files = b.files();
  const std::size_t k = b.capacity();
  require(tau > 0.0 && tau < tau_upper_bound(files, k), ErrorCode::InvalidArgument,
          "tau must lie in (0, min(K/J, 1 - K/J, 1/2))");
  const auto q = exposure(b, m, cells);
  std::vector<double> score(files);
  for (FileIndex j = 0; j < files; ++j) score[j] = pop[j] * q[j];
  std::vector<FileIndex> order(files);
  std::iota(order.begin(), order.end(), FileIndex{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](FileIndex x, FileIndex y) { return score[x] > score[y]; });

  // n_top entries at 1 - tau, one pivot at delta, the rest at tau, summing to K.
  const double x = (static_cast<double>(k) - static_cast<double>(files) * tau) / (1.0 - 2.0 * tau);
  std::size_t top = static_cast<std::size_t>(std::floor(x));
  top = std::min(top, files - 1);
  const double delta = tau + (1.0 - 2.0 * tau) * (x - static_cast<double>(top));
  require(delta >= tau - 1e-12 && delta <= 1.0 - tau + 1e-12, ErrorCode::Internal,
          "relaxed pivot value left the box");

  std::vector<double> row(files, tau);
  for (std::size_t i = 0; i < top; ++i) row[order[i]] = 1.0 - tau;
  row[order[top]] = std::clamp(delta, tau, 1.0 - tau);
  return row;
}

DsaResult run_dsa(const CellTable& cells, const Popularity& pop, std::size_t capacity,
                  const DsaOptions& options) {
  const std::size_t n = cells.cache_count();
  require(n >= 1, ErrorCode::EmptyTopology, "cell table has no caches");
  RelaxedPlacement b(n, pop.size(), capacity);
  DsaResult result{{{}, Placement(n, pop.size(), capacity), Termination::StepCap, 0.0, 0.0},
                   b, 0.0};
  double f = evaluate_miss(b, cells, pop);
  result.trace.initial_f = f;

  Rng rng = make_rng(options.seed);
  std::vector<std::uint8_t> flags(n, 1);
  std::size_t raised = n;
  for (std::uint64_t t = 1; t <= options.step_cap; ++t) {
    const CacheIndex m = static_cast<CacheIndex>(uniform_index(rng, n));
    const double tau = options.tau.at(t - 1);
    const auto q = exposure(b, m, cells);
    const auto next = dsa_best_response(b, m, cells, pop, tau);
    double before = 0.0, after = 0.0;
    for (FileIndex j = 0; j < b.files(); ++j) {
      before += pop[j] * (1.0 - b.at(m, j)) * q[j];
      after += pop[j] * (1.0 - next[j]) * q[j];
    }
    const bool improved = std::abs(after - before) > kImprovementTolerance;

    TraceStep rec;
    rec.index = t;
    rec.cache = m;
    rec.f_before = f;
    rec.tau = tau;
    rec.changed = improved;
    b.set_row(m, next);
    f += after - before;
    rec.f_after = f;
    result.trace.steps.push_back(rec);

    if (flags[m]) {
      flags[m] = 0;
      --raised;
    }
    if (improved) {
      for (CacheIndex l : cells.neighbors(m))
        if (!flags[l]) {
          flags[l] = 1;
          ++raised;
        }
    }
    if (raised == 0) {
      result.trace.reason = Termination::FullRoundNoImprovement;
      break;
    }
  }
  result.relaxed = b;
  result.trace.terminal = b.round();
  result.trace.final_f = evaluate_miss(result.trace.terminal, cells, pop);
  result.rounded_f = result.trace.final_f;
  return result;
}

}  // namespace geocache
