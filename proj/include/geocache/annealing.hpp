#pragma once

#include <cstdint>
#include <vector>

#include "geocache/catalog.hpp"
#include "geocache/game.hpp"
#include "geocache/placement.hpp"
#include "geocache/rng.hpp"
#include "geocache/topology.hpp"

namespace geocache {

/// T_t = depth / log(t + 1), t >= 1.
struct CoolingSchedule {
  double depth = 1.0;

  double temperature(std::uint64_t t) const;
  /// Depth at or above one is the regime with a convergence guarantee.
  bool guaranteed() const { return depth >= 1.0; }
};

/// exp(-max(f_proposal - f_current, 0) / T_t).
double acceptance_prob(double f_proposal, double f_current, std::uint64_t t,
                       const CoolingSchedule& cooling);

/// Uniform K-subset of [0, J) by a partial Fisher-Yates shuffle; sorted.
Row random_k_subset(std::size_t files, std::size_t k, Rng& rng);
Row random_k_subset(std::size_t files, std::size_t k, std::uint64_t seed);

struct SsaConfig {
  double p_tilde = 0.9;
  CoolingSchedule cooling;
  std::uint64_t steps = 100'000;
  std::uint64_t seed = 0;
};

struct SsaResult {
  DynamicsTrace trace;  // terminal = incumbent at the last step
  Placement best;       // lowest-f placement visited
  double best_f = 0.0;
};

SsaResult run_ssa(Placement b0, const CellTable& cells, const Popularity& pop,
                  const SsaConfig& config);

/// tau(t) = tau0 * (tau_ref / tau0)^(t / ref_step) for t = 0, 1, ...;
/// iteration i (one-based) uses tau(i - 1).
struct TauSchedule {
  double tau0 = 1e-3;
  double tau_ref = 1e-6;
  std::uint64_t ref_step = 1500;

  double at(std::uint64_t t) const;
};

/// Largest admissible floor: the relaxed row can sum to K with a pivot only
/// for tau < min(K/J, 1 - K/J, 1/2).
double tau_upper_bound(std::size_t files, std::size_t k);

/// Three-level row: 1 - tau on the top-ranked files, one pivot value delta,
/// tau elsewhere. Sums to K.
std::vector<double> dsa_best_response(const RelaxedPlacement& b, CacheIndex m,
                                      const CellTable& cells, const Popularity& pop,
                                      double tau);

struct DsaOptions {
  TauSchedule tau;
  std::uint64_t seed = 0;
  std::uint64_t step_cap = 1'000'000;
};

struct DsaResult {
  DynamicsTrace trace;  // f columns hold the relaxed objective; terminal = rounded
  RelaxedPlacement relaxed;
  double rounded_f = 0.0;
};

DsaResult run_dsa(const CellTable& cells, const Popularity& pop, std::size_t capacity,
                  const DsaOptions& options = {});

}  // namespace geocache
