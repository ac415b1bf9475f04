#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

#include "geocache/catalog.hpp"
#include "geocache/placement.hpp"
#include "geocache/topology.hpp"

namespace geocache {

/// Absolute tolerance below which a change of f^(m) is not an improvement.
inline constexpr double kImprovementTolerance = 1e-12;

struct BestResponseOptions {
  /// Restrict candidates to the first S_m + K files, S_m being the largest
  /// index stored by any neighbour. The result is identical either way.
  bool truncate = true;
  /// Incumbent row is kept unless the best row beats it by more than this.
  double tolerance = kImprovementTolerance;
  /// Also fill local_before / local_after (one extra pass over m's cells).
  bool local_values = false;
};

struct BestResponse {
  Row row;
  bool changed = false;
  /// f^(m)(incumbent) - f^(m)(row) >= 0, from the ranking scores a_j q_m(j).
  double improvement = 0.0;
  Row added;
  Row removed;
  /// min over added i, removed j of |a_i q_m(i) - a_j q_m(j)|; NaN if unchanged.
  double swap_gap = std::numeric_limits<double>::quiet_NaN();
  double local_before = std::numeric_limits<double>::quiet_NaN();
  double local_after = std::numeric_limits<double>::quiet_NaN();
};

/// Threshold rule: the K files with the largest a_j q_m(j); ties go to the
/// lower index, and the incumbent row wins whenever it is already optimal.
BestResponse best_response_detail(const Placement& b, CacheIndex m, const CellTable& cells,
                                  const Popularity& pop, const BestResponseOptions& opts = {});

Row best_response(const Placement& b, CacheIndex m, const CellTable& cells,
                  const Popularity& pop);

inline constexpr std::uint64_t kDefaultEnumerationCap = 2'000'000;

/// Exact argmin of f^(m) over all C(J,K) rows, evaluated naively from the
/// cell table. Ties go to the lexicographically smallest row.
Row brute_force_best_response(const Placement& b, CacheIndex m, const CellTable& cells,
                              const Popularity& pop,
                              std::uint64_t cap = kDefaultEnumerationCap);

/// f^(m) of `row` for cache m, computed densely and without shortcuts.
double naive_local_miss(const Placement& b, CacheIndex m, const Row& row,
                        const CellTable& cells, const Popularity& pop);

enum class ScheduleKind { RoundRobin, UniformRandom };
/// Stopping rule for uniform-random scheduling. FlagVector re-raises the
/// flags of the updated cache's neighbours after every improvement and stops
/// when all flags are clear; ConsecutiveDraws stops after N draws in a row
/// without improvement.
enum class RandomStop { FlagVector, ConsecutiveDraws };

struct Schedule {
  ScheduleKind kind = ScheduleKind::RoundRobin;
  std::uint64_t seed = 0;
  RandomStop stop = RandomStop::FlagVector;
};

enum class Termination { FullRoundNoImprovement, StepCap, Horizon };
const char* to_string(Termination t);

enum class ProposalKind { BestResponse, Random };

struct TraceStep {
  std::uint64_t index = 0;  // one-based
  CacheIndex cache = 0;
  double f_before = 0.0;
  double f_after = 0.0;
  bool changed = false;
  double swap_gap = std::numeric_limits<double>::quiet_NaN();
  // Annealing columns; NaN / defaults for best-response runs.
  double temperature = std::numeric_limits<double>::quiet_NaN();
  double tau = std::numeric_limits<double>::quiet_NaN();
  bool accepted = true;
  ProposalKind proposal = ProposalKind::BestResponse;
};

struct DynamicsTrace {
  std::vector<TraceStep> steps;
  Placement terminal;
  Termination reason = Termination::FullRoundNoImprovement;
  double initial_f = 0.0;
  double final_f = 0.0;  // exact f of `terminal`
};

struct DynamicsOptions {
  Schedule schedule;
  std::uint64_t step_cap = 1'000'000;
  /// epsilon-Nash stopping: changes improving f^(m) by at most epsilon are
  /// not made. Zero means exact convergence (tolerance kImprovementTolerance).
  double epsilon = 0.0;
};

DynamicsTrace run_dynamics(Placement b0, const CellTable& cells, const Popularity& pop,
                           const DynamicsOptions& opts = {});

enum class NashMethod { Threshold, BruteForce };

bool is_nash(const Placement& b, const CellTable& cells, const Popularity& pop,
             NashMethod method, double tolerance = kImprovementTolerance,
             std::uint64_t cap = kDefaultEnumerationCap);

/// Largest single-cache improvement of f^(m) available at `b`.
double max_unilateral_improvement(const Placement& b, const CellTable& cells,
                                  const Popularity& pop);

struct ImprovementBound {
  /// min over m and files i, j with distinct scores of |a_i q_m(i) - a_j q_m(j)|.
  double epsilon_lower = 0.0;
  bool degenerate = true;  // no pair of distinct scores exists
  CacheIndex cache = 0;
  FileIndex file_i = 0;
  FileIndex file_j = 0;
  /// Smallest gap between distinct cell masses; on a lattice this is the
  /// kappa_3(d,r)/N quantity. Meaningful only for discrete placements.
  double cell_mass_gap = 0.0;
  double min_popularity = 0.0;  // a_J (the kappa_4 J^-kappa_2 side)
  double kappa_product = 0.0;   // cell_mass_gap * min_popularity
};

ImprovementBound min_improvement_bound(const Placement& b, const CellTable& cells,
                                       const Popularity& pop);

/// Index of the last step improving f by more than epsilon (0 if none):
/// stopping there yields an epsilon-Nash trajectory.
std::uint64_t epsilon_nash_stop(const DynamicsTrace& trace, double epsilon);

/// Trace CSV. With `annealing` the columns
/// temperature,tau,accepted,proposal_kind are appended.
void write_trace_csv(const DynamicsTrace& trace, std::ostream& out, bool annealing = false);

}  // namespace geocache
