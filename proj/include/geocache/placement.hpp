#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "geocache/catalog.hpp"
#include "geocache/topology.hpp"

namespace geocache {

using Row = std::vector<FileIndex>;  // sorted file indices stored by one cache

/// Binary N x J placement held as sorted rows plus a dense membership mask.
///
/// With RowRule::Exact (the game's model) every row must hold exactly its
/// capacity. RowRule::AtMost is only produced by size-aware filling, where a
/// row may stay below capacity.
class Placement {
 public:
  enum class RowRule { Exact, AtMost };

  /// Starts with empty rows; Exact placements become feasible once every
  /// row has been set.
  Placement(std::size_t caches, std::size_t files, std::vector<std::size_t> capacities,
            RowRule rule = RowRule::Exact);
  Placement(std::size_t caches, std::size_t files, std::size_t capacity,
            RowRule rule = RowRule::Exact);

  /// Every cache stores files 0..K-1.
  static Placement top_k(std::size_t caches, std::size_t files, std::size_t capacity);

  std::size_t caches() const { return rows_.size(); }
  std::size_t files() const { return files_; }
  std::size_t capacity(CacheIndex m) const { return capacities_[m]; }
  RowRule rule() const { return rule_; }

  const Row& row(CacheIndex m) const { return rows_[m]; }
  bool stores(CacheIndex m, FileIndex j) const {
    return mask_[static_cast<std::size_t>(m) * files_ + j] != 0;
  }
  /// Largest file index stored by m plus one (0 for an empty row).
  FileIndex row_end(CacheIndex m) const { return rows_[m].empty() ? 0 : rows_[m].back() + 1; }

  /// Replaces row m. `row` need not be sorted; duplicates and out-of-range
  /// files are rejected, as is a size that violates the row rule.
  void set_row(CacheIndex m, Row row);

  bool is_feasible() const;

  friend bool operator==(const Placement& a, const Placement& b) {
    return a.files_ == b.files_ && a.rows_ == b.rows_;
  }

 private:
  std::size_t files_;
  std::vector<std::size_t> capacities_;
  RowRule rule_;
  std::vector<Row> rows_;
  std::vector<std::uint8_t> mask_;
};

/// Box-relaxed placement for deterministic annealing: dense N x J entries.
/// Rows start at zero (the initialisation of the relaxed dynamics).
class RelaxedPlacement {
 public:
  RelaxedPlacement(std::size_t caches, std::size_t files, std::size_t capacity);

  std::size_t caches() const { return caches_; }
  std::size_t files() const { return files_; }
  std::size_t capacity() const { return capacity_; }

  std::span<const double> row(CacheIndex m) const {
    return {values_.data() + static_cast<std::size_t>(m) * files_, files_};
  }
  double at(CacheIndex m, FileIndex j) const {
    return values_[static_cast<std::size_t>(m) * files_ + j];
  }
  void set_row(CacheIndex m, std::span<const double> row);

  /// Nearest-integer rounding; throws Infeasible when a row does not round
  /// to exactly `capacity` ones.
  Placement round() const;

 private:
  std::size_t caches_;
  std::size_t files_;
  std::size_t capacity_;
  std::vector<double> values_;
};

/// q_m(j) for j in [0, limit). Entries at or past the largest index stored by
/// any neighbour of m all equal cells.mass_of(m).
struct ExposureVector {
  std::vector<double> values;
  double base = 0.0;  // sum of p over the cells containing m
};

/// f(B): probability that a covered user misses. Iterates stored cells only.
double evaluate_miss(const Placement& b, const CellTable& cells, const Popularity& pop);
/// Multilinear extension of f with fractional entries (dense; for relaxed rows).
double evaluate_miss(const RelaxedPlacement& b, const CellTable& cells,
                     const Popularity& pop);

ExposureVector exposure(const Placement& b, CacheIndex m, const CellTable& cells);
/// q_m(j) for j < limit only.
ExposureVector exposure_prefix(const Placement& b, CacheIndex m, const CellTable& cells,
                               std::size_t limit);
/// q_m(j) for the listed files, in the given order.
std::vector<double> exposure_at(const Placement& b, CacheIndex m, const CellTable& cells,
                                std::span<const FileIndex> files);
std::vector<double> exposure(const RelaxedPlacement& b, CacheIndex m,
                             const CellTable& cells);

/// f^(m), unnormalised: sum_j a_j (1 - b_j^(m)) q_m(j).
double local_miss(const Placement& b, CacheIndex m, const CellTable& cells,
                  const Popularity& pop);
double local_miss(const RelaxedPlacement& b, CacheIndex m, const CellTable& cells,
                  const Popularity& pop);

/// (change of f^(m), change of f) when row m of `b` is replaced by `row`.
std::pair<double, double> potential_delta_check(const Placement& b, CacheIndex m,
                                                const Row& row, const CellTable& cells,
                                                const Popularity& pop);

/// Walks `ranking` in order, keeping each file whose size still fits.
Row greedy_size_fill(std::span<const FileIndex> ranking, const FileSizes& sizes,
                     double capacity);

/// CSV `cacheId,fileId`, one stored pair per line, one-based ids.
void write_placement_csv(const Placement& b, std::ostream& out);
Placement parse_placement_csv(std::istream& in, std::size_t caches, std::size_t files,
                              std::size_t capacity);

void check_dimensions(const Placement& b, const CellTable& cells, const Popularity& pop);

}  // namespace geocache
