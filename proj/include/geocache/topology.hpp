#pragma once

// Cache networks and the coverage-cell table.
//
// Indices are zero-based inside the library: cache m of an N-cache network is
// `CacheIndex` m in [0, N). The one-based ids of the CSV formats and of the C
// API are converted at the I/O boundary.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace geocache {

using CacheIndex = std::uint32_t;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct CacheSite {
  std::uint32_t id = 0;  // one-based, as read or generated
  Point position;
  double radius = 0.0;
};

enum class GeometryMode { PlaneWindow, Torus };

/// Plane mode: the window [0,width] x [0,height]; coverage outside it is
/// ignored. Torus mode: the same rectangle with opposite edges identified.
struct Geometry {
  GeometryMode mode = GeometryMode::PlaneWindow;
  double width = 0.0;
  double height = 0.0;

  static Geometry plane(double width, double height);
  static Geometry torus(double width, double height);

  double area() const { return width * height; }
  double squared_distance(Point a, Point b) const;
  double distance(Point a, Point b) const;
};

struct Cell {
  std::vector<CacheIndex> members;  // sorted, non-empty
  double p = 0.0;
  std::uint64_t hits = 0;  // sample count behind `p`; 0 for hand-built tables
};

class CellTable {
 public:
  CellTable() = default;

  /// Validates: non-empty sorted keys with ids < caches, no duplicate keys,
  /// p >= 0 and sum of p within 1e-9 of one.
  CellTable(std::size_t caches, std::vector<Cell> cells,
            double covered_fraction = 1.0, std::uint64_t samples = 0,
            std::uint64_t covered_samples = 0);

  std::size_t cache_count() const { return cache_count_; }
  const std::vector<Cell>& cells() const { return cells_; }
  double covered_fraction() const { return covered_fraction_; }
  std::uint64_t samples() const { return samples_; }
  std::uint64_t covered_samples() const { return covered_samples_; }

  /// Indices into cells() of the cells containing cache m.
  std::span<const std::size_t> cells_of(CacheIndex m) const;
  /// Sum of p over the cells containing m.
  double mass_of(CacheIndex m) const;
  /// Sum of p over all cells (one up to rounding).
  double total_mass() const { return total_mass_; }

  /// Caches sharing at least one cell with m; always contains m.
  const std::vector<CacheIndex>& neighbors(CacheIndex m) const;

  /// p of the cell keyed by exactly `members` (sorted); 0 when absent.
  double probability(std::span<const CacheIndex> members) const;

 private:
  std::size_t cache_count_ = 0;
  std::vector<Cell> cells_;
  double covered_fraction_ = 0.0;
  std::uint64_t samples_ = 0;
  std::uint64_t covered_samples_ = 0;
  double total_mass_ = 0.0;
  std::vector<std::vector<std::size_t>> cells_of_;
  std::vector<double> mass_of_;
  std::vector<std::vector<CacheIndex>> neighbors_;
};

class Topology {
 public:
  Topology(std::vector<CacheSite> sites, Geometry geometry);

  std::size_t size() const { return sites_.size(); }
  const std::vector<CacheSite>& sites() const { return sites_; }
  const Geometry& geometry() const { return geometry_; }

  bool has_cells() const { return cells_.has_value(); }
  const CellTable& cells() const;
  void set_cells(CellTable cells);

  /// Caches whose closed disc contains `point`, ascending.
  void covering(Point point, std::vector<CacheIndex>& out) const;

  /// Stable 64-bit digest of positions, radii and geometry.
  std::uint64_t digest() const;

 private:
  std::vector<CacheSite> sites_;
  Geometry geometry_;
  std::optional<CellTable> cells_;
};

Topology generate_poisson(double intensity, Geometry window, double radius,
                          std::uint64_t seed);

/// Sites at ((col + 1/2) spacing, (row + 1/2) spacing) on a torus of
/// (cols spacing) x (rows spacing); id = col * rows + row + 1.
Topology generate_grid_torus(std::size_t rows, std::size_t cols, double spacing,
                             double radius);

struct SiteRecord {
  std::uint32_t id = 0;
  double x = 0.0;
  double y = 0.0;
  double radius = 0.0;
};

Topology load_topology(std::span<const SiteRecord> records, Geometry geometry);

/// Parses the `id,x,y,radius` CSV. Errors name the offending line.
std::vector<SiteRecord> parse_topology_csv(std::istream& in);
std::vector<SiteRecord> read_topology_csv(const std::string& path);

/// Monte Carlo coverage cells. The window is split into equal-area strata with
/// one jittered sample each (leftover samples are drawn uniformly); strata are
/// processed in fixed seeded blocks so results do not depend on `threads`.
CellTable compute_cells(const Topology& topology, std::uint64_t samples,
                        std::uint64_t seed, unsigned threads = 1);

std::vector<CacheIndex> neighbors(const Topology& topology, CacheIndex m);

/// Debug export: `subset;p` with one-based ids joined by commas.
void write_cells_csv(const CellTable& cells, std::ostream& out);
void write_sites_csv(const Topology& topology, std::ostream& out);

}  // namespace geocache
