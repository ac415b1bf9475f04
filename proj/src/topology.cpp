#include "geocache/topology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "geocache/error.hpp"
#include "geocache/rng.hpp"
#include "text_util.hpp"

namespace geocache {

Geometry Geometry::plane(double width, double height) {
  require(width > 0.0 && height > 0.0, ErrorCode::InvalidArgument,
          "window must be strictly positive in both dimensions");
  return Geometry{GeometryMode::PlaneWindow, width, height};
}

Geometry Geometry::torus(double width, double height) {
  require(width > 0.0 && height > 0.0, ErrorCode::InvalidArgument,
          "torus must be strictly positive in both dimensions");
  return Geometry{GeometryMode::Torus, width, height};
}

double Geometry::squared_distance(Point a, Point b) const {
  double dx = std::abs(a.x - b.x);
  double dy = std::abs(a.y - b.y);
  if (mode == GeometryMode::Torus) {
    dx = std::fmod(dx, width);
    dy = std::fmod(dy, height);
    dx = std::min(dx, width - dx);
    dy = std::min(dy, height - dy);
  }
  return dx * dx + dy * dy;
}

double Geometry::distance(Point a, Point b) const {
  return std::sqrt(squared_distance(a, b));
}

// ---------------------------------------------------------------------------
// CellTable

CellTable::CellTable(std::size_t caches, std::vector<Cell> cells,
                     double covered_fraction, std::uint64_t samples,
                     std::uint64_t covered_samples)
    : cache_count_(caches),
      cells_(std::move(cells)),
      covered_fraction_(covered_fraction),
      samples_(samples),
      covered_samples_(covered_samples),
      cells_of_(caches),
      mass_of_(caches, 0.0),
      neighbors_(caches) {
  require(caches > 0, ErrorCode::EmptyTopology, "cell table needs at least one cache");
  std::vector<std::vector<bool>> adjacent(caches, std::vector<bool>(caches, false));
  double total = 0.0;
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const Cell& cell = cells_[c];
    require(!cell.members.empty(), ErrorCode::InvalidArgument, "cell key must be non-empty");
    require(std::is_sorted(cell.members.begin(), cell.members.end()) &&
                std::adjacent_find(cell.members.begin(), cell.members.end()) ==
                    cell.members.end(),
            ErrorCode::InvalidArgument, "cell key must be sorted without repeats");
    require(cell.members.back() < caches, ErrorCode::InvalidArgument,
            "cell key references an unknown cache");
    require(cell.p >= 0.0 && std::isfinite(cell.p), ErrorCode::InvalidArgument,
            "cell probability must be finite and non-negative");
    total += cell.p;
    for (CacheIndex m : cell.members) {
      cells_of_[m].push_back(c);
      mass_of_[m] += cell.p;
      for (CacheIndex l : cell.members) adjacent[m][l] = true;
    }
  }
  require(std::abs(total - 1.0) <= 1e-9, ErrorCode::InvalidArgument,
          "cell probabilities must sum to one");
  total_mass_ = total;

  std::vector<const Cell*> sorted;
  for (const Cell& cell : cells_) sorted.push_back(&cell);
  std::sort(sorted.begin(), sorted.end(),
            [](const Cell* a, const Cell* b) { return a->members < b->members; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    require(sorted[i - 1]->members != sorted[i]->members, ErrorCode::InvalidArgument,
            "duplicate cell key");

  for (CacheIndex m = 0; m < caches; ++m) {
    adjacent[m][m] = true;
    for (CacheIndex l = 0; l < caches; ++l)
      if (adjacent[m][l]) neighbors_[m].push_back(l);
  }
}

std::span<const std::size_t> CellTable::cells_of(CacheIndex m) const {
  require(m < cache_count_, ErrorCode::InvalidArgument, "unknown cache index");
  return cells_of_[m];
}

double CellTable::mass_of(CacheIndex m) const {
  require(m < cache_count_, ErrorCode::InvalidArgument, "unknown cache index");
  return mass_of_[m];
}

const std::vector<CacheIndex>& CellTable::neighbors(CacheIndex m) const {
  require(m < cache_count_, ErrorCode::InvalidArgument, "unknown cache index");
  return neighbors_[m];
}

double CellTable::probability(std::span<const CacheIndex> members) const {
  for (const Cell& cell : cells_)
    if (std::equal(cell.members.begin(), cell.members.end(), members.begin(),
                   members.end()))
      return cell.p;
  return 0.0;
}

// ---------------------------------------------------------------------------
// Topology

Topology::Topology(std::vector<CacheSite> sites, Geometry geometry)
    : sites_(std::move(sites)), geometry_(geometry) {
  require(!sites_.empty(), ErrorCode::EmptyTopology,
          "topology has no caches; the objective is undefined");
  require(geometry_.width > 0.0 && geometry_.height > 0.0, ErrorCode::InvalidArgument,
          "window must be strictly positive in both dimensions");
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    require(sites_[i].radius > 0.0 && std::isfinite(sites_[i].radius),
            ErrorCode::InvalidArgument, "coverage radius must be positive");
    require(sites_[i].id == i + 1, ErrorCode::InvalidArgument,
            "cache ids must be contiguous from 1 in input order");
  }
}

const CellTable& Topology::cells() const {
  require(cells_.has_value(), ErrorCode::InvalidArgument,
          "topology has no cell table; run compute_cells first");
  return *cells_;
}

void Topology::set_cells(CellTable cells) {
  require(cells.cache_count() == sites_.size(), ErrorCode::DimensionMismatch,
          "cell table size does not match topology");
  cells_ = std::move(cells);
}

void Topology::covering(Point point, std::vector<CacheIndex>& out) const {
  out.clear();
  for (CacheIndex m = 0; m < sites_.size(); ++m) {
    const double r = sites_[m].radius;
    if (geometry_.squared_distance(point, sites_[m].position) <= r * r) out.push_back(m);
  }
}

std::uint64_t Topology::digest() const {
  std::string text = geometry_.mode == GeometryMode::Torus ? "torus;" : "plane;";
  text += detail::format_double(geometry_.width) + ";" +
          detail::format_double(geometry_.height) + ";";
  for (const CacheSite& s : sites_)
    text += detail::format_double(s.position.x) + "," +
            detail::format_double(s.position.y) + "," + detail::format_double(s.radius) +
            ";";
  return fnv1a(text);
}

Topology generate_poisson(double intensity, Geometry window, double radius,
                          std::uint64_t seed) {
  require(intensity > 0.0, ErrorCode::InvalidArgument, "intensity must be positive");
  require(window.area() > 0.0, ErrorCode::InvalidArgument, "window area must be positive");
  Rng rng = make_rng(seed);
  std::poisson_distribution<std::uint64_t> count(intensity * window.area());
  const std::uint64_t n = count(rng);
  require(n > 0, ErrorCode::EmptyTopology,
          "Poisson draw produced zero caches; the objective is undefined");
  std::vector<CacheSite> sites;
  sites.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const double x = uniform01(rng) * window.width;
    const double y = uniform01(rng) * window.height;
    sites.push_back({static_cast<std::uint32_t>(i + 1), {x, y}, radius});
  }
  return Topology(std::move(sites), window);
}

Topology generate_grid_torus(std::size_t rows, std::size_t cols, double spacing,
                             double radius) {
  require(rows >= 1 && cols >= 1, ErrorCode::InvalidArgument, "grid needs rows, cols >= 1");
  require(spacing > 0.0, ErrorCode::InvalidArgument, "grid spacing must be positive");
  std::vector<CacheSite> sites;
  for (std::size_t c = 0; c < cols; ++c)
    for (std::size_t r = 0; r < rows; ++r)
      sites.push_back({static_cast<std::uint32_t>(sites.size() + 1),
                       {(static_cast<double>(c) + 0.5) * spacing,
                        (static_cast<double>(r) + 0.5) * spacing},
                       radius});
  return Topology(std::move(sites),
                  Geometry::torus(static_cast<double>(cols) * spacing,
                                  static_cast<double>(rows) * spacing));
}

Topology load_topology(std::span<const SiteRecord> records, Geometry geometry) {
  require(!records.empty(), ErrorCode::EmptyTopology, "topology import has no records");
  std::unordered_set<std::uint32_t> seen;
  std::vector<CacheSite> sites;
  for (const SiteRecord& rec : records) {
    require(seen.insert(rec.id).second, ErrorCode::InvalidArgument,
            "duplicate cache id " + std::to_string(rec.id));
    require(rec.radius > 0.0, ErrorCode::InvalidArgument,
            "non-positive radius for cache id " + std::to_string(rec.id));
    sites.push_back({rec.id, {rec.x, rec.y}, rec.radius});
  }
  return Topology(std::move(sites), geometry);
}

std::vector<SiteRecord> parse_topology_csv(std::istream& in) {
  std::vector<SiteRecord> out;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto view = detail::trim(line);
    if (view.empty()) continue;
    if (!header) {
      const auto cols = detail::split(view, ',');
      require(cols.size() == 4 && cols[0] == "id" && cols[1] == "x" && cols[2] == "y" &&
                  cols[3] == "radius",
              ErrorCode::Parse,
              "line " + std::to_string(lineno) + ": expected header id,x,y,radius");
      header = true;
      continue;
    }
    const auto cols = detail::split(view, ',');
    const auto bad = [&](const std::string& why) {
      fail(ErrorCode::Parse, "line " + std::to_string(lineno) + ": " + why);
    };
    if (cols.size() != 4) bad("expected 4 fields");
    const auto id = detail::parse_uint(cols[0]);
    const auto x = detail::parse_double(cols[1]);
    const auto y = detail::parse_double(cols[2]);
    const auto r = detail::parse_double(cols[3]);
    if (!id || *id == 0 || *id > UINT32_MAX) bad("invalid id");
    if (!x || !y || !r) bad("invalid number");
    if (*r <= 0.0) bad("non-positive radius");
    out.push_back({static_cast<std::uint32_t>(*id), *x, *y, *r});
  }
  require(!out.empty(), ErrorCode::Parse, "topology CSV has no records");
  return out;
}

std::vector<SiteRecord> read_topology_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open topology file " + path);
  try {
    return parse_topology_csv(in);
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Monte Carlo cells

namespace {

using Key = std::vector<std::uint64_t>;

struct KeyHash {
  std::size_t operator()(const Key& k) const noexcept {
    std::uint64_t h = 0x84222325cbf29ce4ULL;
    for (std::uint64_t w : k) h = splitmix64(h ^ w);
    return static_cast<std::size_t>(h);
  }
};

using Counts = std::unordered_map<Key, std::uint64_t, KeyHash>;

struct BlockResult {
  Counts counts;
  std::uint64_t covered = 0;
};

constexpr std::size_t kMaxBlocks = 256;

}  // namespace

CellTable compute_cells(const Topology& topology, std::uint64_t samples,
                        std::uint64_t seed, unsigned threads) {
  require(samples >= 1, ErrorCode::InvalidArgument, "samples must be at least 1");
  const Geometry& g = topology.geometry();
  const auto& sites = topology.sites();
  const std::size_t n = sites.size();
  const std::size_t words = (n + 63) / 64;

  // nx * ny equal strata; the remainder is drawn uniformly over the window.
  std::uint64_t nx = static_cast<std::uint64_t>(
      std::llround(std::sqrt(static_cast<double>(samples) * g.width / g.height)));
  nx = std::clamp<std::uint64_t>(nx, 1, samples);
  const std::uint64_t ny = samples / nx;
  const std::uint64_t leftover = samples - nx * ny;
  const std::size_t strata_blocks = static_cast<std::size_t>(std::min<std::uint64_t>(ny, kMaxBlocks));
  const std::size_t blocks = strata_blocks + (leftover > 0 ? 1 : 0);

  const double sx = g.width / static_cast<double>(nx);
  const double sy = g.height / static_cast<double>(ny);

  auto run_block = [&](std::size_t b) {
    BlockResult out;
    Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    Key key(words);
    auto visit = [&](Point p) {
      std::fill(key.begin(), key.end(), 0);
      bool any = false;
      for (std::size_t m = 0; m < n; ++m) {
        const double r = sites[m].radius;
        if (g.squared_distance(p, sites[m].position) <= r * r) {
          key[m >> 6] |= std::uint64_t{1} << (m & 63);
          any = true;
        }
      }
      if (!any) return;
      ++out.covered;
      auto it = out.counts.find(key);
      if (it == out.counts.end())
        out.counts.emplace(key, 1);
      else
        ++it->second;
    };
    if (b < strata_blocks) {
      const std::uint64_t row_begin = ny * b / strata_blocks;
      const std::uint64_t row_end = ny * (b + 1) / strata_blocks;
      for (std::uint64_t iy = row_begin; iy < row_end; ++iy)
        for (std::uint64_t ix = 0; ix < nx; ++ix) {
          const double x = (static_cast<double>(ix) + uniform01(rng)) * sx;
          const double y = (static_cast<double>(iy) + uniform01(rng)) * sy;
          visit({x, y});
        }
    } else {
      for (std::uint64_t i = 0; i < leftover; ++i) {
        const double x = uniform01(rng) * g.width;
        const double y = uniform01(rng) * g.height;
        visit({x, y});
      }
    }
    return out;
  };

  std::vector<BlockResult> results(blocks);
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(blocks)));
  if (workers == 1) {
    for (std::size_t b = 0; b < blocks; ++b) results[b] = run_block(b);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t b = w; b < blocks; b += workers) results[b] = run_block(b);
      });
    for (auto& t : pool) t.join();
  }

  Counts merged;
  std::uint64_t covered = 0;
  for (auto& r : results) {
    covered += r.covered;
    for (auto& [k, c] : r.counts) merged[k] += c;
  }
  require(covered > 0, ErrorCode::UncoveredWindow, "objective undefined on uncovered window");

  std::vector<Cell> cells;
  cells.reserve(merged.size());
  for (const auto& [k, c] : merged) {
    Cell cell;
    for (std::size_t m = 0; m < n; ++m)
      if (k[m >> 6] >> (m & 63) & 1) cell.members.push_back(static_cast<CacheIndex>(m));
    cell.hits = c;
    cell.p = static_cast<double>(c) / static_cast<double>(covered);
    cells.push_back(std::move(cell));
  }
  std::sort(cells.begin(), cells.end(),
            [](const Cell& a, const Cell& b) { return a.members < b.members; });
  return CellTable(n, std::move(cells),
                   static_cast<double>(covered) / static_cast<double>(samples), samples,
                   covered);
}

std::vector<CacheIndex> neighbors(const Topology& topology, CacheIndex m) {
  require(m < topology.size(), ErrorCode::InvalidArgument, "unknown cache index");
  return topology.cells().neighbors(m);
}

void write_cells_csv(const CellTable& cells, std::ostream& out) {
  out << "subset;p\n";
  for (const Cell& cell : cells.cells()) {
    for (std::size_t i = 0; i < cell.members.size(); ++i)
      out << (i ? "," : "") << cell.members[i] + 1;
    out << ';' << detail::format_double(cell.p) << '\n';
  }
}

void write_sites_csv(const Topology& topology, std::ostream& out) {
  out << "id,x,y,radius\n";
  for (const CacheSite& s : topology.sites())
    out << s.id << ',' << detail::format_double(s.position.x) << ','
        << detail::format_double(s.position.y) << ',' << detail::format_double(s.radius)
        << '\n';
}

}  // namespace geocache
