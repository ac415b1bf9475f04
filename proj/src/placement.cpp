#include "geocache/placement.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "geocache/error.hpp"
#include "text_util.hpp"

namespace geocache {

namespace {

// Epoch-stamped marker array reused across calls on one thread.
class Stamps {
 public:
  void reset(std::size_t size) {
    if (marks_.size() < size) marks_.resize(size, 0);
    next();
  }
  void next() {
    if (++epoch_ == 0) {
      std::fill(marks_.begin(), marks_.end(), 0);
      epoch_ = 1;
    }
  }
  // True the first time j is seen in the current epoch.
  bool mark(std::size_t j) {
    if (marks_[j] == epoch_) return false;
    marks_[j] = epoch_;
    return true;
  }

 private:
  std::vector<std::uint32_t> marks_;
  std::uint32_t epoch_ = 0;
};

Stamps& scratch() {
  thread_local Stamps stamps;
  return stamps;
}

}  // namespace

// ---------------------------------------------------------------------------
// Placement

Placement::Placement(std::size_t caches, std::size_t files,
                     std::vector<std::size_t> capacities, RowRule rule)
    : files_(files), capacities_(std::move(capacities)), rule_(rule), rows_(caches) {
  require(caches >= 1, ErrorCode::InvalidArgument, "placement needs at least one cache");
  require(files >= 1, ErrorCode::InvalidArgument, "placement needs at least one file");
  require(capacities_.size() == caches, ErrorCode::DimensionMismatch,
          "one capacity per cache required");
  for (std::size_t k : capacities_) {
    require(k >= 1, ErrorCode::Infeasible, "capacity must be at least one slot");
    require(k <= files, ErrorCode::Infeasible,
            "capacity exceeds catalog size (rows must hold exactly K files)");
  }
  mask_.assign(caches * files, 0);
}

Placement::Placement(std::size_t caches, std::size_t files, std::size_t capacity,
                     RowRule rule)
    : Placement(caches, files, std::vector<std::size_t>(caches, capacity), rule) {}

Placement Placement::top_k(std::size_t caches, std::size_t files, std::size_t capacity) {
  Placement b(caches, files, capacity);
  Row row(capacity);
  for (std::size_t j = 0; j < capacity; ++j) row[j] = static_cast<FileIndex>(j);
  for (CacheIndex m = 0; m < caches; ++m) b.set_row(m, row);
  return b;
}

void Placement::set_row(CacheIndex m, Row row) {
  require(m < rows_.size(), ErrorCode::InvalidArgument, "unknown cache index");
  std::sort(row.begin(), row.end());
  require(std::adjacent_find(row.begin(), row.end()) == row.end(),
          ErrorCode::Infeasible, "row stores a file twice");
  require(row.empty() || row.back() < files_, ErrorCode::DimensionMismatch,
          "file index out of range");
  if (rule_ == RowRule::Exact)
    require(row.size() == capacities_[m], ErrorCode::Infeasible,
            "row must store exactly K files");
  else
    require(row.size() <= capacities_[m], ErrorCode::Infeasible,
            "row stores more files than its capacity");
  std::uint8_t* mask = mask_.data() + static_cast<std::size_t>(m) * files_;
  for (FileIndex j : rows_[m]) mask[j] = 0;
  for (FileIndex j : row) mask[j] = 1;
  rows_[m] = std::move(row);
}

bool Placement::is_feasible() const {
  for (std::size_t m = 0; m < rows_.size(); ++m) {
    if (rule_ == RowRule::Exact && rows_[m].size() != capacities_[m]) return false;
    if (rows_[m].size() > capacities_[m]) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// RelaxedPlacement

RelaxedPlacement::RelaxedPlacement(std::size_t caches, std::size_t files,
                                   std::size_t capacity)
    : caches_(caches), files_(files), capacity_(capacity), values_(caches * files, 0.0) {
  require(caches >= 1 && files >= 1, ErrorCode::InvalidArgument,
          "relaxed placement needs caches and files");
  require(capacity >= 1 && capacity <= files, ErrorCode::Infeasible,
          "capacity must be in [1, J]");
}

void RelaxedPlacement::set_row(CacheIndex m, std::span<const double> row) {
  require(m < caches_, ErrorCode::InvalidArgument, "unknown cache index");
  require(row.size() == files_, ErrorCode::DimensionMismatch, "row length must equal J");
  double sum = 0.0;
  for (double v : row) {
    require(v >= 0.0 && v <= 1.0, ErrorCode::Infeasible, "relaxed entries must lie in [0,1]");
    sum += v;
  }
  require(std::abs(sum - static_cast<double>(capacity_)) <= 1e-9, ErrorCode::Infeasible,
          "relaxed row must sum to K");
  std::copy(row.begin(), row.end(), values_.begin() + static_cast<std::ptrdiff_t>(m * files_));
}

Placement RelaxedPlacement::round() const {
  Placement out(caches_, files_, capacity_);
  for (CacheIndex m = 0; m < caches_; ++m) {
    Row row;
    for (FileIndex j = 0; j < files_; ++j)
      if (std::lround(at(m, j)) == 1) row.push_back(j);
    require(row.size() == capacity_, ErrorCode::Infeasible,
            "rounded row of cache " + std::to_string(m + 1) + " holds " +
                std::to_string(row.size()) + " files instead of K; tau is not small enough");
    out.set_row(m, std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Objective

void check_dimensions(const Placement& b, const CellTable& cells, const Popularity& pop) {
  require(b.caches() == cells.cache_count(), ErrorCode::DimensionMismatch,
          "placement and cell table disagree on the number of caches");
  require(b.files() == pop.size(), ErrorCode::DimensionMismatch,
          "placement and popularity disagree on the number of files");
}

namespace {

void check_dimensions(const RelaxedPlacement& b, const CellTable& cells,
                      const Popularity& pop) {
  require(b.caches() == cells.cache_count(), ErrorCode::DimensionMismatch,
          "placement and cell table disagree on the number of caches");
  require(b.files() == pop.size(), ErrorCode::DimensionMismatch,
          "placement and popularity disagree on the number of files");
}

// Popularity mass of the union of the rows of `members`, skipping `skip`.
double union_mass(const Placement& b, std::span<const CacheIndex> members, CacheIndex skip,
                  const Popularity& pop, Stamps& stamps) {
  stamps.next();
  double mass = 0.0;
  for (CacheIndex l : members) {
    if (l == skip) continue;
    for (FileIndex j : b.row(l))
      if (stamps.mark(j)) mass += pop[j];
  }
  return mass;
}

constexpr CacheIndex kNoCache = static_cast<CacheIndex>(-1);

}  // namespace

double evaluate_miss(const Placement& b, const CellTable& cells, const Popularity& pop) {
  check_dimensions(b, cells, pop);
  require(b.is_feasible(), ErrorCode::Infeasible, "placement violates its row capacities");
  Stamps& stamps = scratch();
  stamps.reset(b.files());
  double f = 0.0;
  for (const Cell& cell : cells.cells()) {
    const double served = union_mass(b, cell.members, kNoCache, pop, stamps);
    f += cell.p * std::max(0.0, pop.total() - served);
  }
  return f;
}

double evaluate_miss(const RelaxedPlacement& b, const CellTable& cells,
                     const Popularity& pop) {
  check_dimensions(b, cells, pop);
  double f = 0.0;
  for (const Cell& cell : cells.cells()) {
    double miss = 0.0;
    for (FileIndex j = 0; j < b.files(); ++j) {
      double prod = 1.0;
      for (CacheIndex l : cell.members) prod *= 1.0 - b.at(l, j);
      miss += pop[j] * prod;
    }
    f += cell.p * miss;
  }
  return f;
}

ExposureVector exposure_prefix(const Placement& b, CacheIndex m, const CellTable& cells,
                               std::size_t limit) {
  require(m < b.caches() && m < cells.cache_count(), ErrorCode::InvalidArgument,
          "unknown cache index");
  limit = std::min(limit, b.files());
  ExposureVector q;
  q.base = cells.mass_of(m);
  std::vector<double> served(limit, 0.0);
  Stamps& stamps = scratch();
  stamps.reset(b.files());
  for (std::size_t c : cells.cells_of(m)) {
    const Cell& cell = cells.cells()[c];
    stamps.next();
    for (CacheIndex l : cell.members) {
      if (l == m) continue;
      for (FileIndex j : b.row(l)) {
        if (j >= limit) break;
        if (stamps.mark(j)) served[j] += cell.p;
      }
    }
  }
  q.values.resize(limit);
  for (std::size_t j = 0; j < limit; ++j)
    q.values[j] = served[j] == 0.0 ? q.base : std::max(0.0, q.base - served[j]);
  return q;
}

ExposureVector exposure(const Placement& b, CacheIndex m, const CellTable& cells) {
  return exposure_prefix(b, m, cells, b.files());
}

std::vector<double> exposure_at(const Placement& b, CacheIndex m, const CellTable& cells,
                                std::span<const FileIndex> files) {
  require(m < b.caches() && m < cells.cache_count(), ErrorCode::InvalidArgument,
          "unknown cache index");
  const double base = cells.mass_of(m);
  std::vector<double> served(files.size(), 0.0);
  for (std::size_t c : cells.cells_of(m)) {
    const Cell& cell = cells.cells()[c];
    for (std::size_t i = 0; i < files.size(); ++i) {
      require(files[i] < b.files(), ErrorCode::DimensionMismatch, "file index out of range");
      for (CacheIndex l : cell.members)
        if (l != m && b.stores(l, files[i])) {
          served[i] += cell.p;
          break;
        }
    }
  }
  std::vector<double> q(files.size());
  for (std::size_t i = 0; i < files.size(); ++i)
    q[i] = served[i] == 0.0 ? base : std::max(0.0, base - served[i]);
  return q;
}

std::vector<double> exposure(const RelaxedPlacement& b, CacheIndex m,
                             const CellTable& cells) {
  require(m < b.caches() && m < cells.cache_count(), ErrorCode::InvalidArgument,
          "unknown cache index");
  std::vector<double> q(b.files(), 0.0);
  for (std::size_t c : cells.cells_of(m)) {
    const Cell& cell = cells.cells()[c];
    for (FileIndex j = 0; j < b.files(); ++j) {
      double prod = 1.0;
      for (CacheIndex l : cell.members)
        if (l != m) prod *= 1.0 - b.at(l, j);
      q[j] += cell.p * prod;
    }
  }
  return q;
}

double local_miss(const Placement& b, CacheIndex m, const CellTable& cells,
                  const Popularity& pop) {
  check_dimensions(b, cells, pop);
  require(m < b.caches(), ErrorCode::InvalidArgument, "unknown cache index");
  // sum_j a_j q_m(j) over all files, then remove the files m stores.
  Stamps& stamps = scratch();
  stamps.reset(b.files());
  double total = 0.0;
  for (std::size_t c : cells.cells_of(m)) {
    const Cell& cell = cells.cells()[c];
    total += cell.p * std::max(0.0, pop.total() - union_mass(b, cell.members, m, pop, stamps));
  }
  const Row& own = b.row(m);
  const auto q = exposure_at(b, m, cells, own);
  double kept = 0.0;
  for (std::size_t i = 0; i < own.size(); ++i) kept += pop[own[i]] * q[i];
  return std::max(0.0, total - kept);
}

double local_miss(const RelaxedPlacement& b, CacheIndex m, const CellTable& cells,
                  const Popularity& pop) {
  check_dimensions(b, cells, pop);
  const auto q = exposure(b, m, cells);
  double f = 0.0;
  for (FileIndex j = 0; j < b.files(); ++j) f += pop[j] * (1.0 - b.at(m, j)) * q[j];
  return f;
}

std::pair<double, double> potential_delta_check(const Placement& b, CacheIndex m,
                                                const Row& row, const CellTable& cells,
                                                const Popularity& pop) {
  Placement next = b;
  next.set_row(m, row);
  const double local = local_miss(next, m, cells, pop) - local_miss(b, m, cells, pop);
  const double global = evaluate_miss(next, cells, pop) - evaluate_miss(b, cells, pop);
  return {local, global};
}

Row greedy_size_fill(std::span<const FileIndex> ranking, const FileSizes& sizes,
                     double capacity) {
  require(capacity > 0.0, ErrorCode::InvalidArgument, "capacity must be positive");
  Row out;
  double used = 0.0;
  for (FileIndex j : ranking) {
    require(j < sizes.size(), ErrorCode::DimensionMismatch, "file index out of range");
    if (used + sizes[j] <= capacity) {
      used += sizes[j];
      out.push_back(j);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_placement_csv(const Placement& b, std::ostream& out) {
  out << "cacheId,fileId\n";
  for (CacheIndex m = 0; m < b.caches(); ++m)
    for (FileIndex j : b.row(m)) out << m + 1 << ',' << j + 1 << '\n';
}

Placement parse_placement_csv(std::istream& in, std::size_t caches, std::size_t files,
                              std::size_t capacity) {
  std::vector<Row> rows(caches);
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto view = detail::trim(line);
    if (view.empty()) continue;
    if (!header) {
      require(view == "cacheId,fileId", ErrorCode::Parse,
              "line " + std::to_string(lineno) + ": expected header cacheId,fileId");
      header = true;
      continue;
    }
    const auto cols = detail::split(view, ',');
    const auto cache = cols.size() == 2 ? detail::parse_uint(cols[0]) : std::nullopt;
    const auto file = cols.size() == 2 ? detail::parse_uint(cols[1]) : std::nullopt;
    require(cache && file && *cache >= 1 && *cache <= caches && *file >= 1 && *file <= files,
            ErrorCode::Parse, "line " + std::to_string(lineno) + ": invalid cacheId,fileId");
    rows[*cache - 1].push_back(static_cast<FileIndex>(*file - 1));
  }
  Placement b(caches, files, capacity);
  for (CacheIndex m = 0; m < caches; ++m) b.set_row(m, std::move(rows[m]));
  return b;
}

}  // namespace geocache
