#include "geocache/catalog.hpp"

#include <cmath>
#include <fstream>
#include <istream>

#include "geocache/error.hpp"
#include "geocache/rng.hpp"
#include "text_util.hpp"

namespace geocache {

namespace {

// Summing smallest-first keeps the rounding error of long Zipf tails small.
double sum_reverse(const std::vector<double>& v) {
  double s = 0.0;
  for (auto it = v.rbegin(); it != v.rend(); ++it) s += *it;
  return s;
}

}  // namespace

Popularity::Popularity(std::vector<double> probs) : probs_(std::move(probs)) {
  require(!probs_.empty(), ErrorCode::InvalidArgument, "popularity vector is empty");
  for (std::size_t j = 0; j < probs_.size(); ++j) {
    require(probs_[j] >= 0.0 && std::isfinite(probs_[j]), ErrorCode::InvalidArgument,
            "popularity entries must be finite and non-negative");
    require(j == 0 || probs_[j] <= probs_[j - 1], ErrorCode::InvalidArgument,
            "popularity must be non-increasing (entry " + std::to_string(j + 1) + ")");
  }
  total_ = sum_reverse(probs_);
  require(std::abs(total_ - 1.0) <= 1e-12, ErrorCode::InvalidArgument,
          "popularity must sum to one");
}

Popularity zipf_popularity(std::size_t files, double gamma) {
  require(files >= 1, ErrorCode::InvalidArgument, "catalog needs at least one file");
  require(gamma >= 0.0, ErrorCode::InvalidArgument, "Zipf exponent must be non-negative");
  std::vector<double> w(files);
  for (std::size_t j = 0; j < files; ++j)
    w[j] = std::pow(static_cast<double>(j + 1), -gamma);
  const double norm = sum_reverse(w);
  for (double& x : w) x /= norm;
  return Popularity(std::move(w));
}

double tail_mass(const Popularity& pop, std::size_t n) {
  require(n <= pop.size(), ErrorCode::InvalidArgument, "tail index exceeds catalog size");
  double s = 0.0;
  for (std::size_t j = pop.size(); j > n; --j) s += pop[j - 1];
  return s;
}

Popularity parse_popularity_csv(std::istream& in) {
  std::vector<double> probs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto view = detail::trim(line);
    if (view.empty()) continue;
    const auto v = detail::parse_double(view);
    require(v.has_value(), ErrorCode::Parse,
            "line " + std::to_string(lineno) + ": invalid probability");
    probs.push_back(*v);
  }
  return Popularity(std::move(probs));
}

Popularity read_popularity_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open popularity file " + path);
  return parse_popularity_csv(in);
}

FileSizes::FileSizes(std::vector<double> sizes) : sizes_(std::move(sizes)) {
  for (double s : sizes_)
    require(s > 0.0 && std::isfinite(s), ErrorCode::InvalidArgument,
            "file sizes must be positive");
}

FileSizes lognormal_sizes(std::size_t files, double sigma2, std::uint64_t seed) {
  require(files >= 1, ErrorCode::InvalidArgument, "catalog needs at least one file");
  require(sigma2 >= 0.0, ErrorCode::InvalidArgument, "variance parameter must be >= 0");
  std::vector<double> sizes(files, 1.0);
  if (sigma2 == 0.0) return FileSizes(std::move(sizes));
  const double sigma = std::sqrt(sigma2);
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& s : sizes) s = std::exp(sigma * normal(rng) - 0.5 * sigma2);
  return FileSizes(std::move(sizes));
}

}  // namespace geocache
