#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace geocache {

using FileIndex = std::uint32_t;

/// Request probabilities a_1 >= a_2 >= ... >= a_J, stored zero-based.
class Popularity {
 public:
  /// Rejects negative entries, a sum off one by more than 1e-12, and any
  /// increase along the vector. Sorting is the caller's job.
  explicit Popularity(std::vector<double> probs);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t j) const { return probs_[j]; }
  const std::vector<double>& probs() const { return probs_; }
  /// Sum of all entries as stored (one up to rounding).
  double total() const { return total_; }

 private:
  std::vector<double> probs_;
  double total_ = 0.0;
};

Popularity zipf_popularity(std::size_t files, double gamma);

/// Mass of the files ranked below n: sum of a_j for j > n (one-based).
double tail_mass(const Popularity& pop, std::size_t n);

/// One probability per line.
Popularity parse_popularity_csv(std::istream& in);
Popularity read_popularity_csv(const std::string& path);

class FileSizes {
 public:
  explicit FileSizes(std::vector<double> sizes);

  std::size_t size() const { return sizes_.size(); }
  double operator[](std::size_t j) const { return sizes_[j]; }
  const std::vector<double>& values() const { return sizes_; }

 private:
  std::vector<double> sizes_;
};

/// i.i.d. log-normal sizes with mean exactly one: zeta = exp(sigma z - sigma^2/2)
/// with z standard normal. The normal draws depend only on the seed, so two
/// calls with the same seed and different variances are coupled.
FileSizes lognormal_sizes(std::size_t files, double sigma2, std::uint64_t seed);

}  // namespace geocache
