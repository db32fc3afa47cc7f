#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mallows_mix/mixture.hpp"

namespace mallows_mix {

/// Flat storage of N rankings over n <= 255 elements, optionally weighted.
///
/// Unweighted sets are ordinary samples; weighted sets carry probabilities and let the
/// learner run on an exact distribution (every permutation once, weight = probability).
class RankingSet {
 public:
  static constexpr int kMaxN = 255;

  explicit RankingSet(int n = 0);

  int n() const { return n_; }
  std::size_t size() const { return n_ ? data_.size() / n_ : 0; }
  bool empty() const { return size() == 0; }
  bool weighted() const { return weighted_; }

  void reserve(std::size_t count) { data_.reserve(count * n_); }
  void push_back(const Permutation& p);
  void push_back(const Permutation& p, double weight);
  void push_row(const std::uint8_t* row);
  void push_row(const std::uint8_t* row, double weight);

  /// Grows by `count` uninitialised rows and returns a pointer to the first one.
  std::uint8_t* append_rows(std::size_t count);

  const std::uint8_t* row(std::size_t s) const { return data_.data() + s * n_; }
  double weight(std::size_t s) const { return weights_.empty() ? 1.0 : weights_[s]; }
  double total_weight() const;
  Permutation at(std::size_t s) const;

  RankingSet slice(std::size_t begin, std::size_t end) const;

 private:
  void make_weighted();

  int n_;
  std::vector<std::uint8_t> data_;
  std::vector<double> weights_;
  bool weighted_ = false;
};

RankingSet sample_rankings(const MallowsMixture& mix, std::size_t count, Rng& rng);
RankingSet sample_rankings(const MallowsModel& model, std::size_t count, Rng& rng);

/// Weighted set holding every permutation of `dist` with its probability.
RankingSet from_distribution(const Distribution& dist);

/// Frequency (or weight share) of each element at each position; rows are elements.
Eigen::MatrixXd position_frequencies(const RankingSet& set);
Eigen::VectorXd first_place_frequencies(const RankingSet& set);

/// Rankings whose first element is e.
RankingSet filter_first(const RankingSet& set, int e);

/// Restricts every ranking to `keep` (old ids) and relabels keep[k] -> k.
RankingSet project(const RankingSet& set, const std::vector<int>& keep);

/// Applies prepend_elements(k, phi) to every ranking; new ids are n, n+1, ...
RankingSet prepend_artificial(const RankingSet& set, int k, double phi, Rng& rng);

/// FNV-1a over the rankings (and weights when present).
std::uint64_t digest(const RankingSet& set);

/// One ranking per line, 1-based ids separated by spaces.
RankingSet read_rankings(std::istream& is);
RankingSet read_rankings_file(const std::string& path);
void write_rankings(std::ostream& os, const RankingSet& set);
void write_rankings_file(const std::string& path, const RankingSet& set);

}  // namespace mallows_mix
