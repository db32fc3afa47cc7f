#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "mallows_mix/mixture.hpp"
#include "mallows_mix/rankings.hpp"

namespace mallows_mix {

double c2(double phi, int n);
double c3(double phi, int n);

/// Top-1, top-2-set and top-3-set statistics.
///
/// p3 is dense for n <= 32. Above that, empirical stats keep only the observed triples and
/// closed-form stats evaluate triples on demand from the component vectors.
class MomentStats {
 public:
  static constexpr int kDenseLimit = 32;

  explicit MomentStats(int n = 0);

  int n() const { return n_; }
  Eigen::VectorXd p1;
  Eigen::MatrixXd p2;
  /// Number of samples, or nullopt for exact statistics.
  std::optional<std::uint64_t> sample_count;

  bool exact() const { return !sample_count.has_value(); }
  bool dense() const { return n_ <= kDenseLimit; }

  double p3(int i, int j, int k) const;
  void set_p3(int i, int j, int k, double v);

  /// Calls f(i, j, k, value) once per stored triple with i < j < k.
  template <typename F>
  void for_each_p3(F&& f) const;

 private:
  friend MomentStats closed_form(const MallowsMixture& mix);
  static std::uint64_t key(int i, int j, int k);

  int n_;
  std::vector<double> dense_;
  std::unordered_map<std::uint64_t, double> sparse_;
  // Analytic source for large closed-form stats.
  struct Analytic {
    double a1, a2;
    Eigen::VectorXd x, y;
  };
  std::optional<Analytic> analytic_;
};

/// Integer tallies behind estimate_from_samples; shards merge exactly.
class MomentCounts {
 public:
  explicit MomentCounts(int n);

  void add(const std::uint8_t* ranking);
  void add(const RankingSet& set, std::size_t begin, std::size_t end);
  void merge(const MomentCounts& other);
  std::uint64_t total() const { return total_; }
  MomentStats finish() const;

 private:
  int n_;
  std::uint64_t total_ = 0;
  std::vector<std::uint64_t> c1_, c2_, c3_dense_;
  std::unordered_map<std::uint64_t, std::uint64_t> c3_sparse_;
};

MomentStats estimate_from_samples(const RankingSet& samples);
MomentStats estimate_from_samples(const std::vector<Permutation>& samples);

/// P_i = w1 x_i + w2 y_i, P_ij = sum_r w_r c2(phi_r) ..., P_ijk likewise with c3.
MomentStats closed_form(const MallowsMixture& mix);

/// Binary cache: 8-byte magic, version, mode and digest header, little-endian payload.
void save_moment_cache(const std::string& path, const MomentStats& stats, std::uint64_t digest);
std::optional<MomentStats> load_moment_cache(const std::string& path, std::uint64_t digest, bool exact);

template <typename F>
void MomentStats::for_each_p3(F&& f) const {
  if (analytic_ || dense()) {
    for (int i = 0; i < n_; ++i)
      for (int j = i + 1; j < n_; ++j)
        for (int k = j + 1; k < n_; ++k) f(i, j, k, p3(i, j, k));
    return;
  }
  for (const auto& [key, v] : sparse_) {
    const int i = static_cast<int>(key >> 32), j = static_cast<int>((key >> 16) & 0xffff),
              k = static_cast<int>(key & 0xffff);
    f(i, j, k, v);
  }
}

}  // namespace mallows_mix
