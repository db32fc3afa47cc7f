#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mallows_mix/errors.hpp"
#include "mallows_mix/permutations.hpp"

namespace mallows_mix {

inline constexpr double kPhiMin = 1e-6;
inline constexpr double kPhiMax = 1.0 - 1e-6;
inline constexpr int kMaxEnumerationN = 8;

/// Z_i(phi) = 1 + phi + ... + phi^(i-1); Z_0 = 0.
template <typename Scalar = double>
Scalar z_single(int i, Scalar phi) {
  Scalar sum(0), term(1);
  for (int k = 0; k < i; ++k) {
    sum += term;
    term *= phi;
  }
  return sum;
}

/// Z_[n](phi) = prod_{i=1..n} Z_i(phi).
template <typename Scalar = double>
Scalar z_partition(int n, Scalar phi) {
  Scalar prod(1), zi(0), term(1);
  for (int i = 1; i <= n; ++i) {
    zi += term;
    term *= phi;
    prod *= zi;
  }
  return prod;
}

template <typename Scalar = double>
Scalar gain(int n, Scalar phi) {
  using std::min;
  return (Scalar(1) - phi) / (Scalar(4) * phi) * min(Scalar(1) / Scalar(n), Scalar(1) - phi * phi);
}

/// E[d_kt(pi, pi0)] = sum_i (phi/(1-phi) - i phi^i/(1-phi^i)).
template <typename Scalar = double>
Scalar expected_kt_distance(int n, Scalar phi) {
  Scalar total(0), phi_i(1);
  const Scalar a = phi / (Scalar(1) - phi);
  for (int i = 1; i <= n; ++i) {
    phi_i *= phi;
    total += a - Scalar(i) * phi_i / (Scalar(1) - phi_i);
  }
  return total;
}

/// f(i, l): probability that the element at central position i lands at position l (0-based).
/// Built by conditioning on the first placed element, one size at a time.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> position_prob_matrix(int n, Scalar phi) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (n < 1) throw DomainError("position_prob_matrix: n must be positive");
  std::vector<Scalar> z(n + 1);
  for (int i = 0; i <= n; ++i) z[i] = z_single<Scalar>(i, phi);
  Mat prev = Mat::Ones(1, 1);
  for (int m = 2; m <= n; ++m) {
    Mat cur = Mat::Zero(m, m);
    Scalar w(1);
    for (int i = 0; i < m; ++i) {  // i is 0-based; 1-based index is i+1
      cur(i, 0) = w / z[m];
      w *= phi;
      const Scalar above = z[i] / z[m];           // first pick ranked above i
      const Scalar below = (z[m] - z[i + 1]) / z[m];  // first pick ranked below i
      for (int l = 1; l < m; ++l) {
        Scalar v(0);
        if (i >= 1) v += above * prev(i - 1, l - 1);
        if (i <= m - 2) v += below * prev(i, l - 1);
        cur(i, l) = v;
      }
    }
    prev = std::move(cur);
  }
  return prev;
}

struct PositionProbTable {
  int n = 0;
  double phi = 0.0;
  Eigen::MatrixXd f;
};

PositionProbTable position_prob_table(int n, double phi);

void validate_phi(double phi);

class MallowsModel {
 public:
  MallowsModel(double phi, Permutation central);

  double phi() const { return phi_; }
  const Permutation& central() const { return central_; }
  int n() const { return central_.size(); }

 private:
  double phi_;
  Permutation central_;
};

/// Repeated-insertion sampler with per-size CDF tables built once.
class MallowsSampler {
 public:
  explicit MallowsSampler(const MallowsModel& model);

  /// Writes one draw (element ids in position order) to out[0..n).
  template <typename T>
  void draw(Rng& rng, T* out) const;

  Permutation operator()(Rng& rng) const;

 private:
  int pick(Rng& rng, int m) const;

  int n_;
  std::vector<int> central_;
  std::vector<std::vector<double>> cdf_;  // cdf_[m][j] = P(rank <= j) among m remaining
};

Permutation sample(const MallowsModel& model, Rng& rng);

using Distribution = std::vector<std::pair<Permutation, double>>;

/// All n! permutations in lexicographic order with their probabilities; n <= 8.
Distribution exact_distribution(const MallowsModel& model);

void write_distribution_csv(std::ostream& os, const Distribution& dist);

Eigen::VectorXd representative_vector(const MallowsModel& model);

/// Mallows(phi, pi0 \ e) over n-1 elements; ids above e shift down by one.
MallowsModel condition_on_first(const MallowsModel& model, int e);

/// Inserts k fresh elements (ids n, n+1, ...) one at a time; the j-th slot has weight phi^(j-1).
Permutation prepend_elements(const Permutation& sample, int k, double phi, Rng& rng);

/// Upper bound (n^2 / phi_min) |phi - phi_hat| on the TV distance between Mallows(phi) and Mallows(phi_hat).
double tv_distance_param_sensitivity(int n, double phi, double phi_hat, double phi_min);
double tv_distance_param_sensitivity(int n, double phi, double phi_hat);

}  // namespace mallows_mix
