#pragma once

#include <utility>

#include <Eigen/Dense>

#include "mallows_mix/mallows.hpp"
#include "mallows_mix/numeric.hpp"

namespace mallows_mix {

enum class ComponentLabel { first, second };

/// w1 * Mallows(m1) + w2 * Mallows(m2) over a common element set.
class MallowsMixture {
 public:
  MallowsMixture(double w1, MallowsModel m1, MallowsModel m2);

  double w1() const { return w1_; }
  double w2() const { return 1.0 - w1_; }
  const MallowsModel& m1() const { return m1_; }
  const MallowsModel& m2() const { return m2_; }
  int n() const { return m1_.n(); }

  /// Same mixture with the two components exchanged.
  MallowsMixture swapped() const { return MallowsMixture(w2(), m2_, m1_); }

 private:
  double w1_;
  MallowsModel m1_;
  MallowsModel m2_;
};

class MixtureSampler {
 public:
  explicit MixtureSampler(const MallowsMixture& mix);

  template <typename T>
  ComponentLabel draw(Rng& rng, T* out) const {
    if (uniform01(rng) < w1_) {
      s1_.draw(rng, out);
      return ComponentLabel::first;
    }
    s2_.draw(rng, out);
    return ComponentLabel::second;
  }

 private:
  double w1_;
  MallowsSampler s1_, s2_;
};

Permutation sample_mixture(const MallowsMixture& mix, Rng& rng);

namespace testing {
/// Exposes the generating component; reserved for test fixtures.
std::pair<Permutation, ComponentLabel> sample_mixture_labeled(const MallowsMixture& mix, Rng& rng);
}  // namespace testing

Distribution exact_mixture_distribution(const MallowsMixture& mix);

double mixture_position_prob(const MallowsMixture& mix, int element, int position);

/// Row e, column j: probability that element e is ranked at position j (0-based).
Eigen::MatrixXd mixture_position_table(const MallowsMixture& mix);

/// Component table with rows re-indexed by element: f(e, j) = F(pos(e), j).
Eigen::MatrixXd element_position_table(const Permutation& central, const Eigen::MatrixXd& f);

}  // namespace mallows_mix
