#include "mallows_mix/mixture.hpp"

namespace mallows_mix {

MallowsMixture::MallowsMixture(double w1, MallowsModel m1, MallowsModel m2)
    : w1_(w1), m1_(std::move(m1)), m2_(std::move(m2)) {
  if (!(w1_ >= 0.0 && w1_ <= 1.0)) throw DomainError("mixture weight outside [0, 1]");
  if (m1_.n() != m2_.n()) throw DomainError("mixture components over different element sets");
}

MixtureSampler::MixtureSampler(const MallowsMixture& mix) : w1_(mix.w1()), s1_(mix.m1()), s2_(mix.m2()) {}

Permutation sample_mixture(const MallowsMixture& mix, Rng& rng) {
  return testing::sample_mixture_labeled(mix, rng).first;
}

namespace testing {
std::pair<Permutation, ComponentLabel> sample_mixture_labeled(const MallowsMixture& mix, Rng& rng) {
  MixtureSampler s(mix);
  std::vector<int> out(mix.n());
  const ComponentLabel label = s.draw(rng, out.data());
  return {Permutation(std::move(out)), label};
}
}  // namespace testing

Distribution exact_mixture_distribution(const MallowsMixture& mix) {
  Distribution d1 = exact_distribution(mix.m1());
  const Distribution d2 = exact_distribution(mix.m2());
  for (std::size_t i = 0; i < d1.size(); ++i) d1[i].second = mix.w1() * d1[i].second + mix.w2() * d2[i].second;
  return d1;
}

Eigen::MatrixXd element_position_table(const Permutation& central, const Eigen::MatrixXd& f) {
  const int n = central.size();
  Eigen::MatrixXd out(n, n);
  for (int e = 0; e < n; ++e) out.row(e) = f.row(central.pos(e));
  return out;
}

Eigen::MatrixXd mixture_position_table(const MallowsMixture& mix) {
  const int n = mix.n();
  const Eigen::MatrixXd f1 = position_prob_matrix(n, mix.m1().phi());
  const Eigen::MatrixXd f2 = position_prob_matrix(n, mix.m2().phi());
  return mix.w1() * element_position_table(mix.m1().central(), f1) +
         mix.w2() * element_position_table(mix.m2().central(), f2);
}

double mixture_position_prob(const MallowsMixture& mix, int element, int position) {
  const int n = mix.n();
  if (element < 0 || element >= n || position < 0 || position >= n)
    throw DomainError("mixture_position_prob: index out of range");
  return mixture_position_table(mix)(element, position);
}

}  // namespace mallows_mix
