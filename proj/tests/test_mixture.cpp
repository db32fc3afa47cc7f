#include <map>
#include <sstream>

#include "doctest.h"
#include "mallows_mix/rankings.hpp"
#include "oracles.hpp"

using namespace mallows_mix;

namespace {
MallowsMixture random_mixture(int n, Rng& rng) {
  std::uniform_real_distribution<double> w(0.1, 0.9), phi(0.15, 0.85);
  return MallowsMixture(w(rng), MallowsModel(phi(rng), random_permutation(n, rng)),
                        MallowsModel(phi(rng), random_permutation(n, rng)));
}
}  // namespace

TEST_CASE("mixture construction") {
  const MallowsModel a(0.5, Permutation::identity(4));
  CHECK_THROWS_AS(MallowsMixture(1.2, a, a), DomainError);
  CHECK_THROWS_AS(MallowsMixture(0.5, a, MallowsModel(0.5, Permutation::identity(5))), DomainError);
  const MallowsMixture m(0.3, a, MallowsModel(0.2, Permutation::reversed(4)));
  CHECK(m.w1() + m.w2() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("exact mixture distribution") {
  Rng rng(1);
  for (int t = 0; t < 10; ++t) {
    const MallowsMixture m = random_mixture(5, rng);
    CompensatedSum total;
    const auto d = exact_mixture_distribution(m);
    const auto ref = oracle::enumerate(m);
    for (std::size_t s = 0; s < d.size(); ++s) {
      total.add(d[s].second);
      CHECK(std::abs(d[s].second - ref[s].p) < 1e-13);
    }
    CHECK(std::abs(total.value() - 1.0) < 1e-12);
    const auto sw = exact_mixture_distribution(m.swapped());
    for (std::size_t s = 0; s < d.size(); ++s) CHECK(std::abs(d[s].second - sw[s].second) < 1e-15);
  }
  // Equal components reduce to the single model.
  const MallowsModel a(0.4, Permutation({2, 0, 1, 3}));
  const auto single = exact_distribution(a);
  const auto same = exact_mixture_distribution(MallowsMixture(0.3, a, a));
  for (std::size_t s = 0; s < single.size(); ++s) CHECK(std::abs(single[s].second - same[s].second) < 1e-15);
  // Reversal symmetry with w1 = 1/2, equal phi, reversed centrals.
  const MallowsMixture r(0.5, MallowsModel(0.6, Permutation::identity(4)), MallowsModel(0.6, Permutation::reversed(4)));
  std::map<std::vector<int>, double> law;
  for (const auto& [p, pr] : exact_mixture_distribution(r)) law[p.order()] = pr;
  for (const auto& [o, pr] : law) {
    std::vector<int> rev(o.rbegin(), o.rend());
    CHECK(std::abs(law[rev] - pr) < 1e-15);
  }
}

TEST_CASE("mixture position probabilities match enumeration") {
  Rng rng(2);
  for (int t = 0; t < 5; ++t) {
    const MallowsMixture m = random_mixture(5, rng);
    const auto marg = oracle::position_marginals(oracle::enumerate(m));
    for (int e = 0; e < 5; ++e) {
      double row = 0;
      for (int j = 0; j < 5; ++j) {
        CHECK(std::abs(mixture_position_prob(m, e, j) - marg[e][j]) < 1e-10);
        row += mixture_position_prob(m, e, j);
      }
      CHECK(row == doctest::Approx(1.0));
    }
  }
  const MallowsModel a(0.3, Permutation({1, 0, 2}));
  const Eigen::MatrixXd single = element_position_table(a.central(), position_prob_matrix(3, 0.3));
  CHECK((mixture_position_table(MallowsMixture(0.7, a, a)) - single).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("mixture sampler matches exact law (chi-square, n=4)") {
  Rng rng(8);
  const MallowsMixture m(0.35, MallowsModel(0.5, Permutation({0, 1, 2, 3})), MallowsModel(0.3, Permutation({3, 1, 0, 2})));
  const RankingSet set = sample_rankings(m, 200000, rng);
  std::map<std::vector<int>, double> counts;
  for (std::size_t s = 0; s < set.size(); ++s) counts[set.at(s).order()] += 1;
  std::vector<double> obs, probs;
  for (const auto& [p, pr] : exact_mixture_distribution(m)) {
    obs.push_back(counts[p.order()]);
    probs.push_back(pr);
  }
  CHECK(oracle::chi_square_pvalue(oracle::chi_square_stat(obs, probs, set.size()), 23) > 0.001);
}

TEST_CASE("degenerate weights delegate to a single component") {
  const MallowsModel a(0.5, Permutation({1, 0, 2, 3})), b(0.2, Permutation::reversed(4));
  Rng r1(5), r2(5);
  const MallowsMixture m(1.0, a, b);
  for (int s = 0; s < 200; ++s) {
    const auto [p, label] = testing::sample_mixture_labeled(m, r1);
    CHECK(label == ComponentLabel::first);
    r2();  // the mixture consumes one draw for the component choice
    CHECK(p == sample(a, r2));
  }
}

TEST_CASE("first-place frequencies converge at the Bernstein rate (n=8, N=1e6)") {
  Rng rng(17);
  const MallowsMixture m = random_mixture(8, rng);
  const RankingSet set = sample_rankings(m, 1000000, rng);
  const Eigen::VectorXd p = first_place_frequencies(set);
  const Eigen::VectorXd truth = m.w1() * representative_vector(m.m1()) + m.w2() * representative_vector(m.m2());
  CHECK((p - truth).cwiseAbs().maxCoeff() < 3 * std::sqrt(std::log(8.0) / 1e6));
}

TEST_CASE("ranking set utilities") {
  RankingSet set(4);
  set.push_back(Permutation({2, 0, 3, 1}));
  set.push_back(Permutation({0, 1, 2, 3}));
  set.push_back(Permutation({2, 3, 1, 0}));
  std::ostringstream os;
  write_rankings(os, set);
  CHECK(os.str() == "3 1 4 2\n1 2 3 4\n3 4 2 1\n");
  std::istringstream is(os.str());
  const RankingSet back = read_rankings(is);
  CHECK(digest(back) == digest(set));
  CHECK(filter_first(set, 2).size() == 2);
  const RankingSet proj = project(set, {3, 2});
  CHECK(proj.n() == 2);
  CHECK(proj.at(0) == Permutation({1, 0}));
  CHECK(proj.at(1) == Permutation({1, 0}));
  CHECK(proj.at(2) == Permutation({1, 0}));
  const Eigen::MatrixXd f = position_frequencies(set);
  CHECK(f(2, 0) == doctest::Approx(2.0 / 3));
  std::istringstream bad("1 2 3\n1 2\n");
  CHECK_THROWS_AS(read_rankings(bad), DomainError);
  std::istringstream notint("1 2 x\n");
  CHECK_THROWS_AS(read_rankings(notint), DomainError);
}
