#include <cstdio>

#include "doctest.h"
#include "mallows_mix/moments.hpp"
#include "oracles.hpp"

using namespace mallows_mix;
using doctest::Approx;

namespace {
MallowsMixture random_mixture(int n, Rng& rng) {
  std::uniform_real_distribution<double> w(0.05, 0.95), phi(0.1, 0.9);
  return MallowsMixture(w(rng), MallowsModel(phi(rng), random_permutation(n, rng)),
                        MallowsModel(phi(rng), random_permutation(n, rng)));
}
}  // namespace

TEST_CASE("c2 and c3") {
  CHECK(c2(0.5, 3) == Approx(3.5).epsilon(1e-14));
  CHECK(c3(0.5, 3) == Approx(42.875).epsilon(1e-14));
  for (int n = 3; n <= 50; ++n)
    for (double phi = 0.01; phi < 1.0; phi += 0.01) {
      CHECK(c2(phi, n) >= 1.0);
      CHECK(c2(phi, n) <= 3.0 / phi);
      CHECK(c3(phi, n) >= 1.0);
      CHECK(c3(phi, n) <= 50.0 / (phi * phi * phi));
    }
}

TEST_CASE("single sample tally") {
  const MomentStats st = estimate_from_samples(std::vector<Permutation>{Permutation({0, 1, 2, 3})});
  CHECK(st.p1[0] == 1.0);
  CHECK(st.p1.sum() == 1.0);
  CHECK(st.p2(0, 1) == 1.0);
  CHECK(st.p2(1, 0) == 1.0);
  CHECK(st.p3(0, 1, 2) == 1.0);
  CHECK(st.p3(2, 0, 1) == 1.0);
  CHECK(st.p3(0, 1, 3) == 0.0);
  CHECK(st.p3(0, 0, 1) == 0.0);
  CHECK(*st.sample_count == 1);
  CHECK_THROWS_AS(estimate_from_samples(std::vector<Permutation>{Permutation({0, 1})}), DomainError);
}

TEST_CASE("closed form equals enumeration top-set marginals") {
  const MallowsMixture single(1.0, MallowsModel(0.5, Permutation::identity(3)), MallowsModel(0.5, Permutation::identity(3)));
  const MomentStats s3 = closed_form(single);
  CHECK(s3.p3(0, 1, 2) == Approx(1.0).epsilon(1e-14));
  CHECK(s3.p2(0, 1) == Approx(3.5 * 0.5714285714285714 * 0.2857142857142857).epsilon(1e-13));
  const auto top2 = oracle::top_set_marginals(oracle::enumerate(single), 2);
  CHECK(std::abs(s3.p2(0, 1) - top2.at({0, 1})) < 1e-12);
  Rng rng(31);
  for (int t = 0; t < 12; ++t) {
    const int n = 5 + t % 2;
    const MallowsMixture m = random_mixture(n, rng);
    const MomentStats st = closed_form(m);
    const auto law = oracle::enumerate(m);
    const auto t1 = oracle::top_set_marginals(law, 1);
    const auto t2 = oracle::top_set_marginals(law, 2);
    const auto t3 = oracle::top_set_marginals(law, 3);
    for (int i = 0; i < n; ++i) {
      CHECK(std::abs(st.p1[i] - t1.at({i})) < 1e-10);
      CHECK(st.p2(i, i) == 0.0);
      for (int j = i + 1; j < n; ++j) {
        CHECK(std::abs(st.p2(i, j) - t2.at({i, j})) < 1e-10);
        CHECK(st.p2(i, j) == st.p2(j, i));
        for (int k = j + 1; k < n; ++k) {
          CHECK(std::abs(st.p3(i, j, k) - t3.at({i, j, k})) < 1e-10);
          CHECK(st.p3(k, i, j) == st.p3(i, j, k));
        }
      }
    }
    CHECK(st.exact());
  }
}

TEST_CASE("moment normalisation and sharded tallies") {
  Rng rng(4);
  const MallowsMixture m = random_mixture(8, rng);
  const RankingSet set = sample_rankings(m, 20000, rng);
  const MomentStats st = estimate_from_samples(set);
  double s2 = 0, s3 = 0;
  for (int i = 0; i < 8; ++i)
    for (int j = i + 1; j < 8; ++j) s2 += st.p2(i, j);
  st.for_each_p3([&](int, int, int, double v) { s3 += v; });
  CHECK(std::abs(st.p1.sum() - 1) < 1e-6);
  CHECK(std::abs(s2 - 1) < 1e-6);
  CHECK(std::abs(s3 - 1) < 1e-6);
  MomentCounts a(8), b(8), c(8);
  a.add(set, 0, 7000);
  b.add(set, 7000, 13000);
  c.add(set, 13000, set.size());
  a.merge(c);
  a.merge(b);
  const MomentStats merged = a.finish();
  CHECK(merged.p1 == st.p1);
  CHECK(merged.p2 == st.p2);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      for (int k = 0; k < 8; ++k) CHECK(merged.p3(i, j, k) == st.p3(i, j, k));
  // Shuffling the sample order does not change the statistics.
  RankingSet rev(8);
  for (std::size_t s = set.size(); s-- > 0;) rev.push_row(set.row(s));
  const MomentStats sr = estimate_from_samples(rev);
  CHECK(sr.p2 == st.p2);
}

TEST_CASE("empirical moments converge to the closed form (n=8, N=1e6)") {
  Rng rng(6);
  const MallowsMixture m = random_mixture(8, rng);
  const MomentStats est = estimate_from_samples(sample_rankings(m, 1000000, rng));
  const MomentStats ex = closed_form(m);
  const double rate = 3 * std::sqrt(std::log(8.0) / 1e6);
  double worst = (est.p1 - ex.p1).cwiseAbs().maxCoeff();
  worst = std::max(worst, (est.p2 - ex.p2).cwiseAbs().maxCoeff());
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      for (int k = 0; k < 8; ++k) worst = std::max(worst, std::abs(est.p3(i, j, k) - ex.p3(i, j, k)));
  CHECK(worst < rate);
}

TEST_CASE("weighted exact sets reproduce the closed form") {
  Rng rng(10);
  const MallowsMixture m = random_mixture(6, rng);
  const MomentStats a = estimate_from_samples(from_distribution(exact_mixture_distribution(m)));
  const MomentStats b = closed_form(m);
  CHECK(a.exact());
  CHECK((a.p1 - b.p1).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.p2 - b.p2).cwiseAbs().maxCoeff() < 1e-12);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      for (int k = 0; k < 6; ++k) CHECK(std::abs(a.p3(i, j, k) - b.p3(i, j, k)) < 1e-12);
}

TEST_CASE("sparse and analytic modes above the dense limit") {
  Rng rng(12);
  const int n = 40;
  const MallowsMixture m(0.4, MallowsModel(0.5, random_permutation(n, rng)), MallowsModel(0.3, random_permutation(n, rng)));
  const MomentStats ex = closed_form(m);
  CHECK(!ex.dense());
  const Eigen::VectorXd x = representative_vector(m.m1()), y = representative_vector(m.m2());
  CHECK(ex.p3(3, 7, 11) ==
        Approx(0.4 * c3(0.5, n) * x[3] * x[7] * x[11] + 0.6 * c3(0.3, n) * y[3] * y[7] * y[11]).epsilon(1e-13));
  const MomentStats est = estimate_from_samples(sample_rankings(m, 50000, rng));
  double s3 = 0;
  est.for_each_p3([&](int, int, int, double v) { s3 += v; });
  CHECK(std::abs(s3 - 1) < 1e-9);
}

TEST_CASE("moment cache round trip") {
  Rng rng(13);
  const MallowsMixture m = random_mixture(7, rng);
  const RankingSet set = sample_rankings(m, 5000, rng);
  const MomentStats st = estimate_from_samples(set);
  const std::string path = "moment_cache_test.bin";
  save_moment_cache(path, st, digest(set));
  const auto back = load_moment_cache(path, digest(set), false);
  REQUIRE(back.has_value());
  CHECK(back->p1 == st.p1);
  CHECK(back->p2 == st.p2);
  CHECK(*back->sample_count == 5000);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j)
      for (int k = 0; k < 7; ++k) CHECK(back->p3(i, j, k) == st.p3(i, j, k));
  CHECK_FALSE(load_moment_cache(path, digest(set) + 1, false).has_value());
  CHECK_FALSE(load_moment_cache(path, digest(set), true).has_value());
  std::remove(path.c_str());
}
