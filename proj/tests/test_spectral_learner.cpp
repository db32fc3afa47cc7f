#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "mallows_mix/errors.hpp"
#include "mallows_mix/spectral_learner.hpp"
#include "oracles.hpp"

using namespace mallows_mix;
using doctest::Approx;

namespace {

MallowsMixture make_mixture(double w, double p1, const Permutation& c1, double p2, const Permutation& c2) {
  return MallowsMixture(w, MallowsModel(p1, c1), MallowsModel(p2, c2));
}

bool same_pair(const LearnedMixture& r, const MallowsMixture& m) {
  return (r.pi1 == m.m1().central() && r.pi2 == m.m2().central()) ||
         (r.pi1 == m.m2().central() && r.pi2 == m.m1().central());
}

LearnedMixture learn_exact(const MallowsMixture& m, LearnerConfig cfg = {}) {
  return learn(from_distribution(exact_mixture_distribution(m)), cfg, closed_form(m));
}

}  // namespace

TEST_CASE("learn path names round trip") {
  for (LearnPath p : {LearnPath::tensor, LearnPath::pivot, LearnPath::degenerate_identical,
                      LearnPath::degenerate_staggered, LearnPath::degenerate_aligned, LearnPath::degenerate_fail,
                      LearnPath::em})
    CHECK(parse_learn_path(to_string(p)) == p);
  CHECK_THROWS(parse_learn_path("bogus"));
}

TEST_CASE("config validation and resolution") {
  LearnerConfig c;
  CHECK_NOTHROW(c.validate());
  c.sample_split = {0.5, 0.5, 0.5};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.eps2 = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.rounds = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  const ResolvedConfig r = resolve(LearnerConfig{}, 10, 5'000'000, false);
  CHECK(r.sampling_error == Approx(3.0 * std::sqrt(std::log(10.0) / 5e6)));
  CHECK(r.eps2 == Approx(10.0 * r.sampling_error));
  CHECK(r.noise_floor == Approx(r.sampling_error));
  CHECK(r.fit_tolerance == Approx(3.0 / std::sqrt(5e6)));
  CHECK(r.rounds == 40);
  const ResolvedConfig e = resolve(LearnerConfig{}, 8, 0, true);
  CHECK(e.exact);
  CHECK(e.fit_tolerance == 1e-6);
}

TEST_CASE("phi estimators on exact representative vectors") {
  for (double phi : {0.2, 0.5, 0.8}) {
    const MallowsModel m(phi, Permutation({3, 1, 0, 2, 5, 4}));
    const Eigen::VectorXd x = representative_vector(m);
    CHECK(estimate_phi(x, 1e-12) == Approx(phi).epsilon(1e-12));
    CHECK(median_ratio_phi(x, 1e-12) == Approx(phi).epsilon(1e-12));
    CHECK(phi_from_top_frequency(6, x.maxCoeff()) == Approx(phi).epsilon(1e-9));
  }
  Eigen::VectorXd one(3);
  one << 1.0, 0.0, 0.0;
  CHECK_THROWS_AS(estimate_phi(one, 1e-6), EstimationError);
}

TEST_CASE("phi from mean distance inverts the expected distance") {
  for (int n : {3, 8, 10})
    for (double phi : {0.05, 0.4, 0.9}) CHECK(phi_from_mean_distance(n, expected_kt_distance(n, phi)) == Approx(phi).epsilon(1e-9));
  CHECK(phi_from_mean_distance(5, 0.0) == kPhiMin);
}

TEST_CASE("greedy assignment respects fixed prefixes") {
  Eigen::MatrixXd s(3, 3);
  s << 0.9, 0.1, 0.0,  //
      0.8, 0.15, 0.05,  //
      0.0, 0.2, 0.8;
  int collisions = 0;
  CHECK(assign_positions(s, {}, &collisions) == std::vector<int>{0, 1, 2});
  CHECK(assign_positions(s, {1}) == std::vector<int>{1, 0, 2});
}

TEST_CASE("infer_top_k recovers weights, dispersions and prefixes from exact moments") {
  Rng rng(8);
  int checked = 0;
  for (int t = 0; t < 40 && checked < 8; ++t) {
    const int n = 12;
    const MallowsMixture m = make_mixture(0.25 + 0.05 * (t % 10), 0.3 + 0.01 * t, random_permutation(n, rng),
                                          0.75 - 0.01 * t, random_permutation(n, rng));
    const MomentStats st = closed_form(m);
    const Partition3 part = random_partition(n, rng);
    if (part.min_size() < 2) continue;
    const Rank2Decomp d = decompose_rank2(build_tensor(st, part), rng);
    const ResolvedConfig cfg = resolve(LearnerConfig{}, n, 0, true);
    const auto est = infer_top_k(st, part, d, cfg);
    REQUIRE(est.has_value());
    const bool direct = std::abs(est->w1 - m.w1()) < std::abs(est->w1 - m.w2());
    CHECK(std::abs((direct ? est->w1 : est->w2) - m.w1()) < 1e-6);
    CHECK(std::abs((direct ? est->phi1 : est->phi2) - m.m1().phi()) < 1e-6);
    CHECK(std::abs((direct ? est->phi2 : est->phi1) - m.m2().phi()) < 1e-6);
    const auto& e1 = direct ? est->prefixes.elems1 : est->prefixes.elems2;
    const auto& e2 = direct ? est->prefixes.elems2 : est->prefixes.elems1;
    CHECK(!e1.empty());
    CHECK(std::equal(e1.begin(), e1.end(), m.m1().central().order().begin()));
    CHECK(std::equal(e2.begin(), e2.end(), m.m2().central().order().begin()));
    ++checked;
  }
  CHECK(checked >= 5);
}

TEST_CASE("model position table and fit deviation") {
  const MallowsMixture m = make_mixture(0.3, 0.4, Permutation::identity(6), 0.6, Permutation({5, 4, 3, 2, 1, 0}));
  LearnedMixture lm;
  lm.w1 = 0.3;
  lm.w2 = 0.7;
  lm.phi1 = 0.4;
  lm.phi2 = 0.6;
  lm.pi1 = m.m1().central();
  lm.pi2 = m.m2().central();
  const Eigen::MatrixXd table = mixture_position_table(m);
  CHECK((model_position_table(lm) - table).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(fit_deviation(table, lm) < 1e-14);

  LearnedMixture off = lm;
  off.w1 = 0.45;
  off.w2 = 0.55;
  off.phi1 = 0.3;
  off.phi2 = 0.7;
  CHECK(fit_deviation(table, off) > 1e-3);
  refine_parameters(table, off);
  CHECK(off.w1 == Approx(0.3).epsilon(1e-8));
  CHECK(off.phi1 == Approx(0.4).epsilon(1e-8));
  CHECK(off.phi2 == Approx(0.6).epsilon(1e-8));
}

TEST_CASE("find_pi recovers the second central from an exact distribution") {
  Rng rng(3);
  const MallowsMixture m = make_mixture(0.4, 0.3, random_permutation(7, rng), 0.5, random_permutation(7, rng));
  const RankingSet exact = from_distribution(exact_mixture_distribution(m));
  CHECK(find_pi(exact, m.m1().central(), 0.4, 0.6, 0.3, 0.5) == m.m2().central());
  const MallowsModel single(0.6, random_permutation(7, rng));
  CHECK(learn_single_mallows(from_distribution(exact_distribution(single))) == single.central());
}

TEST_CASE("exact-statistics learning recovers non-degenerate mixtures") {
  Rng rng(21);
  for (int t = 0; t < 6; ++t) {
    const int n = 6 + t % 2;
    const MallowsMixture m = make_mixture(0.2 + 0.1 * t, 0.25, random_permutation(n, rng), 0.6, random_permutation(n, rng));
    const LearnedMixture r = learn_exact(m);
    REQUIRE(same_pair(r, m));
    const bool direct = r.pi1 == m.m1().central();
    CHECK(std::abs((direct ? r.w1 : r.w2) - m.w1()) < 1e-6);
    CHECK(std::abs((direct ? r.phi1 : r.phi2) - 0.25) < 1e-6);
    CHECK(std::abs((direct ? r.phi2 : r.phi1) - 0.6) < 1e-6);
    CHECK(r.w1 + r.w2 == Approx(1.0));
  }
}

TEST_CASE("identical components go through the common-prefix path") {
  const Permutation c({2, 0, 4, 1, 3, 5});
  const MallowsMixture m = make_mixture(0.5, 0.4, c, 0.4, c);
  CHECK(is_degenerate(m, 1e-3));
  const LearnedMixture r = learn_exact(m);
  CHECK(r.path == LearnPath::degenerate_identical);
  CHECK(r.pi1 == c);
  CHECK(r.pi2 == c);
  CHECK(r.phi1 == Approx(0.4).epsilon(1e-6));
}

TEST_CASE("bucket structure of shifted centrals") {
  const Permutation a = Permutation::identity(8);
  std::vector<int> o = a.order();
  std::rotate(o.begin(), o.begin() + 3, o.end());
  const MallowsMixture m = make_mixture(0.5, 0.5, a, 0.5, Permutation(o));
  const BucketStructure b = bucket_structure(m, 0.0);
  CHECK(b.large.size() == 8);
  CHECK(b.majority == 3);
  CHECK(b.buckets.size() == 2);
  // Five elements move by 3 and three by -5: too many outside the majority bucket...
  CHECK_FALSE(is_degenerate(m, 0.0));
  // ...unless only the heavy elements count.
  CHECK(bucket_structure(m, 0.1).large.size() == 4);
  CHECK(is_degenerate(m, 0.1));
  const MallowsMixture unequal = make_mixture(0.5, 0.5, a, 0.6, Permutation(o));
  CHECK_FALSE(is_degenerate(unequal, 0.1));
}

TEST_CASE("sample-based learning on a separated instance") {
  Rng rng(17);
  const int n = 8;
  const MallowsMixture m = make_mixture(0.35, 0.3, Permutation::identity(n), 0.5, Permutation({7, 6, 5, 4, 3, 2, 1, 0}));
  const RankingSet s = sample_rankings(m, 1'000'000, rng);
  LearnerConfig cfg;
  cfg.seed = 5;
  const LearnedMixture r = learn(s, cfg);
  REQUIRE(same_pair(r, m));
  CHECK((r.path == LearnPath::tensor || r.path == LearnPath::pivot));
  const bool direct = r.pi1 == m.m1().central();
  CHECK(std::abs((direct ? r.w1 : r.w2) - 0.35) < 0.02);
  CHECK(std::abs((direct ? r.phi1 : r.phi2) - 0.3) < 0.02);
  CHECK(std::abs((direct ? r.phi2 : r.phi1) - 0.5) < 0.02);
  CHECK(r.diagnostics.fit_deviation <= resolve(cfg, n, s.size(), false).fit_tolerance);
  // Same seed, same answer.
  const LearnedMixture again = learn(s, cfg);
  CHECK(again.w1 == r.w1);
  CHECK(again.pi1 == r.pi1);
}

TEST_CASE("learn rejects unusable input") {
  CHECK_THROWS(learn(RankingSet(5), LearnerConfig{}));
}
