#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mallows_mix/errors.hpp"
#include "mallows_mix/harness.hpp"
#include "mallows_mix/io.hpp"
#include "mallows_mix/verify.hpp"

using namespace mallows_mix;
using doctest::Approx;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.n = 6;
  c.samples = 20000;
  c.distances = {0, 15};
  c.trials = 2;
  c.seed = 42;
  return c;
}

}  // namespace

TEST_CASE("generate_instance extremes and ranges") {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    int redraws = -1;
    const MallowsMixture m0 = generate_instance(10, 0, rng, {}, &redraws);
    CHECK(redraws >= 0);
    CHECK(m0.m1().central() == Permutation::identity(10));
    CHECK(m0.m2().central() == Permutation::identity(10));
    CHECK(m0.w1() >= 0.05);
    CHECK(m0.w1() <= 0.95);
    const MallowsMixture m45 = generate_instance(10, 45, rng);
    CHECK(m45.m2().central() == Permutation::reversed(10));
    const MallowsMixture m8 = generate_instance(10, 8, rng);
    CHECK(kendall_tau(m8.m1().central(), m8.m2().central()) == 8);
  }
  CHECK_THROWS_AS(generate_instance(10, 46, rng), DomainError);
  CHECK_THROWS_AS(generate_instance(10, -1, rng), DomainError);
}

TEST_CASE("dispersion draws follow exp(-U[0,5])") {
  Rng rng(2);
  std::vector<double> phis;
  for (int t = 0; t < 20000; ++t) {
    const MallowsMixture m = generate_instance(4, 1, rng);
    phis.push_back(m.m1().phi());
    phis.push_back(m.m2().phi());
  }
  const auto [lo, hi] = std::minmax_element(phis.begin(), phis.end());
  CHECK(*lo >= std::exp(-5.0));
  CHECK(*hi <= 1.0);
  std::nth_element(phis.begin(), phis.begin() + phis.size() / 2, phis.end());
  CHECK(phis[phis.size() / 2] == Approx(std::exp(-2.5)).epsilon(0.05));
}

TEST_CASE("score_success is label-symmetric and exact") {
  const MallowsMixture truth(0.3, MallowsModel(0.2, Permutation::identity(5)),
                             MallowsModel(0.6, Permutation({4, 3, 2, 1, 0})));
  LearnedMixture r;
  r.w1 = 0.7;
  r.w2 = 0.3;
  r.phi1 = 0.6;
  r.phi2 = 0.2;
  r.pi1 = Permutation({4, 3, 2, 1, 0});
  r.pi2 = Permutation::identity(5);
  CHECK(score_success(truth, r));
  const ParameterErrors e = parameter_errors(truth, r);
  CHECK(e.swapped);
  CHECK(e.w1 == Approx(0.0));
  CHECK(e.phi1 == Approx(0.0));

  r.pi2 = Permutation({1, 0, 2, 3, 4});
  CHECK_FALSE(score_success(truth, r));
  r.phi1 = 0.61;
  const ParameterErrors close = parameter_errors(truth, r);
  CHECK(close.swapped);
  CHECK(close.phi2 == Approx(0.01));
}

TEST_CASE("derived seeds separate streams") {
  CHECK(derive_seed(1, 0, 0, 0) != derive_seed(1, 0, 0, 1));
  CHECK(derive_seed(1, 0, 1, 0) != derive_seed(1, 1, 0, 0));
  CHECK(derive_seed(1, 2, 3, 1) == derive_seed(1, 2, 3, 1));
  CHECK(derive_seed(1, 2, 3, 1) != derive_seed(2, 2, 3, 1));
}

TEST_CASE("experiment config parsing") {
  const Json j = Json::parse(R"({"n": 6, "samples": 1000, "distances": [0, 3], "trials": 2, "seed": 9,
                                 "learners": ["spectral"], "learner": {"rounds": 5}, "em": {"max_iters": 10}})");
  const ExperimentConfig c = experiment_config_from_json(j);
  CHECK(c.n == 6);
  CHECK(c.samples == 1000);
  CHECK(c.distances == std::vector<int>{0, 3});
  CHECK(c.learners == std::vector<LearnerKind>{LearnerKind::spectral});
  CHECK(c.learner.rounds == 5);
  CHECK(c.em.max_iters == 10);
  CHECK_THROWS_AS(experiment_config_from_json(Json::parse(R"({"bogus": 1})")), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json(Json::parse(R"({"n": 6, "distances": [16]})")), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json(Json::parse(R"({"learners": ["magic"]})")), ConfigError);
  CHECK_THROWS_AS(learner_config_from_json(Json::parse(R"({"eps3": 1})")), ConfigError);
}

TEST_CASE("json round trips") {
  const MallowsMixture m(0.25, MallowsModel(0.125, Permutation({2, 0, 1})), MallowsModel(0.7, Permutation({1, 2, 0})));
  const Json j = to_json(m);
  CHECK(j["pi1"] == Json::array({3, 1, 2}));
  const MallowsMixture back = mixture_from_json(j);
  CHECK(back.w1() == 0.25);
  CHECK(back.m2().phi() == 0.7);
  CHECK(back.m1().central() == m.m1().central());

  LearnedMixture r;
  r.w1 = 0.1 + 0.2;  // not exactly representable; must survive the round trip
  r.w2 = 1.0 - r.w1;
  r.phi1 = 1.0 / 3.0;
  r.phi2 = 0.5;
  r.pi1 = Permutation({0, 1, 2});
  r.pi2 = Permutation({2, 1, 0});
  r.path = LearnPath::pivot;
  r.diagnostics.rounds.push_back({{0.1, 0.2, 0.3}, 1e-9, 0.5, "accepted"});
  r.diagnostics.note = "x";
  const LearnedMixture rb = learned_from_json(Json::parse(to_json(r).dump()));
  CHECK(rb.w1 == r.w1);
  CHECK(rb.phi1 == r.phi1);
  CHECK(rb.pi2 == r.pi2);
  CHECK(rb.path == LearnPath::pivot);
  CHECK(rb.diagnostics.rounds.size() == 1);
  CHECK(rb.diagnostics.rounds[0].outcome == "accepted");
}

TEST_CASE("run_experiment is deterministic and ordered") {
  const ExperimentConfig cfg = small_config();
  const ExperimentResult a = run_experiment(cfg);
  ExperimentConfig threaded = cfg;
  threaded.threads = 3;
  const ExperimentResult b = run_experiment(threaded);
  REQUIRE(a.trials.size() == 8);
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    CHECK(a.trials[i].instance.distance == cfg.distances[i / 4]);
    CHECK(a.trials[i].instance.trial == static_cast<int>(i / 2 % 2));
    CHECK(a.trials[i].learner == (i % 2 ? LearnerKind::em : LearnerKind::spectral));
  }
  CHECK(results_json(a).dump() == results_json(b).dump());
  CHECK(results_csv(a) == results_csv(b));

  const auto dir = std::filesystem::temp_directory_path() / "mallows_mix_harness_test";
  std::filesystem::remove_all(dir);
  write_experiment(a, (dir / "one").string());
  write_experiment(b, (dir / "two").string());
  for (const char* f : {"results.json", "results.csv"}) CHECK(slurp(dir / "one" / f) == slurp(dir / "two" / f));
  CHECK(std::filesystem::exists(dir / "one" / "metadata.json"));
  const std::string csv = slurp(dir / "one" / "results.csv");
  CHECK(csv.rfind("distance,learner,trials,success_rate,mean_abs_dw,mean_abs_dphi\n", 0) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("a trial's record reproduces it in isolation") {
  ExperimentConfig cfg = small_config();
  cfg.learners = {LearnerKind::spectral};
  const ExperimentResult res = run_experiment(cfg);
  const TrialResult& t = res.trials.back();
  Rng rng(t.instance.seed);
  const MallowsMixture m = generate_instance(cfg.n, t.instance.distance, rng);
  CHECK(m.w1() == t.instance.mixture->w1());
  CHECK(m.m2().central() == t.instance.mixture->m2().central());
  const RankingSet s = sample_rankings(m, cfg.samples, rng);
  LearnerConfig lc;
  lc.seed = t.learner_seed;
  const LearnedMixture r = learn(s, lc);
  CHECK(r.pi1 == t.recovered.pi1);
  CHECK(r.w1 == t.recovered.w1);

  // Adding a learner leaves the other learner's rows untouched.
  cfg.learners = {LearnerKind::em, LearnerKind::spectral};
  const ExperimentResult both = run_experiment(cfg);
  CHECK(to_json(both.trials.back().recovered).dump() == to_json(t.recovered).dump());
}

TEST_CASE("learner failures are recorded, not thrown") {
  ExperimentConfig cfg = small_config();
  cfg.samples = 3;
  cfg.distances = {4};
  cfg.trials = 1;
  ExperimentResult res;
  CHECK_NOTHROW(res = run_experiment(cfg));
  REQUIRE(res.trials.size() == 2);
  for (const auto& t : res.trials)
    if (!t.error.empty()) CHECK_FALSE(t.success);
}

TEST_CASE("verify suite notices a broken partition function") {
  VerifyOptions opts;
  opts.z_partition_scale = 1.01;
  const VerifyReport bad = verify_suite(opts);
  const auto it = std::find_if(bad.properties.begin(), bad.properties.end(),
                               [](const PropertyResult& p) { return p.name == "moment_identity_vs_enumeration"; });
  REQUIRE(it != bad.properties.end());
  CHECK_FALSE(it->passed);
  CHECK_FALSE(bad.passed());
}
