#include "mallows_mix/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>

#include <boost/math/special_functions/gamma.hpp>

#include "mallows_mix/em_baseline.hpp"
#include "mallows_mix/errors.hpp"
#include "mallows_mix/mixture.hpp"
#include "mallows_mix/moments.hpp"
#include "mallows_mix/numeric.hpp"
#include "mallows_mix/spectral_learner.hpp"
#include "mallows_mix/tensor.hpp"

namespace mallows_mix {

namespace {

PropertyResult upper(std::string name, double measured, double tol, std::string detail = {}) {
  return {std::move(name), measured < tol, measured, tol, false, std::move(detail)};
}

MallowsMixture random_mixture(int n, Rng& rng) {
  const double w = 0.1 + 0.8 * uniform01(rng);
  const double p1 = 0.1 + 0.8 * uniform01(rng);
  const double p2 = 0.1 + 0.8 * uniform01(rng);
  return MallowsMixture(w, MallowsModel(p1, random_permutation(n, rng)), MallowsModel(p2, random_permutation(n, rng)));
}

PropertyResult check_partition_function(int max_n) {
  double worst = 0.0;
  for (int n = 1; n <= max_n; ++n)
    for (double phi : {0.05, 0.3, 0.5, 0.77, 0.95}) {
      const Permutation id = Permutation::identity(n);
      CompensatedSum direct;
      for_each_permutation(n, [&](const Permutation& p) { direct.add(std::pow(phi, kendall_tau(p, id))); });
      worst = std::max(worst, std::abs(z_partition(n, phi) - direct.value()) / direct.value());
    }
  return upper("partition_function_vs_enumeration", worst, 1e-12, "relative, n <= " + std::to_string(max_n));
}

PropertyResult check_position_table(int max_n) {
  double worst = 0.0;
  for (int n = 1; n <= max_n; ++n)
    for (double phi : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const Permutation id = Permutation::identity(n);
      Eigen::MatrixXd marg = Eigen::MatrixXd::Zero(n, n);
      double z = 0.0;
      for_each_permutation(n, [&](const Permutation& p) {
        const double w = std::pow(phi, kendall_tau(p, id));
        z += w;
        for (int j = 0; j < n; ++j) marg(p[j], j) += w;
      });
      marg /= z;
      worst = std::max(worst, (position_prob_table(n, phi).f - marg).cwiseAbs().maxCoeff());
    }
  return upper("position_table_vs_enumeration", worst, 1e-10, "n <= " + std::to_string(max_n));
}

PropertyResult check_position_symmetry(int max_n) {
  double worst = 0.0;
  for (int n = 1; n <= max_n; ++n)
    for (double phi : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const Eigen::MatrixXd f = position_prob_table(n, phi).f;
      worst = std::max(worst, (f - f.transpose()).cwiseAbs().maxCoeff());
    }
  return upper("position_table_symmetry", worst, 1e-12);
}

PropertyResult check_moment_identity(int instances, double z_scale) {
  Rng rng(2024);
  double worst = 0.0;
  for (int t = 0; t < instances; ++t) {
    const int n = 4 + t % 3;
    const MallowsMixture mix = random_mixture(n, rng);
    const MomentStats st = closed_form(mix);
    std::vector<double> p1(n, 0.0), p2(n * n, 0.0), p3(n * n * n, 0.0);
    for_each_permutation(n, [&](const Permutation& p) {
      double pr = 0.0;
      for (const MallowsModel* m : {&mix.m1(), &mix.m2()}) {
        const double w = m == &mix.m1() ? mix.w1() : mix.w2();
        pr += w * std::pow(m->phi(), kendall_tau(p, m->central())) / (z_scale * z_partition(n, m->phi()));
      }
      int a = p[0], b = p[1];
      p1[a] += pr;
      if (a > b) std::swap(a, b);
      p2[a * n + b] += pr;
      int s[3] = {p[0], p[1], p[2]};
      std::sort(s, s + 3);
      p3[(s[0] * n + s[1]) * n + s[2]] += pr;
    });
    for (int i = 0; i < n; ++i) {
      worst = std::max(worst, std::abs(st.p1[i] - p1[i]));
      for (int j = i + 1; j < n; ++j) {
        worst = std::max(worst, std::abs(st.p2(i, j) - p2[i * n + j]));
        for (int k = j + 1; k < n; ++k) worst = std::max(worst, std::abs(st.p3(i, j, k) - p3[(i * n + j) * n + k]));
      }
    }
  }
  return upper("moment_identity_vs_enumeration", worst, 1e-10,
               std::to_string(instances) + " mixtures, n in {4,5,6}");
}

PropertyResult check_inversion_tables(int max_n) {
  int mismatches = 0;
  for (int n = 1; n <= max_n; ++n) {
    const Permutation id = Permutation::identity(n);
    for_each_permutation(n, [&](const Permutation& p) {
      const InversionTable t = encode_inversion_table(p);
      int sum = 0;
      for (int c : t.code) sum += c;
      mismatches += !(decode_inversion_table(t) == p) || sum != kendall_tau(p, id);
    });
  }
  return upper("inversion_table_round_trip", mismatches, 0.5, "mismatching permutations, n <= " + std::to_string(max_n));
}

double align_error(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  const double s = got.dot(want) / got.squaredNorm();
  return (s * got - want).norm() / want.norm();
}

Eigen::VectorXd restrict(const Eigen::VectorXd& x, const std::vector<int>& idx) {
  Eigen::VectorXd r(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) r[k] = x[idx[k]];
  return r;
}

PropertyResult check_rank2_recovery(int instances) {
  Rng rng(77);
  double worst = 0.0;
  int checked = 0;
  while (checked < instances) {
    const int n = 12;
    const MallowsMixture m = random_mixture(n, rng);
    const MomentStats st = closed_form(m);
    const Partition3 part = random_partition(n, rng);
    if (part.min_size() < 2) continue;
    const MomentTensor3 ten = build_tensor(st, part);
    const Rank2Decomp d = decompose_rank2(ten, rng);
    const Eigen::VectorXd x = representative_vector(m.m1()), y = representative_vector(m.m2());
    const bool direct = align_error(d.u[0], restrict(x, part.sa())) < align_error(d.u[0], restrict(y, part.sa()));
    for (int mode = 0; mode < 3; ++mode) {
      const Eigen::VectorXd xs = restrict(x, part.parts[mode]), ys = restrict(y, part.parts[mode]);
      worst = std::max({worst, align_error(d.u[mode], direct ? xs : ys), align_error(d.v[mode], direct ? ys : xs)});
    }
    ++checked;
  }
  return upper("rank2_decomposition_noiseless", worst, 1e-6, "n = 12, relative factor error");
}

PropertyResult check_exact_learning(int n, int instances) {
  Rng rng(404);
  double worst = 0.0;
  int wrong = 0, tried = 0;
  while (tried < instances) {
    const MallowsMixture mix = random_mixture(n, rng);
    if (std::abs(mix.m1().phi() - mix.m2().phi()) < 0.1) continue;
    ++tried;
    const RankingSet exact = from_distribution(exact_mixture_distribution(mix));
    const LearnedMixture r = learn(exact, LearnerConfig{}, closed_form(mix));
    const bool direct = r.pi1 == mix.m1().central() && r.pi2 == mix.m2().central();
    const bool crossed = r.pi1 == mix.m2().central() && r.pi2 == mix.m1().central();
    if (!direct && !crossed) {
      ++wrong;
      continue;
    }
    const double dw = std::abs((direct ? r.w1 : r.w2) - mix.w1());
    const double d1 = std::abs((direct ? r.phi1 : r.phi2) - mix.m1().phi());
    const double d2 = std::abs((direct ? r.phi2 : r.phi1) - mix.m2().phi());
    worst = std::max({worst, dw, d1, d2});
  }
  PropertyResult res = upper("exact_statistics_learning", wrong ? INFINITY : worst, 1e-6,
                             "n = " + std::to_string(n) + ", " + std::to_string(instances) + " mixtures, " +
                                 std::to_string(wrong) + " wrong centrals");
  return res;
}

PropertyResult check_kemeny() {
  Rng rng(5);
  double worst = 0.0;
  for (int t = 0; t < 5; ++t) {
    const int n = 6;
    const MallowsModel model(0.1 + 0.15 * t, random_permutation(n, rng));
    const CompressedRankings data = compress(sample_rankings(model, 1000, rng));
    const Eigen::MatrixXd prec = precedence_matrix(data, data.counts);
    const Permutation local = kemeny_local_search(prec, weighted_borda(prec));
    double best = INFINITY;
    for_each_permutation(n, [&](const Permutation& p) { best = std::min(best, kemeny_cost(prec, p)); });
    worst = std::max(worst, kemeny_cost(prec, local) - best);
  }
  return upper("kemeny_local_search_vs_brute_force", worst, 1e-9, "n = 6, excess cost over the exhaustive optimum");
}

PropertyResult check_em_monotonicity(std::size_t samples) {
  Rng rng(9);
  double worst = 0.0;
  for (int t = 0; t < 3; ++t) {
    const MallowsMixture mix = random_mixture(7, rng);
    const RankingSet data = sample_rankings(mix, samples, rng);
    EMState st;
    EMConfig cfg;
    cfg.max_iters = 50;
    em_learn(data, cfg, rng, &st);
    for (std::size_t i = 1; i < st.loglik_history.size(); ++i) {
      const int prev = static_cast<int>(i) - 1;
      if (std::find(st.reseed_iterations.begin(), st.reseed_iterations.end(), prev) != st.reseed_iterations.end())
        continue;
      worst = std::max(worst, st.loglik_history[prev] - st.loglik_history[i]);
    }
  }
  return upper("em_loglik_monotone", worst, 1e-8, "largest per-iteration decrease");
}

PropertyResult check_sampler_chi_square() {
  Rng rng(99);
  double min_p = 1.0;
  for (double phi : {0.2, 0.5, 0.8}) {
    const MallowsModel m(phi, Permutation({2, 0, 3, 1}));
    const Distribution dist = exact_distribution(m);
    const MallowsSampler sampler(m);
    std::map<std::vector<int>, double> counts;
    const int draws = 200000;
    for (int s = 0; s < draws; ++s) counts[sampler(rng).order()] += 1;
    double x = 0.0;
    for (const auto& [p, pr] : dist) {
      const double e = pr * draws;
      const double o = counts[p.order()];
      x += (o - e) * (o - e) / e;
    }
    min_p = std::min(min_p, boost::math::gamma_q(0.5 * (dist.size() - 1), 0.5 * x));
  }
  return {"sampler_chi_square", min_p > 1e-3, min_p, 1e-3, true, "n = 4, phi in {0.2, 0.5, 0.8}, 2e5 draws"};
}

PropertyResult check_empirical_moments() {
  Rng rng(123);
  const MallowsMixture mix = random_mixture(8, rng);
  const std::size_t N = 1'000'000;
  const MomentStats est = estimate_from_samples(sample_rankings(mix, N, rng));
  const MomentStats exact = closed_form(mix);
  double worst = (est.p1 - exact.p1).cwiseAbs().maxCoeff();
  worst = std::max(worst, (est.p2 - exact.p2).cwiseAbs().maxCoeff());
  for (int i = 0; i < 8; ++i)
    for (int j = i + 1; j < 8; ++j)
      for (int k = j + 1; k < 8; ++k) worst = std::max(worst, std::abs(est.p3(i, j, k) - exact.p3(i, j, k)));
  // Six standard errors of a probability-1/2 frequency.
  return upper("empirical_moments_vs_closed_form", worst, 6.0 * 0.5 / std::sqrt(static_cast<double>(N)),
               "n = 8, N = 1e6");
}

}  // namespace

VerifyLevel parse_verify_level(std::string_view text) {
  if (text == "fast") return VerifyLevel::fast;
  if (text == "full") return VerifyLevel::full;
  throw ConfigError("unknown verify level '" + std::string(text) + "'");
}

bool VerifyReport::passed() const {
  return std::all_of(properties.begin(), properties.end(), [](const PropertyResult& p) { return p.passed; });
}

VerifyReport verify_suite(const VerifyOptions& options) {
  const bool full = options.level == VerifyLevel::full;
  const int max_n = full ? 8 : 7;
  VerifyReport report;
  report.properties.push_back(check_partition_function(max_n));
  report.properties.push_back(check_position_table(max_n));
  report.properties.push_back(check_position_symmetry(max_n));
  report.properties.push_back(check_moment_identity(50, options.z_partition_scale));
  report.properties.push_back(check_inversion_tables(full ? 8 : 6));
  report.properties.push_back(check_rank2_recovery(full ? 50 : 10));
  report.properties.push_back(check_exact_learning(full ? 8 : 6, full ? 20 : 5));
  report.properties.push_back(check_kemeny());
  report.properties.push_back(check_em_monotonicity(full ? 20000 : 3000));
  if (full) {
    report.properties.push_back(check_sampler_chi_square());
    report.properties.push_back(check_empirical_moments());
  }
  return report;
}

void print_report(std::ostream& os, const VerifyReport& report) {
  char buf[64];
  for (const auto& p : report.properties) {
    std::snprintf(buf, sizeof buf, "%.3e %s %.3e", p.measured, p.lower_bound ? ">" : "<", p.tolerance);
    os << (p.passed ? "PASS " : "FAIL ") << p.name << "  " << buf;
    if (!p.detail.empty()) os << "  (" << p.detail << ")";
    os << '\n';
  }
  os << (report.passed() ? "all properties passed" : "some properties failed") << '\n';
}

}  // namespace mallows_mix
