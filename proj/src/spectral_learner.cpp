#include "mallows_mix/spectral_learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "mallows_mix/numeric.hpp"

namespace mallows_mix {

namespace {

constexpr double kMinConditionedSamples = 1000.0;
constexpr double kMinDeterminant = 1e-6;
constexpr double kMinFindPiWeight = 1e-3;
constexpr double kExactNoiseFloor = 1e-9;
constexpr double kExactEps2 = 1e-7;
constexpr double kExactFitTolerance = 1e-6;
constexpr int kRefineIterations = 100;
// A refined minority weight below this is a single-component fit, not a mixture.
constexpr double kMinComponentWeight = 0.01;

double clamp_phi(double phi) { return std::clamp(phi, kPhiMin, kPhiMax); }

// Rows = elements, columns = positions; f(pos(e), j) re-indexed by element.
Eigen::MatrixXd component_table(const Permutation& central, double phi) {
  return element_position_table(central, position_prob_matrix(central.size(), phi));
}

// First-place vector with prefix positions only: phi^pos / Z_n(phi), zero elsewhere.
Eigen::VectorXd prefix_first_place(int n, const std::vector<int>& prefix, double phi) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  const double z = z_single(n, phi);
  double w = 1.0;
  for (int e : prefix) {
    f[e] = w / z;
    w *= phi;
  }
  return f;
}

double g_function(int n, double phi, double c) {
  return c * n * n * phi * phi / ((1 - phi) * (1 - phi)) * std::log(static_cast<double>(n));
}

// Orders `rest` by increasing position in `learned`, after `prefix`.
Permutation prefix_then_order(const std::vector<int>& prefix, const Permutation& learned) {
  const int n = learned.size();
  std::vector<char> in_prefix(n, 0);
  for (int e : prefix) in_prefix[e] = 1;
  std::vector<int> order(prefix);
  for (int p = 0; p < n; ++p)
    if (!in_prefix[learned[p]]) order.push_back(learned[p]);
  return Permutation(std::move(order));
}

double effective_size(const RankingSet& set, const ResolvedConfig& config) {
  return config.exact ? std::numeric_limits<double>::infinity() : static_cast<double>(set.size());
}

}  // namespace

std::string_view to_string(LearnPath path) {
  switch (path) {
    case LearnPath::tensor: return "tensor";
    case LearnPath::pivot: return "pivot";
    case LearnPath::degenerate_identical: return "degenerate-identical";
    case LearnPath::degenerate_staggered: return "degenerate-staggered";
    case LearnPath::degenerate_aligned: return "degenerate-aligned";
    case LearnPath::degenerate_fail: return "degenerate-fail";
    case LearnPath::em: return "em";
  }
  return "unknown";
}

LearnPath parse_learn_path(std::string_view text) {
  for (LearnPath p : {LearnPath::tensor, LearnPath::pivot, LearnPath::degenerate_identical,
                      LearnPath::degenerate_staggered, LearnPath::degenerate_aligned, LearnPath::degenerate_fail,
                      LearnPath::em})
    if (to_string(p) == text) return p;
  throw DomainError("unknown learner path: " + std::string(text));
}

void LearnerConfig::validate() const {
  const double split = sample_split[0] + sample_split[1] + sample_split[2];
  if (std::abs(split - 1.0) > 1e-9) throw ConfigError("sample_split must sum to 1");
  for (double s : sample_split)
    if (s <= 0.0) throw ConfigError("sample_split entries must be positive");
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (eps2 && !(*eps2 > 0.0)) throw ConfigError("eps2 must be positive");
  if (rounds && *rounds < 1) throw ConfigError("rounds must be at least 1");
  if (prefix_cap && *prefix_cap < 1) throw ConfigError("prefix_cap must be at least 1");
  if (noise_floor && !(*noise_floor > 0.0)) throw ConfigError("noise_floor must be positive");
  if (max_residual && !(*max_residual > 0.0)) throw ConfigError("max_residual must be positive");
  if (fit_tolerance && !(*fit_tolerance > 0.0)) throw ConfigError("fit_tolerance must be positive");
  if (!(c > 0.0)) throw ConfigError("c must be positive");
  if (!(weight_tolerance >= 0.0)) throw ConfigError("weight_tolerance must be nonnegative");
  if (!(prefix_tolerance > 0.0)) throw ConfigError("prefix_tolerance must be positive");
}

ResolvedConfig resolve(const LearnerConfig& config, int n, std::size_t sample_count, bool exact) {
  config.validate();
  ResolvedConfig r;
  r.n = n;
  r.exact = exact;
  r.sample_count = exact ? 0.0 : static_cast<double>(sample_count);
  r.sampling_error = exact ? 0.0 : 3.0 * std::sqrt(std::log(static_cast<double>(n)) / r.sample_count);
  r.eps = config.eps;
  r.noise_floor = config.noise_floor.value_or(exact ? kExactNoiseFloor : r.sampling_error);
  // Factor-scale gate: sigma_2 of the normalized (u; v) columns must clear ~10x the sampling error.
  r.eps2 = config.eps2.value_or(exact ? kExactEps2 : 10.0 * r.sampling_error);
  r.max_residual = config.max_residual.value_or(exact ? 1e-8 : 0.25 * r.sampling_error);
  // About 6 standard errors of the most variable table entry (f = 1/2).
  r.fit_tolerance = config.fit_tolerance.value_or(exact ? kExactFitTolerance : 3.0 / std::sqrt(r.sample_count));
  r.rounds = config.rounds.value_or(10 * static_cast<int>(std::ceil(std::log2(std::max(n, 2)))));
  r.prefix_cap = config.prefix_cap.value_or(n);
  r.sample_split = config.sample_split;
  r.c = config.c;
  r.weight_tolerance = config.weight_tolerance;
  r.prefix_tolerance = config.prefix_tolerance;
  r.seed = config.seed;
  return r;
}

double estimate_phi(const Eigen::VectorXd& p, double noise_floor) {
  const double floor = std::sqrt(noise_floor);
  std::vector<double> v;
  for (int i = 0; i < p.size(); ++i)
    if (p[i] >= floor) v.push_back(p[i]);
  if (v.size() < 2) throw EstimationError("estimate_phi: fewer than two entries above the floor");
  std::sort(v.rbegin(), v.rend());
  double best = 0.0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) best = std::max(best, v[i + 1] / v[i]);
  return std::clamp(best, std::numeric_limits<double>::min(), kPhiMax);
}

double median_ratio_phi(const Eigen::VectorXd& p, double noise_floor) {
  const double floor = std::sqrt(noise_floor);
  std::vector<double> v;
  for (int i = 0; i < p.size(); ++i)
    if (p[i] >= floor) v.push_back(p[i]);
  if (v.size() < 2) throw EstimationError("median_ratio_phi: fewer than two entries above the floor");
  std::sort(v.rbegin(), v.rend());
  std::vector<double> ratios;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) ratios.push_back(v[i + 1] / v[i]);
  std::nth_element(ratios.begin(), ratios.begin() + ratios.size() / 2, ratios.end());
  return std::clamp(ratios[ratios.size() / 2], std::numeric_limits<double>::min(), kPhiMax);
}

double phi_from_top_frequency(int n, double p_top) {
  if (!(p_top > 0.0)) throw DomainError("phi_from_top_frequency: p_top must be positive");
  const double target = 1.0 / p_top;
  if (target <= z_single(n, kPhiMin)) return kPhiMin;
  if (target >= z_single(n, kPhiMax)) return kPhiMax;
  double lo = kPhiMin, hi = kPhiMax;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    (z_single(n, mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<int> assign_positions(const Eigen::MatrixXd& score, const std::vector<int>& fixed, int* collisions) {
  const int n = static_cast<int>(score.rows());
  std::vector<int> order(n, -1);
  std::vector<char> placed(n, 0);
  for (std::size_t p = 0; p < fixed.size(); ++p) {
    order[p] = fixed[p];
    placed[fixed[p]] = 1;
  }
  std::vector<std::tuple<double, int, int>> cells;
  for (int e = 0; e < n; ++e) {
    if (placed[e]) continue;
    for (int j = static_cast<int>(fixed.size()); j < n; ++j) cells.emplace_back(score(e, j), e, j);
  }
  // Descending score; ties toward the larger adjacent-cell mass, then by index for determinism.
  auto adjacent = [&](int e, int j) {
    double s = 0.0;
    if (j > 0) s += score(e, j - 1);
    if (j + 1 < n) s += score(e, j + 1);
    return s;
  };
  std::sort(cells.begin(), cells.end(), [&](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    const double aa = adjacent(std::get<1>(a), std::get<2>(a)), ab = adjacent(std::get<1>(b), std::get<2>(b));
    if (aa != ab) return aa > ab;
    return std::tie(std::get<1>(a), std::get<2>(a)) < std::tie(std::get<1>(b), std::get<2>(b));
  });
  std::vector<int> best_pos(n, -1);
  if (collisions) {
    for (int e = 0; e < n; ++e) {
      if (placed[e]) continue;
      int arg = static_cast<int>(fixed.size());
      for (int j = arg; j < n; ++j)
        if (score(e, j) > score(e, arg)) arg = j;
      best_pos[e] = arg;
    }
  }
  for (const auto& [s, e, j] : cells) {
    if (placed[e] || order[j] >= 0) continue;
    order[j] = e;
    placed[e] = 1;
    if (collisions && best_pos[e] != j) ++*collisions;
  }
  return order;
}

Permutation learn_single_mallows(const RankingSet& samples) {
  if (samples.empty()) throw EstimationError("learn_single_mallows: no samples");
  return Permutation(assign_positions(position_frequencies(samples)));
}

Permutation find_pi(const RankingSet& samples, const Permutation& pi1, double w1, double w2, double phi1, double,
                    const std::vector<int>& fixed_prefix) {
  if (pi1.size() != samples.n()) throw DomainError("find_pi: size mismatch");
  if (w2 < kMinFindPiWeight) throw EstimationError("find_pi: second weight too small to identify pi2");
  const Eigen::MatrixXd f = position_frequencies(samples);
  const Eigen::MatrixXd f2 = (f - w1 * component_table(pi1, phi1)) / w2;
  return Permutation(assign_positions(f2, fixed_prefix));
}

Eigen::MatrixXd model_position_table(const LearnedMixture& model) {
  return model.w1 * component_table(model.pi1, model.phi1) + (1.0 - model.w1) * component_table(model.pi2, model.phi2);
}

double fit_deviation(const Eigen::MatrixXd& observed, const LearnedMixture& model) {
  return (observed - model_position_table(model)).cwiseAbs().maxCoeff();
}

void refine_parameters(const Eigen::MatrixXd& observed, LearnedMixture& model, bool shared_central) {
  if (model.pi1 == model.pi2 && !shared_central) return;
  const Eigen::Vector3d lo(1e-6, kPhiMin, kPhiMin), hi(1.0 - 1e-6, kPhiMax, kPhiMax);
  auto residual = [&](const Eigen::Vector3d& t) {
    LearnedMixture m = model;
    m.w1 = t[0];
    m.phi1 = t[1];
    m.phi2 = t[2];
    const Eigen::MatrixXd r = model_position_table(m) - observed;
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(r.data(), r.size()));
  };
  Eigen::Vector3d theta(model.w1, model.phi1, model.phi2);
  theta = theta.cwiseMax(lo).cwiseMin(hi);
  Eigen::VectorXd r = residual(theta);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  for (int it = 0; it < kRefineIterations && cost > 0.0; ++it) {
    Eigen::MatrixXd jac(r.size(), 3);
    for (int k = 0; k < 3; ++k) {
      const double h = 1e-7;
      Eigen::Vector3d a = theta, b = theta;
      a[k] = std::min(theta[k] + h, hi[k]);
      b[k] = std::max(theta[k] - h, lo[k]);
      jac.col(k) = (residual(a) - residual(b)) / (a[k] - b[k]);
    }
    const Eigen::Matrix3d jtj = jac.transpose() * jac;
    const Eigen::Vector3d grad = jac.transpose() * r;
    bool improved = false;
    while (lambda < 1e12) {
      Eigen::Matrix3d a = jtj;
      a.diagonal() += lambda * (jtj.diagonal().array() + 1e-12).matrix();
      const Eigen::Vector3d next = (theta - a.ldlt().solve(grad)).cwiseMax(lo).cwiseMin(hi);
      const Eigen::VectorXd rn = residual(next);
      const double cn = rn.squaredNorm();
      if (cn < cost) {
        const double step = (next - theta).cwiseAbs().maxCoeff();
        theta = next;
        r = rn;
        cost = cn;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = step > 1e-14;
        break;
      }
      lambda *= 4.0;
    }
    if (!improved) break;
  }
  model.w1 = theta[0];
  model.w2 = 1.0 - theta[0];
  model.phi1 = theta[1];
  model.phi2 = theta[2];
}

std::optional<TopKEstimate> infer_top_k(const MomentStats& stats, const Partition3& part, const Rank2Decomp& decomp,
                                        const ResolvedConfig& config, std::string* why) {
  const int n = stats.n();
  std::array<double, 3> alpha{}, beta{};
  double w1 = 0.0;
  for (int t = 0; t < 3; ++t) {
    const auto& idx = part.parts[t];
    Eigen::VectorXd p(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) p[k] = stats.p1[idx[k]];
    const Eigen::MatrixXd m = decomp.factor(t);
    const Eigen::Vector2d ab = m.completeOrthogonalDecomposition().solve(p);
    alpha[t] = ab[0];
    beta[t] = ab[1];
    w1 += (ab[0] * decomp.u[t]).lpNorm<1>();
  }
  if (!std::isfinite(w1) || w1 < -config.weight_tolerance || w1 > 1.0 + config.weight_tolerance) {
    if (why) *why = "weight out of range";
    return std::nullopt;
  }
  w1 = std::clamp(w1, 1e-6, 1.0 - 1e-6);
  const double w2 = 1.0 - w1;

  Eigen::VectorXd u = Eigen::VectorXd::Zero(n), v = Eigen::VectorXd::Zero(n);
  for (int t = 0; t < 3; ++t) {
    const auto& idx = part.parts[t];
    for (std::size_t k = 0; k < idx.size(); ++k) {
      u[idx[k]] = std::max(0.0, alpha[t] / w1 * decomp.u[t][k]);
      v[idx[k]] = std::max(0.0, beta[t] / w2 * decomp.v[t][k]);
    }
  }
  auto sorted_desc = [n](const Eigen::VectorXd& x) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return x[a] > x[b]; });
    return order;
  };
  const std::vector<int> ou = sorted_desc(u), ov = sorted_desc(v);
  if (u[ou[0]] <= 0.0 || v[ov[0]] <= 0.0) {
    if (why) *why = "empty component vector";
    return std::nullopt;
  }
  TopKEstimate est;
  est.w1 = w1;
  est.w2 = w2;
  est.phi1 = clamp_phi(u[ou[1]] / u[ou[0]]);
  est.phi2 = clamp_phi(v[ov[1]] / v[ov[0]]);

  const double phi_max = std::max(est.phi1, est.phi2);
  const double gamma = (1 - phi_max) * (1 - phi_max) / (4 * n * phi_max);
  const double w_min = std::min(w1, w2);
  const double log_target = 10 * std::log(static_cast<double>(n)) - 2 * std::log(w_min * gamma);
  auto prefix_len = [&](const Eigen::VectorXd& x, const std::vector<int>& order, double w, double phi) {
    int above = 0;
    for (int e : order)
      if (w * x[e] > config.noise_floor) ++above;
    const double formula = std::ceil(log_target / std::log(1.0 / phi));
    int r = std::min(config.prefix_cap, above);
    if (std::isfinite(formula) && formula >= 1.0 && formula < r) r = static_cast<int>(formula);
    return r;
  };
  const int r1 = prefix_len(u, ou, w1, est.phi1), r2 = prefix_len(v, ov, w2, est.phi2);
  if (r1 < 1 || r2 < 1) {
    if (why) *why = "no prefix above the noise floor";
    return std::nullopt;
  }
  est.prefixes.elems1.assign(ou.begin(), ou.begin() + r1);
  est.prefixes.elems2.assign(ov.begin(), ov.begin() + r2);
  est.prefixes.x_hat = u;
  est.prefixes.y_hat = v;
  return est;
}

std::optional<RecoveredRankings> recover_rest(const RankingSet& conditioning, const RankingSet& completion,
                                              const TopKEstimate& est, const ResolvedConfig& config,
                                              LearnDiagnostics* diag) {
  const int n = completion.n();
  // Work with the longer prefix as component 1 and swap back at the end.
  const bool swapped = est.prefixes.elems1.size() < est.prefixes.elems2.size();
  const double w1 = swapped ? est.w2 : est.w1, w2 = swapped ? est.w1 : est.w2;
  const double phi1 = swapped ? est.phi2 : est.phi1, phi2 = swapped ? est.phi1 : est.phi2;
  const std::vector<int>& pre1 = swapped ? est.prefixes.elems2 : est.prefixes.elems1;
  const std::vector<int>& pre2 = swapped ? est.prefixes.elems1 : est.prefixes.elems2;
  auto finish = [&](Permutation a, Permutation b, bool pivot) {
    if (swapped) std::swap(a, b);
    return RecoveredRankings{std::move(a), std::move(b), pivot};
  };
  int* collisions = diag ? &diag->placement_collisions : nullptr;

  const Eigen::VectorXd f1 = prefix_first_place(n, pre1, phi1);
  const Eigen::VectorXd f2 = prefix_first_place(n, pre2, phi2);
  const double w_min = std::min(w1, w2);

  // Pivot path: an element near the top of one prefix that is negligible in the other.
  auto try_pivot = [&](const std::vector<int>& pre, const Eigen::VectorXd& fa, const Eigen::VectorXd& fb,
                       double phi_a) -> std::optional<Permutation> {
    const std::size_t half = (pre.size() + 1) / 2;
    for (std::size_t k = 0; k < half; ++k) {
      const int e = pre[k];
      if (!(fb[e] < w_min / 16.0 * fa[e] / (n * n * g_function(n, phi_a, config.c)))) continue;
      const RankingSet sub = filter_first(conditioning, e);
      if (sub.empty() || effective_size(sub, config) < kMinConditionedSamples) continue;
      return prefix_then_order(pre, learn_single_mallows(sub));
    }
    return std::nullopt;
  };
  try {
    if (auto p1 = try_pivot(pre1, f1, f2, phi1)) {
      Permutation p2 = find_pi(completion, *p1, w1, w2, phi1, phi2, pre2);
      return finish(std::move(*p1), std::move(p2), true);
    }
    if (auto p2 = try_pivot(pre2, f2, f1, phi2)) {
      Permutation p1 = find_pi(completion, *p2, w2, w1, phi2, phi1, pre1);
      return finish(std::move(p1), std::move(*p2), true);
    }
  } catch (const EstimationError&) {
    return std::nullopt;
  }

  // Linear-system path. e* maximizes |w1 - w1'| sqrt(P_e) among elements whose two
  // first-place estimates differ by more than the noise floor.
  const Eigen::VectorXd p_first = first_place_frequencies(completion);
  int e_star = -1;
  double best = 0.0, w1p_star = 0.0;
  std::vector<int> candidates(pre1);
  for (int e : pre2)
    if (std::find(candidates.begin(), candidates.end(), e) == candidates.end()) candidates.push_back(e);
  for (int e : candidates) {
    if (std::abs(f1[e] - f2[e]) <= config.noise_floor) continue;
    const double w1p = f1[e] > 0.0 ? 1.0 / (1.0 + (w2 / w1) * (f2[e] / f1[e])) : 0.0;
    const double score = std::abs(w1 - w1p) * std::sqrt(std::max(p_first[e], 0.0));
    if (std::abs(w1 - w1p) >= kMinDeterminant && score > best) {
      const RankingSet sub = filter_first(conditioning, e);
      if (sub.empty() || effective_size(sub, config) < kMinConditionedSamples) continue;
      best = score;
      e_star = e;
      w1p_star = w1p;
    }
  }
  if (e_star < 0) return std::nullopt;
  const double w2p = 1.0 - w1p_star;
  const double det = w1 - w1p_star;
  const Eigen::MatrixXd f = position_frequencies(completion);
  const Eigen::MatrixXd fc = position_frequencies(filter_first(conditioning, e_star));
  const Eigen::MatrixXd f1_hat = (w2p * f - w2 * fc) / det;
  Permutation p1(assign_positions(f1_hat, pre1, collisions));
  try {
    Permutation p2 = find_pi(completion, p1, w1, w2, phi1, phi2, pre2);
    return finish(std::move(p1), std::move(p2), false);
  } catch (const EstimationError&) {
    return std::nullopt;
  }
}

namespace detail {

TensorStageResult run_tensor_stage(const MomentStats& stats, const RankingSet& conditioning,
                                   const RankingSet& completion, const Eigen::MatrixXd& observed,
                                   const ResolvedConfig& config, Rng& rng, LearnDiagnostics& diag) {
  const int n = stats.n();
  TensorStageResult out;
  const int min_part = n >= 6 ? 2 : 1;
  for (int round = 0; round < config.rounds; ++round) {
    Partition3 part = random_partition(n, rng);
    while (part.min_size() < min_part) part = random_partition(n, rng);
    RoundRecord rec;
    if (part.sa().size() < 2 || part.sb().size() < 2) {
      rec.outcome = "partition too small";
      diag.rounds.push_back(rec);
      continue;
    }
    const MomentTensor3 t = build_tensor(stats, part);
    const Rank2Decomp d = decompose_rank2(t, rng);
    rec.residual = d.residual;
    rec.eigen_gap = d.eigen_gap;
    for (int m = 0; m < 3; ++m) rec.sigma2[m] = d.factor(m).rows() >= 2 ? sigma2(d.factor(m)) : 0.0;
    const double min_s2 = std::min({rec.sigma2[0], rec.sigma2[1], rec.sigma2[2]});
    if (!d.degenerate && min_s2 >= config.eps2 && d.residual > config.max_residual) {
      rec.outcome = "residual gate";
      diag.rounds.push_back(rec);
      continue;
    }
    if (!d.degenerate && min_s2 >= config.eps2) {
      std::string why;
      auto est = infer_top_k(stats, part, d, config, &why);
      if (!est) {
        rec.outcome = "rejected: " + why;
        diag.rounds.push_back(rec);
        continue;
      }
      auto ranks = recover_rest(conditioning, completion, *est, config, &diag);
      if (!ranks) {
        rec.outcome = "rejected: recover-rest failed";
        diag.rounds.push_back(rec);
        continue;
      }
      LearnedMixture cand;
      cand.w1 = est->w1;
      cand.w2 = est->w2;
      cand.phi1 = est->phi1;
      cand.phi2 = est->phi2;
      cand.pi1 = std::move(ranks->pi1);
      cand.pi2 = std::move(ranks->pi2);
      cand.path = ranks->pivot ? LearnPath::pivot : LearnPath::tensor;
      refine_parameters(observed, cand);
      const double dev = fit_deviation(observed, cand);
      cand.diagnostics.fit_deviation = dev;
      cand.diagnostics.prefix1 = static_cast<int>(est->prefixes.elems1.size());
      cand.diagnostics.prefix2 = static_cast<int>(est->prefixes.elems2.size());
      if (std::min(cand.w1, cand.w2) < kMinComponentWeight) {
        rec.outcome = "rejected: vanishing component weight";
        diag.rounds.push_back(rec);
        continue;
      }
      if (dev <= config.fit_tolerance) {
        rec.outcome = "accepted";
        diag.rounds.push_back(rec);
        out.accepted = std::move(cand);
        return out;
      }
      rec.outcome = "rejected: fit deviation " + std::to_string(dev);
      diag.rounds.push_back(rec);
      if (!out.best || dev < out.best->diagnostics.fit_deviation) out.best = std::move(cand);
      continue;
    }
    rec.outcome = "sigma2 gate";
    diag.rounds.push_back(rec);
    // Dispersion estimates from the parts whose factor matrix looks rank-1.
    std::vector<double> local;
    int low = 0;
    for (int m = 0; m < 3; ++m) low += rec.sigma2[m] < config.eps2;
    for (int m = 0; m < 3; ++m) {
      if (low < 3 && rec.sigma2[m] >= config.eps2) continue;
      const auto& idx = part.parts[m];
      Eigen::VectorXd p(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) p[k] = stats.p1[idx[k]];
      try {
        local.push_back(estimate_phi(p, config.noise_floor));
      } catch (const EstimationError&) {
      }
    }
    if (!local.empty()) {
      std::sort(local.begin(), local.end());
      out.phi_estimates.push_back(local[local.size() / 2]);
    }
  }
  return out;
}

}  // namespace detail

namespace {

LearnedMixture learn_impl(const RankingSet& samples, const ResolvedConfig& config, const MomentStats* given);

// Thresholds for a sub-problem of size m on `count` samples, scaled like the sampling error.
ResolvedConfig rescale(const ResolvedConfig& config, int m, double count) {
  ResolvedConfig local = config;
  local.n = m;
  if (config.exact) return local;
  local.sample_count = count;
  local.sampling_error = 3.0 * std::sqrt(std::log(static_cast<double>(m)) / count);
  const double scale = local.sampling_error / config.sampling_error;
  local.eps2 *= scale;
  local.noise_floor *= scale;
  local.max_residual *= scale;
  local.fit_tolerance *= std::sqrt(config.sample_count / count);
  return local;
}

// One central shared by both components with different spreads, refined from a few splits
// of the single-component phi.
std::optional<LearnedMixture> shared_central_candidate(const RankingSet& samples, const Eigen::MatrixXd& observed) {
  const Permutation pi = learn_single_mallows(samples);
  const double phi = clamp_phi(fit_phi_to_central(samples, pi));
  std::optional<LearnedMixture> best;
  for (double lo : {0.1, 0.5}) {
    LearnedMixture cand;
    cand.pi1 = cand.pi2 = pi;
    cand.w1 = cand.w2 = 0.5;
    cand.phi1 = clamp_phi(lo * phi);
    cand.phi2 = clamp_phi(std::min(2.0 * phi, 0.5 * (1.0 + phi)));
    cand.path = LearnPath::degenerate_identical;
    cand.diagnostics.note = "shared central with two spreads";
    refine_parameters(observed, cand, true);
    if (std::min(cand.w1, cand.w2) < kMinComponentWeight) continue;
    cand.diagnostics.fit_deviation = fit_deviation(observed, cand);
    if (!best || cand.diagnostics.fit_deviation < best->diagnostics.fit_deviation) best = std::move(cand);
  }
  return best;
}

// Conditions on each of the two most frequent first elements and learns one central from
// each conditioned set. This is the pivot idea without a tensor stage; it covers sharp
// components whose top-3 sets coincide, where the tensor is numerically rank-1.
std::optional<LearnedMixture> two_pivot_candidate(const RankingSet& samples, const ResolvedConfig& config,
                                                  const Eigen::MatrixXd& observed) {
  const int n = samples.n();
  const Eigen::VectorXd first = first_place_frequencies(samples);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return first[a] > first[b]; });
  const int a = order[0], b = order[1];
  if (first[b] <= config.noise_floor) return std::nullopt;
  std::array<Permutation, 2> centrals;
  std::array<double, 2> phis{}, weights{};
  for (int k = 0; k < 2; ++k) {
    const int e = k == 0 ? a : b;
    const RankingSet sub = filter_first(samples, e);
    if (!config.exact && static_cast<double>(sub.size()) < kMinConditionedSamples) return std::nullopt;
    centrals[k] = learn_single_mallows(sub);
    // Conditioning on the top element leaves Mallows(phi) over the rest.
    std::vector<int> rest;
    for (int p = 1; p < n; ++p) rest.push_back(centrals[k][p]);
    std::vector<int> local(n - 1);
    std::iota(local.begin(), local.end(), 0);
    phis[k] = clamp_phi(fit_phi_to_central(project(sub, rest), Permutation(local)));
    weights[k] = first[e] * z_single(n, phis[k]);
  }
  if (centrals[0] == centrals[1]) return std::nullopt;
  LearnedMixture cand;
  cand.w1 = weights[0] / (weights[0] + weights[1]);
  cand.w2 = 1.0 - cand.w1;
  cand.phi1 = phis[0];
  cand.phi2 = phis[1];
  cand.pi1 = std::move(centrals[0]);
  cand.pi2 = std::move(centrals[1]);
  cand.path = LearnPath::pivot;
  cand.diagnostics.note = "centrals learned from the two most frequent first elements";
  refine_parameters(observed, cand);
  if (std::min(cand.w1, cand.w2) < kMinComponentWeight) return std::nullopt;
  cand.diagnostics.fit_deviation = fit_deviation(observed, cand);
  return cand;
}

// Conditions on the most frequent first element, learns the remaining elements as a mixture
// of their own and puts the element back in front of both centrals. Restricting a Mallows
// sample that starts with its central's top element leaves a Mallows sample over the rest,
// so this is exact when both components share their top element.
std::optional<LearnedMixture> shared_top_candidate(const RankingSet& samples, const ResolvedConfig& config,
                                                   const Eigen::MatrixXd& observed) {
  const int n = samples.n();
  if (n - 1 < 5) return std::nullopt;
  const Eigen::VectorXd first = first_place_frequencies(samples);
  int top = 0;
  first.maxCoeff(&top);
  const RankingSet sub = filter_first(samples, top);
  if (!config.exact && static_cast<double>(sub.size()) < kMinConditionedSamples) return std::nullopt;
  std::vector<int> rest;
  for (int e = 0; e < n; ++e)
    if (e != top) rest.push_back(e);
  const RankingSet reduced = project(sub, rest);
  ResolvedConfig local = rescale(config, n - 1, static_cast<double>(sub.size()));
  local.seed = config.seed ^ 0x5851f42d4c957f2dULL;
  LearnedMixture r = learn_impl(reduced, local, nullptr);
  if (r.path == LearnPath::degenerate_fail) return std::nullopt;
  auto lift = [&](const Permutation& p) {
    std::vector<int> order{top};
    for (int k = 0; k < p.size(); ++k) order.push_back(rest[p[k]]);
    return Permutation(std::move(order));
  };
  LearnedMixture cand;
  cand.w1 = r.w1;
  cand.w2 = r.w2;
  cand.phi1 = r.phi1;
  cand.phi2 = r.phi2;
  cand.pi1 = lift(r.pi1);
  cand.pi2 = lift(r.pi2);
  cand.path = r.path;
  cand.diagnostics.common_prefix.push_back(top);
  for (int e : r.diagnostics.common_prefix) cand.diagnostics.common_prefix.push_back(rest[e]);
  cand.diagnostics.prefix1 = r.diagnostics.prefix1;
  cand.diagnostics.prefix2 = r.diagnostics.prefix2;
  cand.diagnostics.note = "learned after conditioning on the shared top element";
  if (!(cand.pi1 == cand.pi2)) refine_parameters(observed, cand);
  if (std::min(cand.w1, cand.w2) < kMinComponentWeight && !(cand.pi1 == cand.pi2)) return std::nullopt;
  cand.diagnostics.fit_deviation = fit_deviation(observed, cand);
  return cand;
}

LearnedMixture learn_impl(const RankingSet& samples, const ResolvedConfig& config, const MomentStats* given) {
  Rng rng(config.seed);
  LearnDiagnostics diag;

  // Exact (weighted) inputs feed every stage from the full distribution.
  RankingSet moment_set, conditioning, completion;
  const RankingSet* mset = &samples;
  const RankingSet* cset = &samples;
  const RankingSet* fset = &samples;
  if (!config.exact) {
    const std::size_t N = samples.size();
    const auto b1 = static_cast<std::size_t>(std::llround(config.sample_split[0] * N));
    const auto b2 = static_cast<std::size_t>(std::llround((config.sample_split[0] + config.sample_split[1]) * N));
    moment_set = samples.slice(0, b1);
    conditioning = samples.slice(b1, b2);
    completion = samples.slice(b2, N);
    mset = &moment_set;
    cset = &conditioning;
    fset = &completion;
  }
  const MomentStats stats = given ? *given : estimate_from_samples(*mset);
  const Eigen::MatrixXd observed = position_frequencies(samples);

  auto stage = detail::run_tensor_stage(stats, *cset, *fset, observed, config, rng, diag);
  auto finish = [&](LearnedMixture out) {
    for (auto& r : diag.rounds) out.diagnostics.rounds.push_back(std::move(r));
    out.diagnostics.eps2 = config.eps2;
    out.diagnostics.noise_floor = config.noise_floor;
    out.diagnostics.placement_collisions += diag.placement_collisions;
    return out;
  };
  if (stage.accepted) return finish(std::move(*stage.accepted));

  std::vector<double> phi_candidates;
  if (!stage.phi_estimates.empty()) {
    auto& v = stage.phi_estimates;
    std::sort(v.begin(), v.end());
    phi_candidates.push_back(v[v.size() / 2]);
  }
  try {
    phi_candidates.push_back(median_ratio_phi(stats.p1, config.noise_floor));
  } catch (const EstimationError&) {
  }
  phi_candidates.push_back(phi_from_top_frequency(stats.p1.size(), stats.p1.maxCoeff()));
  LearnedMixture deg;
  bool have_deg = false;
  std::vector<double> tried;
  for (double phi_hat : phi_candidates) {
    phi_hat = clamp_phi(phi_hat);
    if (std::any_of(tried.begin(), tried.end(), [&](double t) { return std::abs(t - phi_hat) < 1e-3; })) continue;
    tried.push_back(phi_hat);
    Rng branch_rng(config.seed + 0x9e3779b97f4a7c15ULL * tried.size());
    LearnedMixture cand = handle_degenerate(samples, phi_hat, config, branch_rng);
    if (cand.path != LearnPath::degenerate_fail) {
      if (cand.path != LearnPath::degenerate_identical) refine_parameters(observed, cand);
      cand.diagnostics.fit_deviation = fit_deviation(observed, cand);
    }
    const bool better = !have_deg || (deg.path == LearnPath::degenerate_fail && cand.path != LearnPath::degenerate_fail) ||
                        (cand.path != LearnPath::degenerate_fail &&
                         cand.diagnostics.fit_deviation < deg.diagnostics.fit_deviation);
    if (better) deg = std::move(cand);
    have_deg = true;
  }
  const bool deg_ok = deg.path != LearnPath::degenerate_fail;
  std::optional<LearnedMixture> shared;
  if (!deg_ok || deg.diagnostics.fit_deviation > config.fit_tolerance) {
    // Fallbacks for instances the tensor stage cannot separate; each must pass the fit check.
    shared = shared_central_candidate(samples, observed);
      if (!shared || shared->diagnostics.fit_deviation > config.fit_tolerance) {
      auto pivots = two_pivot_candidate(samples, config, observed);
      if (pivots && (!shared || pivots->diagnostics.fit_deviation < shared->diagnostics.fit_deviation))
        shared = std::move(pivots);
    }
    if (!shared || shared->diagnostics.fit_deviation > config.fit_tolerance) {
      auto conditioned = shared_top_candidate(samples, config, observed);
      if (conditioned && (!shared || conditioned->diagnostics.fit_deviation < shared->diagnostics.fit_deviation))
        shared = std::move(conditioned);
    }
    if (shared && shared->diagnostics.fit_deviation <= config.fit_tolerance &&
        (!deg_ok || shared->diagnostics.fit_deviation < deg.diagnostics.fit_deviation))
      return finish(std::move(*shared));
  }
  // Otherwise the best-fitting answer wins, tensor candidates included.
  enum { kDegenerate, kTensor, kShared, kNone } pick = deg_ok ? kDegenerate : kNone;
  double best_dev = deg_ok ? deg.diagnostics.fit_deviation : INFINITY;
  if (stage.best && stage.best->diagnostics.fit_deviation < best_dev) {
    pick = kTensor;
    best_dev = stage.best->diagnostics.fit_deviation;
  }
  if (shared && shared->diagnostics.fit_deviation < best_dev) pick = kShared;
  if (pick == kTensor) {
    LearnedMixture out = std::move(*stage.best);
    out.diagnostics.note = "no round met the fit tolerance; best candidate kept";
    return finish(std::move(out));
  }
  if (pick == kShared) {
    LearnedMixture out = std::move(*shared);
    out.diagnostics.note += "; fit tolerance not met";
    return finish(std::move(out));
  }
  // Degenerate-branch rounds come after the main-stage rounds.
  std::vector<RoundRecord> own = std::move(deg.diagnostics.rounds);
  deg.diagnostics.rounds.clear();
  LearnedMixture out = finish(std::move(deg));
  for (auto& r : own) out.diagnostics.rounds.push_back(std::move(r));
  return out;
}

void check_input(const RankingSet& samples) {
  if (samples.n() < 3) throw DomainError("learn: need n >= 3");
  if (samples.empty()) throw DomainError("learn: no samples");
  if (!samples.weighted() && samples.size() < 1000) throw ConfigError("learn: fewer than 1000 samples");
}

}  // namespace

LearnedMixture learn(const RankingSet& samples, const LearnerConfig& config) {
  check_input(samples);
  return learn_impl(samples, resolve(config, samples.n(), samples.size(), samples.weighted()), nullptr);
}

LearnedMixture learn(const RankingSet& samples, const LearnerConfig& config, const MomentStats& moments) {
  check_input(samples);
  if (moments.n() != samples.n()) throw DomainError("learn: moment size mismatch");
  return learn_impl(samples, resolve(config, samples.n(), samples.size(), samples.weighted()), &moments);
}

}  // namespace mallows_mix
