#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mallows_mix/numeric.hpp"
#include "mallows_mix/spectral_learner.hpp"

namespace mallows_mix {

namespace {

// Fraction of the gap between consecutive powers phi^r/Z within which a statistic joins group r.
constexpr double kGroupWindow = 0.3;

double effective_count(const RankingSet& set) {
  if (!set.weighted()) return static_cast<double>(set.size());
  return std::numeric_limits<double>::infinity();
}

// Maps the learned order on `rem` (local ids) back to global ids after `prefix`.
Permutation lift(const std::vector<int>& prefix, const std::vector<int>& rem, const Permutation& local) {
  std::vector<int> order(prefix);
  for (int p = 0; p < local.size(); ++p) order.push_back(rem[local[p]]);
  return Permutation(std::move(order));
}

// Drops ids >= m (artificial elements) from a permutation over m + k elements.
Permutation strip_artificial(const Permutation& p, int m) {
  std::vector<int> order;
  for (int e : p.order())
    if (e < m) order.push_back(e);
  return Permutation(std::move(order));
}

LearnedMixture fail_result(int n, std::string note, LearnDiagnostics diag) {
  LearnedMixture out;
  out.pi1 = Permutation::identity(n);
  out.pi2 = Permutation::identity(n);
  out.path = LearnPath::degenerate_fail;
  diag.note = std::move(note);
  out.diagnostics = std::move(diag);
  return out;
}

double second_singular_value(const Eigen::MatrixXd& m) {
  if (std::min(m.rows(), m.cols()) < 2) return 0.0;
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()[1];
}

// Branch (3): aligned prefixes differing in one swapped pair. Works on the reduced samples
// (common prefix projected out). Returns local-id rankings or a failure note.
struct AlignedResult {
  std::optional<RecoveredRankings> rankings;
  double w1 = 0.5;
  std::string note;
  int prefix_len = 0;
};

AlignedResult aligned_branch(const RankingSet& reduced, double phi, const ResolvedConfig& config,
                             LearnDiagnostics& diag) {
  AlignedResult res;
  const int m = reduced.n();
  const double z = z_single(m, phi);
  const Eigen::VectorXd p = first_place_frequencies(reduced);
  const double threshold = config.noise_floor;

  int levels = 0;
  while (levels < m && std::pow(phi, levels) / z >= threshold) ++levels;
  std::vector<std::vector<int>> groups(levels);
  std::vector<int> unmatched, large;
  std::vector<int> level_of(m, -1);
  for (int i = 0; i < m; ++i) {
    if (p[i] < threshold) continue;
    large.push_back(i);
    int r = static_cast<int>(std::lround(std::log(std::max(p[i] * z, 1e-300)) / std::log(phi)));
    r = std::clamp(r, 0, std::max(levels - 1, 0));
    const double target = std::pow(phi, r) / z;
    if (levels > 0 && std::abs(p[i] - target) <= kGroupWindow * target * (1 - phi)) {
      groups[r].push_back(i);
      level_of[i] = r;
    } else {
      unmatched.push_back(i);
    }
  }
  std::vector<int> bad(unmatched);
  std::vector<int> slot1(levels, -1), slot2(levels, -1);
  for (int r = 0; r < levels; ++r) {
    if (groups[r].size() == 1) {
      slot1[r] = slot2[r] = groups[r][0];
    } else {
      bad.insert(bad.end(), groups[r].begin(), groups[r].end());
    }
  }
  if (bad.size() < 2 || bad.size() > 4) {
    res.note = "aligned branch: |I_bad| = " + std::to_string(bad.size());
    return res;
  }
  if (slot1[0] >= 0) {
    res.note = "aligned branch: first position not ambiguous";
    return res;
  }

  // sigma_2 test on the top-2 statistics picks the swapped pair.
  const MomentStats st = estimate_from_samples(reduced);
  std::vector<int> good;
  for (int r = 0; r < levels; ++r)
    if (slot1[r] >= 0) good.push_back(slot1[r]);
  std::vector<int> sa, sb;
  for (std::size_t k = 0; k < good.size(); ++k) (k % 2 ? sb : sa).push_back(good[k]);
  int i1 = -1, j1 = -1;
  double best = -1.0;
  for (std::size_t a = 0; a < bad.size(); ++a)
    for (std::size_t b = a + 1; b < bad.size(); ++b) {
      std::vector<int> rows(sa), cols(sb);
      rows.push_back(bad[a]);
      cols.push_back(bad[b]);
      Eigen::MatrixXd mm(rows.size(), cols.size());
      for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c) mm(r, c) = st.p2(rows[r], cols[c]);
      double s = second_singular_value(mm);
      if (bad.size() == 2) s = 1.0;
      if (s > best) best = s, i1 = bad[a], j1 = bad[b];
    }
  // Remaining ambiguous elements go to their nearest level in both rankings.
  for (int e : bad) {
    if (e == i1 || e == j1) continue;
    const int r = level_of[e];
    if (r < 0 || slot1[r] >= 0) {
      res.note = "aligned branch: cannot place ambiguous element";
      return res;
    }
    slot1[r] = slot2[r] = e;
  }
  std::vector<int> gaps;
  for (int r = 1; r < levels; ++r)
    if (slot1[r] < 0) gaps.push_back(r);
  if (gaps.size() != 1) {
    res.note = "aligned branch: " + std::to_string(gaps.size()) + " unfilled positions";
    return res;
  }
  const int k = gaps[0];
  // Label so that component 1 carries the larger first-place mass of its top element.
  if (p[j1] > p[i1]) std::swap(i1, j1);
  slot1[0] = i1;
  slot2[0] = j1;
  slot1[k] = j1;
  slot2[k] = i1;
  // Prefixes run until the first unfilled level in either ranking.
  std::vector<int> pre1, pre2;
  for (int r = 0; r < levels && slot1[r] >= 0 && slot2[r] >= 0; ++r) {
    pre1.push_back(slot1[r]);
    pre2.push_back(slot2[r]);
  }

  // Weight by least squares over L: P_i = w x_i + (1 - w) y_i.
  const Eigen::VectorXd x = [&] {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
    for (std::size_t r = 0; r < pre1.size(); ++r) v[pre1[r]] = std::pow(phi, static_cast<double>(r)) / z;
    return v;
  }();
  const Eigen::VectorXd y = [&] {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
    for (std::size_t r = 0; r < pre2.size(); ++r) v[pre2[r]] = std::pow(phi, static_cast<double>(r)) / z;
    return v;
  }();
  double num = 0.0, den = 0.0;
  for (int i : large) {
    const double d = x[i] - y[i];
    num += (p[i] - y[i]) * d;
    den += d * d;
  }
  if (den <= 0.0) {
    res.note = "aligned branch: weight not identifiable";
    return res;
  }
  res.w1 = std::clamp(num / den, 1e-6, 1.0 - 1e-6);
  res.prefix_len = static_cast<int>(pre1.size());

  if (static_cast<int>(pre1.size()) == m) {
    res.rankings = RecoveredRankings{Permutation(pre1), Permutation(pre2), false};
    return res;
  }
  TopKEstimate est;
  est.w1 = res.w1;
  est.w2 = 1.0 - res.w1;
  est.phi1 = est.phi2 = phi;
  est.prefixes.elems1 = pre1;
  est.prefixes.elems2 = pre2;
  est.prefixes.x_hat = x;
  est.prefixes.y_hat = y;
  ResolvedConfig local = config;
  local.n = m;
  res.rankings = recover_rest(reduced, reduced, est, local, &diag);
  if (!res.rankings) res.note = "aligned branch: completion failed";
  return res;
}

}  // namespace

BucketStructure bucket_structure(const MallowsMixture& mix, double threshold) {
  BucketStructure b;
  const Eigen::VectorXd p = mix.w1() * representative_vector(mix.m1()) + mix.w2() * representative_vector(mix.m2());
  std::map<int, std::vector<int>> by_shift;
  for (int i = 0; i < mix.n(); ++i) {
    if (p[i] < threshold) continue;
    b.large.push_back(i);
    by_shift[mix.m1().central().pos(i) - mix.m2().central().pos(i)].push_back(i);
  }
  std::size_t best = 0;
  for (const auto& [shift, elems] : by_shift) {
    b.buckets.emplace_back(shift, elems);
    const bool better = elems.size() > best || (elems.size() == best && std::abs(shift) < std::abs(b.majority));
    if (better) {
      best = elems.size();
      b.majority = shift;
    }
  }
  return b;
}

bool is_degenerate(const MallowsMixture& mix, double threshold, double phi_tol) {
  if (std::abs(mix.m1().phi() - mix.m2().phi()) > phi_tol) return false;
  const BucketStructure b = bucket_structure(mix, threshold);
  for (const auto& [shift, elems] : b.buckets)
    if (shift == b.majority) return elems.size() + 2 >= b.large.size();
  return b.large.size() <= 2;
}

double phi_from_mean_distance(int n, double mean_distance) {
  if (mean_distance <= 0.0) return kPhiMin;
  if (mean_distance >= expected_kt_distance(n, kPhiMax)) return kPhiMax;
  double lo = kPhiMin, hi = kPhiMax;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    (expected_kt_distance(n, mid) < mean_distance ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double fit_phi_to_central(const RankingSet& samples, const Permutation& central) {
  const int n = samples.n();
  std::vector<int> rank(n);
  for (int p = 0; p < n; ++p) rank[central[p]] = p;
  CompensatedSum total;
  std::vector<int> r(n);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const std::uint8_t* row = samples.row(s);
    for (int p = 0; p < n; ++p) r[p] = rank[row[p]];
    int inv = 0;
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) inv += r[a] > r[b];
    total.add(samples.weight(s) * inv);
  }
  return phi_from_mean_distance(n, total.value() / samples.total_weight());
}

std::vector<int> remove_common_prefix(const RankingSet& samples, double phi_hat, const ResolvedConfig& config) {
  const int n = samples.n();
  std::vector<int> prefix;
  std::vector<char> taken(n, 0);
  const double total = samples.total_weight();
  const double count = effective_count(samples);
  std::vector<double> first(n);
  for (int t = 0; t < n; ++t) {
    const int m = n - t;
    if (m == 1) {
      for (int e = 0; e < n; ++e)
        if (!taken[e]) prefix.push_back(e);
      break;
    }
    // First-place frequencies of the samples projected onto the remaining elements.
    std::fill(first.begin(), first.end(), 0.0);
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const std::uint8_t* row = samples.row(s);
      int p = 0;
      while (taken[row[p]]) ++p;
      first[row[p]] += samples.weight(s);
    }
    int best = -1;
    for (int e = 0; e < n; ++e)
      if (!taken[e] && (best < 0 || first[e] > first[best])) best = e;
    const double p_hat = first[best] / total;
    const double expected = 1.0 / z_single(m, phi_hat);
    const double noise = std::isfinite(count) ? 3.0 * std::sqrt(p_hat * (1 - p_hat) / count) / expected : 0.0;
    const double tol = std::max(gain(m, phi_hat) / 10.0, config.prefix_tolerance) + noise;
    if (std::abs(p_hat / expected - 1.0) > tol) break;
    prefix.push_back(best);
    taken[best] = 1;
  }
  return prefix;
}

LearnedMixture handle_degenerate(const RankingSet& samples, double phi_hat, const ResolvedConfig& config, Rng& rng,
                                 DegenerateOptions options) {
  const int n = samples.n();
  LearnDiagnostics diag;
  diag.eps2 = config.eps2;
  diag.noise_floor = config.noise_floor;
  const std::vector<int> prefix = remove_common_prefix(samples, phi_hat, config);
  diag.common_prefix = prefix;

  if (static_cast<int>(prefix.size()) >= n - 1) {
    std::vector<int> order(prefix);
    std::vector<char> in(n, 0);
    for (int e : order) in[e] = 1;
    for (int e = 0; e < n; ++e)
      if (!in[e]) order.push_back(e);
    LearnedMixture out;
    out.pi1 = out.pi2 = Permutation(std::move(order));
    out.phi1 = out.phi2 = fit_phi_to_central(samples, out.pi1);
    out.w1 = out.w2 = 0.5;
    out.path = LearnPath::degenerate_identical;
    out.diagnostics = std::move(diag);
    return out;
  }

  std::vector<int> rem;
  {
    std::vector<char> in(n, 0);
    for (int e : prefix) in[e] = 1;
    for (int e = 0; e < n; ++e)
      if (!in[e]) rem.push_back(e);
  }
  const int m = static_cast<int>(rem.size());
  const RankingSet reduced = project(samples, rem);

  // Branch (2): three artificial elements in front, then the tensor stage once more.
  if (options.try_staggered && !samples.weighted() && m + 3 >= 6) {
    const RankingSet aug = prepend_artificial(reduced, 3, phi_hat, rng);
    const std::size_t N = aug.size();
    const auto b1 = static_cast<std::size_t>(std::llround(config.sample_split[0] * N));
    const auto b2 = static_cast<std::size_t>(std::llround((config.sample_split[0] + config.sample_split[1]) * N));
    const RankingSet cond = aug.slice(b1, b2), comp = aug.slice(b2, N);
    ResolvedConfig local = config;
    local.n = m + 3;
    // Size-dependent thresholds scale with the sampling error of the augmented problem.
    local.sampling_error = 3.0 * std::sqrt(std::log(static_cast<double>(m + 3)) / static_cast<double>(N));
    const double scale = config.sampling_error > 0.0 ? local.sampling_error / config.sampling_error : 1.0;
    local.eps2 *= scale;
    local.noise_floor *= scale;
    local.max_residual *= scale;
    auto stage = detail::run_tensor_stage(estimate_from_samples(aug.slice(0, b1)), cond, comp,
                                          position_frequencies(aug), local, rng, diag);
    if (stage.accepted) {
      LearnedMixture out = std::move(*stage.accepted);
      out.pi1 = lift(prefix, rem, strip_artificial(out.pi1, m));
      out.pi2 = lift(prefix, rem, strip_artificial(out.pi2, m));
      out.path = LearnPath::degenerate_staggered;
      diag.prefix1 = out.diagnostics.prefix1;
      diag.prefix2 = out.diagnostics.prefix2;
      out.diagnostics = std::move(diag);
      return out;
    }
  }

  if (options.try_aligned) {
    AlignedResult a = aligned_branch(reduced, phi_hat, config, diag);
    if (a.rankings) {
      LearnedMixture out;
      out.w1 = a.w1;
      out.w2 = 1.0 - a.w1;
      out.phi1 = out.phi2 = phi_hat;
      out.pi1 = lift(prefix, rem, a.rankings->pi1);
      out.pi2 = lift(prefix, rem, a.rankings->pi2);
      out.path = LearnPath::degenerate_aligned;
      diag.prefix1 = diag.prefix2 = a.prefix_len;
      out.diagnostics = std::move(diag);
      return out;
    }
    return fail_result(n, a.note, std::move(diag));
  }
  return fail_result(n, "no degenerate branch succeeded", std::move(diag));
}

}  // namespace mallows_mix
