#include "mallows_mix/em_baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

#include "mallows_mix/numeric.hpp"

namespace mallows_mix {

namespace {

// Below this share of the total weight a component is considered dead and reseeded.
constexpr double kDeadComponentShare = 1e-6;
constexpr double kInitialPhi = 0.5;

int inversions(const std::uint8_t* row, const std::vector<int>& rank, int n) {
  int inv = 0;
  for (int a = 0; a < n; ++a) {
    const int ra = rank[row[a]];
    for (int b = a + 1; b < n; ++b) inv += ra > rank[row[b]];
  }
  return inv;
}

void reseed(EMState& st, int component, int n, Rng& rng) {
  (component == 0 ? st.pi1 : st.pi2) = random_permutation(n, rng);
  (component == 0 ? st.phi1 : st.phi2) = kInitialPhi;
  st.w1 = 0.5;
  st.reseed_iterations.push_back(st.iteration);
}

}  // namespace

double CompressedRankings::total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

CompressedRankings compress(const RankingSet& samples) {
  CompressedRankings out;
  const int n = samples.n();
  out.n = n;
  const std::size_t N = samples.size();
  if (n <= 16) {
    // Pack 4 bits per element; lexicographic order of rows equals numeric order of keys.
    std::vector<std::pair<std::uint64_t, double>> keys(N);
    for (std::size_t s = 0; s < N; ++s) {
      const std::uint8_t* r = samples.row(s);
      std::uint64_t k = 0;
      for (int p = 0; p < n; ++p) k = (k << 4) | r[p];
      keys[s] = {k, samples.weight(s)};
    }
    std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t s = 0; s < N;) {
      std::size_t t = s;
      double c = 0.0;
      while (t < N && keys[t].first == keys[s].first) c += keys[t++].second;
      for (int p = n - 1; p >= 0; --p) out.rows.push_back(static_cast<std::uint8_t>((keys[s].first >> (4 * p)) & 0xF));
      out.counts.push_back(c);
      s = t;
    }
    return out;
  }
  std::vector<std::size_t> idx(N);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(samples.row(a), samples.row(a) + n, samples.row(b), samples.row(b) + n);
  });
  for (std::size_t s = 0; s < N;) {
    std::size_t t = s;
    double c = 0.0;
    while (t < N && std::equal(samples.row(idx[s]), samples.row(idx[s]) + n, samples.row(idx[t])))
      c += samples.weight(idx[t++]);
    out.rows.insert(out.rows.end(), samples.row(idx[s]), samples.row(idx[s]) + n);
    out.counts.push_back(c);
    s = t;
  }
  return out;
}

Eigen::MatrixXd precedence_matrix(const CompressedRankings& data, const std::vector<double>& weights) {
  const int n = data.n;
  Eigen::MatrixXd prec = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t s = 0; s < data.size(); ++s) {
    const double w = weights[s];
    if (w == 0.0) continue;
    const std::uint8_t* r = data.row(s);
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) prec(r[a], r[b]) += w;
  }
  return prec;
}

double kemeny_cost(const Eigen::MatrixXd& prec, const Permutation& pi) {
  const int n = pi.size();
  CompensatedSum cost;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) cost.add(prec(pi[b], pi[a]));
  return cost.value();
}

Permutation weighted_borda(const Eigen::MatrixXd& prec) {
  const int n = static_cast<int>(prec.rows());
  const Eigen::VectorXd score = prec.rowwise().sum();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return score[a] > score[b]; });
  return Permutation(std::move(order));
}

Permutation kemeny_local_search(const Eigen::MatrixXd& prec, const Permutation& start) {
  std::vector<int> order = start.order();
  const int n = static_cast<int>(order.size());
  bool improved = true;
  while (improved) {
    improved = false;
    for (int p = 0; p + 1 < n; ++p) {
      const int a = order[p], b = order[p + 1];
      // Swapping a, b trades disagreement prec(b, a) for prec(a, b).
      if (prec(a, b) < prec(b, a)) {
        std::swap(order[p], order[p + 1]);
        improved = true;
      }
    }
  }
  return Permutation(std::move(order));
}

Permutation weighted_kemeny_local_search(const RankingSet& samples, const std::vector<double>& weights,
                                         const Permutation& start) {
  if (weights.size() != samples.size()) throw DomainError("weighted_kemeny_local_search: weight count mismatch");
  if (start.size() != samples.n()) throw DomainError("weighted_kemeny_local_search: size mismatch");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DomainError("weighted_kemeny_local_search: negative weight");
    total += w;
  }
  if (!(total > 0.0)) throw DomainError("weighted_kemeny_local_search: all weights zero");
  const int n = samples.n();
  Eigen::MatrixXd prec = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const std::uint8_t* r = samples.row(s);
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) prec(r[a], r[b]) += weights[s];
  }
  return kemeny_local_search(prec, start);
}

void EMConfig::validate() const {
  if (max_iters < 1) throw ConfigError("em: max_iters must be at least 1");
  if (!(tol > 0.0)) throw ConfigError("em: tol must be positive");
}

double em_step(const CompressedRankings& data, EMState& st, Rng& rng) {
  const int n = data.n;
  const std::size_t U = data.size();
  const double total = data.total();
  st.responsibilities.resize(static_cast<Eigen::Index>(U), 2);

  std::vector<int> rank1(n), rank2(n);
  for (int e = 0; e < n; ++e) {
    rank1[e] = st.pi1.pos(e);
    rank2[e] = st.pi2.pos(e);
  }
  const double base1 = std::log(st.w1) - std::log(z_partition(n, st.phi1));
  const double base2 = std::log(1.0 - st.w1) - std::log(z_partition(n, st.phi2));
  const double lp1 = std::log(st.phi1), lp2 = std::log(st.phi2);
  CompensatedSum loglik;
  std::vector<double> r1(U), r2(U);
  for (std::size_t s = 0; s < U; ++s) {
    const std::uint8_t* row = data.row(s);
    const double l1 = base1 + inversions(row, rank1, n) * lp1;
    const double l2 = base2 + inversions(row, rank2, n) * lp2;
    const double m = std::max(l1, l2);
    const double lse = m + std::log(std::exp(l1 - m) + std::exp(l2 - m));
    const double g1 = std::exp(l1 - lse);
    st.responsibilities(static_cast<Eigen::Index>(s), 0) = g1;
    st.responsibilities(static_cast<Eigen::Index>(s), 1) = 1.0 - g1;
    r1[s] = data.counts[s] * g1;
    r2[s] = data.counts[s] * (1.0 - g1);
    loglik.add(data.counts[s] * lse);
  }
  st.loglik = loglik.value();
  st.loglik_history.push_back(st.loglik);

  const double R1 = std::accumulate(r1.begin(), r1.end(), 0.0);
  const double R2 = std::accumulate(r2.begin(), r2.end(), 0.0);
  if (R1 < kDeadComponentShare * total || R2 < kDeadComponentShare * total) {
    reseed(st, R1 < R2 ? 0 : 1, n, rng);
    ++st.iteration;
    return st.loglik;
  }

  // M-step: weight, then per component the central (best of Borda start and current) and phi.
  st.w1 = std::clamp(R1 / total, 1e-12, 1.0 - 1e-12);
  auto update = [&](const std::vector<double>& r, double R, Permutation& pi, double& phi) {
    const Eigen::MatrixXd prec = precedence_matrix(data, r);
    Permutation a = kemeny_local_search(prec, weighted_borda(prec));
    Permutation b = kemeny_local_search(prec, pi);
    const double ca = kemeny_cost(prec, a), cb = kemeny_cost(prec, b);
    pi = ca < cb ? std::move(a) : std::move(b);
    phi = std::clamp(phi_from_mean_distance(n, std::min(ca, cb) / R), kPhiMin, kPhiMax);
  };
  update(r1, R1, st.pi1, st.phi1);
  update(r2, R2, st.pi2, st.phi2);
  ++st.iteration;
  return st.loglik;
}

LearnedMixture em_learn(const RankingSet& samples, const EMConfig& config, Rng& rng, EMState* state) {
  config.validate();
  if (samples.size() < 2) throw DomainError("em_learn: need at least two samples");
  const int n = samples.n();
  EMState st;
  if (config.init) {
    if (config.init->n() != n) throw DomainError("em_learn: init size mismatch");
    st.w1 = std::clamp(config.init->w1(), 1e-12, 1.0 - 1e-12);
    st.phi1 = config.init->m1().phi();
    st.phi2 = config.init->m2().phi();
    st.pi1 = config.init->m1().central();
    st.pi2 = config.init->m2().central();
  } else {
    st.pi1 = random_permutation(n, rng);
    st.pi2 = random_permutation(n, rng);
    st.w1 = 0.1 + 0.8 * uniform01(rng);
    st.phi1 = st.phi2 = kInitialPhi;
  }
  const CompressedRankings data = compress(samples);
  for (int it = 0; it < config.max_iters; ++it) {
    const double w = st.w1, p1 = st.phi1, p2 = st.phi2;
    const Permutation a = st.pi1, b = st.pi2;
    const std::size_t reseeds = st.reseed_iterations.size();
    em_step(data, st, rng);
    if (st.reseed_iterations.size() != reseeds) continue;
    const double change = std::max({std::abs(st.w1 - w), std::abs(st.phi1 - p1), std::abs(st.phi2 - p2)});
    if (st.pi1 == a && st.pi2 == b && change < config.tol) {
      st.converged = true;
      break;
    }
  }

  LearnedMixture out;
  out.w1 = st.w1;
  out.w2 = 1.0 - st.w1;
  out.phi1 = st.phi1;
  out.phi2 = st.phi2;
  out.pi1 = st.pi1;
  out.pi2 = st.pi2;
  out.path = LearnPath::em;
  out.diagnostics.em_iterations = st.iteration;
  out.diagnostics.loglik = st.loglik;
  if (!st.converged) out.diagnostics.note = "max_iters reached without convergence";
  if (state) *state = std::move(st);
  return out;
}

}  // namespace mallows_mix
