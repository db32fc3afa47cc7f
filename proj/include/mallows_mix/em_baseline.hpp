#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mallows_mix/rankings.hpp"
#include "mallows_mix/spectral_learner.hpp"

namespace mallows_mix {

/// Distinct rankings with their multiplicities (or summed weights), in lexicographic order.
struct CompressedRankings {
  int n = 0;
  std::vector<std::uint8_t> rows;
  std::vector<double> counts;

  std::size_t size() const { return counts.size(); }
  const std::uint8_t* row(std::size_t s) const { return rows.data() + s * n; }
  double total() const;
};

CompressedRankings compress(const RankingSet& samples);

/// prec(a, b) = total weight of rankings placing a before b.
Eigen::MatrixXd precedence_matrix(const CompressedRankings& data, const std::vector<double>& weights);

/// Sum over samples of weight * d_kt(pi, sample), read off the precedence matrix.
double kemeny_cost(const Eigen::MatrixXd& prec, const Permutation& pi);

/// Descending weighted Borda score: element a scores sum_b prec(a, b).
Permutation weighted_borda(const Eigen::MatrixXd& prec);

/// Adjacent-transposition hill climb on kemeny_cost from `start`; stops at a local optimum.
Permutation kemeny_local_search(const Eigen::MatrixXd& prec, const Permutation& start);

/// Local optimum of sum_s weights[s] * d_kt(pi, samples[s]) under adjacent transpositions,
/// started from `start`.
Permutation weighted_kemeny_local_search(const RankingSet& samples, const std::vector<double>& weights,
                                         const Permutation& start);

struct EMConfig {
  int max_iters = 200;
  double tol = 1e-5;
  std::optional<MallowsMixture> init;  // random centrals and weights when unset
  std::uint64_t seed = 1;              // used by callers that build the Rng from the config

  void validate() const;
};

struct EMState {
  double w1 = 0.5;
  double phi1 = 0.5, phi2 = 0.5;
  Permutation pi1, pi2;
  Eigen::MatrixXd responsibilities;  // distinct rankings x 2
  int iteration = 0;
  double loglik = 0.0;
  std::vector<double> loglik_history;  // one entry per E-step
  std::vector<int> reseed_iterations;
  bool converged = false;
};

/// Runs EM to convergence or max_iters. `state`, when given, receives the final state.
LearnedMixture em_learn(const RankingSet& samples, const EMConfig& config, Rng& rng, EMState* state = nullptr);

/// One E-step plus M-step on `data`; returns the log-likelihood of the parameters it started from.
double em_step(const CompressedRankings& data, EMState& state, Rng& rng);

}  // namespace mallows_mix
