#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mallows_mix/moments.hpp"
#include "mallows_mix/rankings.hpp"
#include "mallows_mix/tensor.hpp"

namespace mallows_mix {

enum class LearnPath { tensor, pivot, degenerate_identical, degenerate_staggered, degenerate_aligned, degenerate_fail, em };

std::string_view to_string(LearnPath path);
LearnPath parse_learn_path(std::string_view text);

/// User-facing knobs; unset optionals are derived from n and the sample count by resolve().
struct LearnerConfig {
  double eps = 0.05;
  std::optional<double> eps2;
  std::optional<int> rounds;
  std::optional<int> prefix_cap;
  std::optional<double> noise_floor;
  std::optional<double> max_residual;
  std::optional<double> fit_tolerance;  // max |observed - fitted| position-table entry for acceptance
  std::array<double, 3> sample_split{0.4, 0.4, 0.2};
  double c = 10.0;                  // constant in g(n, phi)
  double weight_tolerance = 0.05;   // slack on the recovered weight before a round is rejected
  double prefix_tolerance = 0.05;   // relative slack in Remove-Common-Prefix
  std::uint64_t seed = 1;

  void validate() const;
};

/// Config with every threshold fixed for a given problem size.
struct ResolvedConfig {
  int n = 0;
  bool exact = false;          // weighted input: statistics are exact probabilities
  double sample_count = 0.0;   // 0 for exact input
  double sampling_error = 0.0; // 3 sqrt(log n / N)
  double eps = 0.05;
  double eps2 = 0.0;
  int rounds = 0;
  int prefix_cap = 0;
  double noise_floor = 0.0;
  double max_residual = 0.0;
  double fit_tolerance = 0.0;
  std::array<double, 3> sample_split{0.4, 0.4, 0.2};
  double c = 10.0;
  double weight_tolerance = 0.05;
  double prefix_tolerance = 0.05;
  std::uint64_t seed = 1;
};

ResolvedConfig resolve(const LearnerConfig& config, int n, std::size_t sample_count, bool exact);

struct RoundRecord {
  std::array<double, 3> sigma2{0.0, 0.0, 0.0};
  double residual = 0.0;
  double eigen_gap = 0.0;
  std::string outcome;
};

struct LearnDiagnostics {
  std::vector<RoundRecord> rounds;
  int prefix1 = 0;
  int prefix2 = 0;
  double eps2 = 0.0;
  double noise_floor = 0.0;
  std::vector<int> common_prefix;
  int placement_collisions = 0;
  int em_iterations = 0;
  double loglik = 0.0;
  double fit_deviation = 0.0;
  std::string note;
};

struct LearnedMixture {
  double w1 = 0.5, w2 = 0.5;
  double phi1 = 0.5, phi2 = 0.5;
  Permutation pi1, pi2;
  LearnPath path = LearnPath::degenerate_fail;
  LearnDiagnostics diagnostics;
};

struct PrefixHypothesis {
  std::vector<int> elems1, elems2;
  Eigen::VectorXd x_hat, y_hat;  // stitched first-place estimates over all n elements
};

struct TopKEstimate {
  double w1 = 0.0, w2 = 0.0, phi1 = 0.0, phi2 = 0.0;
  PrefixHypothesis prefixes;
};

LearnedMixture learn(const RankingSet& samples, const LearnerConfig& config);

/// Same pipeline with caller-supplied moments (e.g. closed_form for exact-statistics runs).
LearnedMixture learn(const RankingSet& samples, const LearnerConfig& config, const MomentStats& moments);

/// Returns nullopt (with the reason in *why) when the recovered weight is out of range
/// or no prefix survives the noise floor.
std::optional<TopKEstimate> infer_top_k(const MomentStats& stats, const Partition3& part, const Rank2Decomp& decomp,
                                        const ResolvedConfig& config, std::string* why = nullptr);

/// Max consecutive ratio of the sorted entries above sqrt(noise_floor).
double estimate_phi(const Eigen::VectorXd& p, double noise_floor);

/// Median consecutive ratio of the sorted entries above sqrt(noise_floor); robust to a few
/// displaced elements. Used as a second dispersion guess for the degenerate pipeline.
double median_ratio_phi(const Eigen::VectorXd& p, double noise_floor);

/// Solves 1 / Z_n(phi) = p_top: the dispersion implied by a top element shared by both components.
double phi_from_top_frequency(int n, double p_top);

struct RecoveredRankings {
  Permutation pi1, pi2;
  bool pivot = false;
};

/// `conditioning` feeds the pivot and e*-conditioned statistics, `completion` the
/// unconditioned position frequencies.
std::optional<RecoveredRankings> recover_rest(const RankingSet& conditioning, const RankingSet& completion,
                                              const TopKEstimate& est, const ResolvedConfig& config,
                                              LearnDiagnostics* diag = nullptr);

Permutation learn_single_mallows(const RankingSet& samples);

/// pi2 from the mixture position table minus the known component; `fixed_prefix` occupies
/// the first positions verbatim.
Permutation find_pi(const RankingSet& samples, const Permutation& pi1, double w1, double w2, double phi1, double phi2,
                    const std::vector<int>& fixed_prefix = {});

/// Mixture position table w1 f(pi1, phi1) + (1 - w1) f(pi2, phi2); rows are elements.
Eigen::MatrixXd model_position_table(const LearnedMixture& model);

/// Max absolute entry of observed - model_position_table(model).
double fit_deviation(const Eigen::MatrixXd& observed, const LearnedMixture& model);

/// Least-squares refinement of (w1, phi1, phi2) against an observed position table with the
/// centrals held fixed. No-op when the centrals coincide unless `shared_central` is set.
void refine_parameters(const Eigen::MatrixXd& observed, LearnedMixture& model, bool shared_central = false);

/// Greedy cell assignment: visits (element, position) cells in descending score and assigns
/// when both are free. Elements in `fixed` take positions 0.. in order. Returns the order.
std::vector<int> assign_positions(const Eigen::MatrixXd& score, const std::vector<int>& fixed = {},
                                  int* collisions = nullptr);

// Degenerate-case handling.

struct BucketStructure {
  std::vector<int> large;                      // L
  std::vector<std::pair<int, std::vector<int>>> buckets;  // shift -> elements, ascending shift
  int majority = 0;                            // l*
  std::vector<std::vector<int>> groups;        // I_r by power r
  std::vector<int> bad;                        // I_bad
};

/// Buckets from a known mixture: L = {i : P_i >= threshold}, shift = pos1 - pos2.
BucketStructure bucket_structure(const MallowsMixture& mix, double threshold);

/// Equal dispersions and all but at most two elements of L in the majority bucket.
bool is_degenerate(const MallowsMixture& mix, double threshold, double phi_tol = 1e-12);

std::vector<int> remove_common_prefix(const RankingSet& samples, double phi_hat, const ResolvedConfig& config);

struct DegenerateOptions {
  bool try_staggered = true;
  bool try_aligned = true;
};

LearnedMixture handle_degenerate(const RankingSet& samples, double phi_hat, const ResolvedConfig& config, Rng& rng,
                                 DegenerateOptions options = {});

/// Dispersion from the mean Kendall distance to `central` (moment matching on expected_kt_distance).
double fit_phi_to_central(const RankingSet& samples, const Permutation& central);

/// Solves expected_kt_distance(n, phi) = mean_distance by bisection to 1e-12.
double phi_from_mean_distance(int n, double mean_distance);

namespace detail {
/// Tensor stage shared by learn and the staggered branch: up to config.rounds partitions.
/// Each candidate is refined against `observed` (the position table of all samples) and
/// accepted once its fit deviation is within config.fit_tolerance. Otherwise the best-fitting
/// candidate is kept, and per-round phi estimates are collected from the sigma2-gated rounds.
struct TensorStageResult {
  std::optional<LearnedMixture> accepted;
  std::optional<LearnedMixture> best;
  std::vector<double> phi_estimates;
};
TensorStageResult run_tensor_stage(const MomentStats& stats, const RankingSet& conditioning,
                                   const RankingSet& completion, const Eigen::MatrixXd& observed,
                                   const ResolvedConfig& config, Rng& rng, LearnDiagnostics& diag);
}  // namespace detail

}  // namespace mallows_mix
