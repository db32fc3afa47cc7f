#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mallows_mix/em_baseline.hpp"
#include "mallows_mix/io.hpp"
#include "mallows_mix/mixture.hpp"
#include "mallows_mix/spectral_learner.hpp"

namespace mallows_mix {

enum class LearnerKind { spectral, em };

std::string_view to_string(LearnerKind kind);
LearnerKind parse_learner_kind(std::string_view text);

struct ExperimentConfig {
  int n = 10;
  std::size_t samples = 5'000'000;
  std::vector<int> distances{0, 2, 4, 8, 16, 24, 30, 35, 40, 45};
  int trials = 20;
  std::uint64_t seed = 1;
  std::vector<LearnerKind> learners{LearnerKind::spectral, LearnerKind::em};
  std::array<double, 2> phi_log_range{0.0, 5.0};  // ln(1/phi) ~ U[lo, hi]
  std::array<double, 2> weight_range{0.05, 0.95};  // w1 redrawn until inside
  LearnerConfig learner;  // seed is replaced per trial
  EMConfig em;            // seed is replaced per trial
  int threads = 1;        // affects wall time only

  void validate() const;
};

ExperimentConfig experiment_config_from_json(const Json& j);
Json to_json(const ExperimentConfig& c);

struct InstanceOptions {
  std::array<double, 2> phi_log_range{0.0, 5.0};
  std::array<double, 2> weight_range{0.05, 0.95};
};

/// w1 ~ U[0,1] redrawn outside weight_range, phi_r = exp(-U[phi_log_range]) per component,
/// pi1 = identity, pi2 uniform over permutations at Kendall distance d from the identity.
MallowsMixture generate_instance(int n, int d, Rng& rng, const InstanceOptions& options = {}, int* weight_redraws = nullptr);

/// Unordered-pair equality of the recovered centrals with the generating ones.
bool score_success(const MallowsMixture& truth, const LearnedMixture& result);

struct ParameterErrors {
  double w1 = 0.0, phi1 = 0.0, phi2 = 0.0;  // phi_r indexed by the truth's labels
  bool swapped = false;                     // result labels are reversed relative to the truth
};

/// Label matching follows the centrals when exactly one orientation matches them; otherwise
/// the orientation with the smaller maximum error is used.
ParameterErrors parameter_errors(const MallowsMixture& truth, const LearnedMixture& result);

struct InstanceRecord {
  int distance = 0;
  int trial = 0;
  std::uint64_t seed = 0;  // drives instance generation and sampling
  int weight_redraws = 0;
  std::optional<MallowsMixture> mixture;
};

struct TrialResult {
  InstanceRecord instance;
  LearnerKind learner = LearnerKind::spectral;
  std::uint64_t learner_seed = 0;
  bool success = false;
  LearnedMixture recovered;
  ParameterErrors errors;
  std::string error;  // exception text when the learner threw
  double seconds = 0.0;
};

struct SummaryRow {
  int distance = 0;
  LearnerKind learner = LearnerKind::spectral;
  int trials = 0;
  int successes = 0;
  double success_rate = 0.0;
  double mean_abs_dw = 0.0;    // over successful trials; NaN when there are none
  double mean_abs_dphi = 0.0;  // both components, over successful trials
  double mean_seconds = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<TrialResult> trials;  // ordered by (distance, trial, learner)
  double total_seconds = 0.0;
};

/// Mixes the experiment seed with (distance, trial, stream); stream 0 is the instance.
std::uint64_t derive_seed(std::uint64_t seed, int distance, int trial, int stream);

using ProgressFn = std::function<void(const TrialResult&)>;

ExperimentResult run_experiment(const ExperimentConfig& config, const ProgressFn& progress = {});

std::vector<SummaryRow> summarize(const ExperimentResult& result);

/// Deterministic outputs: no wall-clock fields.
Json results_json(const ExperimentResult& result);
std::string results_csv(const ExperimentResult& result);
/// Timings and protocol notes.
Json metadata_json(const ExperimentResult& result);

/// Writes results.json, results.csv and metadata.json into `dir` (created if missing).
void write_experiment(const ExperimentResult& result, const std::string& dir);

}  // namespace mallows_mix
