#pragma once

#include <string>

#include "json.hpp"
#include "mallows_mix/em_baseline.hpp"
#include "mallows_mix/mixture.hpp"
#include "mallows_mix/spectral_learner.hpp"

namespace mallows_mix {

using Json = nlohmann::ordered_json;

// Permutations are serialized 1-based, matching the rankings text format.
Json to_json(const Permutation& p);
Permutation permutation_from_json(const Json& j);

Json to_json(const MallowsMixture& mix);
MallowsMixture mixture_from_json(const Json& j);

Json to_json(const LearnDiagnostics& d);
Json to_json(const LearnedMixture& m);
LearnedMixture learned_from_json(const Json& j);

/// Missing keys keep their defaults; unknown keys are rejected.
LearnerConfig learner_config_from_json(const Json& j);
Json to_json(const LearnerConfig& c);
EMConfig em_config_from_json(const Json& j);
Json to_json(const EMConfig& c);

Json read_json_file(const std::string& path);
/// Two-space indented, trailing newline.
void write_json_file(const std::string& path, const Json& j);

}  // namespace mallows_mix
