#include "mallows_mix/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "mallows_mix/errors.hpp"
#include "mallows_mix/numeric.hpp"

namespace mallows_mix {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Json nan_to_null(double v) { return std::isnan(v) ? Json(nullptr) : Json(v); }

const char* kWeightNote = "w1 is redrawn from U[0,1] until it lies inside weight_range";

}  // namespace

std::string_view to_string(LearnerKind kind) { return kind == LearnerKind::spectral ? "spectral" : "em"; }

LearnerKind parse_learner_kind(std::string_view text) {
  if (text == "spectral") return LearnerKind::spectral;
  if (text == "em") return LearnerKind::em;
  throw ConfigError("unknown learner '" + std::string(text) + "'");
}

void ExperimentConfig::validate() const {
  if (n < 2 || n > RankingSet::kMaxN) throw ConfigError("experiment: n out of range");
  if (samples < 2) throw ConfigError("experiment: need at least two samples");
  if (trials < 1) throw ConfigError("experiment: trials must be at least 1");
  if (distances.empty()) throw ConfigError("experiment: no distances");
  const int max_d = n * (n - 1) / 2;
  for (int d : distances)
    if (d < 0 || d > max_d) throw ConfigError("experiment: distance " + std::to_string(d) + " out of range");
  if (learners.empty()) throw ConfigError("experiment: no learners");
  if (std::set<LearnerKind>(learners.begin(), learners.end()).size() != learners.size())
    throw ConfigError("experiment: duplicate learner");
  if (!(phi_log_range[0] >= 0.0 && phi_log_range[1] >= phi_log_range[0]))
    throw ConfigError("experiment: bad phi_log_range");
  if (!(weight_range[0] >= 0.0 && weight_range[1] <= 1.0 && weight_range[1] > weight_range[0]))
    throw ConfigError("experiment: bad weight_range");
  if (threads < 1) throw ConfigError("experiment: threads must be at least 1");
  learner.validate();
  em.validate();
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("experiment config: expected a JSON object");
  static const std::set<std::string> keys{"n",           "samples",      "distances", "trials", "seed", "learners",
                                          "phi_log_range", "weight_range", "learner",   "em",     "threads"};
  for (const auto& [key, value] : j.items())
    if (!keys.count(key)) throw ConfigError("experiment config: unknown key '" + key + "'");
  ExperimentConfig c;
  if (j.contains("n")) c.n = j.at("n").get<int>();
  if (j.contains("samples")) c.samples = j.at("samples").get<std::size_t>();
  if (j.contains("distances")) c.distances = j.at("distances").get<std::vector<int>>();
  if (j.contains("trials")) c.trials = j.at("trials").get<int>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("learners")) {
    c.learners.clear();
    for (const auto& s : j.at("learners")) c.learners.push_back(parse_learner_kind(s.get<std::string>()));
  }
  if (j.contains("phi_log_range")) c.phi_log_range = j.at("phi_log_range").get<std::array<double, 2>>();
  if (j.contains("weight_range")) c.weight_range = j.at("weight_range").get<std::array<double, 2>>();
  if (j.contains("learner")) c.learner = learner_config_from_json(j.at("learner"));
  if (j.contains("em")) c.em = em_config_from_json(j.at("em"));
  if (j.contains("threads")) c.threads = j.at("threads").get<int>();
  c.validate();
  return c;
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["n"] = c.n;
  j["samples"] = c.samples;
  j["distances"] = c.distances;
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  Json learners = Json::array();
  for (LearnerKind k : c.learners) learners.push_back(std::string(to_string(k)));
  j["learners"] = std::move(learners);
  j["phi_log_range"] = c.phi_log_range;
  j["weight_range"] = c.weight_range;
  Json learner = to_json(c.learner);
  learner.erase("seed");
  j["learner"] = std::move(learner);
  Json em = to_json(c.em);
  em.erase("seed");
  j["em"] = std::move(em);
  return j;
}

MallowsMixture generate_instance(int n, int d, Rng& rng, const InstanceOptions& options, int* weight_redraws) {
  const int max_d = n * (n - 1) / 2;
  if (n < 1 || d < 0 || d > max_d) throw DomainError("generate_instance: distance out of range");
  const auto [wlo, whi] = options.weight_range;
  if (!(whi > wlo)) throw DomainError("generate_instance: empty weight range");
  int redraws = 0;
  double w = uniform01(rng);
  while (w < wlo || w > whi) {
    w = uniform01(rng);
    ++redraws;
  }
  if (weight_redraws) *weight_redraws = redraws;
  const auto [lo, hi] = options.phi_log_range;
  auto draw_phi = [&] { return std::clamp(std::exp(-(lo + (hi - lo) * uniform01(rng))), kPhiMin, kPhiMax); };
  const double phi1 = draw_phi();
  const double phi2 = draw_phi();
  Permutation pi2 = random_permutation_at_distance(n, d, rng);
  return MallowsMixture(w, MallowsModel(phi1, Permutation::identity(n)), MallowsModel(phi2, std::move(pi2)));
}

bool score_success(const MallowsMixture& truth, const LearnedMixture& result) {
  const Permutation& a = truth.m1().central();
  const Permutation& b = truth.m2().central();
  return (result.pi1 == a && result.pi2 == b) || (result.pi1 == b && result.pi2 == a);
}

ParameterErrors parameter_errors(const MallowsMixture& truth, const LearnedMixture& result) {
  ParameterErrors direct{std::abs(result.w1 - truth.w1()), std::abs(result.phi1 - truth.m1().phi()),
                         std::abs(result.phi2 - truth.m2().phi()), false};
  ParameterErrors crossed{std::abs(result.w2 - truth.w1()), std::abs(result.phi2 - truth.m1().phi()),
                          std::abs(result.phi1 - truth.m2().phi()), true};
  const Permutation& a = truth.m1().central();
  const Permutation& b = truth.m2().central();
  const bool direct_match = result.pi1 == a && result.pi2 == b;
  const bool crossed_match = result.pi1 == b && result.pi2 == a;
  if (direct_match != crossed_match) return direct_match ? direct : crossed;
  auto worst = [](const ParameterErrors& e) { return std::max({e.w1, e.phi1, e.phi2}); };
  return worst(crossed) < worst(direct) ? crossed : direct;
}

std::uint64_t derive_seed(std::uint64_t seed, int distance, int trial, int stream) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(distance));
  h = splitmix64(h ^ static_cast<std::uint64_t>(trial));
  return splitmix64(h ^ static_cast<std::uint64_t>(stream));
}

namespace {

std::vector<TrialResult> run_trial(const ExperimentConfig& config, int distance, int trial) {
  InstanceRecord record;
  record.distance = distance;
  record.trial = trial;
  record.seed = derive_seed(config.seed, distance, trial, 0);
  Rng rng(record.seed);
  const InstanceOptions options{config.phi_log_range, config.weight_range};
  record.mixture = generate_instance(config.n, distance, rng, options, &record.weight_redraws);
  const RankingSet samples = sample_rankings(*record.mixture, config.samples, rng);

  std::vector<TrialResult> out;
  for (LearnerKind kind : config.learners) {
    TrialResult r;
    r.instance = record;
    r.learner = kind;
    // Streams are keyed by learner identity, so the learner set does not perturb seeds.
    r.learner_seed = derive_seed(config.seed, distance, trial, 1 + static_cast<int>(kind));
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if (kind == LearnerKind::spectral) {
        LearnerConfig lc = config.learner;
        lc.seed = r.learner_seed;
        r.recovered = learn(samples, lc);
      } else {
        EMConfig ec = config.em;
        ec.seed = r.learner_seed;
        Rng em_rng(ec.seed);
        r.recovered = em_learn(samples, ec, em_rng);
      }
      r.success = score_success(*record.mixture, r.recovered);
      r.errors = parameter_errors(*record.mixture, r.recovered);
    } catch (const std::exception& e) {
      r.recovered = LearnedMixture{};
      r.recovered.path = kind == LearnerKind::em ? LearnPath::em : LearnPath::degenerate_fail;
      r.recovered.diagnostics.note = e.what();
      r.error = e.what();
      r.success = false;
      r.errors = ParameterErrors{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
                                 std::numeric_limits<double>::quiet_NaN(), false};
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const ProgressFn& progress) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t jobs = config.distances.size() * static_cast<std::size_t>(config.trials);
  std::vector<std::vector<TrialResult>> slots(jobs);
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (std::size_t job = next++; job < jobs; job = next++) {
      const int distance = config.distances[job / config.trials];
      const int trial = static_cast<int>(job % config.trials);
      slots[job] = run_trial(config, distance, trial);
      if (progress) {
        std::lock_guard lock(progress_mutex);
        for (const auto& r : slots[job]) progress(r);
      }
    }
  };
  const int threads = static_cast<int>(std::min<std::size_t>(config.threads, jobs));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentResult result;
  result.config = config;
  for (auto& slot : slots)
    for (auto& r : slot) result.trials.push_back(std::move(r));
  result.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

std::vector<SummaryRow> summarize(const ExperimentResult& result) {
  std::vector<SummaryRow> rows;
  for (int d : result.config.distances)
    for (LearnerKind k : result.config.learners) {
      SummaryRow row;
      row.distance = d;
      row.learner = k;
      CompensatedSum dw, dphi, secs;
      for (const auto& t : result.trials) {
        if (t.instance.distance != d || t.learner != k) continue;
        ++row.trials;
        secs.add(t.seconds);
        if (!t.success) continue;
        ++row.successes;
        dw.add(t.errors.w1);
        dphi.add(0.5 * (t.errors.phi1 + t.errors.phi2));
      }
      row.success_rate = row.trials ? static_cast<double>(row.successes) / row.trials : 0.0;
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.mean_abs_dw = row.successes ? dw.value() / row.successes : nan;
      row.mean_abs_dphi = row.successes ? dphi.value() / row.successes : nan;
      row.mean_seconds = row.trials ? secs.value() / row.trials : 0.0;
      rows.push_back(row);
    }
  return rows;
}

Json results_json(const ExperimentResult& result) {
  Json j;
  j["config"] = to_json(result.config);
  Json trials = Json::array();
  for (const auto& t : result.trials) {
    Json r;
    r["distance"] = t.instance.distance;
    r["trial"] = t.instance.trial;
    r["learner"] = std::string(to_string(t.learner));
    r["success"] = t.success;
    Json inst;
    inst["seed"] = t.instance.seed;
    inst["weight_redraws"] = t.instance.weight_redraws;
    inst["mixture"] = to_json(*t.instance.mixture);
    r["instance"] = std::move(inst);
    r["learner_seed"] = t.learner_seed;
    r["recovered"] = to_json(t.recovered);
    Json err;
    err["w1"] = nan_to_null(t.errors.w1);
    err["phi1"] = nan_to_null(t.errors.phi1);
    err["phi2"] = nan_to_null(t.errors.phi2);
    err["swapped"] = t.errors.swapped;
    r["parameter_errors"] = std::move(err);
    r["error"] = t.error.empty() ? Json(nullptr) : Json(t.error);
    trials.push_back(std::move(r));
  }
  j["trials"] = std::move(trials);
  Json summary = Json::array();
  for (const auto& row : summarize(result)) {
    Json s;
    s["distance"] = row.distance;
    s["learner"] = std::string(to_string(row.learner));
    s["trials"] = row.trials;
    s["successes"] = row.successes;
    s["success_rate"] = row.success_rate;
    s["mean_abs_dw"] = nan_to_null(row.mean_abs_dw);
    s["mean_abs_dphi"] = nan_to_null(row.mean_abs_dphi);
    summary.push_back(std::move(s));
  }
  j["summary"] = std::move(summary);
  return j;
}

std::string results_csv(const ExperimentResult& result) {
  std::ostringstream os;
  os << "distance,learner,trials,success_rate,mean_abs_dw,mean_abs_dphi\n";
  for (const auto& row : summarize(result))
    os << row.distance << ',' << to_string(row.learner) << ',' << row.trials << ',' << csv_number(row.success_rate)
       << ',' << csv_number(row.mean_abs_dw) << ',' << csv_number(row.mean_abs_dphi) << '\n';
  return os.str();
}

Json metadata_json(const ExperimentResult& result) {
  Json j;
  j["weight_redraw"] = kWeightNote;
  j["weight_range"] = result.config.weight_range;
  int redraws = 0, redrawn_instances = 0;
  for (const auto& t : result.trials)
    if (t.learner == result.config.learners.front()) {
      redraws += t.instance.weight_redraws;
      redrawn_instances += t.instance.weight_redraws > 0;
    }
  j["weight_redraws_total"] = redraws;
  j["instances_with_weight_redraw"] = redrawn_instances;
  j["threads"] = result.config.threads;
  j["total_seconds"] = result.total_seconds;
  Json timings = Json::array();
  for (const auto& row : summarize(result)) {
    Json s;
    s["distance"] = row.distance;
    s["learner"] = std::string(to_string(row.learner));
    s["mean_seconds"] = row.mean_seconds;
    timings.push_back(std::move(s));
  }
  j["timings"] = std::move(timings);
  Json per_trial = Json::array();
  for (const auto& t : result.trials)
    per_trial.push_back({{"distance", t.instance.distance},
                         {"trial", t.instance.trial},
                         {"learner", std::string(to_string(t.learner))},
                         {"seconds", t.seconds}});
  j["trial_seconds"] = std::move(per_trial);
  return j;
}

void write_experiment(const ExperimentResult& result, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  write_json_file((base / "results.json").string(), results_json(result));
  {
    std::ofstream os(base / "results.csv");
    if (!os) throw ConfigError("cannot write " + (base / "results.csv").string());
    os << results_csv(result);
  }
  write_json_file((base / "metadata.json").string(), metadata_json(result));
}

}  // namespace mallows_mix
