#include "mallows_mix/io.hpp"

#include <fstream>
#include <set>

#include "mallows_mix/errors.hpp"

namespace mallows_mix {

namespace {

void check_keys(const Json& j, const std::set<std::string>& allowed, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + ": expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError(std::string(what) + ": unknown key '" + key + "'");
}

template <typename T>
void read_opt(const Json& j, const char* key, std::optional<T>& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <typename T>
Json opt(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

}  // namespace

Json to_json(const Permutation& p) {
  Json a = Json::array();
  for (int e : p.order()) a.push_back(e + 1);
  return a;
}

Permutation permutation_from_json(const Json& j) {
  if (!j.is_array()) throw DomainError("permutation: expected an array");
  std::vector<int> order;
  for (const auto& v : j) order.push_back(v.get<int>() - 1);
  return Permutation(std::move(order));
}

Json to_json(const MallowsMixture& mix) {
  Json j;
  j["w1"] = mix.w1();
  j["phi1"] = mix.m1().phi();
  j["pi1"] = to_json(mix.m1().central());
  j["w2"] = mix.w2();
  j["phi2"] = mix.m2().phi();
  j["pi2"] = to_json(mix.m2().central());
  return j;
}

MallowsMixture mixture_from_json(const Json& j) {
  check_keys(j, {"w1", "w2", "phi1", "phi2", "pi1", "pi2"}, "mixture");
  const double w1 = j.at("w1").get<double>();
  if (j.contains("w2") && std::abs(j.at("w2").get<double>() - (1.0 - w1)) > 1e-9)
    throw DomainError("mixture: w1 + w2 must equal 1");
  return MallowsMixture(w1, MallowsModel(j.at("phi1").get<double>(), permutation_from_json(j.at("pi1"))),
                        MallowsModel(j.at("phi2").get<double>(), permutation_from_json(j.at("pi2"))));
}

Json to_json(const LearnDiagnostics& d) {
  Json j;
  Json rounds = Json::array();
  for (const auto& r : d.rounds) {
    Json rr;
    rr["sigma2"] = {r.sigma2[0], r.sigma2[1], r.sigma2[2]};
    rr["residual"] = r.residual;
    rr["eigen_gap"] = r.eigen_gap;
    rr["outcome"] = r.outcome;
    rounds.push_back(std::move(rr));
  }
  j["rounds"] = std::move(rounds);
  j["prefix1"] = d.prefix1;
  j["prefix2"] = d.prefix2;
  j["eps2"] = d.eps2;
  j["noise_floor"] = d.noise_floor;
  Json common = Json::array();
  for (int e : d.common_prefix) common.push_back(e + 1);
  j["common_prefix"] = std::move(common);
  j["placement_collisions"] = d.placement_collisions;
  j["em_iterations"] = d.em_iterations;
  j["loglik"] = d.loglik;
  j["fit_deviation"] = d.fit_deviation;
  j["note"] = d.note;
  return j;
}

Json to_json(const LearnedMixture& m) {
  Json j;
  j["w1"] = m.w1;
  j["phi1"] = m.phi1;
  j["pi1"] = to_json(m.pi1);
  j["w2"] = m.w2;
  j["phi2"] = m.phi2;
  j["pi2"] = to_json(m.pi2);
  j["path"] = std::string(to_string(m.path));
  j["diagnostics"] = to_json(m.diagnostics);
  return j;
}

LearnedMixture learned_from_json(const Json& j) {
  LearnedMixture m;
  m.w1 = j.at("w1").get<double>();
  m.w2 = j.at("w2").get<double>();
  m.phi1 = j.at("phi1").get<double>();
  m.phi2 = j.at("phi2").get<double>();
  m.pi1 = permutation_from_json(j.at("pi1"));
  m.pi2 = permutation_from_json(j.at("pi2"));
  m.path = parse_learn_path(j.at("path").get<std::string>());
  if (j.contains("diagnostics")) {
    const Json& d = j.at("diagnostics");
    for (const auto& r : d.value("rounds", Json::array())) {
      RoundRecord rr;
      for (int k = 0; k < 3; ++k) rr.sigma2[k] = r.at("sigma2").at(k).get<double>();
      rr.residual = r.at("residual").get<double>();
      rr.eigen_gap = r.at("eigen_gap").get<double>();
      rr.outcome = r.at("outcome").get<std::string>();
      m.diagnostics.rounds.push_back(std::move(rr));
    }
    read(d, "prefix1", m.diagnostics.prefix1);
    read(d, "prefix2", m.diagnostics.prefix2);
    read(d, "eps2", m.diagnostics.eps2);
    read(d, "noise_floor", m.diagnostics.noise_floor);
    for (const auto& e : d.value("common_prefix", Json::array())) m.diagnostics.common_prefix.push_back(e.get<int>() - 1);
    read(d, "placement_collisions", m.diagnostics.placement_collisions);
    read(d, "em_iterations", m.diagnostics.em_iterations);
    read(d, "loglik", m.diagnostics.loglik);
    read(d, "fit_deviation", m.diagnostics.fit_deviation);
    read(d, "note", m.diagnostics.note);
  }
  return m;
}

LearnerConfig learner_config_from_json(const Json& j) {
  check_keys(j,
             {"eps", "eps2", "rounds", "prefix_cap", "noise_floor", "max_residual", "fit_tolerance", "sample_split",
              "c", "weight_tolerance", "prefix_tolerance", "seed"},
             "learner config");
  LearnerConfig c;
  read(j, "eps", c.eps);
  read_opt(j, "eps2", c.eps2);
  read_opt(j, "rounds", c.rounds);
  read_opt(j, "prefix_cap", c.prefix_cap);
  read_opt(j, "noise_floor", c.noise_floor);
  read_opt(j, "max_residual", c.max_residual);
  read_opt(j, "fit_tolerance", c.fit_tolerance);
  if (j.contains("sample_split")) {
    const auto v = j.at("sample_split").get<std::vector<double>>();
    if (v.size() != 3) throw ConfigError("learner config: sample_split needs three entries");
    c.sample_split = {v[0], v[1], v[2]};
  }
  read(j, "c", c.c);
  read(j, "weight_tolerance", c.weight_tolerance);
  read(j, "prefix_tolerance", c.prefix_tolerance);
  read(j, "seed", c.seed);
  c.validate();
  return c;
}

Json to_json(const LearnerConfig& c) {
  Json j;
  j["eps"] = c.eps;
  j["eps2"] = opt(c.eps2);
  j["rounds"] = opt(c.rounds);
  j["prefix_cap"] = opt(c.prefix_cap);
  j["noise_floor"] = opt(c.noise_floor);
  j["max_residual"] = opt(c.max_residual);
  j["fit_tolerance"] = opt(c.fit_tolerance);
  j["sample_split"] = {c.sample_split[0], c.sample_split[1], c.sample_split[2]};
  j["c"] = c.c;
  j["weight_tolerance"] = c.weight_tolerance;
  j["prefix_tolerance"] = c.prefix_tolerance;
  j["seed"] = c.seed;
  return j;
}

EMConfig em_config_from_json(const Json& j) {
  check_keys(j, {"max_iters", "tol", "init", "seed"}, "em config");
  EMConfig c;
  read(j, "max_iters", c.max_iters);
  read(j, "tol", c.tol);
  read(j, "seed", c.seed);
  if (j.contains("init") && !j.at("init").is_null()) c.init = mixture_from_json(j.at("init"));
  c.validate();
  return c;
}

Json to_json(const EMConfig& c) {
  Json j;
  j["max_iters"] = c.max_iters;
  j["tol"] = c.tol;
  j["init"] = c.init ? to_json(*c.init) : Json(nullptr);
  j["seed"] = c.seed;
  return j;
}

Json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path);
  try {
    return Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  os << j.dump(2) << '\n';
}

}  // namespace mallows_mix
