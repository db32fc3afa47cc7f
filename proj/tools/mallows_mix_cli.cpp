#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "mallows_mix/em_baseline.hpp"
#include "mallows_mix/harness.hpp"
#include "mallows_mix/io.hpp"
#include "mallows_mix/rankings.hpp"
#include "mallows_mix/spectral_learner.hpp"
#include "mallows_mix/verify.hpp"

using namespace mallows_mix;

int main(int argc, char** argv) {
  CLI::App app{"Learning two-component Mallows mixtures"};
  app.require_subcommand(1);

  std::string model_path, out_path, rankings_path, config_path, out_dir, level = "fast";
  std::size_t count = 0;
  std::uint64_t seed = 1;
  std::optional<std::size_t> samples_override;
  std::optional<int> threads_override;
  double tamper_z = 1.0;

  auto* sample = app.add_subcommand("sample", "Draw rankings from a mixture");
  sample->add_option("--model", model_path, "Mixture JSON")->required();
  sample->add_option("--count", count, "Number of rankings")->required();
  sample->add_option("--seed", seed, "RNG seed");
  sample->add_option("--out", out_path, "Rankings file")->required();

  auto* learn_cmd = app.add_subcommand("learn", "Spectral learner");
  auto* em_cmd = app.add_subcommand("em", "EM baseline");
  for (auto* cmd : {learn_cmd, em_cmd}) {
    cmd->add_option("--rankings", rankings_path, "Rankings file")->required();
    cmd->add_option("--config", config_path, "Config JSON");
    cmd->add_option("--out", out_path, "Result JSON")->required();
  }

  auto* experiment = app.add_subcommand("experiment", "Run a recovery sweep");
  experiment->add_option("--config", config_path, "Experiment JSON")->required();
  experiment->add_option("--out-dir", out_dir, "Output directory")->required();
  experiment->add_option("--samples", samples_override, "Override the sample count");
  experiment->add_option("--threads", threads_override, "Worker threads");

  auto* verify = app.add_subcommand("verify", "Run the property suites");
  verify->add_option("--level", level, "fast or full")->check(CLI::IsMember({"fast", "full"}));
  verify->add_option("--tamper-z", tamper_z, "Scale the partition function in the moment check")->group("");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sample) {
      const MallowsMixture mix = mixture_from_json(read_json_file(model_path));
      Rng rng(seed);
      write_rankings_file(out_path, sample_rankings(mix, count, rng));
    } else if (*learn_cmd) {
      const RankingSet samples = read_rankings_file(rankings_path);
      const LearnerConfig cfg = config_path.empty() ? LearnerConfig{} : learner_config_from_json(read_json_file(config_path));
      write_json_file(out_path, to_json(learn(samples, cfg)));
    } else if (*em_cmd) {
      const RankingSet samples = read_rankings_file(rankings_path);
      const EMConfig cfg = config_path.empty() ? EMConfig{} : em_config_from_json(read_json_file(config_path));
      Rng rng(cfg.seed);
      write_json_file(out_path, to_json(em_learn(samples, cfg, rng)));
    } else if (*experiment) {
      ExperimentConfig cfg = experiment_config_from_json(read_json_file(config_path));
      if (samples_override) cfg.samples = *samples_override;
      if (threads_override) cfg.threads = *threads_override;
      const std::size_t total = cfg.distances.size() * cfg.trials * cfg.learners.size();
      std::size_t done = 0;
      const ExperimentResult result = run_experiment(cfg, [&](const TrialResult& r) {
        std::fprintf(stderr, "[%zu/%zu] d=%d trial=%d %s %s\n", ++done, total, r.instance.distance, r.instance.trial,
                     std::string(to_string(r.learner)).c_str(), r.success ? "ok" : "miss");
      });
      write_experiment(result, out_dir);
      std::cout << results_csv(result);
    } else if (*verify) {
      const VerifyReport report = verify_suite({parse_verify_level(level), tamper_z});
      print_report(std::cout, report);
      return report.passed() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
