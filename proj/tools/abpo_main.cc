// Command-line front end: make-logs, init, update, simulate, eval and
// verify-theory. Every ExperimentConfig field is available as --<key>, and
// flags override values read from --config.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "abpo/bandit_log.h"
#include "abpo/config.h"
#include "abpo/error.h"
#include "abpo/experiment.h"
#include "abpo/optimizer.h"
#include "abpo/theory.h"

namespace {

using abpo::ExperimentConfig;

struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> overrides;
};

void AddConfigFlags(CLI::App* cmd, ConfigFlags& flags) {
  cmd->add_option("--config", flags.config_path, "key=value config file");
  for (const std::string& key : abpo::ConfigKeys()) {
    cmd->add_option("--" + key, flags.overrides[key],
                    "override config key " + key);
  }
}

ExperimentConfig ResolveConfig(const ConfigFlags& flags) {
  ExperimentConfig cfg;
  if (!flags.config_path.empty()) {
    abpo::LoadConfigFile(flags.config_path, cfg, std::cerr);
  }
  for (const auto& [key, value] : flags.overrides) {
    if (!value.empty()) abpo::SetConfigValue(cfg, key, value);
  }
  abpo::ValidateExperimentConfig(cfg);
  return cfg;
}

void EchoConfig(const ExperimentConfig& cfg) {
  if (cfg.output_dir.empty()) return;
  std::filesystem::create_directories(cfg.output_dir);
  std::ofstream out(std::filesystem::path(cfg.output_dir) / "config.txt");
  abpo::WriteConfig(out, cfg);
}

abpo::PolicyParams InitialPolicy(const ExperimentConfig& cfg,
                                 const std::vector<abpo::UserSequence>& seqs) {
  abpo::Rng rng = abpo::DeriveStream(cfg.seed, {0x1717});
  return abpo::SupervisedInit(seqs, cfg, rng);
}

std::string DefaultPath(const ExperimentConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.output_dir) / name).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anchored bandit policy optimization experiments"};
  app.require_subcommand(1);

  ConfigFlags logs_flags, init_flags, update_flags, sim_flags, eval_flags;
  std::string policy_path, log_path, out_path;
  int round = 1, eval_round = 0;

  auto* make_logs =
      app.add_subcommand("make-logs", "log one round of exposures");
  AddConfigFlags(make_logs, logs_flags);
  make_logs->add_option("--policy", policy_path,
                        "logging policy checkpoint (default: supervised init)");
  make_logs->add_option("--round", round, "round index stored in the log");
  make_logs->add_option("--out", out_path, "output log path");

  auto* init = app.add_subcommand("init", "supervised initialization");
  AddConfigFlags(init, init_flags);
  init->add_option("--out", out_path, "output checkpoint path");

  auto* update = app.add_subcommand("update", "run epochs over a bandit log");
  AddConfigFlags(update, update_flags);
  update->add_option("--policy", policy_path, "input checkpoint")->required();
  update->add_option("--log", log_path, "bandit log")->required();
  update->add_option("--out", out_path, "output checkpoint")->required();

  auto* simulate =
      app.add_subcommand("simulate", "closed-loop multi-round run");
  AddConfigFlags(simulate, sim_flags);

  auto* eval = app.add_subcommand("eval", "held-out metrics of a checkpoint");
  AddConfigFlags(eval, eval_flags);
  eval->add_option("--policy", policy_path, "checkpoint")->required();
  eval->add_option("--round", eval_round, "round label for the rows");

  int samples = 100000;
  std::uint64_t theory_seed = 7;
  std::string grid_name = "default", report_path;
  auto* verify = app.add_subcommand("verify-theory", "numerical theory checks");
  verify->add_option("--samples", samples, "Monte Carlo groups per check");
  verify->add_option("--seed", theory_seed, "verifier seed");
  verify->add_option("--grid", grid_name, "default or empty")
      ->check(CLI::IsMember({"default", "empty"}));
  verify->add_option("--report", report_path,
                     "CSV report path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*make_logs) {
      const ExperimentConfig cfg = ResolveConfig(logs_flags);
      EchoConfig(cfg);
      const auto seqs = abpo::GenerateSequences(abpo::MakeUserModelConfig(cfg));
      const abpo::PolicyParams policy = policy_path.empty()
                                            ? InitialPolicy(cfg, seqs)
                                            : abpo::ReadCheckpoint(policy_path);
      const abpo::BanditLog log =
          abpo::MakeBanditLog(policy, seqs, abpo::MakeLogConfig(cfg, round));
      const std::string path =
          out_path.empty()
              ? DefaultPath(cfg, "round_" + std::to_string(round) + ".log")
              : out_path;
      abpo::WriteLog(log, path);
      std::cerr << "wrote " << log.examples.size() << " examples to " << path
                << "\n";
    } else if (*init) {
      const ExperimentConfig cfg = ResolveConfig(init_flags);
      EchoConfig(cfg);
      const auto seqs = abpo::GenerateSequences(abpo::MakeUserModelConfig(cfg));
      abpo::Rng rng = abpo::DeriveStream(cfg.seed, {0x1717});
      abpo::InitTrace trace;
      const abpo::PolicyParams policy =
          abpo::SupervisedInit(seqs, cfg, rng, &trace);
      const std::string path =
          out_path.empty() ? DefaultPath(cfg, "init.ckpt") : out_path;
      abpo::WriteCheckpoint(policy, path);
      std::fprintf(stderr, "final mean log-likelihood %.6f; wrote %s\n",
                   trace.final_log_likelihood, path.c_str());
    } else if (*update) {
      const ExperimentConfig cfg = ResolveConfig(update_flags);
      EchoConfig(cfg);
      abpo::PolicyParams policy = abpo::ReadCheckpoint(policy_path);
      const abpo::BanditLog log = abpo::ReadLog(log_path);
      abpo::WriteEpochStatsHeader(std::cout);
      if (cfg.mode != abpo::RunMode::kNoUpdate) {
        const abpo::UpdateConfig ucfg = abpo::MakeUpdateConfig(cfg);
        for (int e = 0; e < cfg.epochs_per_round; ++e) {
          abpo::EpochStats stats;
          abpo::Rng rng = abpo::DeriveStream(
              cfg.seed, {0xe90c, 0, static_cast<std::uint64_t>(e)});
          policy = abpo::RunEpoch(policy, log, ucfg, rng(), &stats);
          stats.epoch = e;
          abpo::WriteEpochStatsRow(std::cout, 0, stats);
        }
      }
      abpo::WriteCheckpoint(policy, out_path);
    } else if (*simulate) {
      const ExperimentConfig cfg = ResolveConfig(sim_flags);
      abpo::RunClosedLoop(cfg, &std::cerr);
    } else if (*eval) {
      const ExperimentConfig cfg = ResolveConfig(eval_flags);
      const auto seqs = abpo::GenerateSequences(abpo::MakeUserModelConfig(cfg));
      const abpo::EvalSet set = abpo::MakeEvalSet(seqs, cfg);
      const abpo::PolicyParams policy = abpo::ReadCheckpoint(policy_path);
      abpo::WriteMetricsHeader(std::cout);
      for (const abpo::MetricRow& row :
           abpo::Evaluate(policy, set, eval_round)) {
        abpo::WriteMetricRow(std::cout, row);
      }
    } else if (*verify) {
      const abpo::TheoryGrid grid =
          grid_name == "empty" ? abpo::TheoryGrid{}
                               : abpo::DefaultTheoryGrid(samples, theory_seed);
      if (report_path.empty()) return abpo::VerifyTheory(grid, std::cout);
      std::ofstream out(report_path);
      if (!out) throw abpo::ConfigError("cannot open '" + report_path + "'");
      const int status = abpo::VerifyTheory(grid, out);
      std::cerr << (status == 0 ? "all checks passed" : "some checks FAILED")
                << "; report in " << report_path << "\n";
      return status;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
