#ifndef ABPO_CONFIG_H_
#define ABPO_CONFIG_H_

// Experiment configuration: every knob of a closed-loop run, a flat
// key=value file format and field-level validation.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "abpo/bandit_log.h"
#include "abpo/optimizer.h"
#include "abpo/sequences.h"

namespace abpo {

enum class RunMode { kAbpo, kVanillaGrpo, kNoUpdate };

const char* RunModeName(RunMode mode);
// Throws ConfigError on an unknown name.
RunMode ParseRunMode(const std::string& name);

struct ExperimentConfig {
  // Catalog and user model.
  int num_items = 500;  // V
  int feature_dim = 0;  // d; 0 selects 2 V
  int num_users = 200;
  int prefix_len = 10;  // T
  int horizon = 6;      // N
  int latent_dim = 8;
  double affinity = 2.0;
  double popularity = 1.0;
  double zipf_exponent = 1.0;

  // Logging.
  int candidate_size = 50;   // M
  double temperature = 1.0;  // tau for e0 and e_old
  bool relog = true;         // false: every round logs under the initial policy

  // Update.
  int group_size = 8;  // G
  double clip_eps = 0.2;
  double snips_delta = 1e-6;
  double std_eps = 1e-8;
  double lambda_sc = 0.1;
  double malformation_prob = 0.05;
  bool format_reward = true;
  double learning_rate = 0.05;
  int batch_size = 64;
  bool stratified = true;
  int epochs_per_round = 1;
  int rounds = 4;  // R
  RunMode mode = RunMode::kAbpo;

  // Supervised initialization.
  int init_epochs = 200;
  double init_learning_rate = 50.0;

  // Evaluation.
  int matching_samples = 16;

  std::uint64_t seed = 1;
  std::string output_dir = "abpo_out";

  int ResolvedFeatureDim() const {
    return feature_dim > 0 ? feature_dim : 2 * num_items;
  }
};

// Names of every configurable field, in file order.
const std::vector<std::string>& ConfigKeys();

// Sets one field from its text form. Throws ConfigError on an unknown key or
// an unparsable value.
void SetConfigValue(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value);
std::string GetConfigValue(const ExperimentConfig& cfg, const std::string& key);

// Flat key=value text; blank lines and lines starting with '#' are ignored.
// Throws ParseError with the line number on malformed lines.
void ParseConfigText(std::istream& in, ExperimentConfig& cfg);

// Reads `path` into `cfg`. A missing file leaves `cfg` untouched, writes a
// notice to `notice` and returns false.
bool LoadConfigFile(const std::string& path, ExperimentConfig& cfg,
                    std::ostream& notice);

// Throws ConfigError naming the offending field and its bound.
void ValidateExperimentConfig(const ExperimentConfig& cfg);

// Resolved config in the same key=value format the parser reads.
void WriteConfig(std::ostream& out, const ExperimentConfig& cfg);

UserModelConfig MakeUserModelConfig(const ExperimentConfig& cfg);
LogConfig MakeLogConfig(const ExperimentConfig& cfg, int round);
UpdateConfig MakeUpdateConfig(const ExperimentConfig& cfg);

}  // namespace abpo

#endif  // ABPO_CONFIG_H_
