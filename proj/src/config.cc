#include "abpo/config.h"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>

#include "abpo/error.h"

namespace abpo {

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void BadValue(const std::string& key, const std::string& value,
                           const char* expected) {
  throw ConfigError(key + ": cannot parse '" + value + "' as " + expected);
}

template <typename Int>
Int ParseInt(const std::string& key, const std::string& value) {
  Int out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) {
    BadValue(key, value, "an integer");
  }
  return out;
}

double ParseDouble(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double out = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size()) {
    BadValue(key, value, "a number");
  }
  return out;
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  BadValue(key, value, "a boolean");
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define ABPO_INT_FIELD(name)                                             \
  Field {                                                                \
    #name,                                                               \
        [](ExperimentConfig& c, const std::string& v) {                  \
          c.name = ParseInt<int>(#name, v);                              \
        },                                                               \
        [](const ExperimentConfig& c) { return std::to_string(c.name); } \
  }
#define ABPO_DOUBLE_FIELD(name)                                        \
  Field {                                                              \
    #name,                                                             \
        [](ExperimentConfig& c, const std::string& v) {                \
          c.name = ParseDouble(#name, v);                              \
        },                                                             \
        [](const ExperimentConfig& c) { return FormatDouble(c.name); } \
  }
#define ABPO_BOOL_FIELD(name)                            \
  Field {                                                \
    #name,                                               \
        [](ExperimentConfig& c, const std::string& v) {  \
          c.name = ParseBool(#name, v);                  \
        },                                               \
        [](const ExperimentConfig& c) {                  \
          return std::string(c.name ? "true" : "false"); \
        }                                                \
  }

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = {
      ABPO_INT_FIELD(num_items),
      ABPO_INT_FIELD(feature_dim),
      ABPO_INT_FIELD(num_users),
      ABPO_INT_FIELD(prefix_len),
      ABPO_INT_FIELD(horizon),
      ABPO_INT_FIELD(latent_dim),
      ABPO_DOUBLE_FIELD(affinity),
      ABPO_DOUBLE_FIELD(popularity),
      ABPO_DOUBLE_FIELD(zipf_exponent),
      ABPO_INT_FIELD(candidate_size),
      ABPO_DOUBLE_FIELD(temperature),
      ABPO_BOOL_FIELD(relog),
      ABPO_INT_FIELD(group_size),
      ABPO_DOUBLE_FIELD(clip_eps),
      ABPO_DOUBLE_FIELD(snips_delta),
      ABPO_DOUBLE_FIELD(std_eps),
      ABPO_DOUBLE_FIELD(lambda_sc),
      ABPO_DOUBLE_FIELD(malformation_prob),
      ABPO_BOOL_FIELD(format_reward),
      ABPO_DOUBLE_FIELD(learning_rate),
      ABPO_INT_FIELD(batch_size),
      ABPO_BOOL_FIELD(stratified),
      ABPO_INT_FIELD(epochs_per_round),
      ABPO_INT_FIELD(rounds),
      Field{"mode",
            [](ExperimentConfig& c, const std::string& v) {
              c.mode = ParseRunMode(v);
            },
            [](const ExperimentConfig& c) {
              return std::string(RunModeName(c.mode));
            }},
      ABPO_INT_FIELD(init_epochs),
      ABPO_DOUBLE_FIELD(init_learning_rate),
      ABPO_INT_FIELD(matching_samples),
      Field{"seed",
            [](ExperimentConfig& c, const std::string& v) {
              c.seed = ParseInt<std::uint64_t>("seed", v);
            },
            [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      Field{"output_dir",
            [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; },
            [](const ExperimentConfig& c) { return c.output_dir; }},
  };
  return fields;
}

#undef ABPO_INT_FIELD
#undef ABPO_DOUBLE_FIELD
#undef ABPO_BOOL_FIELD

const Field& FindField(const std::string& key) {
  for (const Field& f : Fields()) {
    if (key == f.key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

template <typename T>
void Require(bool ok, const char* field, const char* bound, T value) {
  if (!ok) {
    std::string v;
    if constexpr (std::is_floating_point_v<T>) {
      v = FormatDouble(value);
    } else {
      v = std::to_string(value);
    }
    throw ConfigError(std::string(field) + " must be " + bound + ", got " + v);
  }
}

}  // namespace

const char* RunModeName(RunMode mode) {
  switch (mode) {
    case RunMode::kAbpo:
      return "abpo";
    case RunMode::kVanillaGrpo:
      return "vanilla_grpo";
    case RunMode::kNoUpdate:
      return "no_update";
  }
  return "unknown";
}

RunMode ParseRunMode(const std::string& name) {
  if (name == "abpo") return RunMode::kAbpo;
  if (name == "vanilla_grpo") return RunMode::kVanillaGrpo;
  if (name == "no_update") return RunMode::kNoUpdate;
  throw ConfigError("mode must be one of abpo, vanilla_grpo, no_update; got '" +
                    name + "'");
}

const std::vector<std::string>& ConfigKeys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const Field& f : Fields()) k.emplace_back(f.key);
    return k;
  }();
  return keys;
}

void SetConfigValue(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value) {
  FindField(key).set(cfg, value);
}

std::string GetConfigValue(const ExperimentConfig& cfg,
                           const std::string& key) {
  return FindField(key).get(cfg);
}

void ParseConfigText(std::istream& in, ExperimentConfig& cfg) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = Trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ParseError(line_no, "expected key=value, got '" + text + "'");
    }
    const std::string key = Trim(text.substr(0, eq));
    const std::string value = Trim(text.substr(eq + 1));
    try {
      SetConfigValue(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ParseError(line_no, e.what());
    }
  }
}

bool LoadConfigFile(const std::string& path, ExperimentConfig& cfg,
                    std::ostream& notice) {
  std::ifstream in(path);
  if (!in) {
    notice << "config file '" << path << "' not found; using defaults\n";
    return false;
  }
  ParseConfigText(in, cfg);
  return true;
}

void ValidateExperimentConfig(const ExperimentConfig& c) {
  Require(c.num_items >= 2, "num_items", ">= 2", c.num_items);
  Require(c.feature_dim == 0 || (c.feature_dim >= 2 && c.feature_dim % 2 == 0),
          "feature_dim", "0 (auto) or an even number >= 2", c.feature_dim);
  Require(c.num_users >= 1, "num_users", ">= 1", c.num_users);
  Require(c.prefix_len >= 1, "prefix_len", ">= 1", c.prefix_len);
  Require(c.horizon >= 2, "horizon", ">= 2", c.horizon);
  Require(c.latent_dim >= 1, "latent_dim", ">= 1", c.latent_dim);
  Require(std::isfinite(c.affinity), "affinity", "finite", c.affinity);
  Require(std::isfinite(c.popularity), "popularity", "finite", c.popularity);
  Require(c.zipf_exponent >= 0.0, "zipf_exponent", ">= 0", c.zipf_exponent);
  Require(c.prefix_len + c.horizon <= c.num_items, "prefix_len + horizon",
          "<= num_items", c.prefix_len + c.horizon);
  Require(c.candidate_size >= 2, "candidate_size", ">= 2", c.candidate_size);
  Require(c.candidate_size - 1 <= c.num_items - c.prefix_len - c.horizon,
          "candidate_size", "<= num_items - prefix_len - horizon + 1",
          c.candidate_size);
  Require(c.temperature > 0.0 && std::isfinite(c.temperature), "temperature",
          "> 0", c.temperature);
  Require(c.group_size >= 2, "group_size", ">= 2", c.group_size);
  Require(c.clip_eps > 0.0 && c.clip_eps < 1.0, "clip_eps", "in (0,1)",
          c.clip_eps);
  Require(c.snips_delta > 0.0, "snips_delta", "> 0", c.snips_delta);
  Require(c.std_eps > 0.0, "std_eps", "> 0", c.std_eps);
  Require(c.lambda_sc >= 0.0, "lambda_sc", ">= 0", c.lambda_sc);
  Require(c.malformation_prob >= 0.0 && c.malformation_prob < 1.0,
          "malformation_prob", "in [0,1)", c.malformation_prob);
  Require(c.learning_rate > 0.0, "learning_rate", "> 0", c.learning_rate);
  Require(c.batch_size >= 1, "batch_size", ">= 1", c.batch_size);
  Require(c.epochs_per_round >= 0, "epochs_per_round", ">= 0",
          c.epochs_per_round);
  Require(c.rounds >= 1, "rounds", ">= 1", c.rounds);
  Require(c.init_epochs >= 0, "init_epochs", ">= 0", c.init_epochs);
  Require(c.init_learning_rate > 0.0, "init_learning_rate", "> 0",
          c.init_learning_rate);
  Require(c.matching_samples >= 1, "matching_samples", ">= 1",
          c.matching_samples);
}

void WriteConfig(std::ostream& out, const ExperimentConfig& cfg) {
  for (const Field& f : Fields()) out << f.key << '=' << f.get(cfg) << '\n';
}

UserModelConfig MakeUserModelConfig(const ExperimentConfig& c) {
  UserModelConfig u;
  u.num_items = c.num_items;
  u.num_users = c.num_users;
  u.prefix_len = c.prefix_len;
  u.horizon = c.horizon;
  u.latent_dim = c.latent_dim;
  u.affinity = c.affinity;
  u.popularity = c.popularity;
  u.zipf_exponent = c.zipf_exponent;
  u.seed = c.seed;
  return u;
}

LogConfig MakeLogConfig(const ExperimentConfig& c, int round) {
  LogConfig l;
  l.candidate_size = c.candidate_size;
  l.temperature = c.temperature;
  l.seed = c.seed;
  l.round = round;
  return l;
}

UpdateConfig MakeUpdateConfig(const ExperimentConfig& c) {
  UpdateConfig u;
  u.group_size = c.group_size;
  u.clip_eps = c.clip_eps;
  u.snips_delta = c.snips_delta;
  u.std_eps = c.std_eps;
  u.learning_rate = c.learning_rate;
  u.mode = c.mode == RunMode::kVanillaGrpo ? UpdateMode::kVanillaGrpo
                                           : UpdateMode::kAbpo;
  u.batch_size = c.batch_size;
  u.stratified = c.stratified;
  u.reward.lambda_sc = c.lambda_sc;
  u.reward.malformation_prob = c.malformation_prob;
  u.reward.format_reward_on = c.format_reward;
  return u;
}

}  // namespace abpo
