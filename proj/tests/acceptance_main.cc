// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned here.
// Exit status is nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "abpo/bandit_log.h"
#include "abpo/config.h"
#include "abpo/experiment.h"
#include "abpo/optimizer.h"
#include "abpo/random.h"
#include "abpo/sequences.h"
#include "abpo/theory.h"
#include "test_util.h"

namespace abpo {
namespace {

namespace fs = std::filesystem;

constexpr double kTheorySeconds = 60.0;
constexpr double kGradientTolerance = 1e-6;
constexpr int kGradientInstances = 100;
constexpr double kGradientKinkMargin = 1e-4;
constexpr double kGradientSeconds = 30.0;
constexpr double kReductionTolerance = 1e-12;
constexpr int kSeeds = 5;
constexpr int kSeedsRequired = 4;
constexpr double kRelativeGap = 0.3;
constexpr double kSecondsPerSeed = 600.0;
constexpr std::size_t kLogExamples = 10000;

double Seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

int failures = 0;

void Report(bool pass, const std::string& name, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(),
              detail.c_str());
  std::fflush(stdout);
}

std::string Format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

// ---- theory
// ------------------------------------------------------------------

void TheorySuite() {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<CheckReport> reports = RunTheoryGrid(DefaultTheoryGrid());
  const double secs = Seconds(start);
  int failed = 0;
  std::string names;
  for (const CheckReport& r : reports) {
    if (r.pass) continue;
    ++failed;
    names += " " + r.id + "(" + r.fixture + ")";
  }
  Report(failed == 0 && !reports.empty() && secs <= kTheorySeconds,
         "theory_suite",
         Format("%zu checks, %d failed, n = 1e5, %.1f s (limit %.0f s)",
                reports.size(), failed, secs, kTheorySeconds) +
             names);
}

// ---- gradient
// ----------------------------------------------------------------

void GradientCorrectness() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(20240601);
  double worst = 0.0;
  for (int i = 0; i < kGradientInstances; ++i) {
    const test_util::SurrogateInstance inst =
        test_util::RandomSmoothInstance(rng, kGradientKinkMargin);
    worst = std::max(worst, test_util::GradientRelativeError(inst));
  }
  const double secs = Seconds(start);
  Report(worst <= kGradientTolerance && secs <= kGradientSeconds,
         "gradient_finite_difference",
         Format("%d instances, max relative error %.3g (limit %.0e), %.2f s",
                kGradientInstances, worst, kGradientTolerance, secs));
}

// ---- reductions
// --------------------------------------------------------------

void Reductions() {
  Rng rng(77);
  UpdateConfig cfg;

  // Zero anchor weight: advantages are the plain sample statistics of the
  // sampled rollouts.
  double worst_zero = 0.0;
  for (int trial = 0; trial < 2000; ++trial) {
    const int g = 2 + static_cast<int>(UniformIndex(rng, 15));
    RolloutGroup group;
    group.anchored = true;
    group.anchor_weight = 0.0;
    group.rollouts.resize(g);
    group.rollouts[0].is_anchor = true;
    for (int j = 0; j < g; ++j) {
      group.rewards.push_back(UniformIndex(rng, 2)
                                  ? StandardNormal(rng)
                                  : UniformIndex(rng, 3) - 1.0);
    }
    const AdvantageSet adv = AdvantagesBandit(group, cfg);
    double mean = 0.0;
    for (int j = 1; j < g; ++j) mean += group.rewards[j];
    mean /= g - 1;
    double var = 0.0;
    for (int j = 1; j < g; ++j) var += std::pow(group.rewards[j] - mean, 2);
    var /= g - 1;
    const double sd = std::sqrt(var + cfg.std_eps);
    for (int j = 1; j < g; ++j) {
      worst_zero = std::max(
          worst_zero,
          std::abs(adv.advantages[j - 1] - (group.rewards[j] - mean) / sd));
    }
  }

  // No self-certainty and no format term: rewards are pure +-match.
  RewardConfig pure;
  pure.lambda_sc = 0.0;
  pure.format_reward_on = false;
  pure.malformation_prob = 0.3;
  int reward_mismatches = 0, rewards_checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const PolicyParams policy = test_util::RandomPolicy(20, 10, rng, 1.0);
    const int y = static_cast<int>(UniformIndex(rng, 2));
    const LoggedExample ex = test_util::RandomExample(policy, 6, y, rng);
    RolloutGroup group = BuildAnchoredGroup(policy, ex, 6, pure, rng);
    AssignRewards(group, pure);
    for (int j = 0; j < group.group_size(); ++j) {
      const double match = group.rollouts[j].item == ex.a_log ? 1.0 : 0.0;
      reward_mismatches += group.rewards[j] != (y == 1 ? match : -match);
      ++rewards_checked;
    }
  }

  // Ratio one: the surrogate is the raw advantage.
  double worst_ratio = 0.0;
  for (int trial = 0; trial < 2000; ++trial) {
    const double a = 4.0 * StandardNormal(rng);
    const double eps = 0.01 + 0.98 * Uniform01(rng);
    worst_ratio =
        std::max(worst_ratio, std::abs(ClippedSurrogate(1.0, a, eps) - a));
  }
  for (int trial = 0; trial < 200; ++trial) {
    const test_util::SurrogateInstance inst =
        test_util::RandomSurrogateInstance(rng);
    double expected = 0.0;
    for (const AdvantageSet& adv : inst.advantages) {
      double sum = 0.0;
      for (double a : adv.advantages) sum += a;
      expected += sum / adv.advantages.size();
    }
    expected /= inst.advantages.size();
    const double got = SurrogateObjective(inst.policy_old, inst.groups,
                                          inst.advantages, inst.clip_eps);
    worst_ratio = std::max(worst_ratio, std::abs(got - expected));
  }

  Report(worst_zero <= kReductionTolerance && reward_mismatches == 0 &&
             worst_ratio <= kReductionTolerance,
         "reductions",
         Format("zero anchor weight max diff %.2g, pure match rewards %d/%d "
                "mismatched, unit ratio max diff %.2g (limit %.0e)",
                worst_zero, reward_mismatches, rewards_checked, worst_ratio,
                kReductionTolerance));
}

// ---- closed-loop fixture
// -----------------------------------------------------

// 200 users, V = 500, M = 50, four rounds re-logged under the latest policy.
// The update settings apply to every mode alike.
ExperimentConfig ClosedLoopFixture(std::uint64_t seed, RunMode mode) {
  ExperimentConfig cfg;
  cfg.num_users = 200;
  cfg.num_items = 500;
  cfg.candidate_size = 50;
  cfg.rounds = 4;
  cfg.relog = true;
  cfg.group_size = 16;
  cfg.learning_rate = 40.0;
  cfg.epochs_per_round = 2;
  cfg.init_epochs = 20;
  cfg.init_learning_rate = 20.0;
  cfg.seed = seed;
  cfg.mode = mode;
  cfg.output_dir = "";
  return cfg;
}

struct SeedRuns {
  ClosedLoopResult vanilla, abpo, frozen;
  double seconds = 0.0;
};

std::vector<SeedRuns> RunFixture() {
  std::vector<SeedRuns> runs;
  for (int s = 1; s <= kSeeds; ++s) {
    const auto start = std::chrono::steady_clock::now();
    SeedRuns r{RunClosedLoop(ClosedLoopFixture(s, RunMode::kVanillaGrpo)),
               RunClosedLoop(ClosedLoopFixture(s, RunMode::kAbpo)),
               RunClosedLoop(ClosedLoopFixture(s, RunMode::kNoUpdate)), 0.0};
    r.seconds = Seconds(start);
    runs.push_back(std::move(r));
  }
  return runs;
}

void ExposureBias(const std::vector<SeedRuns>& runs) {
  const double inv_m =
      1.0 / ClosedLoopFixture(1, RunMode::kAbpo).candidate_size;
  int rising = 0, below = 0;
  double slowest = 0.0;
  std::string detail;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& v = runs[i].vanilla.reports;
    const auto& a = runs[i].abpo.reports;
    const double v1 = v[1].matching.positive, v4 = v[4].matching.positive;
    const double a4 = a[4].matching.positive;
    const double vneg4 = v[4].matching.no_response;
    rising += v4 > v1 && vneg4 < inv_m;
    below += a4 <= (1.0 - kRelativeGap) * v4;
    slowest = std::max(slowest, runs[i].seconds);
    detail +=
        Format(" [seed %zu vanilla pos %.3f->%.3f neg %.4f, abpo pos %.3f]",
               i + 1, v1, v4, vneg4, a4);
  }
  Report(
      rising >= kSeedsRequired && slowest <= kSecondsPerSeed,
      "exposure_bias_vanilla",
      Format(
          "vanilla positive matching rises and no-response ends below "
          "1/M in %d/%d seeds (need %d), slowest seed %.1f s (limit %.0f s);",
          rising, kSeeds, kSeedsRequired, slowest, kSecondsPerSeed) +
          detail);
  Report(below >= kSeedsRequired, "exposure_bias_abpo_gap",
         Format("abpo round-4 positive matching at least %.0f%% below vanilla "
                "in %d/%d seeds (need %d)",
                100 * kRelativeGap, below, kSeeds, kSeedsRequired));
}

void AccuracyDiversity(const std::vector<SeedRuns>& runs) {
  int hr_ok = 0, div_ok = 0;
  std::string hr_detail, div_detail;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const RoundReport& a = runs[i].abpo.reports[4];
    const RoundReport& v = runs[i].vanilla.reports[4];
    const RoundReport& n = runs[i].frozen.reports[4];
    hr_ok += a.Metric("hr", 5) >= n.Metric("hr", 5);
    div_ok += a.Metric("div", 5) >= v.Metric("div", 5);
    hr_detail += Format(" [seed %zu abpo %.3f no_update %.3f]", i + 1,
                        a.Metric("hr", 5), n.Metric("hr", 5));
    div_detail += Format(" [seed %zu abpo %.2f vanilla %.2f]", i + 1,
                         a.Metric("div", 5), v.Metric("div", 5));
  }
  Report(hr_ok >= kSeedsRequired, "accuracy_hr5_vs_no_update",
         Format("abpo HR@5 >= no_update in %d/%d seeds (need %d);", hr_ok,
                kSeeds, kSeedsRequired) +
             hr_detail);
  Report(div_ok >= kSeedsRequired, "diversity_div5_vs_vanilla",
         Format("abpo Div@5 >= vanilla in %d/%d seeds (need %d);", div_ok,
                kSeeds, kSeedsRequired) +
             div_detail);
}

// ---- log format
// --------------------------------------------------------------

// Round-trips a log of at least kLogExamples examples and checks held-out
// exclusion. Returns a description of the first problem, or "".
std::string CheckLogRoundTrip(int num_items, int candidate_size,
                              std::size_t* count) {
  UserModelConfig users;
  users.num_items = num_items;
  users.num_users = 2000;
  users.prefix_len = 10;
  users.horizon = 6;
  users.seed = 99;
  const auto seqs = GenerateSequences(users);
  Rng rng(5);
  const PolicyParams policy =
      test_util::RandomPolicy(num_items, 2 * num_items, rng, 1.0);
  const BanditLog log =
      MakeBanditLog(policy, seqs, {candidate_size, 1.0, 7, 1});
  *count = log.examples.size();
  if (log.examples.size() < kLogExamples) return "log too small";
  std::stringstream buf;
  WriteLog(log, buf);
  const std::string text = buf.str();
  const BanditLog back = ReadLog(buf);
  if (!(back == log)) return "read(write(log)) differs";
  for (std::size_t i = 0; i < log.examples.size(); ++i) {
    if (std::memcmp(&back.examples[i].e0, &log.examples[i].e0,
                    sizeof(double))) {
      return Format("propensity of example %zu not bit-exact", i);
    }
  }
  std::stringstream again;
  WriteLog(back, again);
  if (again.str() != text) return "write(read(text)) differs";
  for (const LoggedExample& ex : log.examples) {
    const UserSequence& seq = seqs[ex.context.user_id];
    if (ex.candidates.Contains(seq.held_out())) {
      return Format("held-out item in candidates of user %d",
                    ex.context.user_id);
    }
    for (ItemId h : ex.context.history) {
      if (h == seq.held_out()) {
        return Format("held-out item in history of user %d",
                      ex.context.user_id);
      }
    }
  }
  return "";
}

void LogRoundTrip() {
  std::size_t n50 = 0, n200 = 0;
  const std::string e50 = CheckLogRoundTrip(500, 50, &n50);
  const std::string e200 = CheckLogRoundTrip(300, 200, &n200);
  Report(
      e50.empty() && e200.empty(), "log_round_trip",
      Format("%zu examples at M = 50 (%s), %zu examples at M = 200 on V = 300 "
             "(%s)",
             n50, e50.empty() ? "identical" : e50.c_str(), n200,
             e200.empty() ? "identical" : e200.c_str()));
}

// ---- determinism
// -------------------------------------------------------------

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void CliDeterminism() {
  const fs::path root = fs::temp_directory_path() / "abpo_acceptance_cli";
  fs::remove_all(root);
  const std::string flags =
      " simulate --num_users 60 --num_items 200 --rounds 3 --group_size 8"
      " --learning_rate 20 --epochs_per_round 2 --init_epochs 20"
      " --init_learning_rate 20 --seed 31 --output_dir ";
  int status = 0;
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string("\"") + ABPO_CLI_PATH + "\"" + flags +
                            "\"" + (root / run).string() +
                            "\" > /dev/null 2>&1";
    status |= std::system(cmd.c_str());
  }
  bool same = status == 0;
  std::string detail = status == 0 ? "" : "simulate exited nonzero; ";
  for (const char* file : {"metrics.csv", "epochs.csv", "checkpoints.csv"}) {
    const std::string a = ReadFile(root / "a" / file);
    const std::string b = ReadFile(root / "b" / file);
    const bool ok = !a.empty() && a == b;
    same = same && ok;
    detail += Format("%s %s (%zu bytes); ", file, ok ? "identical" : "DIFFERS",
                     a.size());
  }
  fs::remove_all(root);
  Report(same, "cli_determinism", detail);
}

}  // namespace
}  // namespace abpo

int main() {
  using namespace abpo;
  TheorySuite();
  GradientCorrectness();
  Reductions();
  const std::vector<SeedRuns> runs = RunFixture();
  ExposureBias(runs);
  AccuracyDiversity(runs);
  LogRoundTrip();
  CliDeterminism();
  std::printf("%s: %d criterion line(s) failed\n",
              failures == 0 ? "ALL PASS" : "SOME FAIL", failures);
  return failures == 0 ? 0 : 1;
}
