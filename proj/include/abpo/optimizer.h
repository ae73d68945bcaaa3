#ifndef ABPO_OPTIMIZER_H_
#define ABPO_OPTIMIZER_H_

// Anchored Bandit Policy Optimization.
//
// Each logged example becomes a rollout group of size G whose first member
// is the logged exposure a_log (the anchor) and whose remaining G-1 members
// are sampled from the frozen rollout policy pi_old. The anchor only enters
// the group's reward statistics, with a stop-gradient SNIPS weight; the
// clipped surrogate is summed over the G-1 sampled rollouts alone.
//
// Vanilla GRPO mode keeps G sampled rollouts, the +-1 item-matching reward
// and plain group normalization, for comparison.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "abpo/bandit_log.h"
#include "abpo/policy.h"
#include "abpo/random.h"

namespace abpo {

enum class UpdateMode { kAbpo, kVanillaGrpo };

const char* ModeName(UpdateMode mode);

struct RewardConfig {
  double lambda_sc = 0.1;
  double malformation_prob = 0.05;
  bool format_reward_on = true;
};

struct UpdateConfig {
  int group_size = 8;     // G
  double clip_eps = 0.2;  // epsilon
  double snips_delta = 1e-6;
  double std_eps = 1e-8;
  double learning_rate = 0.05;
  UpdateMode mode = UpdateMode::kAbpo;
  int batch_size = 64;
  bool stratified = true;
  RewardConfig reward;
};

// Throws ConfigError naming the offending field.
void ValidateUpdateConfig(const UpdateConfig& cfg);

struct Rollout {
  ItemId item = 0;
  int index = 0;  // position in the candidate set
  bool is_anchor = false;
  bool well_formed = true;
  double log_prob_old = 0.0;
  double self_certainty = 0.0;
};

struct RolloutGroup {
  const LoggedExample* example = nullptr;
  // rollouts[0] is the anchor when `anchored`; otherwise all are sampled.
  std::vector<Rollout> rollouts;
  std::vector<double> rewards;
  bool anchored = true;
  double e_old = 1.0;          // pi_old's probability of a_log
  double anchor_weight = 1.0;  // SNIPS-normalized, a differentiation constant

  int group_size() const { return static_cast<int>(rollouts.size()); }
};

struct AdvantageSet {
  double baseline = 0.0;
  double sigma = 1.0;
  // One entry per sampled rollout: G-1 for anchored groups, G for vanilla.
  std::vector<double> advantages;
};

// rollouts[0] = anchor on ex.a_log; rollouts[1..G-1] i.i.d. from pi_old over
// ex.candidates, each well-formed with probability 1 - malformation_prob.
// Throws ConfigError if G < 2.
RolloutGroup BuildAnchoredGroup(const PolicyParams& policy_old,
                                const LoggedExample& ex, int group_size,
                                const RewardConfig& reward, Rng& rng);

// G rollouts i.i.d. from pi_old, no anchor.
RolloutGroup BuildVanillaGroup(const PolicyParams& policy_old,
                               const LoggedExample& ex, int group_size,
                               Rng& rng);

// r_match + r_fmt with r_match = 1[item = a_log]. For y = 1.
double RewardPositive(const Rollout& r, ItemId a_log, const RewardConfig& cfg);
// -1[item = a_log] + r_fmt + lambda_sc * self_certainty. For y = 0.
double RewardNoResponse(const Rollout& r, ItemId a_log,
                        const RewardConfig& cfg);
// +1 / -1 / 0 item-matching reward used by vanilla GRPO.
double RewardVanilla(const Rollout& r, ItemId a_log, int y);

// Fills group.rewards according to the group's mode and example feedback.
void AssignRewards(RolloutGroup& group, const RewardConfig& cfg);

// e_old / e0. Throws ValidationError if e0 <= 0.
double IpsWeight(double e_old, double e0);

struct SnipsEntry {
  std::size_t example_index = 0;
  int y = 0;
  double weight = 0.0;
};

// Per-feedback-stratum self-normalization w / (mean_stratum(w) + delta).
// The result is aligned with `batch`.
std::vector<double> SnipsNormalize(std::span<const SnipsEntry> batch,
                                   double delta);

// (w r_log + sum_j r_j) / (w + G - 1).
double WeightedBaseline(double anchor_weight, double r_log,
                        std::span<const double> roll_rewards);

// sqrt([w (r_log - b)^2 + sum_j (r_j - b)^2] / (w + G - 1) + std_eps).
double WeightedStd(double anchor_weight, double r_log,
                   std::span<const double> roll_rewards, double baseline,
                   double std_eps);

// Advantages for the sampled rollouts of an anchored group. The anchor gets
// no advantage of its own.
AdvantageSet AdvantagesBandit(const RolloutGroup& group,
                              const UpdateConfig& cfg);

// (r_j - mean) / sqrt(var + std_eps) with population statistics.
std::vector<double> VanillaGrpoAdvantages(std::span<const double> rewards,
                                          double std_eps);

// Dispatches on group.anchored.
AdvantageSet GroupAdvantages(const RolloutGroup& group,
                             const UpdateConfig& cfg);

// min(ratio A, clip(ratio, 1-eps, 1+eps) A).
double ClippedSurrogate(double ratio, double advantage, double eps);

// Mean over groups of the per-group average clipped surrogate, as a function
// of `policy` with the advantages held fixed.
double SurrogateObjective(const PolicyParams& policy,
                          std::span<const RolloutGroup> batch,
                          std::span<const AdvantageSet> advantages,
                          double clip_eps);

struct SurrogateGradient {
  Matrix grad;
  double objective = 0.0;
  int clipped = 0;  // sampled rollouts whose gradient the clip zeroed
  int terms = 0;
};

// Analytic gradient of SurrogateObjective with respect to policy weights.
// Throws NumericError naming the offending group on a non-finite gradient.
SurrogateGradient ComputeSurrogateGradient(
    const PolicyParams& policy, std::span<const RolloutGroup> batch,
    std::span<const AdvantageSet> advantages, double clip_eps);

struct StepStats {
  double objective = 0.0;
  double mean_reward = 0.0;
  double clip_fraction = 0.0;
  double mean_abs_advantage = 0.0;
};

// One gradient-ascent step on the clipped surrogate. Groups must have been
// built under policy_old (their log_prob_old is stored on the rollouts) and
// carry SNIPS-normalized anchor weights.
PolicyParams UpdateStep(const PolicyParams& policy,
                        std::span<const RolloutGroup> batch,
                        const UpdateConfig& cfg, StepStats* stats = nullptr);

struct EpochStats {
  int epoch = 0;
  double mean_reward_pos = 0.0;
  double mean_reward_neg = 0.0;
  double clip_fraction = 0.0;
  double mean_weight_pos = 0.0;
  double mean_weight_neg = 0.0;
  double match_rate_pos = 0.0;  // sampled rollouts equal to a_log, y = 1
  double match_rate_neg = 0.0;  // same, y = 0
  double mean_abs_advantage = 0.0;
  int num_batches = 0;
};

// Splits example indices into mini-batches of roughly `batch_size`. With
// `stratified`, each batch receives both feedback types whenever the log
// contains both.
std::vector<std::vector<std::size_t>> MakeBatches(const BanditLog& log,
                                                  int batch_size,
                                                  bool stratified, Rng& rng);

// One pass over the log: freezes pi_old := policy, builds every group under
// pi_old with a per-example stream, then for each mini-batch computes IPS
// weights e_old/e0, SNIPS-normalizes them per stratum, and takes one
// UpdateStep. Identical inputs and seed give bit-identical parameters.
PolicyParams RunEpoch(const PolicyParams& policy, const BanditLog& log,
                      const UpdateConfig& cfg, std::uint64_t seed,
                      EpochStats* stats = nullptr);

void WriteEpochStatsHeader(std::ostream& out);
void WriteEpochStatsRow(std::ostream& out, int round, const EpochStats& s);

}  // namespace abpo

#endif  // ABPO_OPTIMIZER_H_
