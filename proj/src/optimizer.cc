#include "abpo/optimizer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>

#include "abpo/error.h"

namespace abpo {

namespace {
constexpr std::uint64_t kGroupStream = 0x960;
constexpr std::uint64_t kBatchStream = 0xba7;
}  // namespace

const char* ModeName(UpdateMode mode) {
  switch (mode) {
    case UpdateMode::kAbpo:
      return "abpo";
    case UpdateMode::kVanillaGrpo:
      return "vanilla_grpo";
  }
  return "?";
}

void ValidateUpdateConfig(const UpdateConfig& cfg) {
  if (cfg.group_size < 2) {
    throw ConfigError("group_size must be >= 2, got " +
                      std::to_string(cfg.group_size));
  }
  if (!(cfg.clip_eps > 0.0 && cfg.clip_eps < 1.0)) {
    throw ConfigError("clip_eps must lie in (0,1), got " +
                      std::to_string(cfg.clip_eps));
  }
  if (!(cfg.snips_delta > 0.0)) throw ConfigError("snips_delta must be > 0");
  if (!(cfg.std_eps > 0.0)) throw ConfigError("std_eps must be > 0");
  if (!(cfg.learning_rate > 0.0))
    throw ConfigError("learning_rate must be > 0");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(cfg.reward.lambda_sc >= 0.0))
    throw ConfigError("lambda_sc must be >= 0");
  if (!(cfg.reward.malformation_prob >= 0.0 &&
        cfg.reward.malformation_prob < 1.0)) {
    throw ConfigError("malformation_prob must lie in [0,1)");
  }
}

// ---- groups and rewards ----------------------------------------------------

RolloutGroup BuildAnchoredGroup(const PolicyParams& policy_old,
                                const LoggedExample& ex, int group_size,
                                const RewardConfig& reward, Rng& rng) {
  if (group_size < 2) throw ConfigError("group size must be >= 2");
  const ItemDistribution dist =
      Distribution(policy_old, ex.context, ex.candidates);
  const auto anchor_idx = ex.candidates.IndexOf(ex.a_log);
  if (!anchor_idx) throw InvalidActionError("a_log is not a candidate");
  const double sc = SelfCertainty(dist);

  RolloutGroup group;
  group.example = &ex;
  group.anchored = true;
  group.e_old = dist.probs()[*anchor_idx];
  group.rollouts.reserve(group_size);
  // The served exposure passed the schema check, so the anchor is well formed.
  group.rollouts.push_back(Rollout{ex.a_log, *anchor_idx, true, true,
                                   dist.log_probs()[*anchor_idx], sc});
  for (int j = 1; j < group_size; ++j) {
    const Draw d = SampleItem(dist, rng);
    const bool well_formed = !Bernoulli(rng, reward.malformation_prob);
    group.rollouts.push_back(Rollout{d.item, d.index, false, well_formed,
                                     dist.log_probs()[d.index], sc});
  }
  return group;
}

RolloutGroup BuildVanillaGroup(const PolicyParams& policy_old,
                               const LoggedExample& ex, int group_size,
                               Rng& rng) {
  if (group_size < 2) throw ConfigError("group size must be >= 2");
  const ItemDistribution dist =
      Distribution(policy_old, ex.context, ex.candidates);
  const double sc = SelfCertainty(dist);
  RolloutGroup group;
  group.example = &ex;
  group.anchored = false;
  if (const auto idx = ex.candidates.IndexOf(ex.a_log)) {
    group.e_old = dist.probs()[*idx];
  }
  group.rollouts.reserve(group_size);
  for (int j = 0; j < group_size; ++j) {
    const Draw d = SampleItem(dist, rng);
    group.rollouts.push_back(
        Rollout{d.item, d.index, false, true, dist.log_probs()[d.index], sc});
  }
  return group;
}

namespace {
double FormatReward(const Rollout& r, const RewardConfig& cfg) {
  return (cfg.format_reward_on && r.well_formed) ? 1.0 : 0.0;
}
}  // namespace

double RewardPositive(const Rollout& r, ItemId a_log, const RewardConfig& cfg) {
  const double match = r.item == a_log ? 1.0 : 0.0;
  return match + FormatReward(r, cfg);
}

double RewardNoResponse(const Rollout& r, ItemId a_log,
                        const RewardConfig& cfg) {
  const double match = r.item == a_log ? -1.0 : 0.0;
  return match + FormatReward(r, cfg) + cfg.lambda_sc * r.self_certainty;
}

double RewardVanilla(const Rollout& r, ItemId a_log, int y) {
  if (r.item != a_log) return 0.0;
  return y == 1 ? 1.0 : -1.0;
}

void AssignRewards(RolloutGroup& group, const RewardConfig& cfg) {
  const LoggedExample& ex = *group.example;
  group.rewards.resize(group.rollouts.size());
  for (std::size_t j = 0; j < group.rollouts.size(); ++j) {
    const Rollout& r = group.rollouts[j];
    if (!group.anchored) {
      group.rewards[j] = RewardVanilla(r, ex.a_log, ex.y);
    } else if (ex.y == 1) {
      group.rewards[j] = RewardPositive(r, ex.a_log, cfg);
    } else {
      group.rewards[j] = RewardNoResponse(r, ex.a_log, cfg);
    }
  }
}

// ---- weights and advantages ------------------------------------------------

double IpsWeight(double e_old, double e0) {
  if (!(e0 > 0.0)) {
    throw ValidationError("logging propensity must be positive, got " +
                          std::to_string(e0));
  }
  return e_old / e0;
}

std::vector<double> SnipsNormalize(std::span<const SnipsEntry> batch,
                                   double delta) {
  // Extended precision keeps large strata's means accurate to round-off.
  long double sum[2] = {0.0L, 0.0L};
  int count[2] = {0, 0};
  for (const SnipsEntry& e : batch) {
    const int s = e.y == 1 ? 1 : 0;
    sum[s] += e.weight;
    ++count[s];
  }
  std::vector<double> out(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const int s = batch[i].y == 1 ? 1 : 0;
    const double mean = static_cast<double>(sum[s] / count[s]);
    out[i] = batch[i].weight / (mean + delta);
  }
  return out;
}

double WeightedBaseline(double anchor_weight, double r_log,
                        std::span<const double> roll_rewards) {
  const double total =
      std::accumulate(roll_rewards.begin(), roll_rewards.end(), 0.0);
  return (anchor_weight * r_log + total) /
         (anchor_weight + static_cast<double>(roll_rewards.size()));
}

double WeightedStd(double anchor_weight, double r_log,
                   std::span<const double> roll_rewards, double baseline,
                   double std_eps) {
  double ss = anchor_weight * (r_log - baseline) * (r_log - baseline);
  for (double r : roll_rewards) ss += (r - baseline) * (r - baseline);
  return std::sqrt(
      ss / (anchor_weight + static_cast<double>(roll_rewards.size())) +
      std_eps);
}

AdvantageSet AdvantagesBandit(const RolloutGroup& group,
                              const UpdateConfig& cfg) {
  const std::span<const double> rewards(group.rewards);
  const double r_log = rewards[0];
  const auto samples = rewards.subspan(1);
  AdvantageSet out;
  out.baseline = WeightedBaseline(group.anchor_weight, r_log, samples);
  out.sigma = WeightedStd(group.anchor_weight, r_log, samples, out.baseline,
                          cfg.std_eps);
  out.advantages.reserve(samples.size());
  for (double r : samples) {
    out.advantages.push_back((r - out.baseline) / out.sigma);
  }
  return out;
}

std::vector<double> VanillaGrpoAdvantages(std::span<const double> rewards,
                                          double std_eps) {
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double ss = 0.0;
  for (double r : rewards) ss += (r - mean) * (r - mean);
  const double sd = std::sqrt(ss / n + std_eps);
  std::vector<double> out;
  out.reserve(rewards.size());
  for (double r : rewards) out.push_back(sd > 0.0 ? (r - mean) / sd : 0.0);
  return out;
}

AdvantageSet GroupAdvantages(const RolloutGroup& group,
                             const UpdateConfig& cfg) {
  if (group.anchored) return AdvantagesBandit(group, cfg);
  AdvantageSet out;
  out.advantages = VanillaGrpoAdvantages(group.rewards, cfg.std_eps);
  const double n = static_cast<double>(group.rewards.size());
  out.baseline =
      std::accumulate(group.rewards.begin(), group.rewards.end(), 0.0) / n;
  double ss = 0.0;
  for (double r : group.rewards) ss += (r - out.baseline) * (r - out.baseline);
  out.sigma = std::sqrt(ss / n + cfg.std_eps);
  return out;
}

// ---- surrogate -------------------------------------------------------------

double ClippedSurrogate(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clipped * advantage);
}

namespace {

int FirstSampled(const RolloutGroup& g) { return g.anchored ? 1 : 0; }

void CheckAligned(std::span<const RolloutGroup> batch,
                  std::span<const AdvantageSet> advantages) {
  if (batch.size() != advantages.size()) {
    throw ConfigError("one advantage set per group required");
  }
  for (std::size_t g = 0; g < batch.size(); ++g) {
    const std::size_t n = batch[g].rollouts.size() - FirstSampled(batch[g]);
    if (advantages[g].advantages.size() != n) {
      throw ConfigError("advantage count does not match sampled rollouts");
    }
  }
}

}  // namespace

double SurrogateObjective(const PolicyParams& policy,
                          std::span<const RolloutGroup> batch,
                          std::span<const AdvantageSet> advantages,
                          double clip_eps) {
  CheckAligned(batch, advantages);
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t g = 0; g < batch.size(); ++g) {
    const RolloutGroup& group = batch[g];
    const ItemDistribution dist =
        Distribution(policy, group.example->context, group.example->candidates);
    const int first = FirstSampled(group);
    const auto& adv = advantages[g].advantages;
    double group_sum = 0.0;
    for (std::size_t j = 0; j < adv.size(); ++j) {
      const Rollout& r = group.rollouts[first + j];
      const double ratio = std::exp(dist.log_probs()[r.index] - r.log_prob_old);
      group_sum += ClippedSurrogate(ratio, adv[j], clip_eps);
    }
    total += group_sum / static_cast<double>(adv.size());
  }
  return total / static_cast<double>(batch.size());
}

SurrogateGradient ComputeSurrogateGradient(
    const PolicyParams& policy, std::span<const RolloutGroup> batch,
    std::span<const AdvantageSet> advantages, double clip_eps) {
  CheckAligned(batch, advantages);
  SurrogateGradient out;
  out.grad = Matrix::Zero(policy.num_items(), policy.feature_dim());
  if (batch.empty()) return out;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  std::vector<double> coef;
  Matrix group_grad;
  for (std::size_t g = 0; g < batch.size(); ++g) {
    const RolloutGroup& group = batch[g];
    const LoggedExample& ex = *group.example;
    const ItemDistribution dist =
        Distribution(policy, ex.context, ex.candidates);
    const int first = FirstSampled(group);
    const auto& adv = advantages[g].advantages;
    const double inv_n = 1.0 / static_cast<double>(adv.size());

    coef.assign(ex.candidates.size(), 0.0);
    double coef_total = 0.0;
    double group_sum = 0.0;
    for (std::size_t j = 0; j < adv.size(); ++j) {
      const Rollout& r = group.rollouts[first + j];
      const double a = adv[j];
      const double ratio = std::exp(dist.log_probs()[r.index] - r.log_prob_old);
      group_sum += ClippedSurrogate(ratio, a, clip_eps);
      ++out.terms;
      // The unclipped branch is active below 1+eps for A > 0 and above
      // 1-eps for A < 0; elsewhere the term is constant in theta.
      const bool active = a > 0.0   ? ratio < 1.0 + clip_eps
                          : a < 0.0 ? ratio > 1.0 - clip_eps
                                    : false;
      if (a != 0.0 && !active) ++out.clipped;
      if (!active) continue;
      const double c = a * ratio;
      coef[r.index] += c;
      coef_total += c;
    }
    out.objective += group_sum * inv_n * inv_batch;
    if (coef_total == 0.0 && std::all_of(coef.begin(), coef.end(),
                                         [](double c) { return c == 0.0; })) {
      continue;
    }
    for (std::size_t b = 0; b < coef.size(); ++b) {
      coef[b] -= coef_total * dist.probs()[b];
    }
    if (!std::all_of(coef.begin(), coef.end(),
                     [](double c) { return std::isfinite(c); })) {
      throw NumericError("non-finite surrogate gradient in group for user " +
                         std::to_string(ex.context.user_id) + " t_prime " +
                         std::to_string(ex.t_prime));
    }
    AccumulateRowGradient(ex.context, ex.candidates, coef,
                          inv_n * inv_batch / policy.temperature(), out.grad);
  }
  return out;
}

PolicyParams UpdateStep(const PolicyParams& policy,
                        std::span<const RolloutGroup> batch,
                        const UpdateConfig& cfg, StepStats* stats) {
  std::vector<AdvantageSet> advantages;
  advantages.reserve(batch.size());
  for (const RolloutGroup& g : batch)
    advantages.push_back(GroupAdvantages(g, cfg));

  SurrogateGradient sg =
      ComputeSurrogateGradient(policy, batch, advantages, cfg.clip_eps);
  if (!sg.grad.allFinite()) {
    throw NumericError("non-finite surrogate gradient");
  }
  PolicyParams next = policy;
  next.mutable_weights() += cfg.learning_rate * sg.grad;
  if (!next.weights().allFinite()) {
    throw NumericError("update step overflowed the policy weights");
  }

  if (stats) {
    double reward_sum = 0.0, abs_adv = 0.0;
    int n = 0;
    for (std::size_t g = 0; g < batch.size(); ++g) {
      const int first = FirstSampled(batch[g]);
      for (std::size_t j = first; j < batch[g].rewards.size(); ++j) {
        reward_sum += batch[g].rewards[j];
        abs_adv += std::abs(advantages[g].advantages[j - first]);
        ++n;
      }
    }
    stats->objective = sg.objective;
    stats->mean_reward = n ? reward_sum / n : 0.0;
    stats->mean_abs_advantage = n ? abs_adv / n : 0.0;
    stats->clip_fraction =
        sg.terms ? static_cast<double>(sg.clipped) / sg.terms : 0.0;
  }
  return next;
}

// ---- epochs ----------------------------------------------------------------

std::vector<std::vector<std::size_t>> MakeBatches(const BanditLog& log,
                                                  int batch_size,
                                                  bool stratified, Rng& rng) {
  const std::size_t n = log.examples.size();
  std::vector<std::vector<std::size_t>> batches;
  if (n == 0) return batches;
  std::size_t num_batches = (n + batch_size - 1) / batch_size;

  if (!stratified) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Shuffle(order, rng);
    batches.resize(num_batches);
    for (std::size_t i = 0; i < n; ++i)
      batches[i / batch_size].push_back(order[i]);
    return batches;
  }

  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < n; ++i) {
    (log.examples[i].y == 1 ? pos : neg).push_back(i);
  }
  Shuffle(pos, rng);
  Shuffle(neg, rng);
  if (!pos.empty() && !neg.empty()) {
    num_batches = std::min({num_batches, pos.size(), neg.size()});
  }
  batches.resize(num_batches);
  // Round-robin each stratum so every batch sees both feedback types in
  // roughly the log's proportion.
  for (std::size_t i = 0; i < pos.size(); ++i) {
    batches[i % num_batches].push_back(pos[i]);
  }
  for (std::size_t i = 0; i < neg.size(); ++i) {
    batches[i % num_batches].push_back(neg[i]);
  }
  return batches;
}

PolicyParams RunEpoch(const PolicyParams& policy, const BanditLog& log,
                      const UpdateConfig& cfg, std::uint64_t seed,
                      EpochStats* stats) {
  ValidateUpdateConfig(cfg);
  if (log.examples.empty())
    throw ConfigError("cannot run an epoch on an empty log");
  const PolicyParams policy_old = policy;
  const bool anchored = cfg.mode == UpdateMode::kAbpo;

  std::vector<RolloutGroup> groups;
  groups.reserve(log.examples.size());
  for (std::size_t i = 0; i < log.examples.size(); ++i) {
    Rng rng = DeriveStream(seed, {kGroupStream, i});
    const LoggedExample& ex = log.examples[i];
    RolloutGroup g =
        anchored ? BuildAnchoredGroup(policy_old, ex, cfg.group_size,
                                      cfg.reward, rng)
                 : BuildVanillaGroup(policy_old, ex, cfg.group_size, rng);
    AssignRewards(g, cfg.reward);
    groups.push_back(std::move(g));
  }

  Rng batch_rng = DeriveStream(seed, {kBatchStream});
  const auto batches =
      MakeBatches(log, cfg.batch_size, cfg.stratified, batch_rng);

  PolicyParams current = policy;
  double clip_sum = 0.0, abs_adv_sum = 0.0;
  double reward_sum[2] = {0, 0}, weight_sum[2] = {0, 0}, match_sum[2] = {0, 0};
  int sampled[2] = {0, 0}, anchors[2] = {0, 0};
  std::vector<RolloutGroup> batch_groups;
  std::vector<SnipsEntry> entries;
  for (const auto& batch : batches) {
    batch_groups.clear();
    entries.clear();
    for (std::size_t idx : batch) {
      batch_groups.push_back(groups[idx]);
      const LoggedExample& ex = log.examples[idx];
      entries.push_back(
          SnipsEntry{idx, ex.y, IpsWeight(groups[idx].e_old, ex.e0)});
    }
    if (anchored) {
      const auto w = SnipsNormalize(entries, cfg.snips_delta);
      for (std::size_t k = 0; k < batch_groups.size(); ++k) {
        batch_groups[k].anchor_weight = w[k];
      }
    }
    StepStats step;
    current = UpdateStep(current, batch_groups, cfg, &step);
    clip_sum += step.clip_fraction;
    abs_adv_sum += step.mean_abs_advantage;

    for (const RolloutGroup& g : batch_groups) {
      const int s = g.example->y == 1 ? 1 : 0;
      const int first = FirstSampled(g);
      for (std::size_t j = first; j < g.rollouts.size(); ++j) {
        reward_sum[s] += g.rewards[j];
        match_sum[s] += g.rollouts[j].item == g.example->a_log ? 1.0 : 0.0;
        ++sampled[s];
      }
      weight_sum[s] += g.anchor_weight;
      ++anchors[s];
    }
  }

  if (stats) {
    auto ratio = [](double a, int b) { return b ? a / b : 0.0; };
    stats->num_batches = static_cast<int>(batches.size());
    stats->clip_fraction = ratio(clip_sum, stats->num_batches);
    stats->mean_abs_advantage = ratio(abs_adv_sum, stats->num_batches);
    stats->mean_reward_pos = ratio(reward_sum[1], sampled[1]);
    stats->mean_reward_neg = ratio(reward_sum[0], sampled[0]);
    stats->match_rate_pos = ratio(match_sum[1], sampled[1]);
    stats->match_rate_neg = ratio(match_sum[0], sampled[0]);
    stats->mean_weight_pos = ratio(weight_sum[1], anchors[1]);
    stats->mean_weight_neg = ratio(weight_sum[0], anchors[0]);
  }
  return current;
}

void WriteEpochStatsHeader(std::ostream& out) {
  out << "round,epoch,mean_reward_pos,mean_reward_neg,clip_fraction,"
         "mean_weight_pos,mean_weight_neg,match_rate_pos,match_rate_neg,"
         "mean_abs_advantage\n";
}

void WriteEpochStatsRow(std::ostream& out, int round, const EpochStats& s) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                round, s.epoch, s.mean_reward_pos, s.mean_reward_neg,
                s.clip_fraction, s.mean_weight_pos, s.mean_weight_neg,
                s.match_rate_pos, s.match_rate_neg, s.mean_abs_advantage);
  out << buf;
}

}  // namespace abpo
