#include "abpo/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "abpo/error.h"
#include "abpo/random.h"

namespace abpo {

PopularityModel PopularityEstimate(
    std::span<const std::vector<ItemId>> train_items, int num_items) {
  if (num_items < 1) throw ConfigError("catalog must be non-empty");
  std::vector<double> counts(num_items, 1.0);
  for (const auto& items : train_items) {
    for (ItemId a : items) {
      if (static_cast<long>(a) >= num_items) {
        throw ConfigError("training item outside catalog");
      }
      counts[a] += 1.0;
    }
  }
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  PopularityModel pop;
  pop.prob.resize(num_items);
  pop.neg_log_prob.resize(num_items);
  for (int a = 0; a < num_items; ++a) {
    pop.prob[a] = counts[a] / total;
    pop.neg_log_prob[a] = std::log(total) - std::log(counts[a]);
  }
  const auto [lo, hi] =
      std::minmax_element(pop.neg_log_prob.begin(), pop.neg_log_prob.end());
  pop.min_neg_log = *lo;
  pop.max_neg_log = *hi;
  return pop;
}

std::vector<std::vector<ItemId>> TrainingItems(
    std::span<const UserSequence> seqs) {
  std::vector<std::vector<ItemId>> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs)
    out.emplace_back(s.items.begin(), s.items.end() - 1);
  return out;
}

RankedList RankCandidates(const PolicyParams& policy, const Context& ctx,
                          const CandidateSet& cands, int k, ItemId target) {
  if (k < 1) throw ConfigError("K must be >= 1");
  if (k > static_cast<int>(cands.size())) {
    throw ConfigError("K exceeds the candidate set size");
  }
  const ItemDistribution dist = Distribution(policy, ctx, cands);
  std::vector<int> order(cands.size());
  std::iota(order.begin(), order.end(), 0);
  // Compare log-probabilities: they are exact where probabilities underflow.
  const auto& lp = dist.log_probs();
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (lp[a] != lp[b]) return lp[a] > lp[b];
    return cands.items[a] < cands.items[b];
  });
  RankedList out;
  out.target = target;
  for (int i = 0; i < k; ++i) out.items.push_back(cands.items[order[i]]);
  return out;
}

namespace {

// 1-based rank of the target inside the first k entries, or 0.
int TargetRank(const RankedList& list, int k) {
  if (static_cast<int>(list.items.size()) < k) {
    throw ConfigError("ranked list shorter than K");
  }
  for (int i = 0; i < k; ++i) {
    if (list.items[i] == list.target) return i + 1;
  }
  return 0;
}

}  // namespace

double HitRateAtK(std::span<const RankedList> lists, int k) {
  if (lists.empty()) return 0.0;
  double hits = 0.0;
  for (const auto& l : lists) hits += TargetRank(l, k) > 0 ? 1.0 : 0.0;
  return hits / static_cast<double>(lists.size());
}

double NdcgAtK(std::span<const RankedList> lists, int k) {
  if (lists.empty()) return 0.0;
  double total = 0.0;
  for (const auto& l : lists) {
    const int rank = TargetRank(l, k);
    if (rank > 0) total += 1.0 / std::log2(rank + 1.0);
  }
  return total / static_cast<double>(lists.size());
}

double DiversityAtK(std::span<const RankedList> lists,
                    const PopularityModel& pop, int k) {
  if (lists.empty()) return 0.0;
  const double range = pop.max_neg_log - pop.min_neg_log;
  if (!(range > 0.0)) return 0.0;
  double total = 0.0;
  for (const auto& l : lists) {
    if (static_cast<int>(l.items.size()) < k) {
      throw ConfigError("ranked list shorter than K");
    }
    double s = 0.0;
    for (int i = 0; i < k; ++i) {
      s += (pop.neg_log_prob[l.items[i]] - pop.min_neg_log) / range;
    }
    total += s / k;
  }
  return 100.0 * total / static_cast<double>(lists.size());
}

MatchingRates ComputeMatchingRates(const PolicyParams& policy,
                                   const BanditLog& log,
                                   int samples_per_example,
                                   std::uint64_t seed) {
  if (samples_per_example < 1) throw ConfigError("need at least one sample");
  double hits[2] = {0, 0}, draws[2] = {0, 0};
  for (std::size_t i = 0; i < log.examples.size(); ++i) {
    const LoggedExample& ex = log.examples[i];
    Rng rng = DeriveStream(seed, {0x3a7c4, i});
    const ItemDistribution dist =
        Distribution(policy, ex.context, ex.candidates);
    const int s = ex.y == 1 ? 1 : 0;
    for (int n = 0; n < samples_per_example; ++n) {
      hits[s] += SampleItem(dist, rng).item == ex.a_log ? 1.0 : 0.0;
    }
    draws[s] += samples_per_example;
  }
  MatchingRates out;
  out.positive = draws[1] > 0 ? hits[1] / draws[1] : 0.0;
  out.no_response = draws[0] > 0 ? hits[0] / draws[0] : 0.0;
  return out;
}

void WriteMetricsHeader(std::ostream& out) { out << "round,metric,K,value\n"; }

void WriteMetricRow(std::ostream& out, const MetricRow& row) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d,%s,%d,%.17g\n", row.round, row.metric,
                row.k, row.value);
  out << buf;
}

}  // namespace abpo
