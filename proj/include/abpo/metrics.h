#ifndef ABPO_METRICS_H_
#define ABPO_METRICS_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "abpo/bandit_log.h"
#include "abpo/policy.h"
#include "abpo/sequences.h"

namespace abpo {

// Add-one smoothed item popularity over a training corpus.
struct PopularityModel {
  std::vector<double> prob;          // p(x), sums to 1
  std::vector<double> neg_log_prob;  // -ln p(x)
  double min_neg_log = 0.0;
  double max_neg_log = 0.0;
};

PopularityModel PopularityEstimate(
    std::span<const std::vector<ItemId>> train_items, int num_items);

// The training-side items of each sequence: everything but the held-out
// target.
std::vector<std::vector<ItemId>> TrainingItems(
    std::span<const UserSequence> seqs);

struct RankedList {
  std::vector<ItemId> items;  // top-K, best first
  ItemId target = 0;
};

// Descending policy probability, ties broken by ascending item id.
RankedList RankCandidates(const PolicyParams& policy, const Context& ctx,
                          const CandidateSet& cands, int k, ItemId target);

double HitRateAtK(std::span<const RankedList> lists, int k);
// Single relevant item: 1/log2(rank+1) when the target sits at rank <= K.
double NdcgAtK(std::span<const RankedList> lists, int k);
// Mean normalized -ln p over each list's top-K, scaled to 0..100. Returns 0
// when every item has the same popularity.
double DiversityAtK(std::span<const RankedList> lists,
                    const PopularityModel& pop, int k);

struct MatchingRates {
  double positive = 0.0;     // samples equal to a_log over y = 1 examples
  double no_response = 0.0;  // same over y = 0 examples
};

// Monte-Carlo matching rates of `policy` against a log's exposures.
MatchingRates ComputeMatchingRates(const PolicyParams& policy,
                                   const BanditLog& log,
                                   int samples_per_example, std::uint64_t seed);

struct MetricRow {
  int round = 0;
  const char* metric = "";
  int k = 0;
  double value = 0.0;
};

void WriteMetricsHeader(std::ostream& out);
void WriteMetricRow(std::ostream& out, const MetricRow& row);

}  // namespace abpo

#endif  // ABPO_METRICS_H_
