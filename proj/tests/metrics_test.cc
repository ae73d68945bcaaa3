#include "abpo/metrics.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "abpo/random.h"
#include "test_util.h"

namespace abpo {
namespace {

RankedList List(std::vector<ItemId> items, ItemId target) {
  return RankedList{std::move(items), target};
}

// -ln p values 0, 1, ..., n-1 on a [0, n-1] scale.
PopularityModel LinearScale(int n) {
  PopularityModel pop;
  for (int i = 0; i < n; ++i) {
    pop.neg_log_prob.push_back(i);
    pop.prob.push_back(std::exp(-i));
  }
  pop.min_neg_log = 0.0;
  pop.max_neg_log = n - 1.0;
  return pop;
}

// ---- ranking
// -----------------------------------------------------------------

TEST(RankTest, ModeOfPeakedPolicyRanksFirst) {
  Matrix w = Matrix::Zero(10, 6);
  w.row(7).setConstant(50.0);
  const PolicyParams policy(w, 1.0);
  const Context ctx = MakeContext(0, {1, 2}, FeatureMap(6));
  CandidateSet cands;
  cands.items = {3, 7, 1, 9};
  const RankedList list = RankCandidates(policy, ctx, cands, 2, 7);
  ASSERT_EQ(list.items.size(), 2u);
  EXPECT_EQ(list.items[0], 7);
  EXPECT_EQ(list.target, 7);
}

TEST(RankTest, TiesBreakByAscendingId) {
  const PolicyParams policy(10, 6);
  const Context ctx = MakeContext(0, {1}, FeatureMap(6));
  CandidateSet cands;
  cands.items = {8, 3, 5, 0};
  const RankedList list = RankCandidates(policy, ctx, cands, 4, 5);
  EXPECT_EQ(list.items, (std::vector<ItemId>{0, 3, 5, 8}));
}

TEST(RankTest, FullDepthIsAPermutation) {
  Rng rng(3);
  const PolicyParams policy = test_util::RandomPolicy(30, 8, rng, 1.0);
  const LoggedExample ex = test_util::RandomExample(policy, 12, 1, rng);
  const RankedList list =
      RankCandidates(policy, ex.context, ex.candidates, 12, 0);
  std::vector<ItemId> a = list.items, b = ex.candidates.items;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
  // Probabilities are non-increasing down the list.
  const ItemDistribution dist = Distribution(policy, ex.context, ex.candidates);
  for (std::size_t i = 1; i < list.items.size(); ++i) {
    EXPECT_GE(dist.probs()[*ex.candidates.IndexOf(list.items[i - 1])],
              dist.probs()[*ex.candidates.IndexOf(list.items[i])]);
  }
}

// ---- accuracy
// ----------------------------------------------------------------

TEST(HitRateTest, Examples) {
  const std::vector<RankedList> always = {List({4, 1}, 4), List({2, 3}, 2)};
  EXPECT_EQ(HitRateAtK(always, 1), 1.0);
  const std::vector<RankedList> never = {List({4, 1}, 9), List({2, 3}, 8)};
  EXPECT_EQ(HitRateAtK(never, 2), 0.0);
  const std::vector<RankedList> three = {List({1, 2, 3}, 3), List({1, 2, 3}, 1),
                                         List({1, 2, 3}, 2),
                                         List({1, 2, 3}, 7)};
  EXPECT_EQ(HitRateAtK(three, 3), 0.75);
  EXPECT_EQ(HitRateAtK(three, 1), 0.25);
}

TEST(NdcgTest, Examples) {
  EXPECT_EQ(NdcgAtK(std::vector<RankedList>{List({5, 6, 7}, 5)}, 3), 1.0);
  EXPECT_NEAR(NdcgAtK(std::vector<RankedList>{List({5, 6, 7}, 7)}, 3), 0.5,
              1e-15);
  EXPECT_EQ(NdcgAtK(std::vector<RankedList>{List({5, 6, 7}, 9)}, 3), 0.0);
  EXPECT_EQ(NdcgAtK(std::vector<RankedList>{List({5, 6, 7}, 7)}, 2), 0.0);
}

TEST(AccuracyTest, MonotoneInKAndNdcgBelowHitRate) {
  Rng rng(11);
  std::vector<RankedList> lists;
  for (int i = 0; i < 200; ++i) {
    std::vector<ItemId> items(10);
    std::iota(items.begin(), items.end(), 0);
    Shuffle(items, rng);
    lists.push_back(List(items, static_cast<ItemId>(UniformIndex(rng, 14))));
  }
  for (int k = 1; k < 10; ++k) {
    EXPECT_LE(HitRateAtK(lists, k), HitRateAtK(lists, k + 1));
    EXPECT_LE(NdcgAtK(lists, k), NdcgAtK(lists, k + 1));
    EXPECT_LE(NdcgAtK(lists, k), HitRateAtK(lists, k));
  }
}

// ---- popularity and diversity
// ------------------------------------------------

TEST(PopularityTest, AddOneCounts) {
  const std::vector<std::vector<ItemId>> corpus = {{0, 0, 1}, {0}};
  const PopularityModel pop = PopularityEstimate(corpus, 3);
  EXPECT_NEAR(pop.prob[0], 4.0 / 7.0, 1e-15);
  EXPECT_NEAR(pop.prob[1], 2.0 / 7.0, 1e-15);
  EXPECT_NEAR(pop.prob[2], 1.0 / 7.0, 1e-15);
  EXPECT_NEAR(pop.neg_log_prob[2], std::log(7.0), 1e-12);
  EXPECT_NEAR(pop.min_neg_log, std::log(7.0 / 4.0), 1e-12);
  EXPECT_NEAR(pop.max_neg_log, std::log(7.0), 1e-12);
}

TEST(PopularityTest, EmptyCorpusIsUniform) {
  const PopularityModel pop = PopularityEstimate({}, 8);
  for (double p : pop.prob) EXPECT_DOUBLE_EQ(p, 1.0 / 8.0);
}

TEST(PopularityTest, UbiquitousItemIsMostPopular) {
  std::vector<std::vector<ItemId>> corpus;
  for (int u = 0; u < 20; ++u)
    corpus.push_back({3, static_cast<ItemId>(u % 2 ? 5 : 6)});
  const PopularityModel pop = PopularityEstimate(corpus, 10);
  EXPECT_EQ(
      std::max_element(pop.prob.begin(), pop.prob.end()) - pop.prob.begin(), 3);
  EXPECT_NEAR(std::accumulate(pop.prob.begin(), pop.prob.end(), 0.0), 1.0,
              1e-12);
  for (int i : {0, 1, 2, 4, 7, 8, 9}) EXPECT_EQ(pop.prob[i], pop.prob[0]);
}

TEST(PopularityTest, TrainingItemsDropHeldOut) {
  UserSequence s;
  s.items = {1, 2, 3, 4};
  s.prefix_len = 2;
  s.horizon = 2;
  const std::vector<UserSequence> seqs = {s};
  const auto items = TrainingItems(seqs);
  ASSERT_EQ(items.size(), 1u);
  EXPECT_EQ(items[0], (std::vector<ItemId>{1, 2, 3}));
}

TEST(DiversityTest, Examples) {
  const PopularityModel pop = LinearScale(6);
  EXPECT_EQ(DiversityAtK(std::vector<RankedList>{List({0, 0}, 0)}, pop, 2),
            0.0);
  EXPECT_NEAR(DiversityAtK(std::vector<RankedList>{List({5, 5}, 0)}, pop, 2),
              100.0, 1e-12);
  // Scale positions 0.2 and 0.6.
  EXPECT_NEAR(DiversityAtK(std::vector<RankedList>{List({1, 3}, 0)}, pop, 2),
              40.0, 1e-12);
  // Only the top-K entries count.
  EXPECT_NEAR(DiversityAtK(std::vector<RankedList>{List({1, 3, 5}, 0)}, pop, 1),
              20.0, 1e-12);
}

TEST(DiversityTest, UniformPopularityGivesZero) {
  const PopularityModel pop = PopularityEstimate({}, 5);
  EXPECT_EQ(DiversityAtK(std::vector<RankedList>{List({1, 3}, 0)}, pop, 2),
            0.0);
}

TEST(DiversityTest, InvariantToRelabeling) {
  const PopularityModel pop = LinearScale(6);
  // Swap labels 1 <-> 4 in both the model and the lists.
  PopularityModel swapped = pop;
  std::swap(swapped.neg_log_prob[1], swapped.neg_log_prob[4]);
  std::swap(swapped.prob[1], swapped.prob[4]);
  const std::vector<RankedList> lists = {List({1, 2}, 0), List({3, 5}, 0)};
  const std::vector<RankedList> relabeled = {List({4, 2}, 0), List({3, 5}, 0)};
  EXPECT_DOUBLE_EQ(DiversityAtK(lists, pop, 2),
                   DiversityAtK(relabeled, swapped, 2));
}

// ---- matching rates
// ----------------------------------------------------------

// Examples whose exposure is always item 0, with feedback alternating.
BanditLog ItemZeroLog(int n, int m, int v) {
  BanditLog log;
  const FeatureMap features(2 * v);
  for (int i = 0; i < n; ++i) {
    LoggedExample ex;
    ex.context =
        MakeContext(i, {static_cast<ItemId>(1 + i % (v - 1))}, features);
    for (int b = 0; b < m; ++b) ex.candidates.items.push_back(b);
    ex.a_log = 0;
    ex.y = i % 2;
    ex.e0 = 1.0 / m;
    log.examples.push_back(ex);
  }
  return log;
}

TEST(MatchingRateTest, PointMassOnExposure) {
  Matrix w = Matrix::Zero(60, 120);
  w.row(0).setConstant(500.0);
  const MatchingRates r = ComputeMatchingRates(PolicyParams(w, 1.0),
                                               ItemZeroLog(40, 50, 60), 16, 1);
  EXPECT_EQ(r.positive, 1.0);
  EXPECT_EQ(r.no_response, 1.0);
}

TEST(MatchingRateTest, NoMassOnExposure) {
  Matrix w = Matrix::Zero(60, 120);
  w.row(0).setConstant(-500.0);
  const MatchingRates r = ComputeMatchingRates(PolicyParams(w, 1.0),
                                               ItemZeroLog(40, 50, 60), 16, 1);
  EXPECT_EQ(r.positive, 0.0);
  EXPECT_EQ(r.no_response, 0.0);
}

TEST(MatchingRateTest, UniformPolicyMatchesOneOverM) {
  const int n = 2000, s = 16;
  const MatchingRates r =
      ComputeMatchingRates(PolicyParams(60, 120), ItemZeroLog(n, 50, 60), s, 7);
  const double draws = n / 2.0 * s;
  const double band = 4.0 * std::sqrt(0.02 * 0.98 / draws);
  EXPECT_NEAR(r.positive, 0.02, band);
  EXPECT_NEAR(r.no_response, 0.02, band);
}

TEST(MatchingRateTest, ReproduciblePerSeedAndInRange) {
  Rng rng(5);
  const PolicyParams policy = test_util::RandomPolicy(60, 120, rng, 1.0);
  const BanditLog log = ItemZeroLog(100, 10, 60);
  const MatchingRates a = ComputeMatchingRates(policy, log, 8, 3);
  const MatchingRates b = ComputeMatchingRates(policy, log, 8, 3);
  EXPECT_EQ(a.positive, b.positive);
  EXPECT_EQ(a.no_response, b.no_response);
  for (double x : {a.positive, a.no_response}) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
}

TEST(MetricRowTest, CsvLayout) {
  std::ostringstream out;
  WriteMetricsHeader(out);
  WriteMetricRow(out, MetricRow{2, "hr", 5, 0.25});
  EXPECT_EQ(out.str(), "round,metric,K,value\n2,hr,5,0.25\n");
}

}  // namespace
}  // namespace abpo
