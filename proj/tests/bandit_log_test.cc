#include "abpo/bandit_log.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <sstream>

#include "abpo/error.h"
#include "abpo/random.h"
#include "abpo/sequences.h"

namespace abpo {
namespace {

UserSequence Seq(int user, std::vector<ItemId> items, int t, int n) {
  UserSequence s;
  s.user_id = user;
  s.items = std::move(items);
  s.prefix_len = t;
  s.horizon = n;
  return s;
}

std::vector<UserSequence> SmallCorpus(int users, int v, std::uint64_t seed) {
  UserModelConfig cfg;
  cfg.num_items = v;
  cfg.num_users = users;
  cfg.prefix_len = 5;
  cfg.horizon = 4;
  cfg.seed = seed;
  return GenerateSequences(cfg);
}

PolicyParams RandomPolicy(int v, int d, std::uint64_t seed, double scale) {
  Rng rng(seed);
  Matrix w(v, d);
  for (int i = 0; i < v; ++i) {
    for (int j = 0; j < d; ++j) w(i, j) = scale * StandardNormal(rng);
  }
  return PolicyParams(w, 1.0);
}

TEST(SequencesTest, GeneratedSequencesAreValidAndDistinct) {
  const auto seqs = SmallCorpus(30, 60, 4);
  ASSERT_EQ(seqs.size(), 30u);
  for (const auto& s : seqs) {
    EXPECT_NO_THROW(ValidateSequence(s, 60));
    std::set<ItemId> unique(s.items.begin(), s.items.end());
    EXPECT_EQ(unique.size(), s.items.size());
  }
  EXPECT_EQ(seqs, SmallCorpus(30, 60, 4));
}

TEST(SequencesTest, ValidationRejectsBadShapes) {
  EXPECT_THROW(ValidateSequence(Seq(0, {1, 2, 3}, 2, 2), 10), ConfigError);
  EXPECT_THROW(ValidateSequence(Seq(0, {1, 2}, 1, 1), 10), ConfigError);
}

TEST(CandidateSetTest, DistractorsComeFromUnseenItems) {
  const UserSequence s = Seq(0, {0, 1, 2, 3, 4}, 2, 3);
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const CandidateSet c = BuildCandidateSet(s, 2, 3, 10, rng);
    ASSERT_EQ(c.size(), 3u);
    EXPECT_EQ(c.positive(), std::optional<ItemId>(s.x(3)));
    for (ItemId a : c.items) {
      if (a == s.x(3)) continue;
      EXPECT_GE(a, 5u);
      EXPECT_LE(a, 9u);
    }
    EXPECT_NO_THROW(ValidateCandidateSet(c, 10));
  }
}

TEST(CandidateSetTest, SizeOneIsJustThePositive) {
  const UserSequence s = Seq(0, {0, 1, 2, 3, 4}, 2, 3);
  Rng rng(2);
  const CandidateSet c = BuildCandidateSet(s, 3, 1, 10, rng);
  EXPECT_EQ(c.items, std::vector<ItemId>{3});
  EXPECT_EQ(c.positive_index, 0);
}

TEST(CandidateSetTest, HeldOutNeverAppears) {
  const UserSequence s = Seq(0, {7, 3, 9, 1, 5}, 2, 3);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    for (int tp = 2; tp <= 3; ++tp) {
      EXPECT_FALSE(BuildCandidateSet(s, tp, 8, 20, rng).Contains(s.held_out()));
    }
  }
}

TEST(CandidateSetTest, PositionOfPositiveIsShuffled) {
  const UserSequence s = Seq(0, {0, 1, 2, 3, 4}, 2, 3);
  Rng rng(4);
  std::set<int> positions;
  for (int i = 0; i < 200; ++i) {
    positions.insert(*BuildCandidateSet(s, 2, 4, 10, rng).positive_index);
  }
  EXPECT_EQ(positions.size(), 4u);
}

TEST(CandidateSetTest, ErrorsOnSmallPoolAndBadTPrime) {
  const UserSequence s = Seq(0, {0, 1, 2, 3, 4}, 2, 3);
  Rng rng(5);
  EXPECT_THROW(BuildCandidateSet(s, 2, 7, 10, rng), ConfigError);
  EXPECT_NO_THROW(BuildCandidateSet(s, 2, 6, 10, rng));
  EXPECT_THROW(BuildCandidateSet(s, 1, 3, 10, rng), ConfigError);
  EXPECT_THROW(BuildCandidateSet(s, 4, 3, 10, rng), ConfigError);
}

TEST(FeedbackTest, MatchIsOne) {
  EXPECT_EQ(AssignFeedback(4, 4), 1);
  EXPECT_EQ(AssignFeedback(4, 5), 0);
}

TEST(BanditLogTest, HorizonTwoGivesOneExamplePerSequence) {
  UserModelConfig cfg;
  cfg.num_items = 40;
  cfg.num_users = 7;
  cfg.prefix_len = 3;
  cfg.horizon = 2;
  const auto seqs = GenerateSequences(cfg);
  const BanditLog log =
      MakeBanditLog(PolicyParams(40, 80), seqs, {5, 1.0, 3, 0});
  EXPECT_EQ(log.examples.size(), 7u);
  for (const auto& ex : log.examples) EXPECT_EQ(ex.t_prime, 3);
}

TEST(BanditLogTest, InvariantsHoldOnEveryExample) {
  const auto seqs = SmallCorpus(40, 80, 6);
  const PolicyParams policy = RandomPolicy(80, 160, 6, 0.5);
  const BanditLog log = MakeBanditLog(policy, seqs, {10, 1.0, 9, 2});
  ASSERT_EQ(log.examples.size(), 40u * 3u);
  std::size_t k = 0;
  for (const auto& seq : seqs) {
    for (int tp = seq.prefix_len; tp <= seq.prefix_len + seq.horizon - 2;
         ++tp) {
      const LoggedExample& ex = log.examples[k++];
      EXPECT_NO_THROW(ValidateExample(ex, 80));
      EXPECT_EQ(ex.round, 2);
      EXPECT_FALSE(ex.candidates.Contains(seq.held_out()));
      EXPECT_EQ(ex.y, ex.a_log == seq.x(tp + 1) ? 1 : 0);
      EXPECT_EQ(ex.y == 1, ex.candidates.IndexOf(ex.a_log) ==
                               ex.candidates.positive_index);
      const auto dist = Distribution(policy, ex.context, ex.candidates);
      EXPECT_EQ(ex.e0, dist.probs()[*ex.candidates.IndexOf(ex.a_log)]);
      EXPECT_GT(ex.e0, 0.0);
      EXPECT_LE(ex.e0, 1.0);
    }
  }
}

TEST(BanditLogTest, DeterministicPerSeed) {
  const auto seqs = SmallCorpus(20, 60, 7);
  const PolicyParams policy = RandomPolicy(60, 120, 7, 0.5);
  EXPECT_EQ(MakeBanditLog(policy, seqs, {8, 1.0, 11, 1}),
            MakeBanditLog(policy, seqs, {8, 1.0, 11, 1}));
  EXPECT_NE(MakeBanditLog(policy, seqs, {8, 1.0, 11, 1}).examples,
            MakeBanditLog(policy, seqs, {8, 1.0, 12, 1}).examples);
}

TEST(BanditLogTest, ConcentratedPolicyMostlyLogsPositives) {
  // x_t = u + 250 (t - 1) keeps every item unique across users and
  // positions; a large weight from the recency coordinate of x_t to
  // x_{t+1} concentrates the policy on the positive.
  constexpr int kUsers = 250, kLen = 7, kItems = kUsers * kLen;
  std::vector<UserSequence> seqs;
  for (int u = 0; u < kUsers; ++u) {
    std::vector<ItemId> items;
    for (int t = 0; t < kLen; ++t) items.push_back(u + kUsers * t);
    seqs.push_back(Seq(u, items, 2, kLen - 2));
  }
  Matrix w = Matrix::Zero(kItems, 2 * kItems);
  for (const auto& s : seqs) {
    for (int t = 1; t < kLen; ++t) w(s.x(t + 1), kItems + s.x(t)) = 60.0;
  }
  const BanditLog log =
      MakeBanditLog(PolicyParams(std::move(w), 1.0), seqs, {20, 1.0, 1, 0});
  ASSERT_EQ(log.examples.size(), 1000u);
  int positives = 0;
  for (const auto& ex : log.examples) positives += ex.y;
  EXPECT_GE(positives, 950);
}

TEST(LogFormatTest, RoundTripIsBitExact) {
  const auto seqs = SmallCorpus(34, 80, 8);
  const PolicyParams policy = RandomPolicy(80, 160, 8, 2.0);
  const BanditLog log = MakeBanditLog(policy, seqs, {12, 0.7, 5, 3});
  ASSERT_GE(log.examples.size(), 100u);
  std::stringstream buf;
  WriteLog(log, buf);
  const BanditLog back = ReadLog(buf);
  EXPECT_EQ(back, log);
  for (std::size_t i = 0; i < log.examples.size(); ++i) {
    EXPECT_EQ(
        std::memcmp(&back.examples[i].e0, &log.examples[i].e0, sizeof(double)),
        0);
  }
}

TEST(LogFormatTest, EmptyLogIsHeaderOnly) {
  BanditLog log;
  log.meta.seed = 3;
  log.meta.candidate_size = 5;
  log.meta.num_items = 10;
  log.meta.feature_dim = 20;
  std::stringstream buf;
  WriteLog(log, buf);
  const std::string text = buf.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
  EXPECT_EQ(text.rfind("# abpo-bandit-log", 0), 0u);
  EXPECT_EQ(ReadLog(buf), log);
}

std::string SampleLogText() {
  const auto seqs = SmallCorpus(3, 40, 9);
  const BanditLog log =
      MakeBanditLog(PolicyParams(40, 80), seqs, {5, 1.0, 1, 0});
  std::stringstream buf;
  WriteLog(log, buf);
  return buf.str();
}

TEST(LogFormatTest, TruncatedFinalLineNamesTheLine) {
  std::string text = SampleLogText();
  const int lines = std::count(text.begin(), text.end(), '\n');
  text.resize(text.size() - 12);  // cut inside the last record
  std::stringstream buf(text);
  try {
    ReadLog(buf);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), static_cast<std::size_t>(lines));
    EXPECT_NE(std::string(e.what()).find("line " + std::to_string(lines)),
              std::string::npos);
  }
}

TEST(LogFormatTest, MissingFinalNewlineIsTruncation) {
  std::string text = SampleLogText();
  text.pop_back();
  std::stringstream buf(text);
  EXPECT_THROW(ReadLog(buf), ParseError);
}

TEST(LogFormatTest, MalformedFieldsAreParseErrors) {
  const std::string text = SampleLogText();
  const auto second_line = text.find('\n') + 1;
  for (const auto& [from, to] :
       std::vector<std::pair<std::string, std::string>>{
           {"user_id=", "user="}, {"e0=", "e0=abc"}, {"y=", "y=x"}}) {
    std::string bad = text;
    const auto pos = bad.find(from, second_line);
    bad.replace(pos, from.size(), to);
    std::stringstream buf(bad);
    try {
      ReadLog(buf);
      FAIL() << "expected ParseError for " << to;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 2u);
    }
  }
  std::stringstream no_header(text.substr(second_line));
  EXPECT_THROW(ReadLog(no_header), ParseError);
}

TEST(LogFormatTest, BrokenInvariantIsValidationError) {
  std::string text = SampleLogText();
  const auto pos = text.find(" e0=", text.find('\n'));
  const auto end = text.find(' ', pos + 1);
  text.replace(pos, end - pos, " e0=1.5");
  std::stringstream buf(text);
  EXPECT_THROW(ReadLog(buf), ValidationError);
}

TEST(ValidateExampleTest, RejectsLabelMismatch) {
  const auto seqs = SmallCorpus(1, 40, 10);
  BanditLog log = MakeBanditLog(PolicyParams(40, 80), seqs, {5, 1.0, 1, 0});
  LoggedExample ex = log.examples.front();
  ex.y = 1 - ex.y;
  EXPECT_THROW(ValidateExample(ex, 40), ValidationError);
  ex = log.examples.front();
  ex.e0 = 0.0;
  EXPECT_THROW(ValidateExample(ex, 40), ValidationError);
}

}  // namespace
}  // namespace abpo
