#ifndef ABPO_BANDIT_LOG_H_
#define ABPO_BANDIT_LOG_H_

// Synthetic one-step contextual-bandit logs built from next-item sequences.
//
// For every update context x_{1:t'} with t' in {T, ..., T+N-2} the candidate
// set holds the next observed item x_{t'+1} (the latent positive) plus M-1
// distractors drawn uniformly from items the user never interacted with. The
// logging policy samples one exposure from its softmax over the candidates;
// feedback is 1 exactly when the exposure is the latent positive. Because
// t'+1 <= T+N-1, the held-out target x_{T+N} never enters a training-time
// candidate set.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "abpo/policy.h"
#include "abpo/random.h"
#include "abpo/sequences.h"

namespace abpo {

struct LoggedExample {
  Context context;
  int t_prime = 0;
  CandidateSet candidates;
  ItemId a_log = 0;
  int y = 0;
  double e0 = 1.0;  // logging propensity of a_log
  int round = 0;

  bool operator==(const LoggedExample&) const = default;
};

struct LogMetadata {
  int version = 1;
  std::uint64_t seed = 0;
  int candidate_size = 0;  // M
  double temperature = 1.0;
  int num_items = 0;  // V
  int feature_dim = 0;
  std::uint64_t policy_fingerprint = 0;

  bool operator==(const LogMetadata&) const = default;
};

struct BanditLog {
  LogMetadata meta;
  std::vector<LoggedExample> examples;

  bool operator==(const BanditLog&) const = default;
};

struct LogConfig {
  int candidate_size = 50;
  double temperature = 1.0;
  std::uint64_t seed = 1;
  int round = 0;
};

// `positive` plus M-1 uniform distractors drawn from items that appear
// nowhere in the sequence (so never the held-out target), in shuffled order.
// Throws ConfigError if the pool holds fewer than M-1 items.
CandidateSet SampleCandidates(const UserSequence& seq, ItemId positive,
                              int candidate_size, int num_items, Rng& rng);

// Positive x_{t'+1} plus M-1 uniform distractors outside the sequence, in
// shuffled order. t_prime is 1-based. Throws ConfigError if t_prime is out of
// range or the distractor pool holds fewer than M-1 items.
CandidateSet BuildCandidateSet(const UserSequence& seq, int t_prime,
                               int candidate_size, int num_items, Rng& rng);

int AssignFeedback(ItemId a_log, ItemId next_item);

// One example per (sequence, t'). Each sequence draws from its own stream
// derived from (seed, round, user_id), so the log does not depend on the
// order sequences are processed in.
BanditLog MakeBanditLog(const PolicyParams& policy,
                        const std::vector<UserSequence>& seqs,
                        const LogConfig& config);

// Throws ValidationError on any broken example invariant.
void ValidateExample(const LoggedExample& ex, int num_items);

// Line-delimited text format. The first line is a '#' metadata header,
// followed by one record per line:
//   user_id=<int> t_prime=<int> history=<id,id,...> candidates=<id,...>
//   positive_index=<int|-> a_log=<id> y=<0|1> e0=<%.17g> round=<int>
// Fields are separated by single spaces and appear in exactly that order.
void WriteLog(const BanditLog& log, std::ostream& out);
void WriteLog(const BanditLog& log, const std::string& path);
// Throws ParseError (with line number) on malformed input and
// ValidationError when a parsed record violates an invariant.
BanditLog ReadLog(std::istream& in);
BanditLog ReadLog(const std::string& path);

}  // namespace abpo

#endif  // ABPO_BANDIT_LOG_H_
