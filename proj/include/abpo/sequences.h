#ifndef ABPO_SEQUENCES_H_
#define ABPO_SEQUENCES_H_

#include <cstdint>
#include <vector>

#include "abpo/policy.h"

namespace abpo {

// A chronological interaction sequence x_1..x_{T+N}. The first T items are
// the initial history, x_{T+1}..x_{T+N-1} feed the bandit logs, and x_{T+N}
// is the held-out evaluation target.
struct UserSequence {
  int user_id = 0;
  std::vector<ItemId> items;
  int prefix_len = 1;  // T
  int horizon = 2;     // N

  // 1-based item access matching x_t.
  ItemId x(int t) const { return items[t - 1]; }
  ItemId held_out() const { return items.back(); }
  bool Contains(ItemId item) const;

  bool operator==(const UserSequence&) const = default;
};

// Throws ConfigError unless T >= 1, N >= 2, |items| = T+N and every item is
// inside a catalog of `num_items`.
void ValidateSequence(const UserSequence& seq, int num_items);

// Latent-preference user model. Each user has a Gaussian preference vector,
// each item a Gaussian embedding and a Zipf popularity prior; the next item is
// drawn (without repeats) with probability proportional to
//   exp(affinity * <u, v_i> + popularity * log_prior_i).
// `popularity` dials how strongly observed sequences, and therefore the
// positives in bandit logs, concentrate on head items.
struct UserModelConfig {
  int num_items = 500;
  int num_users = 200;
  int prefix_len = 10;
  int horizon = 6;
  int latent_dim = 8;
  double affinity = 2.0;
  double popularity = 1.0;
  double zipf_exponent = 1.0;
  std::uint64_t seed = 1;
};

std::vector<UserSequence> GenerateSequences(const UserModelConfig& config);

}  // namespace abpo

#endif  // ABPO_SEQUENCES_H_
