#include "abpo/sequences.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "abpo/error.h"
#include "abpo/random.h"

namespace abpo {

bool UserSequence::Contains(ItemId item) const {
  return std::find(items.begin(), items.end(), item) != items.end();
}

void ValidateSequence(const UserSequence& seq, int num_items) {
  if (seq.prefix_len < 1) throw ConfigError("sequence prefix T must be >= 1");
  if (seq.horizon < 2) throw ConfigError("sequence horizon N must be >= 2");
  if (static_cast<int>(seq.items.size()) != seq.prefix_len + seq.horizon) {
    throw ConfigError("user " + std::to_string(seq.user_id) +
                      ": sequence length must equal T+N");
  }
  for (ItemId a : seq.items) {
    if (static_cast<long>(a) >= num_items) {
      throw ConfigError("user " + std::to_string(seq.user_id) +
                        ": item outside catalog");
    }
  }
}

namespace {
constexpr std::uint64_t kItemStream = 0x17e;
constexpr std::uint64_t kUserStream = 0x05e;
}  // namespace

std::vector<UserSequence> GenerateSequences(const UserModelConfig& config) {
  const int v = config.num_items;
  const int len = config.prefix_len + config.horizon;
  if (config.prefix_len < 1 || config.horizon < 2) {
    throw ConfigError("user model needs T >= 1 and N >= 2");
  }
  if (len > v) throw ConfigError("sequence length exceeds catalog size");
  const int k = config.latent_dim;

  Rng item_rng = DeriveStream(config.seed, {kItemStream});
  Matrix embed(v, k);
  for (int i = 0; i < v; ++i) {
    for (int j = 0; j < k; ++j) {
      embed(i, j) =
          StandardNormal(item_rng) / std::sqrt(static_cast<double>(k));
    }
  }
  // Popularity ranks are a random permutation so that item ids carry no
  // popularity signal.
  std::vector<int> rank(v);
  for (int i = 0; i < v; ++i) rank[i] = i;
  Shuffle(rank, item_rng);
  std::vector<double> log_prior(v);
  for (int i = 0; i < v; ++i) {
    log_prior[i] = -config.zipf_exponent * std::log(rank[i] + 1.0);
  }

  std::vector<UserSequence> out;
  out.reserve(config.num_users);
  std::vector<double> logits(v);
  std::vector<char> used(v);
  for (int u = 0; u < config.num_users; ++u) {
    Rng rng =
        DeriveStream(config.seed, {kUserStream, static_cast<std::uint64_t>(u)});
    Eigen::VectorXd pref(k);
    for (int j = 0; j < k; ++j) pref[j] = StandardNormal(rng);
    for (int i = 0; i < v; ++i) {
      logits[i] = config.affinity * embed.row(i).dot(pref) +
                  config.popularity * log_prior[i];
    }
    std::fill(used.begin(), used.end(), 0);
    UserSequence seq;
    seq.user_id = u;
    seq.prefix_len = config.prefix_len;
    seq.horizon = config.horizon;
    for (int t = 0; t < len; ++t) {
      double max_logit = -INFINITY;
      for (int i = 0; i < v; ++i) {
        if (!used[i]) max_logit = std::max(max_logit, logits[i]);
      }
      double total = 0.0;
      for (int i = 0; i < v; ++i) {
        if (!used[i]) total += std::exp(logits[i] - max_logit);
      }
      double target = Uniform01(rng) * total;
      int pick = -1;
      for (int i = 0; i < v; ++i) {
        if (used[i]) continue;
        pick = i;
        target -= std::exp(logits[i] - max_logit);
        if (target < 0.0) break;
      }
      used[pick] = 1;
      seq.items.push_back(static_cast<ItemId>(pick));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace abpo
