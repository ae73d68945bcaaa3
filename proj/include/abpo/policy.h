#ifndef ABPO_POLICY_H_
#define ABPO_POLICY_H_

// Parametric softmax item policies over explicit candidate sets.
//
// A policy scores item a under context x as weights.row(a) . feature(x) and
// turns the scores over a candidate set into a temperature-scaled softmax.
// Everything downstream (logging propensities, rollout ratios, self-certainty)
// is defined over these candidate-conditional distributions.

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "abpo/random.h"

namespace abpo {

using ItemId = std::uint32_t;
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A real vector of dimension `dim` stored by its nonzero entries. Context
// features touch at most two coordinates per history item, so scoring and
// gradient accumulation stay proportional to history length rather than d.
struct SparseVector {
  int dim = 0;
  std::vector<int> index;
  std::vector<double> value;

  double Dot(const double* dense) const {
    double s = 0.0;
    for (std::size_t k = 0; k < index.size(); ++k) {
      s += value[k] * dense[index[k]];
    }
    return s;
  }
  Eigen::VectorXd ToDense() const;
  bool operator==(const SparseVector&) const = default;
};

// Normalized multi-hot of history items concatenated with an exponentially
// decayed recency vector. Items are hashed into dim/2 buckets (item % buckets)
// so the default dim = 2V is collision free.
class FeatureMap {
 public:
  explicit FeatureMap(int dim, double decay = 0.8);

  int dim() const { return dim_; }
  int buckets() const { return dim_ / 2; }
  double decay() const { return decay_; }

  SparseVector operator()(std::span<const ItemId> history) const;

 private:
  int dim_;
  double decay_;
};

struct Context {
  int user_id = 0;
  std::vector<ItemId> history;
  SparseVector feature;

  bool operator==(const Context&) const = default;
};

// Throws ConfigError on an empty history.
Context MakeContext(int user_id, std::vector<ItemId> history,
                    const FeatureMap& features);

struct CandidateSet {
  std::vector<ItemId> items;
  std::optional<int> positive_index;

  std::size_t size() const { return items.size(); }
  std::optional<int> IndexOf(ItemId item) const;
  bool Contains(ItemId item) const { return IndexOf(item).has_value(); }
  std::optional<ItemId> positive() const {
    if (!positive_index) return std::nullopt;
    return items[*positive_index];
  }
  bool operator==(const CandidateSet&) const = default;
};

// Checks no duplicates and a valid positive index. Throws ValidationError.
void ValidateCandidateSet(const CandidateSet& cands, int num_items);

class PolicyParams {
 public:
  PolicyParams(int num_items, int feature_dim, double temperature = 1.0);
  PolicyParams(Matrix weights, double temperature);

  int num_items() const { return static_cast<int>(weights_.rows()); }
  int feature_dim() const { return static_cast<int>(weights_.cols()); }
  double temperature() const { return temperature_; }

  const Matrix& weights() const { return weights_; }
  Matrix& mutable_weights() { return weights_; }

  // FNV-1a over the raw bytes of the weights and temperature.
  std::uint64_t Fingerprint() const;

 private:
  Matrix weights_;
  double temperature_;
};

// Scores are weights[item] . feature. Throws ConfigError on a feature
// dimension mismatch or an item outside the catalog.
double Score(const PolicyParams& params, const Context& ctx, ItemId item);

class ItemDistribution {
 public:
  // Builds the softmax of logits over `candidates` with max-logit
  // subtraction; log-probabilities come from log-sum-exp.
  ItemDistribution(CandidateSet candidates, std::span<const double> logits);

  const CandidateSet& candidates() const { return candidates_; }
  const std::vector<double>& probs() const { return probs_; }
  const std::vector<double>& log_probs() const { return log_probs_; }
  std::size_t size() const { return probs_.size(); }

 private:
  CandidateSet candidates_;
  std::vector<double> probs_;
  std::vector<double> log_probs_;
};

ItemDistribution Distribution(const PolicyParams& params, const Context& ctx,
                              const CandidateSet& cands);
// Same, with the softmax temperature overridden.
ItemDistribution Distribution(const PolicyParams& params, const Context& ctx,
                              const CandidateSet& cands, double temperature);

struct Draw {
  ItemId item;
  int index;          // position within the candidate set
  double propensity;  // dist.probs()[index], bit-exact
};

Draw SampleItem(const ItemDistribution& dist, Rng& rng);

// Throws InvalidActionError if `item` is not a candidate.
double LogProb(const PolicyParams& params, const Context& ctx,
               const CandidateSet& cands, ItemId item);

// d log pi(item | ctx, cands) / d weights, a dense V x d matrix whose only
// nonzero rows belong to candidates.
Matrix LogProbGradient(const PolicyParams& params, const Context& ctx,
                       const CandidateSet& cands, ItemId item);

// grad.row(cands[b]) += scale * coef[b] * feature for every candidate b.
// The gradient of sum_j c_j log pi(a_j) is this with scale = 1/tau and
// coef = sum_j c_j e_{a_j} - (sum_j c_j) probs.
void AccumulateRowGradient(const Context& ctx, const CandidateSet& cands,
                           std::span<const double> coef, double scale,
                           Matrix& grad);

// KL(U || dist) over the candidate set: -ln M - mean(log probs).
double SelfCertainty(const ItemDistribution& dist);

}  // namespace abpo

#endif  // ABPO_POLICY_H_
