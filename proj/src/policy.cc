#include "abpo/policy.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <unordered_set>

#include "abpo/error.h"

namespace abpo {

Eigen::VectorXd SparseVector::ToDense() const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim);
  for (std::size_t k = 0; k < index.size(); ++k) out[index[k]] += value[k];
  return out;
}

FeatureMap::FeatureMap(int dim, double decay) : dim_(dim), decay_(decay) {
  if (dim < 2 || dim % 2 != 0) {
    throw ConfigError("feature dimension must be even and >= 2, got " +
                      std::to_string(dim));
  }
  if (!(decay > 0.0 && decay < 1.0)) {
    throw ConfigError("recency decay must lie in (0,1)");
  }
}

SparseVector FeatureMap::operator()(std::span<const ItemId> history) const {
  const int b = buckets();
  // Accumulate into a small ordered map so equal histories give identical
  // sparse layouts.
  std::vector<std::pair<int, double>> entries;
  entries.reserve(2 * history.size());
  const double inv_len = 1.0 / static_cast<double>(history.size());
  double recency = 1.0;
  for (std::size_t k = history.size(); k-- > 0;) {
    const int bucket = static_cast<int>(history[k] % b);
    entries.emplace_back(bucket, inv_len);
    entries.emplace_back(b + bucket, recency);
    recency *= decay_;
  }
  std::sort(entries.begin(), entries.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  SparseVector out;
  out.dim = dim_;
  for (const auto& [i, v] : entries) {
    if (!out.index.empty() && out.index.back() == i) {
      out.value.back() += v;
    } else {
      out.index.push_back(i);
      out.value.push_back(v);
    }
  }
  return out;
}

Context MakeContext(int user_id, std::vector<ItemId> history,
                    const FeatureMap& features) {
  if (history.empty()) throw ConfigError("context history must be non-empty");
  Context ctx;
  ctx.user_id = user_id;
  ctx.feature = features(history);
  ctx.history = std::move(history);
  return ctx;
}

std::optional<int> CandidateSet::IndexOf(ItemId item) const {
  auto it = std::find(items.begin(), items.end(), item);
  if (it == items.end()) return std::nullopt;
  return static_cast<int>(it - items.begin());
}

void ValidateCandidateSet(const CandidateSet& cands, int num_items) {
  if (cands.items.empty()) throw ValidationError("empty candidate set");
  std::unordered_set<ItemId> seen;
  for (ItemId a : cands.items) {
    if (static_cast<long>(a) >= num_items) {
      throw ValidationError("candidate " + std::to_string(a) +
                            " outside catalog of size " +
                            std::to_string(num_items));
    }
    if (!seen.insert(a).second) {
      throw ValidationError("duplicate candidate " + std::to_string(a));
    }
  }
  if (cands.positive_index &&
      (*cands.positive_index < 0 ||
       *cands.positive_index >= static_cast<int>(cands.size()))) {
    throw ValidationError("positive_index out of range");
  }
}

PolicyParams::PolicyParams(int num_items, int feature_dim, double temperature)
    : PolicyParams(Matrix::Zero(num_items, feature_dim), temperature) {}

PolicyParams::PolicyParams(Matrix weights, double temperature)
    : weights_(std::move(weights)), temperature_(temperature) {
  if (!(temperature_ > 0.0) || !std::isfinite(temperature_)) {
    throw ConfigError("temperature must be positive and finite");
  }
  if (!weights_.allFinite()) throw ConfigError("non-finite policy weights");
}

std::uint64_t PolicyParams::Fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::int64_t shape[2] = {weights_.rows(), weights_.cols()};
  mix(shape, sizeof(shape));
  mix(weights_.data(), sizeof(double) * weights_.size());
  mix(&temperature_, sizeof(temperature_));
  return h;
}

namespace {

void CheckShapes(const PolicyParams& params, const Context& ctx) {
  if (ctx.feature.dim != params.feature_dim()) {
    throw ConfigError("feature dimension " + std::to_string(ctx.feature.dim) +
                      " does not match policy dimension " +
                      std::to_string(params.feature_dim()));
  }
}

double ScoreUnchecked(const PolicyParams& params, const Context& ctx,
                      ItemId item) {
  return ctx.feature.Dot(params.weights().row(item).data());
}

}  // namespace

double Score(const PolicyParams& params, const Context& ctx, ItemId item) {
  CheckShapes(params, ctx);
  if (static_cast<long>(item) >= params.num_items()) {
    throw ConfigError("item " + std::to_string(item) +
                      " outside catalog of size " +
                      std::to_string(params.num_items()));
  }
  return ScoreUnchecked(params, ctx, item);
}

ItemDistribution::ItemDistribution(CandidateSet candidates,
                                   std::span<const double> logits)
    : candidates_(std::move(candidates)) {
  if (logits.empty() || logits.size() != candidates_.size()) {
    throw ConfigError("logit count must match a non-empty candidate set");
  }
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  probs_.resize(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs_[i] = std::exp(logits[i] - max_logit);
    total += probs_[i];
  }
  const double log_total = std::log(total);
  log_probs_.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs_[i] /= total;
    log_probs_[i] = (logits[i] - max_logit) - log_total;
  }
}

ItemDistribution Distribution(const PolicyParams& params, const Context& ctx,
                              const CandidateSet& cands) {
  return Distribution(params, ctx, cands, params.temperature());
}

ItemDistribution Distribution(const PolicyParams& params, const Context& ctx,
                              const CandidateSet& cands, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (cands.items.empty()) throw ConfigError("empty candidate set");
  CheckShapes(params, ctx);
  std::vector<double> logits(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (static_cast<long>(cands.items[i]) >= params.num_items()) {
      throw ConfigError("candidate outside catalog");
    }
    logits[i] = ScoreUnchecked(params, ctx, cands.items[i]) / temperature;
  }
  return ItemDistribution(cands, logits);
}

Draw SampleItem(const ItemDistribution& dist, Rng& rng) {
  const auto& p = dist.probs();
  const double u = Uniform01(rng);
  double cdf = 0.0;
  std::size_t idx = p.size() - 1;
  for (std::size_t i = 0; i < p.size(); ++i) {
    cdf += p[i];
    if (u < cdf) {
      idx = i;
      break;
    }
  }
  return Draw{dist.candidates().items[idx], static_cast<int>(idx), p[idx]};
}

double LogProb(const PolicyParams& params, const Context& ctx,
               const CandidateSet& cands, ItemId item) {
  const auto idx = cands.IndexOf(item);
  if (!idx) {
    throw InvalidActionError("item " + std::to_string(item) +
                             " is not in the candidate set");
  }
  return Distribution(params, ctx, cands).log_probs()[*idx];
}

void AccumulateRowGradient(const Context& ctx, const CandidateSet& cands,
                           std::span<const double> coef, double scale,
                           Matrix& grad) {
  const auto& f = ctx.feature;
  for (std::size_t b = 0; b < cands.size(); ++b) {
    const double c = scale * coef[b];
    if (c == 0.0) continue;
    double* row = grad.row(cands.items[b]).data();
    for (std::size_t k = 0; k < f.index.size(); ++k) {
      row[f.index[k]] += c * f.value[k];
    }
  }
}

Matrix LogProbGradient(const PolicyParams& params, const Context& ctx,
                       const CandidateSet& cands, ItemId item) {
  const auto idx = cands.IndexOf(item);
  if (!idx) {
    throw InvalidActionError("item " + std::to_string(item) +
                             " is not in the candidate set");
  }
  const ItemDistribution dist = Distribution(params, ctx, cands);
  std::vector<double> coef(cands.size());
  for (std::size_t b = 0; b < cands.size(); ++b) coef[b] = -dist.probs()[b];
  coef[*idx] += 1.0;
  Matrix grad = Matrix::Zero(params.num_items(), params.feature_dim());
  AccumulateRowGradient(ctx, cands, coef, 1.0 / params.temperature(), grad);
  return grad;
}

double SelfCertainty(const ItemDistribution& dist) {
  const double m = static_cast<double>(dist.size());
  double mean_log = 0.0;
  for (double lp : dist.log_probs()) mean_log += lp;
  mean_log /= m;
  return std::max(0.0, -std::log(m) - mean_log);
}

}  // namespace abpo
