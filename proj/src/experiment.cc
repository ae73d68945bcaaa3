#include "abpo/experiment.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <unordered_map>

#include "abpo/bandit_log.h"
#include "abpo/error.h"

namespace abpo {

namespace {

constexpr std::uint64_t kInitStream = 0x1717;
constexpr std::uint64_t kEvalStream = 0xe7a1;
constexpr std::uint64_t kEpochStream = 0xe90c;
constexpr std::uint64_t kMatchStream = 0x3a7c;
constexpr char kCheckpointMagic[8] = {'A', 'B', 'P', 'O', 'C', 'K', 'P', '1'};

struct InitPair {
  Context context;
  CandidateSet candidates;
};

std::uint64_t DeriveSeed(std::uint64_t seed,
                         std::initializer_list<std::uint64_t> path) {
  Rng rng = DeriveStream(seed, path);
  return rng();
}

std::ofstream OpenOutput(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw ConfigError("cannot open '" + path.string() + "' for writing");
  return out;
}

// Held-out targets must stay out of every logged history and candidate set.
void CheckRoundIsolation(const BanditLog& log,
                         const std::vector<UserSequence>& seqs) {
  std::unordered_map<int, const UserSequence*> by_user;
  for (const UserSequence& s : seqs) by_user[s.user_id] = &s;
  for (const LoggedExample& ex : log.examples) {
    const UserSequence& seq = *by_user.at(ex.context.user_id);
    const ItemId held_out = seq.held_out();
    if (ex.candidates.Contains(held_out)) {
      throw ValidationError("held-out target leaked into a candidate set");
    }
    for (ItemId h : ex.context.history) {
      if (h == held_out) {
        throw ValidationError("held-out target leaked into a history");
      }
    }
  }
}

}  // namespace

PolicyParams SupervisedInit(const std::vector<UserSequence>& seqs,
                            const ExperimentConfig& cfg, Rng& rng,
                            InitTrace* trace) {
  const int num_items = cfg.num_items;
  const FeatureMap features(cfg.ResolvedFeatureDim());
  PolicyParams policy(num_items, features.dim(), cfg.temperature);

  std::vector<InitPair> pairs;
  for (const UserSequence& seq : seqs) {
    ValidateSequence(seq, num_items);
    for (int t = 1; t <= seq.prefix_len; ++t) {
      InitPair p;
      p.context = MakeContext(
          seq.user_id,
          std::vector<ItemId>(seq.items.begin(), seq.items.begin() + t),
          features);
      p.candidates = SampleCandidates(seq, seq.x(t + 1), cfg.candidate_size,
                                      num_items, rng);
      pairs.push_back(std::move(p));
    }
  }
  if (trace) *trace = InitTrace{};
  if (pairs.empty()) return policy;

  const double n = static_cast<double>(pairs.size());
  const double scale = 1.0 / (policy.temperature() * n);
  Matrix grad(num_items, features.dim());
  std::vector<double> coef;
  auto evaluate = [&](bool with_grad) {
    double ll = 0.0;
    if (with_grad) grad.setZero();
    for (const InitPair& p : pairs) {
      const ItemDistribution dist =
          Distribution(policy, p.context, p.candidates);
      const int pos = *p.candidates.positive_index;
      ll += dist.log_probs()[pos];
      if (!with_grad) continue;
      coef.assign(dist.probs().begin(), dist.probs().end());
      for (double& c : coef) c = -c;
      coef[pos] += 1.0;
      AccumulateRowGradient(p.context, p.candidates, coef, scale, grad);
    }
    ll /= n;
    if (!std::isfinite(ll)) {
      throw NumericError(
          "supervised initialization produced a non-finite loss");
    }
    return ll;
  };

  for (int epoch = 0; epoch < cfg.init_epochs; ++epoch) {
    const double ll = evaluate(true);
    if (trace) trace->log_likelihood.push_back(ll);
    policy.mutable_weights() += cfg.init_learning_rate * grad;
  }
  const double final_ll = evaluate(false);
  if (trace) trace->final_log_likelihood = final_ll;
  return policy;
}

EvalSet MakeEvalSet(const std::vector<UserSequence>& seqs,
                    const ExperimentConfig& cfg) {
  const FeatureMap features(cfg.ResolvedFeatureDim());
  EvalSet eval;
  for (const UserSequence& seq : seqs) {
    ValidateSequence(seq, cfg.num_items);
    Rng rng = DeriveStream(
        cfg.seed, {kEvalStream, static_cast<std::uint64_t>(seq.user_id)});
    eval.contexts.push_back(MakeContext(
        seq.user_id,
        std::vector<ItemId>(seq.items.begin(), seq.items.end() - 1), features));
    eval.candidates.push_back(SampleCandidates(
        seq, seq.held_out(), cfg.candidate_size, cfg.num_items, rng));
    eval.targets.push_back(seq.held_out());
  }
  eval.popularity = PopularityEstimate(TrainingItems(seqs), cfg.num_items);
  return eval;
}

std::vector<MetricRow> Evaluate(const PolicyParams& policy, const EvalSet& eval,
                                int round) {
  constexpr int kMaxK = 5;
  std::vector<RankedList> lists;
  lists.reserve(eval.contexts.size());
  for (std::size_t i = 0; i < eval.contexts.size(); ++i) {
    const int k = std::min<int>(kMaxK, eval.candidates[i].size());
    lists.push_back(RankCandidates(policy, eval.contexts[i], eval.candidates[i],
                                   k, eval.targets[i]));
  }
  return {
      MetricRow{round, "hr", 1, HitRateAtK(lists, 1)},
      MetricRow{round, "hr", 5, HitRateAtK(lists, 5)},
      MetricRow{round, "ndcg", 5, NdcgAtK(lists, 5)},
      MetricRow{round, "div", 1, DiversityAtK(lists, eval.popularity, 1)},
      MetricRow{round, "div", 5, DiversityAtK(lists, eval.popularity, 5)},
  };
}

double RoundReport::Metric(const std::string& name, int k) const {
  for (const MetricRow& row : metrics) {
    if (name == row.metric && row.k == k) return row.value;
  }
  if (name == "match_pos") return matching.positive;
  if (name == "match_neg") return matching.no_response;
  throw ConfigError("no metric " + name + "@" + std::to_string(k));
}

void WriteMetricRows(std::ostream& out,
                     const std::vector<RoundReport>& reports) {
  WriteMetricsHeader(out);
  for (const RoundReport& r : reports) {
    for (const MetricRow& row : r.metrics) WriteMetricRow(out, row);
    if (r.round > 0) {
      WriteMetricRow(out,
                     MetricRow{r.round, "match_pos", 0, r.matching.positive});
      WriteMetricRow(
          out, MetricRow{r.round, "match_neg", 0, r.matching.no_response});
    }
  }
}

ClosedLoopResult RunClosedLoop(const ExperimentConfig& cfg,
                               std::ostream* progress) {
  ValidateExperimentConfig(cfg);
  const std::vector<UserSequence> seqs =
      GenerateSequences(MakeUserModelConfig(cfg));
  const EvalSet eval = MakeEvalSet(seqs, cfg);
  const UpdateConfig update = MakeUpdateConfig(cfg);

  const bool write = !cfg.output_dir.empty();
  const std::filesystem::path dir(cfg.output_dir);
  if (write) {
    std::filesystem::create_directories(dir);
    std::ofstream config_out = OpenOutput(dir / "config.txt");
    WriteConfig(config_out, cfg);
  }

  Rng init_rng = DeriveStream(cfg.seed, {kInitStream});
  const PolicyParams initial = SupervisedInit(seqs, cfg, init_rng);
  ClosedLoopResult result{{}, initial};

  RoundReport r0;
  r0.round = 0;
  r0.metrics = Evaluate(initial, eval, 0);
  r0.fingerprint = initial.Fingerprint();
  result.reports.push_back(r0);

  auto report_progress = [&](const RoundReport& r) {
    if (!progress) return;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "round %d mode=%s hr@5=%.4f ndcg@5=%.4f div@5=%.3f "
                  "match_pos=%.4f match_neg=%.4f\n",
                  r.round, RunModeName(cfg.mode), r.Metric("hr", 5),
                  r.Metric("ndcg", 5), r.Metric("div", 5), r.matching.positive,
                  r.matching.no_response);
    *progress << buf << std::flush;
  };
  report_progress(r0);

  try {
    for (int round = 1; round <= cfg.rounds; ++round) {
      const PolicyParams& logging = cfg.relog ? result.final_policy : initial;
      const BanditLog log =
          MakeBanditLog(logging, seqs, MakeLogConfig(cfg, round));
      CheckRoundIsolation(log, seqs);
      if (write)
        WriteLog(log,
                 (dir / ("round_" + std::to_string(round) + ".log")).string());

      RoundReport report;
      report.round = round;
      PolicyParams policy = result.final_policy;
      if (cfg.mode != RunMode::kNoUpdate) {
        for (int e = 0; e < cfg.epochs_per_round; ++e) {
          EpochStats stats;
          policy =
              RunEpoch(policy, log, update,
                       DeriveSeed(cfg.seed, {kEpochStream,
                                             static_cast<std::uint64_t>(round),
                                             static_cast<std::uint64_t>(e)}),
                       &stats);
          stats.epoch = e;
          report.epochs.push_back(stats);
        }
      }
      report.metrics = Evaluate(policy, eval, round);
      report.matching = ComputeMatchingRates(
          policy, log, cfg.matching_samples,
          DeriveSeed(cfg.seed,
                     {kMatchStream, static_cast<std::uint64_t>(round)}));
      report.fingerprint = policy.Fingerprint();
      result.final_policy = std::move(policy);
      result.reports.push_back(std::move(report));
      report_progress(result.reports.back());
    }
  } catch (...) {
    if (write)
      WriteCheckpoint(result.final_policy, (dir / "final.ckpt").string());
    throw;
  }

  if (write) {
    std::ofstream metrics = OpenOutput(dir / "metrics.csv");
    WriteMetricRows(metrics, result.reports);
    std::ofstream epochs = OpenOutput(dir / "epochs.csv");
    WriteEpochStatsHeader(epochs);
    for (const RoundReport& r : result.reports) {
      for (const EpochStats& s : r.epochs)
        WriteEpochStatsRow(epochs, r.round, s);
    }
    std::ofstream fps = OpenOutput(dir / "checkpoints.csv");
    fps << "round,fingerprint\n";
    for (const RoundReport& r : result.reports) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%d,%016llx\n", r.round,
                    static_cast<unsigned long long>(r.fingerprint));
      fps << buf;
    }
    WriteCheckpoint(result.final_policy, (dir / "final.ckpt").string());
  }
  return result;
}

void WriteCheckpoint(const PolicyParams& policy, const std::string& path) {
  std::ofstream out = OpenOutput(path);
  const std::int64_t rows = policy.num_items(), cols = policy.feature_dim();
  const double tau = policy.temperature();
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
  out.write(reinterpret_cast<const char*>(&tau), sizeof(tau));
  out.write(reinterpret_cast<const char*>(policy.weights().data()),
            static_cast<std::streamsize>(sizeof(double) * rows * cols));
  if (!out) throw ConfigError("failed writing checkpoint '" + path + "'");
}

PolicyParams ReadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
  char magic[sizeof(kCheckpointMagic)];
  std::int64_t rows = 0, cols = 0;
  double tau = 0.0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  in.read(reinterpret_cast<char*>(&tau), sizeof(tau));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw ParseError(1, "'" + path + "' is not a policy checkpoint");
  }
  if (rows < 1 || cols < 1 || rows * cols > (std::int64_t{1} << 32)) {
    throw ParseError(1, "checkpoint shape out of range");
  }
  Matrix weights(rows, cols);
  in.read(reinterpret_cast<char*>(weights.data()),
          static_cast<std::streamsize>(sizeof(double) * rows * cols));
  if (!in) throw ParseError(1, "truncated checkpoint '" + path + "'");
  return PolicyParams(std::move(weights), tau);
}

int VerifyTheory(const TheoryGrid& grid, std::ostream& report,
                 const Estimators& est) {
  const std::vector<CheckReport> results = RunTheoryGrid(grid, est);
  WriteReportCsv(report, results);
  for (const CheckReport& r : results) {
    if (!r.pass) return 1;
  }
  return 0;
}

}  // namespace abpo
