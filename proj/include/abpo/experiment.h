#ifndef ABPO_EXPERIMENT_H_
#define ABPO_EXPERIMENT_H_

// Closed-loop driver: supervised initialization, repeated
// log -> update -> evaluate rounds, checkpoints and theory verification.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "abpo/config.h"
#include "abpo/metrics.h"
#include "abpo/optimizer.h"
#include "abpo/policy.h"
#include "abpo/random.h"
#include "abpo/sequences.h"
#include "abpo/theory.h"

namespace abpo {

struct InitTrace {
  std::vector<double> log_likelihood;  // mean log-likelihood before each step
  double final_log_likelihood = 0.0;
};

// Next-item maximum likelihood on the prefix: for t = 1..T the history
// x_1..x_t predicts x_{t+1} among a candidate set built like the logs'.
// Full-batch gradient ascent for cfg.init_epochs steps from zero weights.
// Throws NumericError on a non-finite loss.
PolicyParams SupervisedInit(const std::vector<UserSequence>& seqs,
                            const ExperimentConfig& cfg, Rng& rng,
                            InitTrace* trace = nullptr);

// Held-out evaluation: each user's context x_1..x_{T+N-1}, target x_{T+N}
// and a fixed M-item candidate set containing the target.
struct EvalSet {
  std::vector<Context> contexts;
  std::vector<CandidateSet> candidates;
  std::vector<ItemId> targets;
  PopularityModel popularity;
};

EvalSet MakeEvalSet(const std::vector<UserSequence>& seqs,
                    const ExperimentConfig& cfg);

// HR@1, HR@5, NDCG@5, Div@1 and Div@5 of `policy` on `eval`.
std::vector<MetricRow> Evaluate(const PolicyParams& policy, const EvalSet& eval,
                                int round);

struct RoundReport {
  int round = 0;
  std::vector<MetricRow> metrics;
  MatchingRates matching;  // zero at round 0
  std::vector<EpochStats> epochs;
  std::uint64_t fingerprint = 0;

  double Metric(const std::string& name, int k) const;
};

struct ClosedLoopResult {
  std::vector<RoundReport> reports;
  PolicyParams final_policy;
};

// Round 0 initializes and evaluates. Rounds 1..R log under the current policy
// (or the initial one when cfg.relog is false), update per cfg.mode and
// evaluate. With a non-empty cfg.output_dir the run writes config.txt,
// metrics.csv, epochs.csv, checkpoints.csv, round_<r>.log and final.ckpt
// there. On a failed round the last good policy is saved to final.ckpt and
// the error is rethrown.
ClosedLoopResult RunClosedLoop(const ExperimentConfig& cfg,
                               std::ostream* progress = nullptr);

void WriteMetricRows(std::ostream& out,
                     const std::vector<RoundReport>& reports);

// Binary little-endian checkpoint; weights round-trip bit-exactly.
void WriteCheckpoint(const PolicyParams& policy, const std::string& path);
PolicyParams ReadCheckpoint(const std::string& path);

// Runs every check in `grid`, writes the CSV report to `report` and returns
// 0 if all pass, 1 otherwise. An empty grid passes.
int VerifyTheory(const TheoryGrid& grid, std::ostream& report,
                 const Estimators& est = {});

}  // namespace abpo

#endif  // ABPO_EXPERIMENT_H_
