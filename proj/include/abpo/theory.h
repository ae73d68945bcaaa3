#ifndef ABPO_THEORY_H_
#define ABPO_THEORY_H_

// Numerical checks of the anchored-baseline calibration results.
//
// Every statement is checked against a small tabular fixture: a reward table
// r(a) over a handful of candidates, a rollout distribution rho, a logged
// reward r_log, a group size G and a fixed anchor weight omega. Expectation
// claims are estimated by Monte Carlo over n independent groups and pass when
// |estimate - target| <= 4 SE (plus a 1e-9 floor for round-off). Algebraic
// identities are checked draw by draw to 1e-12. When M^(G-1) <= 1e6 the
// expectations are additionally computed by exact enumeration of all
// (G-1)-tuples.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace abpo {

struct TheoryFixture {
  std::string name;
  std::vector<double> reward;  // r(a)
  std::vector<double> rho;     // rollout distribution
  double r_log = 0.0;
  int group_size = 4;
  double omega = 1.0;
  int samples = 100000;
  std::uint64_t seed = 1;

  double Value() const;  // V^rho = sum_a rho(a) r(a)
  double Alpha() const { return omega / (omega + group_size - 1); }
};

// Two item-level distributions over the same candidates and a bounded f.
struct IpsFixture {
  std::string name;
  std::vector<double> e0;
  std::vector<double> e_old;
  std::vector<double> f;
  double delta = 1e-6;
  int samples = 100000;
  std::uint64_t seed = 1;
};

struct CheckReport {
  std::string id;
  std::string fixture;
  double estimate = 0.0;
  double target = 0.0;
  double residual = 0.0;   // |estimate - target|, or max residual
  double std_error = 0.0;  // 0 for exact checks
  bool pass = false;
  std::string rule;
  std::string note;
};

// The weighted anchored baseline the verifier exercises. Defaults to the
// optimizer's implementation; tests swap in faulty variants.
using BaselineFn = std::function<double(double omega, double r_log,
                                        std::span<const double> roll_rewards)>;

struct Estimators {
  BaselineFn anchored_baseline;
  Estimators();
};

void ValidateFixture(const TheoryFixture& fx);

// E[rbar_roll] = V^rho.
std::vector<CheckReport> CheckRolloutCentering(const TheoryFixture& fx,
                                               const Estimators& est = {});
// E[rbar_anc] = alpha r_log + (1 - alpha) V^rho, and
// delta_anc / delta_roll = (G-1) / (omega+G-1).
std::vector<CheckReport> CheckAnchoringShift(const TheoryFixture& fx,
                                             const Estimators& est = {});
// A_j^omega = A_j^roll + alpha (rbar_roll - r_log) per draw, and
// E[A_j^omega] = alpha (V^rho - r_log).
std::vector<CheckReport> CheckNonanchorShiftIdentity(
    const TheoryFixture& fx, const Estimators& est = {});
// Requires r_log >= V^rho (ConfigError otherwise).
std::vector<CheckReport> CheckPositiveCalibration(const TheoryFixture& fx,
                                                  const Estimators& est = {});
// Requires r_log <= V^rho (ConfigError otherwise).
std::vector<CheckReport> CheckNoResponseBuffering(const TheoryFixture& fx,
                                                  const Estimators& est = {});
// Requires omega = 1: E[rbar_anc] = r_log / G + (G-1)/G V^rho.
std::vector<CheckReport> CheckBaselineFactor(const TheoryFixture& fx,
                                             const Estimators& est = {});

// E_{a~e0}[w(a) f(a)] = E_{a~e_old}[f(a)].
std::vector<CheckReport> CheckAnchorIpsIdentity(const IpsFixture& fx);

struct SnipsLimitOptions {
  std::vector<int> sizes = {100, 1000, 10000};
  int repetitions = 10;
  int min_monotone = 8;
  // Each repetition measures the absolute error at a size as the mean over
  // this many independent stratum draws.
  int inner_replicates = 32;
};

// Convergence of the self-normalized estimate toward
// E[w f] / (E[w] + delta): 4-SE agreement at fx.samples, and shrinking error
// across `sizes` in at least `min_monotone` of `repetitions`.
std::vector<CheckReport> CheckSnipsLimit(const IpsFixture& fx,
                                         const SnipsLimitOptions& opts = {});

// Exact expectations by enumerating all (G-1)-tuples. Empty when
// M^(G-1) > 1e6.
std::vector<CheckReport> CheckByEnumeration(const TheoryFixture& fx,
                                            const Estimators& est = {});

// sigma-normalized advantages from the optimizer keep the sign of every
// expected shift: checked on the fixture's r_log vs V^rho ordering.
std::vector<CheckReport> CheckNormalizedSignPreservation(
    const TheoryFixture& fx, double std_eps = 1e-8);

struct TheoryGrid {
  std::vector<TheoryFixture> centering;
  std::vector<TheoryFixture> anchoring;
  std::vector<TheoryFixture> identity;
  std::vector<TheoryFixture> positive;
  std::vector<TheoryFixture> no_response;
  std::vector<TheoryFixture> baseline_factor;
  std::vector<TheoryFixture> enumeration;
  std::vector<TheoryFixture> sign_preservation;
  std::vector<IpsFixture> ips;
  std::vector<IpsFixture> snips;
};

TheoryGrid DefaultTheoryGrid(int samples = 100000, std::uint64_t seed = 7);

std::vector<CheckReport> RunTheoryGrid(const TheoryGrid& grid,
                                       const Estimators& est = {});

void WriteReportCsv(std::ostream& out, std::span<const CheckReport> reports);

}  // namespace abpo

#endif  // ABPO_THEORY_H_
