#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fedapm/config.hpp"
#include "fedapm/csv.hpp"
#include "fedapm/diagnostics.hpp"
#include "fedapm/metrics.hpp"

namespace fedapm {

struct Problem {
  std::vector<LocalObjective> objectives;
  std::vector<ClientData> clients;             // classification only
  std::optional<ConsensusSolution> solution;   // quadratic only
};

// Generates the configured problem with the given seed.
Problem build_problem(const RunConfig& cfg, std::uint64_t seed);

std::vector<LipschitzEstimates> estimate_all(std::span<const LocalObjective> objectives, int probes,
                                             std::uint64_t seed);

// Pooled test metrics of the deployed models (personal block of client i with the shared u).
ClassificationMetrics evaluate_state(const FederationState& state, const Problem& problem);

// One (method, seed) run, advanced a round at a time.
class Simulation {
 public:
  Simulation(const RunConfig& cfg, Method method, std::uint64_t seed, int workers = 1);
  Simulation(const RunConfig& cfg, Method method, std::uint64_t seed, Problem problem, int workers = 1);

  // Executes one round and appends its metrics row (and theory row for fedapm).
  void step();
  void run(int rounds);

  const FederationState& state() const { return state_; }
  const Problem& problem() const { return problem_; }
  const std::vector<MetricsRow>& rows() const { return rows_; }
  const std::vector<TheoryRow>& theory() const { return theory_; }
  const std::vector<RoundReport>& reports() const { return reports_; }
  const std::vector<LipschitzEstimates>& lipschitz() const { return lipschitz_; }
  double rho() const { return rho_; }
  const std::vector<double>& sigma() const { return sigma_; }
  const HyperparamCheck& hyperparam_check() const { return check_; }
  Method method() const { return method_; }

 private:
  void init();
  MetricsRow make_row(const TheoryRow* theory) const;

  RunConfig cfg_;
  Method method_;
  std::uint64_t seed_;
  int workers_;
  Problem problem_;
  std::vector<LipschitzEstimates> lipschitz_;
  double rho_ = 0.0;
  std::vector<double> sigma_;
  HyperparamCheck check_;
  FederationState state_;
  std::vector<MetricsRow> rows_;
  std::vector<TheoryRow> theory_;
  std::vector<RoundReport> reports_;
};

struct SummaryLine {
  std::string method;
  int runs = 0;
  double loss_mean = 0.0, loss_std = 0.0;
  double accuracy_mean = 0.0, accuracy_std = 0.0;
  double f1_mean = 0.0, f1_std = 0.0;
  double auc_mean = 0.0, auc_std = 0.0;
  double drift_mean = 0.0, drift_std = 0.0;
};

// Mean and unbiased (n - 1) standard deviation; the deviation of a single value is 0.
std::pair<double, double> mean_std(std::span<const double> values);

std::string format_summary(std::span<const SummaryLine> lines);

// Runs every (method, seed) pair, writing <out>/<method>_seed<k>.csv and <out>/summary.txt.
// Returns 0 on success. A failing run is logged to <out>/failure.log, its partial CSV is kept
// with a ".partial" suffix, and the return value is 1.
int run_experiment(const RunConfig& cfg, std::ostream& log, int workers = 1);

}  // namespace fedapm
