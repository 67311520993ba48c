#pragma once

#include <optional>
#include <string>
#include <vector>

#include "prc/scenario.hpp"
#include "prc/theory.hpp"

namespace prc {

struct MetricsRow {
  long t = 0;
  double x0 = 0.0;
  double l1 = 0.0;
  double q = 0.0;
  double f = 0.0;
  double a = 0.0;
  double b = 0.0;
  double b_s = 0.0;
  double b_qs = 0.0;
  double b_bq = 0.0;
  double x0_set = 0.0;  // NaN outside steer/release steps
  std::string phase;
  long round = 0;
  double alpha_hat = 0.0;
  double fmax_hat = 0.0;
  double r_hat = 0.0;
  double epsmax_hat = 0.0;
  double e2norm = 0.0;  // NaN when truth is unavailable
};

struct RoundRow {
  long n = 0;
  long end_step = 0;
  bool updated = false;
  double alpha_hat = 0.0;
  double fmax_hat = 0.0;
  double r_hat = 0.0;
  double epsmax_hat = 0.0;
  double e2norm = 0.0;
};

struct RunSummary {
  std::uint64_t replication = 0;
  long horizon = 0;
  double time_avg_l1 = 0.0;
  double time_avg_l1_quarter = 0.0;  // prefix average at 25% of the horizon
  double tail_avg_e2 = 0.0;          // average over the last half of rounds
  double throughput = 0.0;           // total outflow / horizon
  double delay_proxy_s = 0.0;        // dt * sum(l1) / sum(F)
  long rounds = 0;
  long void_rounds = 0;
  long rejected_samples = 0;
  long outflow_clamps = 0;
  long bs_clamps = 0;
  long steer_clamps = 0;
  long resets = 0;
  double y_bound = 0.0;
  BaselineReport baseline;
  Estimates final_estimates;
};

struct RunOptions {
  bool keep_steps = false;
  bool keep_rounds = true;
};

struct RunResult {
  RunSummary summary;
  std::vector<MetricsRow> steps;
  std::vector<RoundRow> rounds;
  std::vector<double> l1_trajectory;
};

RunResult run_scenario(const Scenario& scenario, std::uint64_t replication,
                       const RunOptions& options = {});

struct MonteCarloResult {
  std::vector<RunSummary> replications;
  RunSummary mean;
  RunSummary stddev;
};

MonteCarloResult run_monte_carlo(const Scenario& scenario, int n_reps,
                                 const RunOptions& options = {});

MonteCarloResult aggregate_summaries(std::vector<RunSummary> reps);

void write_steps_csv(const std::string& path,
                     const std::vector<MetricsRow>& rows);
void write_rounds_csv(const std::string& path,
                      const std::vector<RoundRow>& rows);
void write_summaries_csv(const std::string& path,
                         const std::vector<RunSummary>& rows);
std::string summary_to_json(const RunSummary& s);
std::string aggregate_to_json(const MonteCarloResult& r);

}  // namespace prc
