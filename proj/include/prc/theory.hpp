#pragma once

#include <cstdint>
#include <vector>

#include "prc/controller.hpp"
#include "prc/distributions.hpp"
#include "prc/flow.hpp"
#include "prc/state.hpp"

namespace prc {

// Long-run mean-square bound for the normalized estimation errors.
inline double error_bound_y(double lambda, double sigma2, double r,
                            double alpha, double gap) {
  if (!(lambda > 0.0 && lambda <= 1.0))
    throw std::domain_error("error_bound_y: lambda must be in (0,1]");
  if (!(r > 0.0 && alpha > 0.0 && gap > 0.0) || sigma2 < 0.0)
    throw std::domain_error("error_bound_y: invalid inputs");
  return (1.0 / (r * r) + 1.0 / (alpha * alpha * gap * gap)) * lambda *
         sigma2 / (2.0 - lambda);
}

// Probability that at least one of k probe samples drawn uniformly over
// [x0_min, x0_max] lands within 3*chi/4 of the peak flow. Inner integrals are
// CDF differences; the outer integral is fixed-grid composite Simpson.
double p_chi(double chi, const FlowParams& params, const NoiseModel& noise,
             const PriorKnowledge& prior, int k);

// Probability that at least one of k noise draws lies within psi/2 of either
// support edge.
double p_prime(double psi, const NoiseModel& noise, int k);

double kappa(double gamma, double lambda, int k, const FlowParams& params,
             const NoiseModel& noise, const PriorKnowledge& prior);

struct WorstCaseStart {
  TrafficState xi0;
  long m = 0;  // evaluation horizon in steps
};

// Heaviest state the release phase must recover from, with the matching
// horizon M.
WorstCaseStart xi0_and_m(const FlowParams& params, const NoiseModel& noise,
                         const PriorKnowledge& prior, double gamma);

struct MonteCarloEstimate {
  double value = 0.0;
  double ci_half = 0.0;  // 95% normal-approximation half width
};

// Conservative mean discharge over the horizon M: rollouts start at xi0 and
// run the true dynamics under the release controller operated with
// worst-case gamma-perturbed estimates.
MonteCarloEstimate r_tilde(const FlowParams& params, const DemandModel& demand,
                           const NoiseModel& noise,
                           const PriorKnowledge& prior, double gamma,
                           long n_rollouts, std::uint64_t seed);

// Right-hand side of the noise-variance stability condition.
double noise_variance_rhs(double gamma, const FlowParams& params,
                          const NoiseModel& noise,
                          const PriorKnowledge& prior, double lambda, int k);

// Proof constant reported for diagnostics only.
double beta_diagnostic(const FlowParams& params, const NoiseModel& noise,
                       const DemandModel& demand, const PriorKnowledge& prior,
                       const Schedule& schedule, double lambda, int k,
                       double gamma);

struct TheoremReport {
  double y = 0.0;
  double r_tilde_value = 0.0;
  double r_tilde_ci = 0.0;
  bool cond_i = false;
  bool cond_ii = false;
  bool cond_iii = false;
  bool stable = false;
  double gamma_used = 0.0;
  double rhs_iii = 0.0;
  double kappa_value = 0.0;
  double beta = 0.0;
  double inflow_mean = 0.0;   // A-bar + B-bar
  double cond_ii_rhs = 0.0;   // min(x0_clean, R - eps_max)
  bool delta2_consistent = false;  // delta2 <= r_tilde - inflow at gamma_used
};

std::vector<double> default_gamma_grid();

// Evaluates the three stability conditions. With gamma_fixed > 0 every
// quantity is reported at that gamma; otherwise the grid is swept and the
// best admissible gamma is reported. Admissibility requires the prior's
// delta2 margin to remain valid at that gamma, since the round schedule is
// sized with it.
TheoremReport check_theorem_conditions(
    const FlowParams& params, const NoiseModel& noise,
    const DemandModel& demand, const PriorKnowledge& prior, double lambda,
    int k, const std::vector<double>& gamma_grid, long rtilde_rollouts,
    std::uint64_t seed, double gamma_fixed = 0.0);

struct BaselineReport {
  bool cond_1 = false;  // mean inflow below breakdown capacity
  bool cond_2 = false;  // invariant set without capacity drops
  bool stable = false;
  double inflow_mean = 0.0;
};

BaselineReport check_baseline_conditions(const FlowParams& params,
                                         const NoiseModel& noise,
                                         const DemandModel& demand,
                                         double x0_initial);

}  // namespace prc
