#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "prc/flow.hpp"

namespace prc {

struct EstimatorConfig {
  double lambda = 0.08;     // learning rate in (0, 1]
  int k = 3;                // samples per episode
  long reset_period = 0;    // steps between max-estimate resets; 0 = never
  double reset_fmax = 0.0;  // defaults restored on reset
  double reset_epsmax = 0.0;

  void validate() const {
    if (!(lambda > 0.0 && lambda <= 1.0))
      throw std::invalid_argument("EstimatorConfig: lambda must be in (0,1]");
    if (k < 1) throw std::invalid_argument("EstimatorConfig: k must be >= 1");
    if (reset_period < 0)
      throw std::invalid_argument("EstimatorConfig: negative reset period");
  }
};

// Online estimates of the four flow-curve parameters, updated once per round.
struct Estimates {
  double alpha_hat = 0.0;
  double fmax_hat = 0.0;
  double r_hat = 0.0;
  double epsmax_hat = 0.0;
  long round = 0;
};

struct ErrorVector {
  double e_alpha = 0.0;
  double e_fmax = 0.0;
  double e_r = 0.0;
  double e_epsmax = 0.0;

  double norm2_sq() const {
    return e_alpha * e_alpha + e_fmax * e_fmax + e_r * e_r +
           e_epsmax * e_epsmax;
  }
};

// Slope estimate from one probe sample on the linear branch. The denominator
// guard rejects samples too close to the clean boundary, where the ratio is
// ill conditioned.
inline double theta_alpha(double x0_sample, double f_sample, double x0_clean,
                          double gap) {
  if (x0_sample - x0_clean < gap)
    throw std::domain_error("theta_alpha: sample rejected, denominator gap");
  return (f_sample - x0_clean) / (x0_sample - x0_clean);
}

struct RoundSamples {
  std::vector<double> theta_alpha;
  std::vector<double> theta_fmax;
  std::vector<double> theta_r;
};

namespace detail {
inline double ewma_round(std::span<const double> samples, double prev,
                         double lambda) {
  const int k = static_cast<int>(samples.size());
  double acc = std::pow(1.0 - lambda, k) * prev;
  for (int j = 1; j <= k; ++j)
    acc += lambda * std::pow(1.0 - lambda, k - j) * samples[j - 1];
  return acc;
}
}  // namespace detail

// Per-round update: constant-rate EWMA for alpha and R, running maxima for
// F_max and eps_max (half of the R-sample range bounds the noise amplitude).
inline Estimates update_round(const Estimates& est, const RoundSamples& s,
                              const EstimatorConfig& cfg) {
  const std::size_t k = static_cast<std::size_t>(cfg.k);
  if (s.theta_alpha.size() != k || s.theta_fmax.size() != k ||
      s.theta_r.size() != k)
    throw std::invalid_argument("update_round: wrong sample counts");
  Estimates next = est;
  next.alpha_hat = detail::ewma_round(s.theta_alpha, est.alpha_hat, cfg.lambda);
  next.r_hat = detail::ewma_round(s.theta_r, est.r_hat, cfg.lambda);
  const auto [r_min, r_max] =
      std::minmax_element(s.theta_r.begin(), s.theta_r.end());
  next.fmax_hat = std::max(
      est.fmax_hat, *std::max_element(s.theta_fmax.begin(), s.theta_fmax.end()));
  next.epsmax_hat = std::max(est.epsmax_hat, 0.5 * (*r_max - *r_min));
  next.round = est.round + 1;
  return next;
}

inline double critical_value(const Estimates& est, double x0_clean) {
  if (!(est.alpha_hat > 0.0))
    throw std::domain_error("critical_value: degenerate alpha estimate");
  return x0_clean + (est.fmax_hat - est.epsmax_hat - x0_clean) / est.alpha_hat;
}

// Estimated flow curve. With bad early estimates the derived critical value
// can fall below the clean boundary; the linear branch is then empty.
inline double estimated_flow(const Estimates& est, double x0_clean,
                             double x0) {
  if (x0 < 0.0) throw std::domain_error("estimated_flow: negative queue");
  const double x0c_hat = critical_value(est, x0_clean);
  const double upper = std::max(x0c_hat, x0_clean);
  if (x0 <= x0_clean) return x0;
  if (x0 <= upper) return est.alpha_hat * (x0 - x0_clean) + x0_clean;
  return est.r_hat;
}

inline ErrorVector normalized_errors(const Estimates& est,
                                     const FlowParams& truth,
                                     const NoiseModel& noise) {
  const double fmax_true = truth.q_capacity() + noise.eps_max();
  if (!(truth.alpha > 0.0) || !(fmax_true > 0.0) || !(truth.r > 0.0) ||
      !(noise.eps_max() > 0.0))
    throw std::domain_error("normalized_errors: zero ground truth");
  ErrorVector e;
  e.e_alpha = (est.alpha_hat - truth.alpha) / truth.alpha;
  e.e_fmax = (est.fmax_hat - fmax_true) / fmax_true;
  e.e_r = (est.r_hat - truth.r) / truth.r;
  e.e_epsmax = (est.epsmax_hat - noise.eps_max()) / noise.eps_max();
  return e;
}

inline Estimates reset_max_estimates(const Estimates& est,
                                     const EstimatorConfig& cfg) {
  Estimates next = est;
  next.fmax_hat = cfg.reset_fmax;
  next.epsmax_hat = cfg.reset_epsmax;
  return next;
}

}  // namespace prc
