#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "prc/distributions.hpp"
#include "prc/rng.hpp"

namespace prc {

// Piecewise discharge curve of the bottleneck: identity on the clean zone,
// linear ramp with slope alpha up to the critical queue length x0_c, and the
// breakdown rate R beyond it. Q = f(x0_c) is the nominal capacity.
struct FlowParams {
  double alpha = 0.5;     // 1/step
  double x0_clean = 1.0;  // veh
  double x0_c = 2.0;      // veh
  double r = 1.2;         // veh/step, breakdown capacity

  double q_capacity() const {
    return alpha * (x0_c - x0_clean) + x0_clean;
  }

  double gap() const { return x0_c - x0_clean; }

  static FlowParams from_critical(double alpha, double x0_clean, double x0_c,
                                  double r) {
    FlowParams p{alpha, x0_clean, x0_c, r};
    p.validate();
    return p;
  }

  // Construction from the peak flow Q keeps Q exact and derives x0_c.
  static FlowParams from_peak(double alpha, double x0_clean, double q,
                              double r) {
    FlowParams p{alpha, x0_clean, x0_clean + (q - x0_clean) / alpha, r};
    p.validate();
    return p;
  }

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0))
      throw std::invalid_argument("FlowParams: alpha must be in (0,1)");
    if (!(0.0 < x0_clean && x0_clean < x0_c))
      throw std::invalid_argument("FlowParams: need 0 < x0_clean < x0_c");
    if (!(r < q_capacity()))
      throw std::invalid_argument("FlowParams: need R < Q (capacity drop)");
    if (!std::isfinite(alpha) || !std::isfinite(x0_c) || !std::isfinite(r))
      throw std::invalid_argument("FlowParams: non-finite parameter");
  }
};

inline double flow_function(const FlowParams& p, double x0) {
  if (x0 < 0.0) throw std::domain_error("flow_function: negative queue");
  if (x0 <= p.x0_clean) return x0;
  if (x0 <= p.x0_c) return p.alpha * (x0 - p.x0_clean) + p.x0_clean;
  return p.r;
}

// Checks the mass-conservation requirement eps_max <= (1-alpha)(x0_c-x0_clean),
// which guarantees F(t) <= x0(t) for every noise realization.
inline void validate_noise_for_flow(const FlowParams& p,
                                    const NoiseModel& noise) {
  const double cap = (1.0 - p.alpha) * p.gap();
  if (noise.eps_max() > cap + 1e-12)
    throw std::invalid_argument(
        "NoiseModel: eps_max exceeds (1-alpha)(x0_c-x0_clean)");
}

struct OutflowSample {
  double flow = 0.0;
  bool clamped = false;  // floating-point violation of 0 <= F <= x0
};

// Actual discharge: exact in the clean zone, with noise scaled in on the
// linear branch and applied fully beyond the critical value.
inline OutflowSample sample_outflow(const FlowParams& p,
                                    const NoiseModel& noise, double x0,
                                    RngStream& rng) {
  if (x0 < 0.0) throw std::domain_error("sample_outflow: negative queue");
  const double f = flow_function(p, x0);
  if (x0 <= p.x0_clean) return {f, false};
  const double weight = x0 <= p.x0_c ? (x0 - p.x0_clean) / p.gap() : 1.0;
  double flow = f + weight * noise.sample(rng);
  bool clamped = false;
  if (flow < 0.0) {
    flow = 0.0;
    clamped = true;
  } else if (flow > x0) {
    flow = x0;
    clamped = true;
  }
  return {flow, clamped};
}

// One step of arrivals (non-CAV, CAV platoon).
inline std::pair<double, double> sample_demand(const DemandModel& demand,
                                               RngStream& rng) {
  const double a = demand.a_dist.sample(rng);
  const double b = demand.b_dist.sample(rng);
  return {a, b};
}

}  // namespace prc
