#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

namespace prc {

// Traffic state [x0, x1, ..., xs, q]: the bottleneck queue, the delayed
// entrance pipeline, and the virtual queue of postponed platoons.
struct TrafficState {
  Eigen::VectorXd v;  // length s + 2
  long t = 0;

  static TrafficState zero(int s) {
    TrafficState st;
    st.v = Eigen::VectorXd::Zero(s + 2);
    return st;
  }

  int s() const { return static_cast<int>(v.size()) - 2; }
  double x0() const { return v(0); }
  double& x0() { return v(0); }
  double xi(int i) const { return v(i); }  // pipeline slot, 1 <= i <= s
  double q() const { return v(v.size() - 1); }
  double& q() { return v(v.size() - 1); }
};

inline double l1_norm(const TrafficState& st) {
  return st.v.lpNorm<1>();
}

// Split of the release decision b_s into its sources, plus the newly
// postponed platoon share. Vehicles already in the virtual queue go first.
struct ControlDecomposition {
  double b_s = 0.0;   // total moved to pipeline slot s
  double b_qs = 0.0;  // released from the virtual queue
  double b_bs = 0.0;  // new arrivals passed straight through
  double b_bq = 0.0;  // new arrivals postponed

  static ControlDecomposition from_bs(double b_s, double q, double b) {
    ControlDecomposition d;
    d.b_s = b_s;
    d.b_bs = std::max(b_s - q, 0.0);
    d.b_qs = b_s - d.b_bs;
    d.b_bq = b - d.b_bs;
    return d;
  }
};

struct StepResult {
  TrafficState state;
  ControlDecomposition decomp;
  bool bs_clamped = false;  // b_s exceeded q + B and was reduced
};

// One step of the delayed fluid queue. The caller supplies the realized
// outflow F and the control b_s; b_s is clamped into [0, q + B] and the
// clamping recorded.
inline StepResult step_dynamics(const TrafficState& st, double a, double b,
                                double f, double b_s) {
  const int s = st.s();
  if (f > st.x0() + st.xi(1) + 1e-9)
    throw std::runtime_error("step_dynamics: outflow exceeds available queue");
  StepResult r;
  const double budget = st.q() + b;
  double bs = std::clamp(b_s, 0.0, budget);
  r.bs_clamped = bs != b_s;
  r.decomp = ControlDecomposition::from_bs(bs, st.q(), b);

  r.state.v = Eigen::VectorXd::Zero(s + 2);
  r.state.v(0) = std::max(st.x0() + st.xi(1) - f, 0.0);
  for (int i = 1; i < s; ++i) r.state.v(i) = st.v(i + 1);
  r.state.v(s) = a + bs;
  r.state.v(s + 1) = st.q() - r.decomp.b_qs + r.decomp.b_bq;
  r.state.t = st.t + 1;
  return r;
}

struct TimeAverage {
  double mean = 0.0;
  std::vector<double> prefix;  // prefix[i] = average of the first i+1 values
};

inline TimeAverage time_average_l1(std::span<const double> l1_values) {
  if (l1_values.empty())
    throw std::invalid_argument("time_average_l1: empty trajectory");
  TimeAverage out;
  out.prefix.reserve(l1_values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < l1_values.size(); ++i) {
    sum += l1_values[i];
    out.prefix.push_back(sum / static_cast<double>(i + 1));
  }
  out.mean = out.prefix.back();
  return out;
}

}  // namespace prc
