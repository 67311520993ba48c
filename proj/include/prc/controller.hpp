#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "prc/estimator.hpp"
#include "prc/rng.hpp"
#include "prc/state.hpp"

namespace prc {

// Constants the controller is assumed to know up front: the traverse delay,
// the clean boundary, the bracket for the critical value, and the drain /
// demand margins used to size the round schedule.
struct PriorKnowledge {
  int s = 7;
  double x0_clean = 9.0;
  double x0_min = 13.0;
  double x0_max = 20.0;
  double delta1 = 3.0;
  double delta2 = 3.5;
  double lambda_in = 11.0;  // upper bound on total inflow per step
  double mu1 = -90.0;

  void validate() const;
};

struct Schedule {
  std::array<long, 4> t_clean{};  // per-episode cleaning durations
  long t_release = 0;
  int k = 0;
  long t_round = 0;  // 3k + k*sum(t_clean[0..2]) + t_release + t_clean[3]
};

Schedule compute_schedule(const PriorKnowledge& prior, int k);

struct SteerDecision {
  double b_s = 0.0;
  bool clamped = false;  // demand exceeded the set point
};

inline SteerDecision steer_control(double x0_set, double a) {
  if (x0_set < 0.0) throw std::domain_error("steer_control: negative set point");
  const double b = x0_set - a;
  if (b < 0.0) return {0.0, true};
  return {b, false};
}

// Forward simulation of the bottleneck queue over the pipeline delay using
// the estimated flow curve; predictions are floored at zero.
Eigen::VectorXd predict_queue(const TrafficState& state, const Estimates& est,
                              double x0_clean);

inline double release_control(double x0_set, double x0_pred_s,
                              const Estimates& est, double x0_clean,
                              double a) {
  return x0_set - x0_pred_s + estimated_flow(est, x0_clean, x0_pred_s) - a;
}

inline ControlDecomposition clamp_control(double b_star, double q, double b) {
  const double b_s = std::min(std::max(b_star, 0.0), q + b);
  return ControlDecomposition::from_bs(b_s, q, b);
}

enum class Phase {
  Ep1Steer,
  Ep1Clean,
  Ep2Steer,
  Ep2Clean,
  Ep3Steer,
  Ep3Clean,
  Release,
  Ep4Clean,
};

std::string to_string(Phase p);

struct RoundEvent {
  long round = 0;
  RoundSamples samples;
  bool complete = false;  // all three buffers hold exactly k samples
  long rejected = 0;      // captures discarded this round
};

struct Decision {
  double b_s = 0.0;
  Phase phase = Phase::Ep1Steer;
  long round = 0;
  double x0_set = std::numeric_limits<double>::quiet_NaN();
  ControlDecomposition decomp;
  std::optional<RoundEvent> round_complete;
};

// Diagnostic record of one probe sample.
struct SampleRecord {
  long due_step = 0;
  int episode = 0;
  double x0_set = 0.0;
  double x0_captured = 0.0;
  double f_captured = 0.0;
  bool accepted = false;
};

// The probe-and-release phase machine. One instance drives one simulation;
// call next_action once per step in step order. Sample captures use the
// previous step's realized outflow, which the harness feeds back.
class Controller {
 public:
  Controller(const PriorKnowledge& prior, const EstimatorConfig& cfg);

  Decision next_action(long t, double a, double b, const TrafficState& state,
                       double f_prev, const Estimates& est, RngStream& rng);

  const Schedule& schedule() const { return schedule_; }
  const std::vector<SampleRecord>& sample_log() const { return sample_log_; }
  void clear_sample_log() { sample_log_.clear(); }
  long rejected_total() const { return rejected_total_; }
  long void_rounds() const { return void_rounds_; }
  long steer_clamps() const { return steer_clamps_; }
  long deferred_steers() const { return deferred_steers_; }

 private:
  struct PendingSample {
    long due = 0;
    int episode = 0;  // 1..3
    double x0_set = 0.0;
  };

  void capture_due(long t, double f_prev);
  void enter_phase(Phase p);
  int episode_of(Phase p) const;
  std::pair<double, double> draw_interval(int episode) const;
  void advance_after_clean(int episode);

  PriorKnowledge prior_;
  EstimatorConfig cfg_;
  Schedule schedule_;

  Phase phase_ = Phase::Ep1Steer;
  long remaining_ = 0;     // steps left in the current clean/release phase
  int cycles_done_ = 0;    // completed steer-clean cycles in this episode
  int extra_cycles_ = 0;   // make-up cycles owed after in-episode rejections
  long round_ = 0;
  double held_set_ = -1.0;  // drawn set point waiting for release budget

  std::vector<PendingSample> pending_;
  RoundSamples buffers_;
  long rejected_round_ = 0;
  bool round_void_ = false;

  // Release-phase snapshot: the set point and flow curve are frozen per round.
  Estimates frozen_est_;
  double frozen_x0c_ = 0.0;

  double last_x0_ = 0.0;
  bool have_last_ = false;

  std::vector<SampleRecord> sample_log_;
  long rejected_total_ = 0;
  long void_rounds_ = 0;
  long steer_clamps_ = 0;
  long deferred_steers_ = 0;
};

}  // namespace prc
