#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "prc/estimator.hpp"
#include "prc/state.hpp"

namespace prc {

// Physical layout of the controlled segment. The free-flow traverse must be
// a whole number of steps.
struct SegmentGeometry {
  double length_m = 1680.0;
  double v_free = 24.0;    // m/s
  double dt = 10.0;        // seconds per step
  int s = 7;               // derived: length / (v_free * dt)
  int ell_max = 70;        // instruction-table cap, default 10 * s

  static SegmentGeometry make(double length_m, double v_free, double dt,
                              int ell_max = 0) {
    SegmentGeometry g;
    g.length_m = length_m;
    g.v_free = v_free;
    g.dt = dt;
    if (!(length_m > 0.0 && v_free > 0.0 && dt > 0.0))
      throw std::invalid_argument("SegmentGeometry: non-positive dimension");
    const double steps = length_m / (v_free * dt);
    g.s = static_cast<int>(std::lround(steps));
    if (std::fabs(g.s * dt * v_free - length_m) > 1e-9 * length_m)
      throw std::invalid_argument(
          "SegmentGeometry: traverse time is not a whole number of steps");
    g.ell_max = ell_max > 0 ? ell_max : 10 * g.s;
    return g;
  }
};

// Speed held by a postponed platoon so it reaches the bottleneck s + ell
// steps after entry.
inline double hold_speed(const SegmentGeometry& geom, int ell) {
  if (ell < 1) throw std::domain_error("hold_speed: ell must be >= 1");
  if (ell > geom.ell_max)
    throw std::domain_error("hold_speed: ell exceeds the instruction cap");
  return geom.length_m / ((geom.s + ell) * geom.dt);
}

// Speed that lets a released vehicle cover its remaining distance in exactly
// s steps.
inline double modified_speed(const SegmentGeometry& geom, long t0, long t,
                             double v_hold) {
  if (t < t0) throw std::domain_error("modified_speed: t before entry step");
  const double remaining = geom.length_m - geom.dt * (t - t0) * v_hold;
  if (!(remaining > 0.0))
    throw std::domain_error("modified_speed: no distance left to schedule");
  return remaining / (geom.s * geom.dt);
}

struct SlotAllocation {
  std::vector<double> per_slot;  // index ell-1 -> vehicles assigned
  bool overflowed = false;       // remainder pushed into the last slot
};

// Slot assignment for newly postponed vehicles: extend the queue prediction
// beyond the pipeline horizon under worst-case inflow and fill slots in
// increasing ell up to each slot's spare capacity.
SlotAllocation allocate_postponed(double b_bq,
                                  const std::vector<double>& slot_occupancy,
                                  const Estimates& est,
                                  const SegmentGeometry& geom, double a_max,
                                  double epsmax_hat, double x0_pred_s,
                                  double b_s_t, double x0_clean);

enum class InstructionKind { Free, Hold, Modify };

inline std::string to_string(InstructionKind k) {
  switch (k) {
    case InstructionKind::Free: return "free";
    case InstructionKind::Hold: return "hold";
    case InstructionKind::Modify: return "modify";
  }
  return "?";
}

struct Instruction {
  long vehicle_id = 0;
  double speed_mps = 0.0;
  InstructionKind kind = InstructionKind::Free;
};

// Vehicle-level mirror of the fluid virtual queue. Fluid decisions arrive as
// (b_qs, b_Bs, b_Bq) each step; whole vehicles are created by flooring with a
// carried remainder so the occupancy tracks q(t) exactly.
class VirtualPipeline {
 public:
  explicit VirtualPipeline(const SegmentGeometry& geom);

  // Applies one step's control split and returns the emitted instructions.
  std::vector<Instruction> apply_step(long t, const ControlDecomposition& dec,
                                      const Estimates& est, double a_max,
                                      double x0_pred_s, double x0_clean);

  void advance(long t);  // age schedules after the step's instructions

  double fluid_total() const;
  const std::vector<double>& slot_occupancy() const { return occupancy_; }
  long stalled_events() const { return stalled_events_; }
  bool overflow_seen() const { return overflow_seen_; }

  struct Vehicle {
    long id = 0;
    long entry_step = 0;
    int ell = 0;
    double v_hold = 0.0;
    long scheduled_arrival = 0;
  };
  const std::vector<Vehicle>& vehicles() const { return held_; }

  double entry_carry() const { return entry_carry_; }
  double release_carry() const { return release_carry_; }
  double pass_carry() const { return pass_carry_; }
  long next_id() const { return next_id_; }

  // Reload a previously serialized pipeline (stateless CLI usage).
  void restore(std::vector<double> occupancy, std::vector<Vehicle> vehicles,
               double entry_carry, double release_carry, long next_id,
               double pass_carry = 0.0);

 private:
  SegmentGeometry geom_;
  std::vector<double> occupancy_;  // fluid vehicles per slot, index ell-1
  std::vector<Vehicle> held_;      // discrete vehicles, FIFO by schedule
  double entry_carry_ = 0.0;       // fractional vehicles not yet materialized
  double release_carry_ = 0.0;
  double pass_carry_ = 0.0;
  long next_id_ = 0;
  long stalled_events_ = 0;
  bool overflow_seen_ = false;
};

}  // namespace prc
