#include "prc/translator.hpp"

#include <algorithm>

#include "prc/state.hpp"

namespace prc {

SlotAllocation allocate_postponed(double b_bq,
                                  const std::vector<double>& slot_occupancy,
                                  const Estimates& est,
                                  const SegmentGeometry& geom, double a_max,
                                  double epsmax_hat, double x0_pred_s,
                                  double b_s_t, double x0_clean) {
  if (b_bq < 0.0)
    throw std::domain_error("allocate_postponed: negative postponed volume");
  SlotAllocation out;
  out.per_slot.assign(geom.ell_max, 0.0);
  if (b_bq == 0.0) return out;

  const double x0c_hat = critical_value(est, x0_clean);
  const auto occ = [&](int ell) {
    return ell - 1 < static_cast<int>(slot_occupancy.size())
               ? slot_occupancy[ell - 1]
               : 0.0;
  };

  double remaining = b_bq;
  double pred = x0_pred_s;
  for (int ell = 1; ell <= geom.ell_max && remaining > 0.0; ++ell) {
    const double inflow = ell == 1 ? b_s_t : occ(ell);
    pred = std::max(
        pred + a_max + epsmax_hat + inflow - estimated_flow(est, x0_clean, pred),
        0.0);
    const double spare =
        x0c_hat - pred + estimated_flow(est, x0_clean, pred) - a_max - epsmax_hat;
    const double take = std::min(remaining, std::max(spare, 0.0));
    out.per_slot[ell - 1] = take;
    remaining -= take;
  }
  if (remaining > 0.0) {
    out.per_slot.back() += remaining;
    out.overflowed = true;
  }
  return out;
}

VirtualPipeline::VirtualPipeline(const SegmentGeometry& geom) : geom_(geom) {
  occupancy_.assign(geom.ell_max, 0.0);
}

void VirtualPipeline::restore(std::vector<double> occupancy,
                              std::vector<Vehicle> vehicles,
                              double entry_carry, double release_carry,
                              long next_id, double pass_carry) {
  if (static_cast<int>(occupancy.size()) != geom_.ell_max)
    throw std::invalid_argument("VirtualPipeline: occupancy size mismatch");
  occupancy_ = std::move(occupancy);
  held_ = std::move(vehicles);
  entry_carry_ = entry_carry;
  release_carry_ = release_carry;
  pass_carry_ = pass_carry;
  next_id_ = next_id;
}

double VirtualPipeline::fluid_total() const {
  double total = 0.0;
  for (double v : occupancy_) total += v;
  return total;
}

std::vector<Instruction> VirtualPipeline::apply_step(
    long t, const ControlDecomposition& dec, const Estimates& est,
    double a_max, double x0_pred_s, double x0_clean) {
  std::vector<Instruction> out;

  // Pass-through platoon share: one free-flow instruction per whole vehicle,
  // fractions carried forward.
  pass_carry_ += dec.b_bs;
  while (pass_carry_ >= 1.0) {
    pass_carry_ -= 1.0;
    out.push_back({next_id_++, geom_.v_free, InstructionKind::Free});
  }

  // Releases accelerate the earliest-scheduled held vehicles.
  release_carry_ += dec.b_qs;
  long releases = static_cast<long>(std::floor(release_carry_));
  release_carry_ -= static_cast<double>(releases);
  std::sort(held_.begin(), held_.end(),
            [](const Vehicle& a, const Vehicle& b) {
              return a.scheduled_arrival != b.scheduled_arrival
                         ? a.scheduled_arrival < b.scheduled_arrival
                         : a.id < b.id;
            });
  while (releases > 0 && !held_.empty()) {
    const Vehicle v = held_.front();
    held_.erase(held_.begin());
    // A stalled vehicle stops crawling once it reaches the head slot, so its
    // effective hold time is capped at the ell it was assigned.
    const long held_steps = std::min(t - v.entry_step, static_cast<long>(v.ell));
    out.push_back(
        {v.id, modified_speed(geom_, 0, held_steps, v.v_hold),
         InstructionKind::Modify});
    --releases;
  }

  // Fluid bookkeeping: releases drain slots from the front.
  double to_drain = dec.b_qs;
  for (double& slot : occupancy_) {
    const double d = std::min(slot, to_drain);
    slot -= d;
    to_drain -= d;
    if (to_drain <= 0.0) break;
  }

  // Newly postponed vehicles join slots per the allocation recursion.
  if (dec.b_bq > 0.0) {
    const SlotAllocation alloc =
        allocate_postponed(dec.b_bq, occupancy_, est, geom_, a_max,
                           est.epsmax_hat, x0_pred_s, dec.b_s, x0_clean);
    overflow_seen_ = overflow_seen_ || alloc.overflowed;
    for (int ell = 1; ell <= geom_.ell_max; ++ell) {
      const double amount = alloc.per_slot[ell - 1];
      if (amount <= 0.0) continue;
      occupancy_[ell - 1] += amount;
      entry_carry_ += amount;
      while (entry_carry_ >= 1.0) {
        entry_carry_ -= 1.0;
        Vehicle v;
        v.id = next_id_++;
        v.entry_step = t;
        v.ell = ell;
        v.v_hold = hold_speed(geom_, ell);
        v.scheduled_arrival = t + geom_.s + ell;
        held_.push_back(v);
        out.push_back({v.id, v.v_hold, InstructionKind::Hold});
      }
    }
  }
  return out;
}

void VirtualPipeline::advance(long t) {
  // Slot index is the arrival offset, so everything slides one slot closer
  // each step. Unreleased vehicles in the head slot cannot pass the queue
  // ahead of them and stall there until released.
  if (occupancy_.size() > 1) {
    const double stalled = occupancy_[0];
    if (stalled > 1e-12) ++stalled_events_;
    for (std::size_t i = 0; i + 1 < occupancy_.size(); ++i)
      occupancy_[i] = occupancy_[i + 1];
    occupancy_.back() = 0.0;
    occupancy_[0] += stalled;
  }
  for (Vehicle& v : held_) {
    const long min_arrival = t + 1 + geom_.s + 1;
    if (v.scheduled_arrival < min_arrival) v.scheduled_arrival = min_arrival;
  }
}

}  // namespace prc
