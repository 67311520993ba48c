#include "prc/controller.hpp"

#include <cmath>
#include <stdexcept>

namespace prc {

namespace {

// Ceiling with a small relative guard so exact integer ratios are not pushed
// up by rounding noise.
long ceil_steps(double x) {
  return static_cast<long>(
      std::ceil(x - 1e-9 * std::max(1.0, std::fabs(x))));
}

constexpr double kPlacementTol = 1e-6;

}  // namespace

void PriorKnowledge::validate() const {
  if (s < 1) throw std::invalid_argument("PriorKnowledge: s must be >= 1");
  if (!(0.0 < x0_clean && x0_clean < x0_min && x0_min < x0_max))
    throw std::invalid_argument(
        "PriorKnowledge: need 0 < x0_clean < x0_min < x0_max");
  if (!(delta1 > 0.0 && delta2 > 0.0 && lambda_in > 0.0))
    throw std::invalid_argument(
        "PriorKnowledge: delta1, delta2, Lambda must be positive");
  if (!(mu1 < lambda_in / (-delta2)))
    throw std::invalid_argument("PriorKnowledge: mu1 must be below -Lambda/delta2");
}

Schedule compute_schedule(const PriorKnowledge& prior, int k) {
  prior.validate();
  if (k < 1) throw std::invalid_argument("compute_schedule: k must be >= 1");
  Schedule sch;
  sch.k = k;
  sch.t_clean[0] = ceil_steps((prior.x0_min - prior.x0_clean) / prior.delta1);
  sch.t_clean[1] = ceil_steps((prior.x0_max - prior.x0_clean) / prior.delta1);
  sch.t_clean[2] =
      ceil_steps((1.5 * prior.x0_max - prior.x0_clean) / prior.delta1);
  sch.t_clean[3] = ceil_steps(
      ((prior.s + 1) * prior.x0_max - prior.x0_clean) / prior.delta1);

  const double denom = prior.lambda_in + prior.mu1 * prior.delta2;
  if (denom >= 0.0)
    throw std::invalid_argument("compute_schedule: mu1 violates mu1 < -Lambda/delta2");
  const double probe_steps =
      3.0 * k + k * (sch.t_clean[0] + sch.t_clean[1] + sch.t_clean[2]) +
      sch.t_clean[3];
  sch.t_release =
      ceil_steps((prior.mu1 - 1.0) * prior.lambda_in * probe_steps / denom);
  sch.t_round = static_cast<long>(probe_steps) + sch.t_release;
  return sch;
}

Eigen::VectorXd predict_queue(const TrafficState& state, const Estimates& est,
                              double x0_clean) {
  const int s = state.s();
  Eigen::VectorXd pred(s);
  double p = state.x0();
  for (int l = 0; l < s; ++l) {
    p = std::max(p + state.xi(l + 1) - estimated_flow(est, x0_clean, p), 0.0);
    pred(l) = p;
  }
  return pred;
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::Ep1Steer: return "ep1-steer";
    case Phase::Ep1Clean: return "ep1-clean";
    case Phase::Ep2Steer: return "ep2-steer";
    case Phase::Ep2Clean: return "ep2-clean";
    case Phase::Ep3Steer: return "ep3-steer";
    case Phase::Ep3Clean: return "ep3-clean";
    case Phase::Release: return "release";
    case Phase::Ep4Clean: return "ep4-clean";
  }
  return "?";
}

Controller::Controller(const PriorKnowledge& prior, const EstimatorConfig& cfg)
    : prior_(prior), cfg_(cfg), schedule_(compute_schedule(prior, cfg.k)) {
  cfg.validate();
}

int Controller::episode_of(Phase p) const {
  switch (p) {
    case Phase::Ep1Steer:
    case Phase::Ep1Clean: return 1;
    case Phase::Ep2Steer:
    case Phase::Ep2Clean: return 2;
    case Phase::Ep3Steer:
    case Phase::Ep3Clean: return 3;
    default: return 0;
  }
}

std::pair<double, double> Controller::draw_interval(int episode) const {
  switch (episode) {
    case 1: return {prior_.x0_clean, prior_.x0_min};
    case 2: return {prior_.x0_min, prior_.x0_max};
    case 3: return {prior_.x0_max, 1.5 * prior_.x0_max};
    default: throw std::logic_error("draw_interval: bad episode");
  }
}

void Controller::enter_phase(Phase p) {
  phase_ = p;
  switch (p) {
    case Phase::Ep1Clean: remaining_ = schedule_.t_clean[0]; break;
    case Phase::Ep2Clean: remaining_ = schedule_.t_clean[1]; break;
    case Phase::Ep3Clean: remaining_ = schedule_.t_clean[2]; break;
    case Phase::Release: remaining_ = schedule_.t_release; break;
    case Phase::Ep4Clean: remaining_ = schedule_.t_clean[3]; break;
    default: remaining_ = 0; break;
  }
}

void Controller::capture_due(long t, double f_prev) {
  if (!have_last_) return;
  for (auto it = pending_.begin(); it != pending_.end();) {
    if (it->due != t - 1) {
      ++it;
      continue;
    }
    const auto [lo, hi] = draw_interval(it->episode);
    const double x0 = last_x0_;
    const double gap_tol = 0.05 * (prior_.x0_min - prior_.x0_clean);
    bool ok = x0 >= lo - kPlacementTol;
    if (it->episode < 3) ok = ok && x0 <= hi + kPlacementTol;
    if (it->episode == 1) ok = ok && x0 - prior_.x0_clean >= gap_tol;

    SampleRecord rec{it->due, it->episode, it->x0_set, x0, f_prev, ok};
    sample_log_.push_back(rec);

    if (ok) {
      switch (it->episode) {
        case 1:
          buffers_.theta_alpha.push_back(
              theta_alpha(x0, f_prev, prior_.x0_clean, gap_tol));
          break;
        case 2: buffers_.theta_fmax.push_back(f_prev); break;
        case 3: buffers_.theta_r.push_back(f_prev); break;
      }
    } else {
      ++rejected_round_;
      ++rejected_total_;
      // A make-up cycle is possible only while the episode is still running;
      // a rejection discovered later voids the round's estimate update.
      if (episode_of(phase_) == it->episode) {
        ++extra_cycles_;
      } else {
        round_void_ = true;
      }
    }
    it = pending_.erase(it);
  }
}

void Controller::advance_after_clean(int episode) {
  const int target = cfg_.k + extra_cycles_;
  if (cycles_done_ < target) {
    switch (episode) {
      case 1: phase_ = Phase::Ep1Steer; break;
      case 2: phase_ = Phase::Ep2Steer; break;
      case 3: phase_ = Phase::Ep3Steer; break;
    }
    return;
  }
  cycles_done_ = 0;
  extra_cycles_ = 0;
  switch (episode) {
    case 1: phase_ = Phase::Ep2Steer; break;
    case 2: phase_ = Phase::Ep3Steer; break;
    case 3: enter_phase(Phase::Release); break;
  }
}

Decision Controller::next_action(long t, double a, double b,
                                 const TrafficState& state, double f_prev,
                                 const Estimates& est, RngStream& rng) {
  capture_due(t, f_prev);

  Decision d;
  d.round = round_;

  switch (phase_) {
    case Phase::Ep1Steer:
    case Phase::Ep2Steer:
    case Phase::Ep3Steer: {
      const int ep = episode_of(phase_);
      if (held_set_ < 0.0) {
        auto [lo, hi] = draw_interval(ep);
        if (ep == 1)
          lo = prior_.x0_clean + 0.05 * (prior_.x0_min - prior_.x0_clean);
        held_set_ = rng.uniform(lo, hi);
      }
      const SteerDecision sd = steer_control(held_set_, a);
      // The packet is only intact if enough platoons are on hand; otherwise
      // wait for the virtual queue to fill (a fresh simulation starts empty).
      if (sd.b_s > state.q() + b + 1e-12) {
        ++deferred_steers_;
        d.b_s = 0.0;
        d.phase = phase_;
        break;
      }
      if (sd.clamped) ++steer_clamps_;
      d.b_s = sd.b_s;
      d.x0_set = held_set_;
      d.phase = phase_;
      pending_.push_back({t + prior_.s + 1, ep, held_set_});
      held_set_ = -1.0;
      ++cycles_done_;
      enter_phase(ep == 1   ? Phase::Ep1Clean
                  : ep == 2 ? Phase::Ep2Clean
                            : Phase::Ep3Clean);
      break;
    }
    case Phase::Ep1Clean:
    case Phase::Ep2Clean:
    case Phase::Ep3Clean: {
      d.b_s = 0.0;
      d.phase = phase_;
      if (--remaining_ == 0) advance_after_clean(episode_of(phase_));
      break;
    }
    case Phase::Release: {
      if (remaining_ == schedule_.t_release) {
        frozen_est_ = est;
        frozen_x0c_ = critical_value(est, prior_.x0_clean);
      }
      const Eigen::VectorXd pred = predict_queue(state, frozen_est_, prior_.x0_clean);
      const double b_star =
          release_control(frozen_x0c_, pred(pred.size() - 1), frozen_est_,
                          prior_.x0_clean, a);
      d.decomp = clamp_control(b_star, state.q(), b);
      d.b_s = d.decomp.b_s;
      d.x0_set = frozen_x0c_;
      d.phase = phase_;
      if (--remaining_ == 0) enter_phase(Phase::Ep4Clean);
      break;
    }
    case Phase::Ep4Clean: {
      d.b_s = 0.0;
      d.phase = phase_;
      if (--remaining_ == 0) {
        RoundEvent ev;
        ev.round = round_;
        ev.samples = std::move(buffers_);
        ev.rejected = rejected_round_;
        const std::size_t k = static_cast<std::size_t>(cfg_.k);
        ev.complete = !round_void_ && ev.samples.theta_alpha.size() == k &&
                      ev.samples.theta_fmax.size() == k &&
                      ev.samples.theta_r.size() == k;
        if (!ev.complete) ++void_rounds_;
        d.round_complete = std::move(ev);
        buffers_ = RoundSamples{};
        pending_.clear();  // in-flight captures belong to the finished round
        rejected_round_ = 0;
        round_void_ = false;
        ++round_;
        phase_ = Phase::Ep1Steer;
        cycles_done_ = 0;
        extra_cycles_ = 0;
      }
      break;
    }
  }

  last_x0_ = state.x0();
  have_last_ = true;
  return d;
}

}  // namespace prc
