#include "prc/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <json.hpp>
#include <stdexcept>

namespace prc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double x) {
  if (std::isnan(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

}  // namespace

RunResult run_scenario(const Scenario& scenario, std::uint64_t replication,
                       const RunOptions& options) {
  scenario.validate();
  RngStream rng = RngStream::derive(scenario.seed, replication);

  PlantParams plant = scenario.plant;
  TrafficState state = TrafficState::zero(scenario.prior.s);
  state.x0() = scenario.x0_initial;
  if (scenario.warm_pipeline) {
    const double inflow = plant.demand.a_mean() + plant.demand.b_mean();
    for (int i = 1; i <= scenario.prior.s; ++i) state.v(i) = inflow;
  }

  Estimates est;
  est.alpha_hat = scenario.init_alpha.value_or(rng.uniform01());
  if (est.alpha_hat <= 0.0) est.alpha_hat = 0.5;
  est.r_hat =
      scenario.init_r.value_or(rng.uniform(0.0, scenario.init_r_guess));

  const bool coordinated = scenario.controller == ControllerKind::ProbeRelease;
  std::optional<Controller> ctrl;
  if (coordinated) ctrl.emplace(scenario.prior, scenario.estimator);

  RunResult out;
  out.summary.replication = replication;
  out.summary.horizon = scenario.horizon;
  out.summary.y_bound =
      error_bound_y(scenario.estimator.lambda, plant.noise.sigma2(),
                    plant.flow.r, plant.flow.alpha, plant.flow.gap());
  out.summary.baseline = check_baseline_conditions(
      plant.flow, plant.noise, plant.demand, scenario.x0_initial);
  out.l1_trajectory.reserve(scenario.horizon);

  auto patch_it = scenario.patches.begin();
  double f_prev = 0.0;
  double sum_l1 = 0.0;
  double sum_f = 0.0;
  double quarter_avg = 0.0;
  const long quarter = std::max(scenario.horizon / 4, 1L);
  double e2 = scenario.evaluation
                  ? normalized_errors(est, plant.flow, plant.noise).norm2_sq()
                  : kNaN;
  long resets = 0;
  long outflow_clamps = 0;
  long bs_clamps = 0;

  for (long t = 0; t < scenario.horizon; ++t) {
    while (patch_it != scenario.patches.end() && patch_it->step == t) {
      plant = apply_patch(plant, patch_it->body);
      ++patch_it;
    }
    if (scenario.estimator.reset_period > 0 && t > 0 &&
        t % scenario.estimator.reset_period == 0) {
      est = reset_max_estimates(est, scenario.estimator);
      ++resets;
    }

    const auto [a, b] = sample_demand(plant.demand, rng);
    Decision dec;
    if (coordinated) {
      dec = ctrl->next_action(t, a, b, state, f_prev, est, rng);
    } else {
      dec.b_s = b;  // platoons are never postponed
      dec.phase = Phase::Ep1Steer;
      dec.x0_set = kNaN;
      dec.round = 0;
    }

    const OutflowSample outflow =
        sample_outflow(plant.flow, plant.noise, state.x0(), rng);
    if (outflow.clamped) ++outflow_clamps;
    const StepResult step = step_dynamics(state, a, b, outflow.flow, dec.b_s);
    if (step.bs_clamped) ++bs_clamps;

    if (dec.round_complete) {
      const RoundEvent& ev = *dec.round_complete;
      if (ev.complete) est = update_round(est, ev.samples, scenario.estimator);
      if (scenario.evaluation)
        e2 = normalized_errors(est, plant.flow, plant.noise).norm2_sq();
      if (options.keep_rounds) {
        out.rounds.push_back({ev.round, t, ev.complete, est.alpha_hat,
                              est.fmax_hat, est.r_hat, est.epsmax_hat, e2});
      }
    }

    if (options.keep_steps) {
      // Rows hold the pre-step state, so (x0, F) pairs lie on the noisy
      // discharge curve.
      MetricsRow row;
      row.t = t;
      row.x0 = state.x0();
      row.l1 = l1_norm(state);
      row.q = state.q();
      row.f = outflow.flow;
      row.a = a;
      row.b = b;
      row.b_s = step.decomp.b_s;
      row.b_qs = step.decomp.b_qs;
      row.b_bq = step.decomp.b_bq;
      row.x0_set = dec.x0_set;
      row.phase = coordinated ? to_string(dec.phase) : "none";
      row.round = dec.round;
      row.alpha_hat = est.alpha_hat;
      row.fmax_hat = est.fmax_hat;
      row.r_hat = est.r_hat;
      row.epsmax_hat = est.epsmax_hat;
      row.e2norm = e2;
      out.steps.push_back(std::move(row));
    }

    state = step.state;
    const double l1 = l1_norm(state);
    out.l1_trajectory.push_back(l1);
    sum_l1 += l1;
    sum_f += outflow.flow;
    if (t + 1 == quarter) quarter_avg = sum_l1 / static_cast<double>(quarter);
    f_prev = outflow.flow;
  }

  RunSummary& s = out.summary;
  s.time_avg_l1 = sum_l1 / static_cast<double>(scenario.horizon);
  s.time_avg_l1_quarter = quarter_avg;
  s.throughput = sum_f / static_cast<double>(scenario.horizon);
  s.delay_proxy_s = sum_f > 0.0 ? scenario.dt_seconds * sum_l1 / sum_f : kNaN;
  s.rounds = static_cast<long>(out.rounds.size());
  if (coordinated) {
    s.void_rounds = ctrl->void_rounds();
    s.rejected_samples = ctrl->rejected_total();
    s.steer_clamps = ctrl->steer_clamps();
  }
  s.outflow_clamps = outflow_clamps;
  s.bs_clamps = bs_clamps;
  s.resets = resets;
  s.final_estimates = est;
  if (!out.rounds.empty() && scenario.evaluation) {
    const std::size_t from = out.rounds.size() / 2;
    double acc = 0.0;
    for (std::size_t i = from; i < out.rounds.size(); ++i)
      acc += out.rounds[i].e2norm;
    s.tail_avg_e2 = acc / static_cast<double>(out.rounds.size() - from);
  } else {
    s.tail_avg_e2 = kNaN;
  }
  return out;
}

namespace {

template <typename Get>
void accumulate(RunSummary& mean, RunSummary& sd,
                const std::vector<RunSummary>& reps, Get get,
                double RunSummary::* field) {
  double m = 0.0;
  for (const auto& r : reps) m += get(r);
  m /= static_cast<double>(reps.size());
  double v = 0.0;
  for (const auto& r : reps) v += (get(r) - m) * (get(r) - m);
  v = reps.size() > 1 ? v / static_cast<double>(reps.size() - 1) : 0.0;
  mean.*field = m;
  sd.*field = std::sqrt(v);
}

}  // namespace

MonteCarloResult aggregate_summaries(std::vector<RunSummary> reps) {
  if (reps.empty())
    throw std::invalid_argument("aggregate_summaries: no replications");
  MonteCarloResult out;
  out.replications = std::move(reps);
  auto stat = [&](double RunSummary::* field) {
    accumulate(out.mean, out.stddev, out.replications,
               [field](const RunSummary& s) { return s.*field; }, field);
  };
  stat(&RunSummary::time_avg_l1);
  stat(&RunSummary::time_avg_l1_quarter);
  stat(&RunSummary::tail_avg_e2);
  stat(&RunSummary::throughput);
  stat(&RunSummary::delay_proxy_s);
  out.mean.horizon = out.replications.front().horizon;
  return out;
}

MonteCarloResult run_monte_carlo(const Scenario& scenario, int n_reps,
                                 const RunOptions& options) {
  if (n_reps < 1)
    throw std::invalid_argument("run_monte_carlo: need at least one run");
  std::vector<RunSummary> reps;
  for (int r = 0; r < n_reps; ++r) {
    RunOptions opt = options;
    opt.keep_steps = false;
    reps.push_back(
        run_scenario(scenario, static_cast<std::uint64_t>(r), opt).summary);
  }
  return aggregate_summaries(std::move(reps));
}

void write_steps_csv(const std::string& path,
                     const std::vector<MetricsRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "t,x0,l1,q,F,A,B,b_s,b_qs,b_Bq,x0_set,phase,round,alpha_hat,Fmax_hat,"
        "R_hat,epsmax_hat,e2norm\n";
  for (const auto& r : rows) {
    os << r.t << ',' << fmt(r.x0) << ',' << fmt(r.l1) << ',' << fmt(r.q) << ','
       << fmt(r.f) << ',' << fmt(r.a) << ',' << fmt(r.b) << ',' << fmt(r.b_s)
       << ',' << fmt(r.b_qs) << ',' << fmt(r.b_bq) << ',' << fmt(r.x0_set)
       << ',' << r.phase << ',' << r.round << ',' << fmt(r.alpha_hat) << ','
       << fmt(r.fmax_hat) << ',' << fmt(r.r_hat) << ',' << fmt(r.epsmax_hat)
       << ',' << fmt(r.e2norm) << '\n';
  }
}

void write_rounds_csv(const std::string& path,
                      const std::vector<RoundRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "n,end_step,updated,alpha_hat,Fmax_hat,R_hat,epsmax_hat,e2norm\n";
  for (const auto& r : rows) {
    os << r.n << ',' << r.end_step << ',' << (r.updated ? 1 : 0) << ','
       << fmt(r.alpha_hat) << ',' << fmt(r.fmax_hat) << ',' << fmt(r.r_hat)
       << ',' << fmt(r.epsmax_hat) << ',' << fmt(r.e2norm) << '\n';
  }
}

void write_summaries_csv(const std::string& path,
                         const std::vector<RunSummary>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "replication,horizon,time_avg_l1,time_avg_l1_quarter,tail_avg_e2,"
        "throughput,delay_proxy_s,rounds,void_rounds,rejected_samples,"
        "outflow_clamps,resets\n";
  for (const auto& s : rows) {
    os << s.replication << ',' << s.horizon << ',' << fmt(s.time_avg_l1) << ','
       << fmt(s.time_avg_l1_quarter) << ',' << fmt(s.tail_avg_e2) << ','
       << fmt(s.throughput) << ',' << fmt(s.delay_proxy_s) << ',' << s.rounds
       << ',' << s.void_rounds << ',' << s.rejected_samples << ','
       << s.outflow_clamps << ',' << s.resets << '\n';
  }
}

namespace {

nlohmann::json summary_json(const RunSummary& s) {
  nlohmann::json j{{"replication", s.replication},
                   {"horizon", s.horizon},
                   {"time_avg_l1", s.time_avg_l1},
                   {"time_avg_l1_quarter", s.time_avg_l1_quarter},
                   {"throughput", s.throughput},
                   {"delay_proxy_s", s.delay_proxy_s},
                   {"rounds", s.rounds},
                   {"void_rounds", s.void_rounds},
                   {"rejected_samples", s.rejected_samples},
                   {"outflow_clamps", s.outflow_clamps},
                   {"bs_clamps", s.bs_clamps},
                   {"steer_clamps", s.steer_clamps},
                   {"resets", s.resets},
                   {"y_bound", s.y_bound},
                   {"baseline",
                    {{"cond_1", s.baseline.cond_1},
                     {"cond_2", s.baseline.cond_2},
                     {"stable", s.baseline.stable},
                     {"inflow_mean", s.baseline.inflow_mean}}},
                   {"final_estimates",
                    {{"alpha_hat", s.final_estimates.alpha_hat},
                     {"Fmax_hat", s.final_estimates.fmax_hat},
                     {"R_hat", s.final_estimates.r_hat},
                     {"epsmax_hat", s.final_estimates.epsmax_hat},
                     {"rounds", s.final_estimates.round}}}};
  if (!std::isnan(s.tail_avg_e2)) j["tail_avg_e2"] = s.tail_avg_e2;
  return j;
}

}  // namespace

std::string summary_to_json(const RunSummary& s) {
  return summary_json(s).dump(2);
}

std::string aggregate_to_json(const MonteCarloResult& r) {
  nlohmann::json reps = nlohmann::json::array();
  for (const auto& s : r.replications) reps.push_back(summary_json(s));
  nlohmann::json j{
      {"replications", reps},
      {"mean",
       {{"time_avg_l1", r.mean.time_avg_l1},
        {"time_avg_l1_quarter", r.mean.time_avg_l1_quarter},
        {"tail_avg_e2", r.mean.tail_avg_e2},
        {"throughput", r.mean.throughput},
        {"delay_proxy_s", r.mean.delay_proxy_s}}},
      {"stddev",
       {{"time_avg_l1", r.stddev.time_avg_l1},
        {"tail_avg_e2", r.stddev.tail_avg_e2},
        {"throughput", r.stddev.throughput}}}};
  return j.dump(2);
}

}  // namespace prc
