// Acceptance harness: one check per shipped guarantee, each printing a
// single PASS/FAIL line with the measured numbers. Run with no arguments for
// the whole suite or with --criterion N for a single check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "prc/harness.hpp"
#include "prc/theory.hpp"

using namespace prc;

namespace {

std::string g_config_dir = "configs";
int g_failures = 0;

double now_s() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

void report(int criterion, bool pass, const std::string& details,
            double elapsed) {
  std::printf("criterion %d: %s  %s  [%.1fs]\n", criterion,
              pass ? "PASS" : "FAIL", details.c_str(), elapsed);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

Scenario load(const std::string& name) {
  return load_scenario(g_config_dir + "/" + name);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double fit_slope(const std::vector<double>& y) {
  const double n = static_cast<double>(y.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sx += i;
    sy += y[i];
    sxx += static_cast<double>(i) * i;
    sxy += i * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double prefix_mean(const std::vector<double>& v, double frac) {
  const std::size_t n =
      std::max<std::size_t>(1, static_cast<std::size_t>(frac * v.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += v[i];
  return s / static_cast<double>(n);
}

// --- criterion 1: round schedule constants -------------------------------

void criterion_1() {
  const double t0 = now_s();
  const Scenario sc = load("stationary.json");
  const Schedule sch = compute_schedule(sc.prior, sc.estimator.k);
  const bool clean_ok = sch.t_clean[0] == 2 && sch.t_clean[1] == 4 &&
                        sch.t_clean[2] == 7 && sch.t_clean[3] == 51;
  const bool rel_ok = sch.t_release == 326 || sch.t_release == 327;
  std::ostringstream os;
  os << "T_clean=(" << sch.t_clean[0] << "," << sch.t_clean[1] << ","
     << sch.t_clean[2] << "," << sch.t_clean[3]
     << ") T_release=" << sch.t_release;
  report(1, clean_ok && rel_ok, os.str(), now_s() - t0);
}

// --- criterion 2: derived critical value ----------------------------------

void criterion_2() {
  const double t0 = now_s();
  Estimates est;
  est.alpha_hat = 0.67;
  est.fmax_hat = 16.0;
  est.r_hat = 10.4;
  est.epsmax_hat = 2.0;
  const double x0c = critical_value(est, 9.0);
  std::ostringstream os;
  os << "x0c_hat=" << x0c << " (target 16.7 +/- 0.4)";
  report(2, std::fabs(x0c - 16.7) <= 0.4, os.str(), now_s() - t0);
}

// --- criterion 3: stability-condition witnesses ---------------------------

void criterion_3() {
  const double t0 = now_s();
  const Scenario sc = load("stationary.json");
  const TheoremReport rep = check_theorem_conditions(
      sc.plant.flow, sc.plant.noise, sc.plant.demand, sc.prior,
      sc.estimator.lambda, sc.estimator.k, default_gamma_grid(), 100000,
      sc.seed, 0.04);
  const bool inflow_ok =
      std::fabs(rep.inflow_mean - 7.2) < 1e-9 && rep.cond_i;
  const bool rt_ok = std::fabs(rep.r_tilde_value - 10.77) <= 0.3;
  const bool amax_ok =
      sc.plant.demand.a_max() == 5.4 && rep.cond_ii_rhs == 8.5 && rep.cond_ii;
  const bool rhs_ok = std::fabs(rep.rhs_iii - 1.21) <= 0.05 && rep.cond_iii;
  std::ostringstream os;
  os << "inflow=" << rep.inflow_mean << "<R_tilde=" << rep.r_tilde_value
     << "+/-" << rep.r_tilde_ci << " A_max=5.4<" << rep.cond_ii_rhs
     << " rhs(0.04)=" << rep.rhs_iii << " (sigma2=" << sc.plant.noise.sigma2()
     << ")";
  report(3, inflow_ok && rt_ok && amax_ok && rhs_ok, os.str(), now_s() - t0);
}

// --- criterion 4: estimation convergence ----------------------------------
// Expected to FAIL under continuous bounded noise: the EWMA components meet
// the bound Y exactly (it is tight for them) while the running-max
// estimators keep small residuals for hundreds of rounds. See the README's
// "known failing check" note for the full account.

void criterion_4() {
  const double t0 = now_s();
  Scenario sc = load("stationary.json");
  sc.horizon = 90000;  // ~211 rounds
  const int seeds = 5;

  std::vector<std::vector<double>> e2(seeds);
  for (int r = 0; r < seeds; ++r) {
    const RunResult run = run_scenario(sc, static_cast<std::uint64_t>(r));
    for (const RoundRow& row : run.rounds) e2[r].push_back(row.e2norm);
  }

  // Clause 1: the seed-median of the per-round error norm dips to 0.01
  // within the first 15 rounds.
  double best_median = std::numeric_limits<double>::infinity();
  int best_round = -1;
  for (int n = 0; n < 15; ++n) {
    std::vector<double> at;
    for (int r = 0; r < seeds; ++r)
      if (n < static_cast<int>(e2[r].size())) at.push_back(e2[r][n]);
    const double m = median(at);
    if (m < best_median) {
      best_median = m;
      best_round = n + 1;
    }
  }
  const bool clause1 = best_median <= 0.01;

  // Clause 2: tail average over rounds 50..200 stays below the bound Y.
  const double y = error_bound_y(sc.estimator.lambda, sc.plant.noise.sigma2(),
                                 sc.plant.flow.r, sc.plant.flow.alpha,
                                 sc.plant.flow.gap());
  double acc = 0.0;
  long cnt = 0;
  for (int r = 0; r < seeds; ++r)
    for (int n = 49; n < 200 && n < static_cast<int>(e2[r].size()); ++n) {
      acc += e2[r][n];
      ++cnt;
    }
  const double tail = acc / static_cast<double>(cnt);
  const bool clause2 = tail <= y;

  std::ostringstream os;
  os << "median|e|^2@round<=15: " << best_median << " (round " << best_round
     << ", need <=0.01); tail(50..200)=" << tail << " vs Y=" << y;
  report(4, clause1 && clause2, os.str(), now_s() - t0);
}

// --- criterion 5: stationary error-bound law -------------------------------

void criterion_5() {
  const double t0 = now_s();
  Scenario sc = load("stationary.json");
  const FlowParams truth = sc.plant.flow;
  const double sigma2 = sc.plant.noise.sigma2();
  const double gap = truth.gap();
  const int seeds = 5;
  const long rounds_target = 2500;
  const int burn_in = 150;

  bool all_ok = true;
  double prev_bound_r = 0.0, prev_bound_a = 0.0;
  bool monotone = true;
  std::ostringstream os;
  for (double lambda : {0.02, 0.05, 0.08}) {
    sc.estimator.lambda = lambda;
    sc.horizon = rounds_target * 430;
    double acc_r = 0.0, acc_a = 0.0;
    long cnt = 0;
    for (int r = 0; r < seeds; ++r) {
      const RunResult run = run_scenario(sc, static_cast<std::uint64_t>(r));
      for (std::size_t n = burn_in; n < run.rounds.size(); ++n) {
        const double e_r = (run.rounds[n].r_hat - truth.r) / truth.r;
        const double e_a =
            (run.rounds[n].alpha_hat - truth.alpha) / truth.alpha;
        acc_r += e_r * e_r;
        acc_a += e_a * e_a;
        ++cnt;
      }
    }
    const double measured_r = acc_r / cnt;
    const double measured_a = acc_a / cnt;
    const double bound_r = lambda * sigma2 / ((2.0 - lambda) * truth.r * truth.r);
    const double bound_a = lambda * sigma2 /
                           ((2.0 - lambda) * truth.alpha * truth.alpha * gap * gap);
    monotone = monotone && bound_r > prev_bound_r && bound_a > prev_bound_a;
    prev_bound_r = bound_r;
    prev_bound_a = bound_a;
    const bool ok = measured_r <= 1.1 * bound_r && measured_a <= 1.1 * bound_a;
    all_ok = all_ok && ok;
    os << "lambda=" << lambda << ": eR2 " << measured_r << "/" << bound_r
       << " eA2 " << measured_a << "/" << bound_a << "; ";
  }
  os << (monotone ? "bounds monotone in lambda" : "bounds NOT monotone");
  report(5, all_ok && monotone, os.str(), now_s() - t0);
}

// --- criterion 6: stabilization above the breakdown capacity ---------------

void criterion_6() {
  const double t0 = now_s();
  const Scenario base = load("high_demand_baseline.json");
  const RunResult baseline = run_scenario(base, 0);
  const double slope = fit_slope(baseline.l1_trajectory);
  const bool slope_ok = slope >= 0.05 && slope <= 0.15;

  const Scenario ctrl = load("high_demand_probe_release.json");
  const RunResult controlled = run_scenario(ctrl, 0);
  const double quarter = prefix_mean(controlled.l1_trajectory, 0.25);
  const double final_avg = prefix_mean(controlled.l1_trajectory, 1.0);
  const bool bounded_ok = final_avg <= 2.0 * quarter;

  std::ostringstream os;
  os << "baseline slope=" << slope << " (0.1 +/- 50%); controlled prefix avg "
     << final_avg << " vs 2x quarter " << 2.0 * quarter;
  report(6, slope_ok && bounded_ok, os.str(), now_s() - t0);
}

// --- criterion 7: property suites ------------------------------------------

bool prop_mass_conservation(std::string& msg) {
  const Scenario sc = load("stationary.json");
  const FlowParams p = sc.plant.flow;
  RngStream rng(321);
  TrafficState st = TrafficState::zero(sc.prior.s);
  st.x0() = 17.0;
  double inflow = 0.0, outflow = 0.0;
  const double initial = l1_norm(st);
  for (int t = 0; t < 5000; ++t) {
    const auto [a, b] = sample_demand(sc.plant.demand, rng);
    const double b_s = rng.uniform(0.0, st.q() + b);
    const double f = sample_outflow(p, sc.plant.noise, st.x0(), rng).flow;
    st = step_dynamics(st, a, b, f, b_s).state;
    inflow += a + b;
    outflow += f;
    if (std::fabs(initial + inflow - outflow - l1_norm(st)) > 1e-9 * (t + 1)) {
      msg = "mass conservation broke at step " + std::to_string(t);
      return false;
    }
  }
  return true;
}

bool prop_ewma_identity(std::string& msg) {
  for (double lambda = 0.01; lambda <= 1.0; lambda += 0.03) {
    for (int k = 1; k <= 8; ++k) {
      double total = std::pow(1.0 - lambda, k);
      for (int j = 1; j <= k; ++j)
        total += lambda * std::pow(1.0 - lambda, k - j);
      if (std::fabs(total - 1.0) > 1e-12) {
        msg = "EWMA weights broke at lambda=" + std::to_string(lambda);
        return false;
      }
    }
  }
  return true;
}

bool prop_clean_and_placement(std::string& msg) {
  const Scenario sc = load("stationary.json");
  long rounds_seen = 0;
  for (std::uint64_t seed : {501u, 502u, 503u}) {
    Controller ctrl(sc.prior, sc.estimator);
    RngStream rng(seed);
    TrafficState state = TrafficState::zero(sc.prior.s);
    Estimates est;
    est.alpha_hat = 0.5;
    est.r_hat = 8.0;
    std::vector<double> x0_hist;
    std::vector<long> round_ends;
    double f_prev = 0.0;
    const long horizon = 40 * ctrl.schedule().t_round + 20;
    for (long t = 0; t < horizon; ++t) {
      x0_hist.push_back(state.x0());
      const auto [a, b] = sample_demand(sc.plant.demand, rng);
      const Decision dec = ctrl.next_action(t, a, b, state, f_prev, est, rng);
      const double f =
          sample_outflow(sc.plant.flow, sc.plant.noise, state.x0(), rng).flow;
      state = step_dynamics(state, a, b, f, dec.b_s).state;
      if (dec.round_complete && dec.round_complete->complete) {
        est = update_round(est, dec.round_complete->samples, sc.estimator);
        round_ends.push_back(t);
      }
      f_prev = f;
    }
    rounds_seen += static_cast<long>(round_ends.size());
    if (ctrl.rejected_total() != 0) {
      msg = "a probe sample was rejected (seed " + std::to_string(seed) + ")";
      return false;
    }
    const double lo[] = {sc.prior.x0_clean, sc.prior.x0_min, sc.prior.x0_max};
    for (const SampleRecord& s : ctrl.sample_log()) {
      if (std::fabs(s.x0_captured - s.x0_set) > 1e-9 ||
          s.x0_captured < lo[s.episode - 1] - 1e-9 ||
          x0_hist[s.due_step - 1] > sc.prior.x0_clean + 1e-9) {
        msg = "placement/clean guarantee broke at step " +
              std::to_string(s.due_step);
        return false;
      }
    }
    for (long end : round_ends)
      if (end + 1 < static_cast<long>(x0_hist.size()) &&
          x0_hist[end + 1] > sc.prior.x0_clean + 1e-9) {
        msg = "queue not clean at a round boundary";
        return false;
      }
  }
  if (rounds_seen < 100) {
    msg = "only " + std::to_string(rounds_seen) + " rounds exercised";
    return false;
  }
  return true;
}

bool prop_quadrature_oracle(std::string& msg) {
  const Scenario sc = load("stationary.json");
  const FlowParams& f = sc.plant.flow;
  const NoiseModel& noise = sc.plant.noise;
  const long n = 1000000;
  const int k = sc.estimator.k;
  int idx = 0;
  for (double chi : {1.5, 3.2}) {
    RngStream rng(777 + idx++);
    const double shift = noise.eps_max() - 0.75 * chi;
    long hits = 0;
    for (long i = 0; i < n; ++i) {
      const double x0 = rng.uniform(sc.prior.x0_min, sc.prior.x0_max);
      const double eps = noise.sample(rng);
      const double lower = x0 <= f.x0_c ? shift + f.alpha * (f.x0_c - x0)
                                        : shift + f.q_capacity() - f.r;
      if (eps >= lower) ++hits;
    }
    const double phat = static_cast<double>(hits) / n;
    const double se = std::sqrt(phat * (1.0 - phat) / n);
    const double mc = 1.0 - std::pow(1.0 - phat, k);
    const double tol = 3.0 * k * std::pow(1.0 - phat, k - 1) * se;
    const double quad = p_chi(chi, f, noise, sc.prior, k);
    if (std::fabs(quad - mc) > std::max(tol, 1e-6)) {
      msg = "p(chi) quadrature off by " + std::to_string(quad - mc);
      return false;
    }
  }
  for (double psi : {0.4, 1.0}) {
    RngStream rng(877 + idx++);
    const double edge = noise.eps_max() - 0.5 * psi;
    long hits = 0;
    for (long i = 0; i < n; ++i) {
      const double eps = noise.sample(rng);
      if (eps >= edge || eps <= -edge) ++hits;
    }
    const double phat = static_cast<double>(hits) / n;
    const double se = std::sqrt(phat * (1.0 - phat) / n);
    const double mc = 1.0 - std::pow(1.0 - phat, k);
    const double tol = 3.0 * k * std::pow(1.0 - phat, k - 1) * se;
    const double quad = p_prime(psi, noise, k);
    if (std::fabs(quad - mc) > std::max(tol, 1e-6)) {
      msg = "p'(psi) quadrature off by " + std::to_string(quad - mc);
      return false;
    }
  }
  return true;
}

bool prop_fmax_monotone(std::string& msg) {
  const Scenario sc = load("stationary.json");
  EstimatorConfig cfg = sc.estimator;
  RngStream rng(911);
  Estimates est;
  est.alpha_hat = 0.3;
  est.r_hat = 6.0;
  double prev_f = 0.0, prev_e = 0.0;
  for (int n = 0; n < 800; ++n) {
    if (n % 200 == 199) {
      est = reset_max_estimates(est, cfg);
      prev_f = est.fmax_hat;
      prev_e = est.epsmax_hat;
    }
    RoundSamples s;
    for (int j = 0; j < cfg.k; ++j) {
      const double xa = rng.uniform(9.2, 13.0);
      s.theta_alpha.push_back(theta_alpha(
          xa, sample_outflow(sc.plant.flow, sc.plant.noise, xa, rng).flow, 9.0,
          0.2));
      const double xf = rng.uniform(13.0, 20.0);
      s.theta_fmax.push_back(
          sample_outflow(sc.plant.flow, sc.plant.noise, xf, rng).flow);
      const double xr = rng.uniform(20.0, 30.0);
      s.theta_r.push_back(
          sample_outflow(sc.plant.flow, sc.plant.noise, xr, rng).flow);
    }
    est = update_round(est, s, cfg);
    if (est.fmax_hat < prev_f || est.epsmax_hat < prev_e) {
      msg = "max estimate decreased between resets";
      return false;
    }
    prev_f = est.fmax_hat;
    prev_e = est.epsmax_hat;
  }
  return true;
}

bool prop_byte_identical(std::string& msg) {
  Scenario sc = load("stationary.json");
  sc.horizon = 3000;
  RunOptions opt;
  opt.keep_steps = true;
  const auto dir = std::filesystem::temp_directory_path() / "prc_acceptance";
  std::filesystem::create_directories(dir);
  std::string blobs[2];
  for (int pass = 0; pass < 2; ++pass) {
    const RunResult run = run_scenario(sc, 2, opt);
    const std::string path =
        (dir / ("steps" + std::to_string(pass) + ".csv")).string();
    write_steps_csv(path, run.steps);
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    blobs[pass] = os.str();
  }
  if (blobs[0] != blobs[1] || blobs[0].empty()) {
    msg = "rerun produced different bytes";
    return false;
  }
  return true;
}

void criterion_7() {
  const double t0 = now_s();
  struct Prop {
    const char* name;
    bool (*fn)(std::string&);
  };
  const Prop props[] = {
      {"mass-conservation", prop_mass_conservation},
      {"ewma-identity", prop_ewma_identity},
      {"clean-and-placement", prop_clean_and_placement},
      {"quadrature-oracle", prop_quadrature_oracle},
      {"fmax-monotone", prop_fmax_monotone},
      {"byte-identical", prop_byte_identical},
  };
  bool all = true;
  std::ostringstream os;
  for (const Prop& p : props) {
    std::string msg;
    const bool ok = p.fn(msg);
    all = all && ok;
    os << p.name << (ok ? " ok; " : " FAILED (" + msg + "); ");
  }
  report(7, all, os.str(), now_s() - t0);
}

// --- criterion 8: re-convergence after a capacity shift ---------------------

void criterion_8() {
  const double t0 = now_s();
  const Scenario sc = load("nonstationary.json");
  const RunResult run = run_scenario(sc, 0);

  const long reset_step = sc.estimator.reset_period;
  // New ground truth after the capacity patch.
  PlantParams patched = sc.plant;
  for (const SchedulePatch& p : sc.patches) patched = apply_patch(patched, p.body);
  const double x0c_new = patched.flow.x0_c;

  int post = 0;
  double last_x0c = 0.0;
  bool within = false;
  for (const RoundRow& row : run.rounds) {
    if (row.end_step < reset_step) continue;
    ++post;
    Estimates est;
    est.alpha_hat = row.alpha_hat;
    est.fmax_hat = row.fmax_hat;
    est.r_hat = row.r_hat;
    est.epsmax_hat = row.epsmax_hat;
    last_x0c = critical_value(est, sc.prior.x0_clean);
    if (post <= 10 && std::fabs(last_x0c - x0c_new) <= 0.1 * x0c_new)
      within = true;
    if (post == 10) break;
  }
  std::ostringstream os;
  os << "post-reset rounds=" << post << " x0c_hat@10=" << last_x0c
     << " target=" << x0c_new << " +/- " << 0.1 * x0c_new
     << " (SUMO travel times and PPO comparisons are out of scope)";
  report(8, within && post >= 10 &&
             std::fabs(last_x0c - x0c_new) <= 0.1 * x0c_new,
         os.str(), now_s() - t0);
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc)
      only = std::atoi(argv[++i]);
    else if (std::strcmp(argv[i], "--config-dir") == 0 && i + 1 < argc)
      g_config_dir = argv[++i];
  }

  void (*criteria[])() = {criterion_1, criterion_2, criterion_3, criterion_4,
                          criterion_5, criterion_6, criterion_7, criterion_8};
  if (only >= 1 && only <= 8) {
    criteria[only - 1]();
  } else {
    for (auto* fn : criteria) fn();
  }
  return g_failures == 0 ? 0 : 1;
}
