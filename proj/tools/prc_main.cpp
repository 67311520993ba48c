#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "prc/harness.hpp"
#include "prc/scenario.hpp"
#include "prc/theory.hpp"
#include "prc/translator.hpp"

namespace {

using nlohmann::json;

int cmd_schedule(const std::string& config_path) {
  const prc::Scenario sc = prc::load_scenario(config_path);
  const prc::Schedule sch =
      prc::compute_schedule(sc.prior, sc.estimator.k);
  std::printf("T_clean,1 = %ld steps\n", sch.t_clean[0]);
  std::printf("T_clean,2 = %ld steps\n", sch.t_clean[1]);
  std::printf("T_clean,3 = %ld steps\n", sch.t_clean[2]);
  std::printf("T_clean,4 = %ld steps\n", sch.t_clean[3]);
  std::printf("T_release = %ld steps\n", sch.t_release);
  std::printf("T_round   = %ld steps\n", sch.t_round);
  return 0;
}

int cmd_simulate(const std::string& config_path, std::uint64_t seed,
                 bool seed_set, int reps, bool reps_set,
                 const std::string& out_dir, bool with_steps) {
  prc::Scenario sc = prc::load_scenario(config_path);
  if (seed_set) sc.seed = seed;
  const int n = reps_set ? reps : sc.replications;
  for (const std::string& w : sc.validate())
    std::fprintf(stderr, "warning: %s\n", w.c_str());

  std::filesystem::create_directories(out_dir);
  std::vector<prc::RunSummary> summaries;
  for (int r = 0; r < n; ++r) {
    prc::RunOptions opt;
    opt.keep_steps = with_steps;
    const prc::RunResult run =
        prc::run_scenario(sc, static_cast<std::uint64_t>(r), opt);
    const std::string prefix = out_dir + "/rep" + std::to_string(r);
    if (with_steps) prc::write_steps_csv(prefix + "_steps.csv", run.steps);
    prc::write_rounds_csv(prefix + "_rounds.csv", run.rounds);
    std::ofstream(prefix + "_summary.json") << prc::summary_to_json(run.summary)
                                            << '\n';
    summaries.push_back(run.summary);
  }
  prc::write_summaries_csv(out_dir + "/summaries.csv", summaries);
  const prc::MonteCarloResult agg =
      prc::aggregate_summaries(std::move(summaries));
  std::ofstream(out_dir + "/aggregate.json")
      << prc::aggregate_to_json(agg) << '\n';
  std::cout << prc::aggregate_to_json(agg) << '\n';
  return 0;
}

json report_to_json(const prc::TheoremReport& rep) {
  return json{{"Y", rep.y},
              {"R_tilde", rep.r_tilde_value},
              {"R_tilde_ci", rep.r_tilde_ci},
              {"cond_i", rep.cond_i},
              {"cond_ii", rep.cond_ii},
              {"cond_iii", rep.cond_iii},
              {"stable", rep.stable},
              {"gamma", rep.gamma_used},
              {"rhs_iii", rep.rhs_iii},
              {"kappa", rep.kappa_value},
              {"beta", rep.beta},
              {"inflow_mean", rep.inflow_mean},
              {"cond_ii_rhs", rep.cond_ii_rhs},
              {"delta2_consistent", rep.delta2_consistent}};
}

int cmd_check(const std::string& config_path, double gamma, long rollouts,
              bool strict, bool json_only) {
  const prc::Scenario sc = prc::load_scenario(config_path);
  const prc::TheoremReport rep = prc::check_theorem_conditions(
      sc.plant.flow, sc.plant.noise, sc.plant.demand, sc.prior,
      sc.estimator.lambda, sc.estimator.k, prc::default_gamma_grid(), rollouts,
      sc.seed, gamma);
  const prc::BaselineReport base = prc::check_baseline_conditions(
      sc.plant.flow, sc.plant.noise, sc.plant.demand, sc.x0_initial);

  if (!json_only) {
    std::printf("error bound Y            : %.6g\n", rep.y);
    std::printf("mean inflow A+B          : %.6g veh/step\n", rep.inflow_mean);
    std::printf("R_tilde (gamma=%.4g)     : %.4f +/- %.4f veh/step\n",
                rep.gamma_used, rep.r_tilde_value, rep.r_tilde_ci);
    std::printf("condition (i)  inflow < R_tilde        : %s\n",
                rep.cond_i ? "satisfied" : "violated");
    std::printf("condition (ii) A_max < min(clean, R-e) : %s (A_max=%.4g, rhs=%.4g)\n",
                rep.cond_ii ? "satisfied" : "violated",
                sc.plant.demand.a_max(), rep.cond_ii_rhs);
    std::printf("condition (iii) sigma2 < rhs           : %s (sigma2=%.4g, rhs=%.4g)\n",
                rep.cond_iii ? "satisfied" : "violated",
                sc.plant.noise.sigma2(), rep.rhs_iii);
    std::printf("kappa(gamma)             : %.6g\n", rep.kappa_value);
    std::printf("beta (diagnostic)        : %.6g\n", rep.beta);
    std::printf("delta2 margin consistent : %s\n",
                rep.delta2_consistent ? "yes" : "no");
    std::printf("theorem stable           : %s\n", rep.stable ? "YES" : "NO");
    if (!rep.stable && gamma <= 0.0)
      std::printf("note: the sweep only admits gamma values whose discharge "
                  "estimate keeps the delta2 margin; --gamma evaluates one "
                  "point without that filter\n");
    std::printf("baseline: cond1=%s cond2=%s stable=%s\n",
                base.cond_1 ? "true" : "false", base.cond_2 ? "true" : "false",
                base.stable ? "YES" : "NO");
  }
  json out = report_to_json(rep);
  out["baseline"] = {{"cond_1", base.cond_1},
                     {"cond_2", base.cond_2},
                     {"stable", base.stable}};
  std::cout << out.dump(2) << '\n';
  if (strict && !rep.stable) return 2;
  return 0;
}

int cmd_theory(const std::string& config_path, double gamma, long rollouts,
               double chi_opt, double psi_opt) {
  const prc::Scenario sc = prc::load_scenario(config_path);
  const auto& f = sc.plant.flow;
  const auto& noise = sc.plant.noise;
  const double fmax = f.q_capacity() + noise.eps_max();
  const double chi = chi_opt >= 0.0 ? chi_opt : std::sqrt(gamma) * fmax;
  const double psi =
      psi_opt >= 0.0 ? psi_opt : std::sqrt(gamma) * noise.eps_max();

  const double y = prc::error_bound_y(sc.estimator.lambda, noise.sigma2(),
                                      f.r, f.alpha, f.gap());
  const double p = prc::p_chi(chi, f, noise, sc.prior, sc.estimator.k);
  const double pp = prc::p_prime(psi, noise, sc.estimator.k);
  const double kap = prc::kappa(gamma, sc.estimator.lambda, sc.estimator.k, f,
                                noise, sc.prior);
  const double rhs = prc::noise_variance_rhs(
      gamma, f, noise, sc.prior, sc.estimator.lambda, sc.estimator.k);
  const prc::WorstCaseStart wc = prc::xi0_and_m(f, noise, sc.prior, gamma);
  const prc::MonteCarloEstimate rt = prc::r_tilde(
      f, sc.plant.demand, noise, sc.prior, gamma, rollouts, sc.seed);

  std::printf("Y           = %.6g\n", y);
  std::printf("p(chi=%.4g) = %.6g\n", chi, p);
  std::printf("p'(psi=%.4g)= %.6g\n", psi, pp);
  std::printf("kappa       = %.6g\n", kap);
  std::printf("rhs(iii)    = %.6g\n", rhs);
  std::printf("M           = %ld steps\n", wc.m);
  std::printf("xi0[x0]     = %.6g veh, pipeline Q=%.6g, q=%.6g\n",
              wc.xi0.x0(), f.q_capacity(), wc.xi0.q());
  std::printf("R_tilde     = %.4f +/- %.4f veh/step (%ld rollouts)\n",
              rt.value, rt.ci_half, rollouts);
  return 0;
}

prc::VirtualPipeline::Vehicle vehicle_from_json(const json& j) {
  prc::VirtualPipeline::Vehicle v;
  v.id = j.at("id").get<long>();
  v.entry_step = j.at("entry_step").get<long>();
  v.ell = j.at("ell").get<int>();
  v.v_hold = j.at("v_hold").get<double>();
  v.scheduled_arrival = j.at("scheduled_arrival").get<long>();
  return v;
}

int cmd_translate(const std::string& input_path, const std::string& state_out) {
  std::ifstream in(input_path);
  if (!in) throw std::runtime_error("cannot open " + input_path);
  json j;
  in >> j;

  const auto& g = j.at("geometry");
  const prc::SegmentGeometry geom = prc::SegmentGeometry::make(
      g.at("L").get<double>(), g.at("v_free").get<double>(),
      g.at("dt").get<double>(), g.value("ell_max", 0));

  prc::Estimates est;
  est.alpha_hat = j.at("estimates").at("alpha_hat").get<double>();
  est.fmax_hat = j.at("estimates").at("Fmax_hat").get<double>();
  est.r_hat = j.at("estimates").at("R_hat").get<double>();
  est.epsmax_hat = j.at("estimates").at("epsmax_hat").get<double>();

  prc::ControlDecomposition dec;
  dec.b_s = j.at("control").at("b_s").get<double>();
  dec.b_qs = j.at("control").at("b_qs").get<double>();
  dec.b_bs = j.at("control").at("b_Bs").get<double>();
  dec.b_bq = j.at("control").at("b_Bq").get<double>();

  prc::VirtualPipeline pipe(geom);
  if (j.contains("pipeline")) {
    const auto& p = j.at("pipeline");
    std::vector<double> occ = p.value("occupancy", std::vector<double>{});
    occ.resize(geom.ell_max, 0.0);
    std::vector<prc::VirtualPipeline::Vehicle> vehicles;
    for (const auto& vj : p.value("vehicles", json::array()))
      vehicles.push_back(vehicle_from_json(vj));
    pipe.restore(std::move(occ), std::move(vehicles),
                 p.value("entry_carry", 0.0), p.value("release_carry", 0.0),
                 p.value("next_id", 0L), p.value("pass_carry", 0.0));
  }

  const long t = j.at("t").get<long>();
  const auto instructions = pipe.apply_step(
      t, dec, est, j.at("A_max").get<double>(),
      j.at("x0_pred_s").get<double>(), j.at("x0_clean").get<double>());
  pipe.advance(t);

  for (const auto& ins : instructions) {
    json line{{"vehicle_id", ins.vehicle_id},
              {"speed_mps", ins.speed_mps},
              {"kind", prc::to_string(ins.kind)}};
    std::cout << line.dump() << '\n';
  }

  if (!state_out.empty()) {
    json vehicles = json::array();
    for (const auto& v : pipe.vehicles())
      vehicles.push_back({{"id", v.id},
                          {"entry_step", v.entry_step},
                          {"ell", v.ell},
                          {"v_hold", v.v_hold},
                          {"scheduled_arrival", v.scheduled_arrival}});
    json state{{"occupancy", pipe.slot_occupancy()},
               {"vehicles", vehicles},
               {"entry_carry", pipe.entry_carry()},
               {"release_carry", pipe.release_carry()},
               {"pass_carry", pipe.pass_carry()},
               {"next_id", pipe.next_id()},
               {"fluid_total", pipe.fluid_total()}};
    std::ofstream(state_out) << state.dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fluid-queue bottleneck simulator and probe-and-release controller"};
  app.require_subcommand(1);

  std::string config;
  std::uint64_t seed = 0;
  int reps = 1;
  std::string out_dir = "out";
  bool with_steps = true;

  auto* sim = app.add_subcommand("simulate", "Run a scenario and write metrics");
  sim->add_option("config", config, "Scenario config (JSON)")->required();
  auto* seed_opt = sim->add_option("--seed", seed, "Master seed override");
  auto* reps_opt = sim->add_option("--reps", reps, "Replication count override");
  sim->add_option("--out-dir", out_dir, "Output directory");
  sim->add_flag("--steps,!--no-steps", with_steps,
                "Write the per-step CSV (default on; --no-steps skips it)");

  double gamma = 0.0;
  long rollouts = 100000;
  bool strict = false;
  bool json_only = false;
  auto* chk = app.add_subcommand("check", "Evaluate the stability conditions");
  chk->add_option("config", config)->required();
  chk->add_option("--gamma", gamma, "Evaluate at a fixed gamma (default: sweep)");
  chk->add_option("--rollouts", rollouts, "Monte Carlo rollouts for R_tilde");
  chk->add_flag("--strict", strict, "Exit 2 when the conditions fail");
  chk->add_flag("--json", json_only, "Print only the JSON report");

  double th_gamma = 0.04;
  double chi = -1.0;
  double psi = -1.0;
  auto* thr = app.add_subcommand("theory", "Evaluate the auxiliary quantities");
  thr->add_option("config", config)->required();
  thr->add_option("--gamma", th_gamma, "Gamma for kappa, xi0, R_tilde");
  thr->add_option("--chi", chi, "Evaluate p at this chi (default sqrt(gamma)F_max)");
  thr->add_option("--psi", psi, "Evaluate p' at this psi (default sqrt(gamma)eps_max)");
  thr->add_option("--rollouts", rollouts);

  auto* sch = app.add_subcommand("schedule", "Print the round schedule");
  sch->add_option("config", config)->required();

  std::string state_out;
  auto* tr = app.add_subcommand("translate", "Turn one step's control into speed instructions");
  tr->add_option("input", config, "Step description (JSON)")->required();
  tr->add_option("--state-out", state_out, "Write the updated pipeline state here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed())
      return cmd_simulate(config, seed, seed_opt->count() > 0, reps,
                          reps_opt->count() > 0, out_dir, with_steps);
    if (chk->parsed()) return cmd_check(config, gamma, rollouts, strict, json_only);
    if (thr->parsed()) return cmd_theory(config, th_gamma, rollouts, chi, psi);
    if (sch->parsed()) return cmd_schedule(config);
    if (tr->parsed()) return cmd_translate(config, state_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
