#include "prc/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace prc {

using nlohmann::json;

BoundedDist dist_from_json(const json& j, double default_lo) {
  const DistKind kind = dist_kind_from_string(j.value("kind", "uniform"));
  const double lo = j.value("lo", default_lo);
  const double hi = j.at("hi").get<double>();
  if (kind == DistKind::Uniform) return BoundedDist::uniform(lo, hi);
  return BoundedDist::truncated_gaussian(lo, hi, j.at("mu0").get<double>(),
                                         j.at("sigma0").get<double>());
}

FlowParams flow_from_json(const json& j) {
  const double alpha = j.at("alpha").get<double>();
  const double x0_clean = j.at("x0_clean").get<double>();
  const double r = j.at("R").get<double>();
  if (j.contains("Q"))
    return FlowParams::from_peak(alpha, x0_clean, j.at("Q").get<double>(), r);
  return FlowParams::from_critical(alpha, x0_clean,
                                   j.at("x0_c").get<double>(), r);
}

NoiseModel noise_from_json(const json& j) {
  const DistKind kind = dist_kind_from_string(j.value("kind", "uniform"));
  const double eps_max = j.at("eps_max").get<double>();
  if (kind == DistKind::Uniform) return NoiseModel::uniform(eps_max);
  return NoiseModel::truncated_gaussian(eps_max, j.at("sigma0").get<double>());
}

DemandModel demand_from_json(const json& j) {
  return DemandModel(dist_from_json(j.at("A"), 0.0),
                     dist_from_json(j.at("B"), 0.0));
}

namespace {

PriorKnowledge prior_from_json(const json& j) {
  PriorKnowledge p;
  p.s = j.at("s").get<int>();
  p.x0_clean = j.at("x0_clean").get<double>();
  p.x0_min = j.at("x0_min").get<double>();
  p.x0_max = j.at("x0_max").get<double>();
  p.delta1 = j.at("delta1").get<double>();
  p.delta2 = j.at("delta2").get<double>();
  p.lambda_in = j.at("Lambda").get<double>();
  p.mu1 = j.at("mu1").get<double>();
  return p;
}

EstimatorConfig estimator_from_json(const json& j) {
  EstimatorConfig cfg;
  cfg.lambda = j.value("lambda", 0.08);
  cfg.k = j.value("k", 3);
  cfg.reset_period = j.value("reset_period", 0L);
  cfg.reset_fmax = j.value("reset_fmax", 0.0);
  cfg.reset_epsmax = j.value("reset_epsmax", 0.0);
  return cfg;
}

}  // namespace

Scenario scenario_from_json(const json& j) {
  Scenario sc;
  sc.plant = PlantParams{flow_from_json(j.at("flow")),
                         noise_from_json(j.at("noise")),
                         demand_from_json(j.at("demand"))};
  sc.prior = prior_from_json(j.at("prior"));
  sc.estimator = estimator_from_json(j.value("estimator", json::object()));
  sc.name = j.value("name", "scenario");
  const std::string kind = j.value("controller", "probe-release");
  if (kind == "probe-release")
    sc.controller = ControllerKind::ProbeRelease;
  else if (kind == "no-coordination")
    sc.controller = ControllerKind::NoCoordination;
  else
    throw std::invalid_argument("unknown controller kind: " + kind);
  sc.horizon = j.value("horizon", 10000L);
  sc.replications = j.value("replications", 1);
  sc.seed = j.value("seed", 1ULL);
  sc.x0_initial = j.value("x0_initial", 0.0);
  sc.warm_pipeline = j.value("warm_pipeline", false);
  sc.dt_seconds = j.value("dt_seconds", 10.0);
  sc.evaluation = j.value("evaluation", true);
  if (j.contains("init_alpha")) sc.init_alpha = j.at("init_alpha").get<double>();
  if (j.contains("init_R")) sc.init_r = j.at("init_R").get<double>();
  sc.init_r_guess = j.value("init_R_guess", 15.0);
  if (j.contains("schedule_patches")) {
    for (const auto& p : j.at("schedule_patches")) {
      SchedulePatch patch;
      patch.step = p.at("step").get<long>();
      json body = p;
      body.erase("step");
      patch.body = body.dump();
      sc.patches.push_back(std::move(patch));
    }
    std::sort(sc.patches.begin(), sc.patches.end(),
              [](const SchedulePatch& a, const SchedulePatch& b) {
                return a.step < b.step;
              });
  }
  if (j.contains("geometry")) {
    const auto& g = j.at("geometry");
    sc.geometry = SegmentGeometry::make(
        g.at("L").get<double>(), g.at("v_free").get<double>(),
        g.at("dt").get<double>(), g.value("ell_max", 0));
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json j;
  in >> j;
  return scenario_from_json(j);
}

std::vector<std::string> Scenario::validate() const {
  plant.flow.validate();
  prior.validate();
  estimator.validate();
  validate_noise_for_flow(plant.flow, plant.noise);
  if (horizon < 1) throw std::invalid_argument("Scenario: horizon must be >= 1");
  if (replications < 1)
    throw std::invalid_argument("Scenario: replications must be >= 1");
  if (x0_initial < 0.0)
    throw std::invalid_argument("Scenario: negative initial queue");

  if (controller == ControllerKind::ProbeRelease &&
      estimator.reset_period > 0) {
    const Schedule sch = compute_schedule(prior, estimator.k);
    if (estimator.reset_period < sch.t_round)
      throw std::invalid_argument(
          "Scenario: reset_period shorter than one round");
  }

  std::vector<std::string> warnings;
  const double d1_cap =
      std::min(prior.x0_clean, plant.flow.r - plant.noise.eps_max()) -
      plant.demand.a_max();
  if (prior.delta1 > d1_cap) {
    std::ostringstream os;
    os << "delta1=" << prior.delta1 << " exceeds the drain margin " << d1_cap;
    warnings.push_back(os.str());
  }
  if (prior.lambda_in < plant.demand.a_max() + plant.demand.b_max()) {
    std::ostringstream os;
    os << "Lambda=" << prior.lambda_in << " is below the peak inflow "
       << plant.demand.a_max() + plant.demand.b_max();
    warnings.push_back(os.str());
  }
  return warnings;
}

PlantParams apply_patch(const PlantParams& plant, const std::string& body) {
  const json patch = json::parse(body);
  PlantParams next = plant;
  if (patch.contains("flow")) {
    const auto& f = patch.at("flow");
    json merged = {{"alpha", plant.flow.alpha},
                   {"x0_clean", plant.flow.x0_clean},
                   {"R", plant.flow.r}};
    if (f.contains("Q") || f.contains("x0_c")) {
      // take the patched break point as given
    } else {
      merged["x0_c"] = plant.flow.x0_c;
    }
    merged.update(f);
    next.flow = flow_from_json(merged);
  }
  if (patch.contains("noise")) {
    json merged = {{"kind", to_string(plant.noise.kind())},
                   {"eps_max", plant.noise.eps_max()}};
    if (plant.noise.kind() == DistKind::TruncatedGaussian)
      merged["sigma0"] = plant.noise.dist().sigma0();
    merged.update(patch.at("noise"));
    next.noise = noise_from_json(merged);
  }
  if (patch.contains("demand")) {
    const auto dist_json = [](const BoundedDist& d) {
      json out = {{"kind", to_string(d.kind())}, {"lo", d.lo()}, {"hi", d.hi()}};
      if (d.kind() == DistKind::TruncatedGaussian) {
        out["mu0"] = d.mu0();
        out["sigma0"] = d.sigma0();
      }
      return out;
    };
    json merged = {{"A", dist_json(plant.demand.a_dist)},
                   {"B", dist_json(plant.demand.b_dist)}};
    merged.merge_patch(patch.at("demand"));
    next.demand = demand_from_json(merged);
  }
  validate_noise_for_flow(next.flow, next.noise);
  return next;
}

}  // namespace prc
