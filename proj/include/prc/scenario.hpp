#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "prc/controller.hpp"
#include "prc/distributions.hpp"
#include "prc/estimator.hpp"
#include "prc/flow.hpp"
#include "prc/translator.hpp"

namespace prc {

enum class ControllerKind { ProbeRelease, NoCoordination };

struct PlantParams {
  FlowParams flow;
  NoiseModel noise;
  DemandModel demand;
};

// A parameter switch applied at a fixed step of a non-stationary run.
struct SchedulePatch {
  long step = 0;
  std::string body;  // JSON object with partial flow/noise/demand overrides
};

struct Scenario {
  std::string name = "scenario";
  PlantParams plant;
  PriorKnowledge prior;
  EstimatorConfig estimator;
  ControllerKind controller = ControllerKind::ProbeRelease;
  long horizon = 10000;
  int replications = 1;
  std::uint64_t seed = 1;
  double x0_initial = 0.0;
  bool warm_pipeline = false;  // preload x1..xs with the mean inflow
  double dt_seconds = 10.0;
  bool evaluation = true;
  std::optional<double> init_alpha;  // fixed initial estimates, else random
  std::optional<double> init_r;
  double init_r_guess = 15.0;
  std::vector<SchedulePatch> patches;
  std::optional<SegmentGeometry> geometry;

  // Throws on any violated model invariant; returns soft warnings for the
  // probing-margin assumptions that depend on ground truth.
  std::vector<std::string> validate() const;
};

Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::string& path);

PlantParams apply_patch(const PlantParams& plant, const std::string& body);

FlowParams flow_from_json(const nlohmann::json& j);
NoiseModel noise_from_json(const nlohmann::json& j);
DemandModel demand_from_json(const nlohmann::json& j);
BoundedDist dist_from_json(const nlohmann::json& j, double default_lo);

}  // namespace prc
