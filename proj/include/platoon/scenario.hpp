#pragma once

// Run configuration: named presets, strict JSON loading (unknown keys are
// rejected so typos fail loudly), and dotted-path overrides for quick
// parameter studies from the command line.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "platoon/controller.hpp"
#include "platoon/hdv_models.hpp"
#include "platoon/types.hpp"

namespace platoon {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Commanded speed of the vehicle ahead, piecewise linear between points;
// held constant before the first and after the last point.
struct PvProfilePoint {
  double t = 0.0;
  double v = 0.0;
};

struct ScenarioLaneEvent {
  double t = 0.0;
  std::string kind;  // "departure" or "insertion"
  int id = 0;        // departing follower, or the vehicle the newcomer slots behind
};

struct EstimatorInit {
  std::array<double, 3> gamma0 = {0.67, 0.10, 0.18};
  double p0 = 0.01;        // initial covariance scale, P(0) = p0 * I
  double forgetting = 1.0;
};

struct Scenario {
  std::string name = "custom";
  int n_vehicles = 5;  // CAV plus followers
  bool has_pv = false;
  double duration = 40.0;  // [s]
  std::uint64_t seed = 1;

  RoadLimits road;
  OvmParams ovm;              // nominal driver parameters
  double perturbation = 0.3;  // relative half-width of the per-driver parameter draws

  double initial_speed = 20.0;
  double headway_factor = 1.5;  // initial gaps as a multiple of the safe gap

  double cav_rho = 1.5;
  // Safe time headway assumed for the followers. Empty: use each driver's own
  // (perturbed) headway, which the estimator can recover online. A number
  // forces one uniform value for all followers.
  std::optional<double> hdv_rho;

  ControllerConfig controller;
  PlatoonCriteria criteria;
  EstimatorInit estimator;

  std::vector<PvProfilePoint> pv_profile;
  std::vector<ScenarioLaneEvent> lane_events;

  void validate() const;
};

std::vector<std::string> preset_names();
Scenario preset(const std::string& name);

Scenario scenario_from_json_text(const std::string& text);
Scenario load_scenario_file(const std::string& path);
std::string scenario_to_json_text(const Scenario& s);  // full round-trip echo

// Applies key=value pairs like "controller.horizon=30" or
// "safety.hdv_rho=1.5" on top of a scenario, with the same validation as a
// freshly loaded file.
Scenario apply_overrides(const Scenario& s,
                         const std::vector<std::pair<std::string, std::string>>& overrides);

}  // namespace platoon
