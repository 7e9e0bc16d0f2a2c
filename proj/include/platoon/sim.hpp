#pragma once

// Closed-loop simulation: ground-truth driver models in the loop with the
// online estimator and the receding-horizon controller, plus the sweep
// driver and the CSV/JSON writers the command line tool uses.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "platoon/controller.hpp"
#include "platoon/estimation.hpp"
#include "platoon/feasibility.hpp"
#include "platoon/scenario.hpp"

namespace platoon {

struct RunResult;

// A rear-end contact ends the run; there is no meaningful state to continue
// from. what() carries a short forensic description of the pair involved and
// `forensic` the truncated run recorded up to the impact, so callers can dump
// it for inspection.
class CollisionDetected : public std::runtime_error {
 public:
  CollisionDetected(double t, std::string lead, std::string follow, double gap,
                    const std::string& msg)
      : std::runtime_error(msg), time(t), lead_label(std::move(lead)),
        follow_label(std::move(follow)), gap(gap) {}
  double time;
  std::string lead_label;
  std::string follow_label;
  double gap;  // bumper-to-bumper at detection, negative means overlap
  std::shared_ptr<RunResult> forensic;
};

struct VehicleSample {
  double position = 0.0;
  double speed = 0.0;
  double accel = 0.0;
};

// One simulation step: states and inputs at time t (before integrating), the
// formation residuals, and the controller diagnostics for this step. Slots
// are fixed for the whole run so the CSV keeps one column set even when
// vehicles enter or leave; absent vehicles have empty samples.
struct StepRecord {
  double t = 0.0;
  std::vector<std::optional<VehicleSample>> slots;
  std::vector<std::optional<std::array<double, 3>>> gamma;  // follower slots only
  double extent = 0.0;           // CAV front to last-follower front, net of lengths
  double extent_ref = 0.0;       // desired extent at the followers' measured speeds
  double extent_error = 0.0;     // extent minus extent_ref
  double gap_rss = 0.0;
  double speed_rss = 0.0;
  bool formed = false;           // both residuals inside tolerance at this instant
  int qp_outcome = 0;            // 0 optimal, 1 degraded, 2 fail-safe
  int qp_iterations = 0;
  double qp_kkt = 0.0;
  int qp_active_slacks = 0;
  double solve_ms = 0.0;         // wall time, reported in metrics but kept out of the CSVs
};

struct HdvDraw {
  double alpha = 0.0;
  double beta = 0.0;
  double v_d = 0.0;
  double rho = 0.0;
};

struct RunResult {
  Scenario scenario;
  std::vector<std::string> slot_labels;  // "pv", "cav", "hdv2", ... in column order
  std::vector<StepRecord> steps;
  std::vector<HdvDraw> draws;            // one per follower slot, in slot order
  std::optional<FeasibilityReport> feasibility;  // present when road.length is set
  std::optional<double> formation_time;
  double mean_solve_ms = 0.0;
  double max_solve_ms = 0.0;
  double min_headway = std::numeric_limits<double>::infinity();
  std::string abort_reason;  // empty for a completed run
};

RunResult run(const Scenario& s);

// Earliest time from which both residuals stay inside tolerance through the
// end of the run; empty if the final step is still outside.
std::optional<double> detect_formation_time(const std::vector<StepRecord>& steps,
                                            const PlatoonCriteria& crit);

void write_trajectory_csv(std::ostream& out, const RunResult& r);
void write_estimates_csv(std::ostream& out, const RunResult& r);
void write_meta_json(std::ostream& out, const RunResult& r);

// Parameter sweep over one axis crossed with a seed list. Cells run
// independently (collisions are recorded, not fatal) and in parallel;
// PLATOON_RHC_THREADS caps the worker count.
struct SweepSpec {
  std::string axis;  // "N", "alpha", "beta", "v_d" or "rho"
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
};

struct SweepCell {
  double value = 0.0;
  std::uint64_t seed = 0;
  std::string status;  // "ok", "collision" or "error"
  std::string message;
  std::optional<double> formation_time;
  double mean_solve_ms = 0.0;
};

struct SweepResult {
  SweepSpec spec;
  std::vector<SweepCell> cells;  // ordered by (value, seed), independent of scheduling
};

SweepResult sweep(const Scenario& base, const SweepSpec& spec);
Scenario apply_axis(const Scenario& base, const std::string& axis, double value);
void write_sweep_csv(std::ostream& out, const SweepResult& r);

}  // namespace platoon
