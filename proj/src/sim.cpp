#include "platoon/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <random>
#include <thread>

#include "json.hpp"
#include "platoon/vehicle_set.hpp"

namespace platoon {

namespace {

struct FollowerRuntime {
  int slot = 0;
  VehicleState state;
  OvmParams params;
  double rho_safety = 0.0;
  RlsEstimator est;
  std::optional<Eigen::Vector3d> prev_phi;
};

double profile_speed(const std::vector<PvProfilePoint>& prof, double fallback, double t) {
  if (prof.empty()) return fallback;
  if (t <= prof.front().t) return prof.front().v;
  for (std::size_t i = 1; i < prof.size(); ++i) {
    if (t <= prof[i].t) {
      const double t0 = prof[i - 1].t;
      const double t1 = prof[i].t;
      if (t1 <= t0) return prof[i].v;  // repeated knot acts as a step change
      const double w = (t - t0) / (t1 - t0);
      return prof[i - 1].v + w * (prof[i].v - prof[i - 1].v);
    }
  }
  return prof.back().v;
}

HdvDraw draw_params(std::mt19937_64& rng, const Scenario& s) {
  // Draw order is part of the reproducibility contract: alpha, beta, v_d,
  // rho for each driver, in front-to-back order, insertions afterwards.
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  HdvDraw d;
  d.alpha = s.ovm.alpha * (1.0 + s.perturbation * unit(rng));
  d.beta = s.ovm.beta * (1.0 + s.perturbation * unit(rng));
  d.v_d = s.ovm.v_d * (1.0 + s.perturbation * unit(rng));
  d.rho = s.ovm.rho * (1.0 + s.perturbation * unit(rng));
  return d;
}

RlsEstimator estimator_from(const EstimatorInit& init) {
  RlsEstimator est;
  est.gamma = Eigen::Vector3d(init.gamma0[0], init.gamma0[1], init.gamma0[2]);
  est.P = init.p0 * Eigen::Matrix3d::Identity();
  est.xi = init.forgetting;
  return est;
}

FollowerRuntime make_follower(const Scenario& s, std::mt19937_64& rng, int slot,
                              std::vector<HdvDraw>& draws, int first_follower_slot) {
  FollowerRuntime f;
  f.slot = slot;
  const HdvDraw d = draw_params(rng, s);
  draws[static_cast<std::size_t>(slot - first_follower_slot)] = d;
  f.params = OvmParams{d.alpha, d.beta, d.v_d, d.rho, s.road.s_0};
  f.rho_safety = s.hdv_rho ? *s.hdv_rho : d.rho;
  f.est = estimator_from(s.estimator);
  return f;
}

SafetyParams safety_params(const Scenario& s, const std::vector<FollowerRuntime>& followers) {
  SafetyParams sp;
  sp.s_0 = s.road.s_0;
  sp.rho.reserve(followers.size() + 1);
  sp.rho.push_back(s.cav_rho);
  for (const auto& f : followers) sp.rho.push_back(f.rho_safety);
  return sp;
}

void append_csv_number(std::string& line, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  line += buf;
}

}  // namespace

RunResult run(const Scenario& s) {
  s.validate();
  RunResult out;
  out.scenario = s;
  std::mt19937_64 rng(s.seed);

  const double tau = s.controller.tau;
  const double l_c = s.road.l_c;
  const int n_steps = static_cast<int>(std::llround(s.duration / tau));
  const int n_init_followers = s.n_vehicles - 1;
  int n_insertions = 0;
  for (const auto& ev : s.lane_events) {
    if (ev.kind == "insertion") ++n_insertions;
  }

  if (s.has_pv) out.slot_labels.push_back("pv");
  out.slot_labels.push_back("cav");
  for (int i = 0; i < n_init_followers + n_insertions; ++i) {
    out.slot_labels.push_back("hdv" + std::to_string(2 + i));
  }
  const int n_slots = static_cast<int>(out.slot_labels.size());
  const int first_follower_slot = s.has_pv ? 2 : 1;
  const int n_follower_slots = n_init_followers + n_insertions;
  out.draws.assign(static_cast<std::size_t>(n_follower_slots), HdvDraw{});

  std::vector<FollowerRuntime> followers;
  followers.reserve(static_cast<std::size_t>(n_follower_slots));
  for (int i = 0; i < n_init_followers; ++i) {
    followers.push_back(make_follower(s, rng, first_follower_slot + i, out.draws,
                                      first_follower_slot));
  }
  int next_insert_slot = first_follower_slot + n_init_followers;

  VehicleState cav{0.0, s.initial_speed, 0.0};
  {
    double p = cav.position;
    for (auto& f : followers) {
      p -= l_c + s.headway_factor * safe_gap(s.initial_speed, f.rho_safety, s.road.s_0);
      f.state = VehicleState{p, s.initial_speed, 0.0};
    }
  }
  std::optional<VehicleState> pv;
  if (s.has_pv) {
    const double v0 = profile_speed(s.pv_profile, s.initial_speed, 0.0);
    // The vehicle ahead must start outside the hard safety envelope even
    // when the platoon itself starts packed tighter than its safe gaps.
    const double pv_factor = std::max(s.headway_factor, 1.25);
    pv = VehicleState{l_c + pv_factor * safe_gap(s.initial_speed, s.cav_rho, s.road.s_0), v0, 0.0};
  }

  auto check_collisions = [&](double t) {
    double prev_pos = 0.0;
    std::string prev_label;
    bool have_prev = false;
    auto visit = [&](const std::string& label, const VehicleState& st) {
      if (have_prev) {
        const double gap = prev_pos - st.position - l_c;
        out.min_headway = std::min(out.min_headway, gap);
        if (gap < 0.0) {
          char msg[160];
          std::snprintf(msg, sizeof msg,
                        "collision at t=%.2f s: %s reached %s, bumper gap %.3f m", t,
                        label.c_str(), prev_label.c_str(), gap);
          throw CollisionDetected(t, prev_label, label, gap, msg);
        }
      }
      prev_pos = st.position;
      prev_label = label;
      have_prev = true;
    };
    if (pv) visit("pv", *pv);
    visit("cav", cav);
    for (const auto& f : followers) visit(out.slot_labels[static_cast<std::size_t>(f.slot)], f.state);
  };

  auto apply_event = [&](const ScenarioLaneEvent& ev) {
    VehicleSet set{s.has_pv, 1 + static_cast<int>(followers.size())};
    LaneEvent event;
    event.kind = ev.kind == "departure" ? LaneEvent::Kind::departure : LaneEvent::Kind::insertion;
    event.id = ev.id;
    reindex_after_lane_change(set, event);  // validates the id against the current chain
    if (event.kind == LaneEvent::Kind::departure) {
      followers.erase(followers.begin() + (ev.id - 2));
      return;
    }
    FollowerRuntime nf = make_follower(s, rng, next_insert_slot++, out.draws, first_follower_slot);
    const VehicleState lead = followers[static_cast<std::size_t>(ev.id - 2)].state;
    nf.state.speed = lead.speed;
    const std::size_t idx = static_cast<std::size_t>(ev.id - 1);
    if (idx < followers.size()) {
      // Cutting in between two vehicles: split the available gap evenly. A
      // too-short gap is allowed here; the collision check decides.
      const double available = headway(lead, followers[idx].state, l_c);
      nf.state.position = lead.position - l_c - (available - l_c) / 2.0;
    } else {
      nf.state.position =
          lead.position - l_c - s.headway_factor * safe_gap(lead.speed, nf.rho_safety, s.road.s_0);
    }
    followers.insert(followers.begin() + static_cast<std::ptrdiff_t>(idx), std::move(nf));
  };

  std::size_t next_event = 0;
  while (next_event < s.lane_events.size() && s.lane_events[next_event].t <= 0.0) {
    apply_event(s.lane_events[next_event++]);
  }

  double solve_ms_total = 0.0;
  out.steps.reserve(static_cast<std::size_t>(n_steps));
  auto finalize = [&] {
    if (!out.steps.empty()) {
      out.mean_solve_ms = solve_ms_total / static_cast<double>(out.steps.size());
    }
    out.formation_time = detect_formation_time(out.steps, s.criteria);
  };

  try {
  check_collisions(0.0);

  if (s.road.length) {
    std::vector<VehicleState> states;
    states.push_back(cav);
    for (const auto& f : followers) states.push_back(f.state);
    out.feasibility =
        platoon_feasible(states, safety_params(s, followers), s.road, *s.road.length, l_c);
  }

  for (int k = 0; k < n_steps; ++k) {
    const double t = k * tau;
    const SafetyParams sp = safety_params(s, followers);

    // Identification first: fold in the transition that ended at this step,
    // then stash this step's regressors for the next one.
    for (auto& f : followers) {
      if (f.prev_phi) {
        f.est = rls_update(f.est, Regressor{*f.prev_phi, f.state.speed});
      }
    }
    for (std::size_t i = 0; i < followers.size(); ++i) {
      const VehicleState& lead = (i == 0) ? cav : followers[i - 1].state;
      followers[i].prev_phi = Eigen::Vector3d(
          followers[i].state.speed, headway(lead, followers[i].state, l_c), lead.speed);
    }

    WorldSnapshot snap;
    snap.pv = pv;
    snap.cav = cav;
    snap.l_c = l_c;
    snap.hdvs.reserve(followers.size());
    std::vector<GammaVector> gammas;
    gammas.reserve(followers.size());
    for (const auto& f : followers) {
      snap.hdvs.push_back(f.state);
      gammas.push_back(f.est.gamma_struct());
    }
    ControlDiagnostics diag;
    const double u_cav = control_step(snap, gammas, s.controller, sp, s.road, &diag);

    std::vector<double> u_follow(followers.size(), 0.0);
    for (std::size_t i = 0; i < followers.size(); ++i) {
      const VehicleState& lead = (i == 0) ? cav : followers[i - 1].state;
      const double dp = headway(lead, followers[i].state, l_c);
      u_follow[i] = ovm_accel(dp, approach_rate(lead, followers[i].state),
                              followers[i].state.speed, followers[i].params);
    }

    double u_pv = 0.0;
    if (pv) {
      const double v_cmd = profile_speed(s.pv_profile, s.initial_speed, t + tau);
      u_pv = std::clamp((v_cmd - pv->speed) / tau, s.road.u_min, s.road.u_max);
    }

    StepRecord rec;
    rec.t = t;
    rec.slots.assign(static_cast<std::size_t>(n_slots), std::nullopt);
    rec.gamma.assign(static_cast<std::size_t>(n_follower_slots), std::nullopt);
    if (pv) rec.slots[0] = VehicleSample{pv->position, pv->speed, u_pv};
    rec.slots[static_cast<std::size_t>(first_follower_slot - 1)] =
        VehicleSample{cav.position, cav.speed, u_cav};
    for (std::size_t i = 0; i < followers.size(); ++i) {
      const auto& f = followers[i];
      rec.slots[static_cast<std::size_t>(f.slot)] =
          VehicleSample{f.state.position, f.state.speed, u_follow[i]};
      rec.gamma[static_cast<std::size_t>(f.slot - first_follower_slot)] = {
          f.est.gamma(0), f.est.gamma(1), f.est.gamma(2)};
    }

    std::vector<VehicleState> group;
    group.reserve(followers.size() + 1);
    group.push_back(cav);
    for (const auto& f : followers) group.push_back(f.state);
    const FormationResiduals res = formation_residuals(group, sp, l_c);
    rec.gap_rss = res.gap_rss;
    rec.speed_rss = res.speed_rss;
    rec.formed = res.gap_rss <= s.criteria.eps_dp && res.speed_rss <= s.criteria.eps_v;
    double extent = 0.0;
    double extent_ref = 0.0;
    for (std::size_t i = 0; i < followers.size(); ++i) {
      const VehicleState& lead = (i == 0) ? cav : followers[i - 1].state;
      extent += headway(lead, followers[i].state, l_c);
      extent_ref += safe_gap(followers[i].state.speed,
                             sp.rho_of(static_cast<int>(i) + 2), sp.s_0);
    }
    rec.extent = extent;
    rec.extent_ref = extent_ref;
    rec.extent_error = extent - extent_ref;
    rec.qp_outcome = static_cast<int>(diag.outcome);
    rec.qp_iterations = diag.iterations;
    rec.qp_kkt = diag.kkt_residual;
    rec.qp_active_slacks = diag.active_slacks;
    rec.solve_ms = diag.solve_time_ms;
    out.steps.push_back(std::move(rec));
    solve_ms_total += diag.solve_time_ms;
    out.max_solve_ms = std::max(out.max_solve_ms, diag.solve_time_ms);

    if (pv) *pv = euler_step(*pv, u_pv, tau, s.road);
    cav = euler_step(cav, u_cav, tau, s.road);
    for (std::size_t i = 0; i < followers.size(); ++i) {
      followers[i].state = euler_step(followers[i].state, u_follow[i], tau, s.road);
    }
    check_collisions(t + tau);

    bool applied = false;
    while (next_event < s.lane_events.size() &&
           s.lane_events[next_event].t <= t + tau + 1e-12) {
      apply_event(s.lane_events[next_event++]);
      applied = true;
    }
    if (applied) check_collisions(t + tau);
  }
  } catch (CollisionDetected& e) {
    // Keep everything recorded so far attached to the exception; a crash is
    // exactly when the trace matters most.
    finalize();
    out.abort_reason = e.what();
    e.forensic = std::make_shared<RunResult>(std::move(out));
    throw;
  }

  finalize();
  return out;
}

std::optional<double> detect_formation_time(const std::vector<StepRecord>& steps,
                                            const PlatoonCriteria& crit) {
  std::size_t idx = steps.size();
  while (idx > 0) {
    const StepRecord& rec = steps[idx - 1];
    if (rec.gap_rss <= crit.eps_dp && rec.speed_rss <= crit.eps_v) {
      --idx;
    } else {
      break;
    }
  }
  if (idx == steps.size()) return std::nullopt;  // criteria not met at the end
  return steps[idx].t;
}

void write_trajectory_csv(std::ostream& out, const RunResult& r) {
  std::string line = "t";
  for (const auto& label : r.slot_labels) {
    line += ",p_" + label + ",v_" + label + ",u_" + label;
  }
  line += ",e_1N,e_r,extent_error,gap_rss,speed_rss,formed,qp_outcome,qp_iterations,qp_kkt,"
          "qp_active_slacks\n";
  out << line;
  for (const auto& rec : r.steps) {
    line.clear();
    append_csv_number(line, rec.t);
    for (const auto& sample : rec.slots) {
      if (sample) {
        line += ',';
        append_csv_number(line, sample->position);
        line += ',';
        append_csv_number(line, sample->speed);
        line += ',';
        append_csv_number(line, sample->accel);
      } else {
        line += ",,,";
      }
    }
    line += ',';
    append_csv_number(line, rec.extent);
    line += ',';
    append_csv_number(line, rec.extent_ref);
    line += ',';
    append_csv_number(line, rec.extent_error);
    line += ',';
    append_csv_number(line, rec.gap_rss);
    line += ',';
    append_csv_number(line, rec.speed_rss);
    line += rec.formed ? ",1" : ",0";
    line += ',' + std::to_string(rec.qp_outcome);
    line += ',' + std::to_string(rec.qp_iterations);
    line += ',';
    append_csv_number(line, rec.qp_kkt);
    line += ',' + std::to_string(rec.qp_active_slacks);
    line += '\n';
    out << line;
  }
}

void write_estimates_csv(std::ostream& out, const RunResult& r) {
  const int first_follower_slot = r.scenario.has_pv ? 2 : 1;
  std::string line = "t";
  for (std::size_t i = first_follower_slot; i < r.slot_labels.size(); ++i) {
    const std::string& label = r.slot_labels[i];
    for (const char* field : {"g1", "g2", "g3", "eta", "nu", "rho"}) {
      line += ',';
      line += field;
      line += '_';
      line += label;
    }
  }
  line += '\n';
  out << line;
  for (const auto& rec : r.steps) {
    line.clear();
    append_csv_number(line, rec.t);
    for (const auto& g : rec.gamma) {
      if (!g) {
        line += ",,,,,,";
        continue;
      }
      for (int j = 0; j < 3; ++j) {
        line += ',';
        append_csv_number(line, (*g)[static_cast<std::size_t>(j)]);
      }
      try {
        const CthRvParams p =
            params_from_gamma({(*g)[0], (*g)[1], (*g)[2]}, r.scenario.controller.tau);
        line += ',';
        append_csv_number(line, p.eta);
        line += ',';
        append_csv_number(line, p.nu);
        line += ',';
        append_csv_number(line, p.rho);
      } catch (const DegenerateGamma&) {
        line += ",,,";
      }
    }
    line += '\n';
    out << line;
  }
}

void write_meta_json(std::ostream& out, const RunResult& r) {
  nlohmann::json doc;
  doc["tool"] = "platoon_rhc";
  doc["scenario"] = nlohmann::json::parse(scenario_to_json_text(r.scenario));
  doc["slots"] = r.slot_labels;
  doc["driver_draws"] = nlohmann::json::array();
  for (const auto& d : r.draws) {
    doc["driver_draws"].push_back(
        {{"alpha", d.alpha}, {"beta", d.beta}, {"v_d", d.v_d}, {"rho", d.rho}});
  }
  if (r.feasibility) {
    nlohmann::json f;
    f["t_f_lower"] = r.feasibility->t_f_lower;
    f["t_f_upper"] =
        r.feasibility->t_f_upper ? nlohmann::json(*r.feasibility->t_f_upper) : nlohmann::json();
    f["L_s"] = r.feasibility->L_s;
    f["platoon_feasible"] = r.feasibility->platoon_feasible;
    f["tau_p"] = r.feasibility->tau_p ? nlohmann::json(*r.feasibility->tau_p) : nlohmann::json();
    f["already_formed"] = r.feasibility->already_formed;
    doc["feasibility"] = f;
  } else {
    doc["feasibility"] = nullptr;
  }
  doc["formation_time"] =
      r.formation_time ? nlohmann::json(*r.formation_time) : nlohmann::json();
  doc["metrics"] = {{"steps", r.steps.size()},
                    {"mean_solve_ms", r.mean_solve_ms},
                    {"max_solve_ms", r.max_solve_ms},
                    {"min_headway", std::isfinite(r.min_headway) ? nlohmann::json(r.min_headway)
                                                                 : nlohmann::json()}};
  if (r.abort_reason.empty()) {
    doc["outcome"] = "completed";
  } else {
    doc["outcome"] = "collision";
    doc["abort_reason"] = r.abort_reason;
  }
  out << doc.dump(2) << '\n';
}

Scenario apply_axis(const Scenario& base, const std::string& axis, double value) {
  Scenario s = base;
  if (axis == "N") {
    const double rounded = std::round(value);
    if (std::abs(rounded - value) > 1e-9 || rounded < 2.0) {
      throw ConfigError("sweep over N needs integer values >= 2");
    }
    s.n_vehicles = static_cast<int>(rounded);
  } else if (axis == "alpha") {
    s.ovm.alpha = value;
  } else if (axis == "beta") {
    s.ovm.beta = value;
  } else if (axis == "v_d") {
    s.ovm.v_d = value;
  } else if (axis == "rho") {
    s.ovm.rho = value;
  } else {
    throw ConfigError("unknown sweep axis '" + axis + "' (use N, alpha, beta, v_d or rho)");
  }
  s.validate();
  return s;
}

SweepResult sweep(const Scenario& base, const SweepSpec& spec) {
  if (spec.values.empty() || spec.seeds.empty()) {
    throw ConfigError("sweep needs at least one value and one seed");
  }
  if (spec.axis != "N" && spec.axis != "alpha" && spec.axis != "beta" && spec.axis != "v_d" &&
      spec.axis != "rho") {
    throw ConfigError("unknown sweep axis '" + spec.axis + "' (use N, alpha, beta, v_d or rho)");
  }

  SweepResult result;
  result.spec = spec;
  const std::size_t total = spec.values.size() * spec.seeds.size();
  result.cells.assign(total, SweepCell{});

  unsigned n_threads = std::thread::hardware_concurrency();
  if (n_threads == 0) n_threads = 1;
  if (const char* env = std::getenv("PLATOON_RHC_THREADS")) {
    const long parsed = std::strtol(env, nullptr, 10);
    if (parsed >= 1) n_threads = static_cast<unsigned>(parsed);
  }
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(total));

  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    for (std::size_t i = cursor.fetch_add(1); i < total; i = cursor.fetch_add(1)) {
      const double value = spec.values[i / spec.seeds.size()];
      const std::uint64_t seed = spec.seeds[i % spec.seeds.size()];
      SweepCell cell;
      cell.value = value;
      cell.seed = seed;
      try {
        Scenario s = apply_axis(base, spec.axis, value);
        s.seed = seed;
        const RunResult rr = run(s);
        cell.status = "ok";
        cell.formation_time = rr.formation_time;
        cell.mean_solve_ms = rr.mean_solve_ms;
      } catch (const CollisionDetected& e) {
        cell.status = "collision";
        cell.message = e.what();
      } catch (const std::exception& e) {
        cell.status = "error";
        cell.message = e.what();
      }
      result.cells[i] = std::move(cell);
    }
  };

  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return result;
}

void write_sweep_csv(std::ostream& out, const SweepResult& r) {
  out << "axis,value,seed,status,formation_time,mean_solve_ms\n";
  std::string line;
  for (const auto& cell : r.cells) {
    line.clear();
    line += r.spec.axis;
    line += ',';
    append_csv_number(line, cell.value);
    line += ',' + std::to_string(cell.seed);
    line += ',' + cell.status;
    line += ',';
    if (cell.formation_time) append_csv_number(line, *cell.formation_time);
    line += ',';
    append_csv_number(line, cell.mean_solve_ms);
    line += '\n';
    out << line;
  }
}

}  // namespace platoon
