#include "platoon/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace platoon {

using nlohmann::json;

void Scenario::validate() const {
  if (n_vehicles < 2) throw ConfigError("scenario: need the CAV plus at least one follower");
  if (!(duration >= 0.0) || !std::isfinite(duration)) {
    throw ConfigError("scenario: duration must be finite and nonnegative");
  }
  try {
    road.validate();
    controller.validate();
    criteria.validate();
    ovm.validate(road);
    // The per-driver draws scale each parameter by up to 1 +/- perturbation;
    // both extremes must stay legal or some seeds would fail mid-run.
    if (!(perturbation >= 0.0 && perturbation < 1.0)) {
      throw std::invalid_argument("perturbation must lie in [0, 1)");
    }
    OvmParams lo{ovm.alpha * (1.0 - perturbation), ovm.beta * (1.0 - perturbation),
                 ovm.v_d * (1.0 - perturbation), ovm.rho * (1.0 - perturbation), ovm.s_0};
    OvmParams hi{ovm.alpha * (1.0 + perturbation), ovm.beta * (1.0 + perturbation),
                 ovm.v_d * (1.0 + perturbation), ovm.rho * (1.0 + perturbation), ovm.s_0};
    lo.validate(road);
    hi.validate(road);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  if (!(initial_speed >= road.v_min && initial_speed <= road.v_max)) {
    throw ConfigError("scenario: initial_speed outside the speed limits");
  }
  if (road.length && !(initial_speed > 0.0)) {
    throw ConfigError("scenario: feasibility screening over road.length needs initial_speed > 0");
  }
  if (!(headway_factor >= 1.0)) {
    throw ConfigError("scenario: headway_factor below 1 starts the chain inside its safe gaps");
  }
  if (!(cav_rho > 0.0) || (hdv_rho && !(*hdv_rho > 0.0))) {
    throw ConfigError("scenario: time headways must be positive");
  }
  if (!(estimator.p0 > 0.0)) throw ConfigError("scenario: estimator.p0 must be positive");
  if (!(estimator.forgetting > 0.0 && estimator.forgetting <= 1.0)) {
    throw ConfigError("scenario: estimator.forgetting must lie in (0, 1]");
  }
  for (std::size_t i = 0; i < pv_profile.size(); ++i) {
    if (!has_pv) throw ConfigError("scenario: pv_profile given but has_pv is false");
    if (i > 0 && pv_profile[i].t < pv_profile[i - 1].t) {
      throw ConfigError("scenario: pv_profile times must be nondecreasing");
    }
    if (!(pv_profile[i].v >= road.v_min && pv_profile[i].v <= road.v_max)) {
      throw ConfigError("scenario: pv_profile speed outside the speed limits");
    }
  }
  for (std::size_t i = 0; i < lane_events.size(); ++i) {
    const auto& ev = lane_events[i];
    if (ev.kind != "departure" && ev.kind != "insertion") {
      throw ConfigError("scenario: lane event kind must be departure or insertion");
    }
    if (!(ev.t >= 0.0)) throw ConfigError("scenario: lane event time must be nonnegative");
    if (i > 0 && ev.t < lane_events[i - 1].t) {
      throw ConfigError("scenario: lane events must be ordered by time");
    }
    if (ev.id < 2) {
      throw ConfigError("scenario: lane events only involve followers (id >= 2)");
    }
  }
}

namespace {

void require_keys(const json& obj, const char* where,
                  std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
          return item.key() == k;
        }) == allowed.end()) {
      throw ConfigError(std::string("unknown key '") + item.key() + "' in " + where);
    }
  }
}

double number_at(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
  return v.get<double>();
}

Scenario from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("scenario document must be a JSON object");
  require_keys(doc, "scenario",
               {"name", "n_vehicles", "has_pv", "duration", "seed", "road", "ovm",
                "perturbation", "initial", "safety", "controller", "criteria", "estimator",
                "pv_profile", "lane_events"});
  Scenario s;
  if (doc.contains("name")) {
    if (!doc.at("name").is_string()) throw ConfigError("'name' must be a string");
    s.name = doc.at("name").get<std::string>();
  }
  if (doc.contains("n_vehicles")) {
    if (!doc.at("n_vehicles").is_number_integer()) {
      throw ConfigError("'n_vehicles' must be an integer");
    }
    s.n_vehicles = doc.at("n_vehicles").get<int>();
  }
  if (doc.contains("has_pv")) {
    if (!doc.at("has_pv").is_boolean()) throw ConfigError("'has_pv' must be a boolean");
    s.has_pv = doc.at("has_pv").get<bool>();
  }
  s.duration = number_at(doc, "duration", s.duration);
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned() && !doc.at("seed").is_number_integer()) {
      throw ConfigError("'seed' must be a nonnegative integer");
    }
    const auto seed = doc.at("seed").get<std::int64_t>();
    if (seed < 0) throw ConfigError("'seed' must be a nonnegative integer");
    s.seed = static_cast<std::uint64_t>(seed);
  }
  if (doc.contains("road")) {
    const json& r = doc.at("road");
    require_keys(r, "road", {"v_min", "v_max", "u_min", "u_max", "length", "l_c", "s_0"});
    s.road.v_min = number_at(r, "v_min", s.road.v_min);
    s.road.v_max = number_at(r, "v_max", s.road.v_max);
    s.road.u_min = number_at(r, "u_min", s.road.u_min);
    s.road.u_max = number_at(r, "u_max", s.road.u_max);
    if (r.contains("length") && !r.at("length").is_null()) {
      s.road.length = number_at(r, "length", 0.0);
    }
    s.road.l_c = number_at(r, "l_c", s.road.l_c);
    s.road.s_0 = number_at(r, "s_0", s.road.s_0);
  }
  if (doc.contains("ovm")) {
    const json& o = doc.at("ovm");
    require_keys(o, "ovm", {"alpha", "beta", "v_d", "rho"});
    s.ovm.alpha = number_at(o, "alpha", s.ovm.alpha);
    s.ovm.beta = number_at(o, "beta", s.ovm.beta);
    s.ovm.v_d = number_at(o, "v_d", s.ovm.v_d);
    s.ovm.rho = number_at(o, "rho", s.ovm.rho);
  }
  s.ovm.s_0 = s.road.s_0;  // one standstill distance everywhere
  s.perturbation = number_at(doc, "perturbation", s.perturbation);
  if (doc.contains("initial")) {
    const json& ini = doc.at("initial");
    require_keys(ini, "initial", {"speed", "headway_factor"});
    s.initial_speed = number_at(ini, "speed", s.initial_speed);
    s.headway_factor = number_at(ini, "headway_factor", s.headway_factor);
  }
  if (doc.contains("safety")) {
    const json& sa = doc.at("safety");
    require_keys(sa, "safety", {"cav_rho", "hdv_rho"});
    s.cav_rho = number_at(sa, "cav_rho", s.cav_rho);
    if (sa.contains("hdv_rho")) {
      const json& hr = sa.at("hdv_rho");
      if (hr.is_string()) {
        if (hr.get<std::string>() != "ovm") {
          throw ConfigError("'safety.hdv_rho' must be a number or the string \"ovm\"");
        }
        s.hdv_rho.reset();
      } else if (hr.is_number()) {
        s.hdv_rho = hr.get<double>();
      } else {
        throw ConfigError("'safety.hdv_rho' must be a number or the string \"ovm\"");
      }
    }
  }
  if (doc.contains("controller")) {
    const json& c = doc.at("controller");
    require_keys(c, "controller", {"horizon", "tau", "tracking_weight", "effort_weight",
                                   "slack_penalty", "constraint_headway"});
    if (c.contains("horizon")) {
      if (!c.at("horizon").is_number_integer()) {
        throw ConfigError("'controller.horizon' must be an integer");
      }
      s.controller.horizon = c.at("horizon").get<int>();
    }
    s.controller.tau = number_at(c, "tau", s.controller.tau);
    s.controller.tracking_weight = number_at(c, "tracking_weight", s.controller.tracking_weight);
    s.controller.effort_weight = number_at(c, "effort_weight", s.controller.effort_weight);
    s.controller.slack_penalty = number_at(c, "slack_penalty", s.controller.slack_penalty);
    s.controller.constraint_headway =
        number_at(c, "constraint_headway", s.controller.constraint_headway);
  }
  if (doc.contains("criteria")) {
    const json& cr = doc.at("criteria");
    require_keys(cr, "criteria", {"eps_dp", "eps_v"});
    s.criteria.eps_dp = number_at(cr, "eps_dp", s.criteria.eps_dp);
    s.criteria.eps_v = number_at(cr, "eps_v", s.criteria.eps_v);
  }
  if (doc.contains("estimator")) {
    const json& e = doc.at("estimator");
    require_keys(e, "estimator", {"gamma0", "p0", "forgetting"});
    if (e.contains("gamma0")) {
      const json& g = e.at("gamma0");
      if (!g.is_array() || g.size() != 3) {
        throw ConfigError("'estimator.gamma0' must be an array of 3 numbers");
      }
      for (int i = 0; i < 3; ++i) {
        if (!g[i].is_number()) throw ConfigError("'estimator.gamma0' must be numeric");
        s.estimator.gamma0[i] = g[i].get<double>();
      }
    }
    s.estimator.p0 = number_at(e, "p0", s.estimator.p0);
    s.estimator.forgetting = number_at(e, "forgetting", s.estimator.forgetting);
  }
  if (doc.contains("pv_profile")) {
    const json& prof = doc.at("pv_profile");
    if (!prof.is_array()) throw ConfigError("'pv_profile' must be an array of [t, v] pairs");
    for (const json& pt : prof) {
      if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number()) {
        throw ConfigError("'pv_profile' entries must be [t, v] number pairs");
      }
      s.pv_profile.push_back({pt[0].get<double>(), pt[1].get<double>()});
    }
  }
  if (doc.contains("lane_events")) {
    const json& evs = doc.at("lane_events");
    if (!evs.is_array()) throw ConfigError("'lane_events' must be an array");
    for (const json& ev : evs) {
      if (!ev.is_object()) throw ConfigError("lane event must be an object");
      require_keys(ev, "lane_events[]", {"t", "kind", "id"});
      if (!ev.contains("t") || !ev.contains("kind") || !ev.contains("id")) {
        throw ConfigError("lane event needs t, kind and id");
      }
      if (!ev.at("kind").is_string() || !ev.at("id").is_number_integer()) {
        throw ConfigError("lane event kind must be a string and id an integer");
      }
      s.lane_events.push_back({number_at(ev, "t", 0.0), ev.at("kind").get<std::string>(),
                               ev.at("id").get<int>()});
    }
  }
  s.validate();
  return s;
}

json to_json(const Scenario& s) {
  json doc;
  doc["name"] = s.name;
  doc["n_vehicles"] = s.n_vehicles;
  doc["has_pv"] = s.has_pv;
  doc["duration"] = s.duration;
  doc["seed"] = s.seed;
  doc["road"] = {{"v_min", s.road.v_min}, {"v_max", s.road.v_max}, {"u_min", s.road.u_min},
                 {"u_max", s.road.u_max}, {"l_c", s.road.l_c},     {"s_0", s.road.s_0}};
  if (s.road.length) doc["road"]["length"] = *s.road.length;
  doc["ovm"] = {{"alpha", s.ovm.alpha}, {"beta", s.ovm.beta}, {"v_d", s.ovm.v_d},
                {"rho", s.ovm.rho}};
  doc["perturbation"] = s.perturbation;
  doc["initial"] = {{"speed", s.initial_speed}, {"headway_factor", s.headway_factor}};
  doc["safety"] = {{"cav_rho", s.cav_rho}};
  if (s.hdv_rho) {
    doc["safety"]["hdv_rho"] = *s.hdv_rho;
  } else {
    doc["safety"]["hdv_rho"] = "ovm";
  }
  doc["controller"] = {{"horizon", s.controller.horizon},
                       {"tau", s.controller.tau},
                       {"tracking_weight", s.controller.tracking_weight},
                       {"effort_weight", s.controller.effort_weight},
                       {"slack_penalty", s.controller.slack_penalty},
                       {"constraint_headway", s.controller.constraint_headway}};
  doc["criteria"] = {{"eps_dp", s.criteria.eps_dp}, {"eps_v", s.criteria.eps_v}};
  doc["estimator"] = {{"gamma0", s.estimator.gamma0}, {"p0", s.estimator.p0},
                      {"forgetting", s.estimator.forgetting}};
  doc["pv_profile"] = json::array();
  for (const auto& pt : s.pv_profile) doc["pv_profile"].push_back({pt.t, pt.v});
  doc["lane_events"] = json::array();
  for (const auto& ev : s.lane_events) {
    doc["lane_events"].push_back({{"t", ev.t}, {"kind", ev.kind}, {"id", ev.id}});
  }
  return doc;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"fig3-no-pv", "fig4-with-pv", "table3-scaling", "fig6-sensitivity"};
}

Scenario preset(const std::string& name) {
  Scenario s;
  s.name = name;
  if (name == "fig3-no-pv") {
    s.n_vehicles = 5;
    s.duration = 40.0;
  } else if (name == "fig4-with-pv") {
    s.n_vehicles = 5;
    s.duration = 90.0;
    s.has_pv = true;
    // The vehicle ahead cruises slightly below the speed the platoon settles
    // at, so the formed platoon catches up and rides at the safety envelope;
    // it then brakes hard down to a crawl, holds it, and pulls away again.
    // Timing the event after formation makes the disturbance hit an
    // established platoon instead of vanishing into the transient, and the
    // crawl floor keeps the human chain out of the stop-and-creep regime
    // where a driver model noses into a parked leader.
    s.pv_profile = {{0.0, 11.0}, {45.0, 11.0}, {48.2, 3.0}, {54.0, 3.0}, {56.667, 11.0}};
  } else if (name == "table3-scaling") {
    s.n_vehicles = 5;
    // Formation time grows with platoon size; leave room for the larger
    // chains the scaling study sweeps over.
    s.duration = 100.0;
  } else if (name == "fig6-sensitivity") {
    s.n_vehicles = 5;
    s.duration = 70.0;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  s.validate();
  return s;
}

Scenario scenario_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scenario JSON parse error: ") + e.what());
  }
  return from_json(doc);
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return scenario_from_json_text(buffer.str());
}

std::string scenario_to_json_text(const Scenario& s) { return to_json(s).dump(2); }

Scenario apply_overrides(const Scenario& s,
                         const std::vector<std::pair<std::string, std::string>>& overrides) {
  json doc = to_json(s);
  for (const auto& [path, value] : overrides) {
    if (path.empty()) throw ConfigError("override with empty key");
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
      const std::size_t dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
      if (key.empty()) throw ConfigError("override '" + path + "' has an empty path segment");
      if (dot == std::string::npos) {
        json parsed;
        try {
          parsed = json::parse(value);
        } catch (const json::parse_error&) {
          parsed = value;  // bare strings need no quotes on the command line
        }
        (*node)[key] = parsed;
        break;
      }
      if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = json::object();
      node = &(*node)[key];
      start = dot + 1;
    }
  }
  return from_json(doc);
}

}  // namespace platoon
