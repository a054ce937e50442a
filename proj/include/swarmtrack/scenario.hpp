#pragma once

#include <cstdint>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "swarmtrack/consensus.hpp"
#include "swarmtrack/metrics.hpp"
#include "swarmtrack/planning.hpp"
#include "swarmtrack/sensing.hpp"
#include "swarmtrack/tracking.hpp"
#include "swarmtrack/world.hpp"

namespace swarmtrack {

/// Invalid scenario content. `what()` names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& problem)
      : std::runtime_error(field + ": " + problem), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct TargetConfig {
  std::vector<Vec2> initial_positions;
  LevyParams levy;
};

struct TrackingConfig {
  JpdaParams jpda;
  TrackLogic logic;
  Vec4 init_cov_diag = Vec4(4.0, 4.0, 9.0, 9.0);
  double r0 = 1.0;
  double q = 0.5;

  Mat4 init_cov() const { return init_cov_diag.asDiagonal(); }
};

struct ConsensusConfig {
  int L = 10;
  double association_gate = 5.0;
};

struct PlanningConfig {
  PolicyKind policy = PolicyKind::rollout_sequential;
  int horizon = 5;
  int mc_samples = 50;
  double v0 = 5.0;
  DeParams de;
  std::vector<int> agent_order;  // agent ids; empty means ascending id
};

struct ExperimentConfig {
  int trials = 50;
  int epochs = 40;
  std::uint64_t base_seed = 1;
};

struct OspaConfig {
  OspaParams params;
  std::string report = "agent0";  // or "mean"
};

struct ScenarioConfig {
  std::string name = "scenario";
  SemanticMap map;
  std::vector<AgentState> agents;
  TargetConfig targets;
  int obs_hz = 5;
  int control_hz = 1;
  TrackingConfig tracking;
  ConsensusConfig consensus;
  PlanningConfig planning;
  ExperimentConfig experiment;
  OspaConfig ospa;

  double obs_dt() const { return 1.0 / obs_hz; }
  double control_dt() const { return 1.0 / control_hz; }
  int substeps() const { return obs_hz / control_hz; }
  double comm_range() const { return agents.empty() ? 0.0 : agents.front().comm_range; }

  RolloutParams rollout_params() const {
    RolloutParams p;
    p.horizon = planning.horizon;
    p.mc_samples = planning.mc_samples;
    p.control_dt = control_dt();
    p.process_noise = tracking.q;
    p.r0 = tracking.r0;
    p.v0 = planning.v0;
    p.de = planning.de;
    for (int id : planning.agent_order)
      for (std::size_t i = 0; i < agents.size(); ++i)
        if (agents[i].id == id) p.agent_order.push_back(i);
    return p;
  }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
  }
}

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline double get_number(const json& obj, const std::string& path, const char* key, std::optional<double> fallback) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError(join(path, key), "missing required field");
  }
  if (!obj.at(key).is_number()) throw ConfigError(join(path, key), "expected a number");
  return obj.at(key).get<double>();
}

inline long long get_int(const json& obj, const std::string& path, const char* key, std::optional<long long> fallback) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError(join(path, key), "missing required field");
  }
  if (!obj.at(key).is_number_integer()) throw ConfigError(join(path, key), "expected an integer");
  return obj.at(key).get<long long>();
}

inline std::vector<double> get_numbers(const json& v, const std::string& path, std::size_t n) {
  if (!v.is_array() || v.size() != n) throw ConfigError(path, "expected an array of " + std::to_string(n) + " numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(path, "expected numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

inline Rect get_rect(const json& v, const std::string& path) {
  const auto a = get_numbers(v, path, 4);
  return {a[0], a[1], a[2], a[3]};
}

inline Vec2 get_vec2(const json& v, const std::string& path) {
  const auto a = get_numbers(v, path, 2);
  return {a[0], a[1]};
}

inline void require(bool cond, const std::string& field, const std::string& constraint) {
  if (!cond) throw ConfigError(field, "violates constraint: " + constraint);
}

}  // namespace detail

/// Check every cross-field invariant. Throws ConfigError on the first violation.
inline void validate(const ScenarioConfig& c) {
  using detail::require;
  require(c.map.bounds.valid(), "map.bounds", "xmin < xmax and ymin < ymax");
  for (std::size_t k = 0; k < c.map.occlusions.size(); ++k) {
    const std::string f = "map.occlusions[" + std::to_string(k) + "]";
    require(c.map.occlusions[k].valid(), f, "xmin < xmax and ymin < ymax");
    require(c.map.occlusions[k].intersects(c.map.bounds), f, "must intersect map.bounds");
  }
  require(!c.agents.empty(), "agents", "at least one agent");
  std::set<int> ids;
  for (std::size_t i = 0; i < c.agents.size(); ++i) {
    const auto& a = c.agents[i];
    const std::string f = "agents[" + std::to_string(i) + "]";
    require(ids.insert(a.id).second, f + ".id", "unique");
    require(c.map.bounds.contains(a.pos), f + ".pos", "inside map.bounds");
    require(a.fov_side > 0.0, f + ".fov_side", "> 0");
    require(a.alpha > 0.0, f + ".alpha", "> 0");
    require(a.v_max > 0.0, f + ".v_max", "> 0");
    require(a.d0 > 0.0, f + ".d0", "> 0");
    require(a.comm_range > 0.0, f + ".comm_range", "> 0");
    require(a.comm_range == c.agents.front().comm_range, f + ".comm_range", "identical for all agents");
  }
  for (std::size_t k = 0; k < c.targets.initial_positions.size(); ++k)
    require(c.map.bounds.contains(c.targets.initial_positions[k]),
            "targets.initial_positions[" + std::to_string(k) + "]", "inside map.bounds");
  const auto& lv = c.targets.levy;
  require(lv.alpha > 0.0, "targets.levy.alpha", "> 0");
  require(lv.x_min > 0.0, "targets.levy.x_min", "> 0");
  require(lv.l_max >= lv.x_min, "targets.levy.l_max", ">= x_min");
  require(lv.speed_min > 0.0 && lv.speed_max >= lv.speed_min, "targets.speed_range", "0 < min <= max");
  require(c.obs_hz > 0, "rates.obs_hz", "> 0");
  require(c.control_hz > 0, "rates.control_hz", "> 0");
  require(c.obs_hz % c.control_hz == 0, "rates.obs_hz", "integer multiple of rates.control_hz");
  const auto& t = c.tracking;
  require(t.jpda.gate > 0.0, "tracking.gate", "> 0");
  require(t.jpda.p_d > 0.0 && t.jpda.p_d <= 1.0, "tracking.p_d", "in (0, 1]");
  require(t.jpda.clutter_density >= 0.0, "tracking.clutter_density", ">= 0");
  require(t.jpda.event_cap >= 1, "tracking.event_cap", ">= 1");
  require(t.logic.m_confirm >= 1 && t.logic.m_confirm <= t.logic.n_confirm, "tracking.m_confirm", "1 <= M <= N");
  require(t.logic.m_delete >= 1 && t.logic.m_delete <= t.logic.n_delete, "tracking.m_delete", "1 <= M <= N");
  require((t.init_cov_diag.array() > 0.0).all(), "tracking.init_cov", "all entries > 0");
  require(t.r0 > 0.0, "tracking.r0", "> 0");
  require(t.q >= 0.0, "tracking.q", ">= 0");
  require(c.consensus.L >= 1, "consensus.L", ">= 1");
  require(c.consensus.association_gate > 0.0, "consensus.association_gate", "> 0");
  const auto& p = c.planning;
  require(p.horizon >= 1, "planning.horizon", ">= 1");
  require(p.mc_samples >= 1, "planning.mc_samples", ">= 1");
  require(p.v0 > 0.0, "planning.v0", "> 0");
  for (const auto& a : c.agents) require(p.v0 <= a.v_max, "planning.v0", "<= every agent's v_max");
  require(p.de.population >= 4, "planning.de.population", ">= 4");
  require(p.de.weight > 0.0 && p.de.weight <= 2.0, "planning.de.weight", "in (0, 2]");
  require(p.de.crossover >= 0.0 && p.de.crossover <= 1.0, "planning.de.crossover", "in [0, 1]");
  if (!p.agent_order.empty()) {
    std::set<int> order(p.agent_order.begin(), p.agent_order.end());
    require(order == ids && p.agent_order.size() == ids.size(), "planning.agent_order", "a permutation of agent ids");
  }
  require(c.experiment.trials >= 1, "experiment.trials", ">= 1");
  require(c.experiment.epochs >= 1, "experiment.epochs", ">= 1");
  require(c.ospa.params.c > 0.0, "ospa.c", "> 0");
  require(c.ospa.params.p >= 1.0, "ospa.p", ">= 1");
  require(c.ospa.report == "agent0" || c.ospa.report == "mean", "ospa.report", "one of agent0, mean");
}

inline ScenarioConfig parse_scenario(const nlohmann::json& j) {
  using namespace detail;
  ScenarioConfig c;
  reject_unknown(j, "", {"name", "map", "agents", "targets", "rates", "tracking", "consensus", "planning",
                         "experiment", "ospa"});
  if (j.contains("name")) {
    if (!j.at("name").is_string()) throw ConfigError("name", "expected a string");
    c.name = j.at("name").get<std::string>();
  }

  if (!j.contains("map")) throw ConfigError("map", "missing required field");
  const auto& jm = j.at("map");
  reject_unknown(jm, "map", {"bounds", "occlusions"});
  if (!jm.contains("bounds")) throw ConfigError("map.bounds", "missing required field");
  c.map.bounds = get_rect(jm.at("bounds"), "map.bounds");
  if (jm.contains("occlusions")) {
    if (!jm.at("occlusions").is_array()) throw ConfigError("map.occlusions", "expected an array");
    for (std::size_t k = 0; k < jm.at("occlusions").size(); ++k)
      c.map.occlusions.push_back(get_rect(jm.at("occlusions")[k], "map.occlusions[" + std::to_string(k) + "]"));
  }

  if (!j.contains("agents")) throw ConfigError("agents", "missing required field");
  if (!j.at("agents").is_array()) throw ConfigError("agents", "expected an array");
  for (std::size_t i = 0; i < j.at("agents").size(); ++i) {
    const auto& ja = j.at("agents")[i];
    const std::string f = "agents[" + std::to_string(i) + "]";
    reject_unknown(ja, f, {"id", "pos", "fov_side", "alpha", "v_max", "d0", "comm_range"});
    AgentState a;
    a.id = static_cast<int>(get_int(ja, f, "id", std::nullopt));
    if (!ja.contains("pos")) throw ConfigError(f + ".pos", "missing required field");
    a.pos = get_vec2(ja.at("pos"), f + ".pos");
    a.fov_side = get_number(ja, f, "fov_side", std::nullopt);
    a.alpha = get_number(ja, f, "alpha", std::nullopt);
    a.v_max = get_number(ja, f, "v_max", 5.0);
    a.d0 = get_number(ja, f, "d0", std::sqrt(2.0) * a.fov_side);
    a.comm_range = get_number(ja, f, "comm_range", 150.0);
    c.agents.push_back(a);
  }

  if (!j.contains("targets")) throw ConfigError("targets", "missing required field");
  const auto& jt = j.at("targets");
  reject_unknown(jt, "targets", {"count", "initial_positions", "levy", "speed_range"});
  const long long count = get_int(jt, "targets", "count", std::nullopt);
  if (!jt.contains("initial_positions")) throw ConfigError("targets.initial_positions", "missing required field");
  if (!jt.at("initial_positions").is_array()) throw ConfigError("targets.initial_positions", "expected an array");
  for (std::size_t k = 0; k < jt.at("initial_positions").size(); ++k)
    c.targets.initial_positions.push_back(
        get_vec2(jt.at("initial_positions")[k], "targets.initial_positions[" + std::to_string(k) + "]"));
  detail::require(count >= 0 && static_cast<std::size_t>(count) == c.targets.initial_positions.size(),
                  "targets.count", "equals the number of initial_positions");
  if (jt.contains("levy")) {
    const auto& jl = jt.at("levy");
    reject_unknown(jl, "targets.levy", {"alpha", "x_min", "l_max"});
    c.targets.levy.alpha = get_number(jl, "targets.levy", "alpha", c.targets.levy.alpha);
    c.targets.levy.x_min = get_number(jl, "targets.levy", "x_min", c.targets.levy.x_min);
    c.targets.levy.l_max = get_number(jl, "targets.levy", "l_max", c.targets.levy.l_max);
  }
  if (jt.contains("speed_range")) {
    const auto s = get_numbers(jt.at("speed_range"), "targets.speed_range", 2);
    c.targets.levy.speed_min = s[0];
    c.targets.levy.speed_max = s[1];
  }

  if (j.contains("rates")) {
    const auto& jr = j.at("rates");
    reject_unknown(jr, "rates", {"obs_hz", "control_hz"});
    c.obs_hz = static_cast<int>(get_int(jr, "rates", "obs_hz", c.obs_hz));
    c.control_hz = static_cast<int>(get_int(jr, "rates", "control_hz", c.control_hz));
  }

  if (j.contains("tracking")) {
    const auto& jk = j.at("tracking");
    const std::string f = "tracking";
    reject_unknown(jk, f, {"gate", "m_confirm", "n_confirm", "m_delete", "n_delete", "p_d", "clutter_density",
                           "event_cap", "init_cov", "r0", "q"});
    auto& t = c.tracking;
    t.jpda.gate = get_number(jk, f, "gate", t.jpda.gate);
    t.jpda.p_d = get_number(jk, f, "p_d", t.jpda.p_d);
    t.jpda.clutter_density = get_number(jk, f, "clutter_density", t.jpda.clutter_density);
    const auto cap = get_int(jk, f, "event_cap", static_cast<long long>(t.jpda.event_cap));
    detail::require(cap >= 1, "tracking.event_cap", ">= 1");
    t.jpda.event_cap = static_cast<std::size_t>(cap);
    auto count_field = [&](const char* key, std::size_t fallback) {
      const auto v = get_int(jk, f, key, static_cast<long long>(fallback));
      detail::require(v >= 1, join(f, key), ">= 1");
      return static_cast<std::size_t>(v);
    };
    t.logic.m_confirm = count_field("m_confirm", t.logic.m_confirm);
    t.logic.n_confirm = count_field("n_confirm", t.logic.n_confirm);
    t.logic.m_delete = count_field("m_delete", t.logic.m_delete);
    t.logic.n_delete = count_field("n_delete", t.logic.n_delete);
    if (jk.contains("init_cov")) {
      const auto d = get_numbers(jk.at("init_cov"), "tracking.init_cov", 4);
      t.init_cov_diag = Vec4(d[0], d[1], d[2], d[3]);
    }
    t.r0 = get_number(jk, f, "r0", t.r0);
    t.q = get_number(jk, f, "q", t.q);
  }

  if (j.contains("consensus")) {
    const auto& jc = j.at("consensus");
    reject_unknown(jc, "consensus", {"L", "association_gate"});
    c.consensus.L = static_cast<int>(get_int(jc, "consensus", "L", c.consensus.L));
    c.consensus.association_gate = get_number(jc, "consensus", "association_gate", c.consensus.association_gate);
  }

  if (j.contains("planning")) {
    const auto& jp = j.at("planning");
    const std::string f = "planning";
    reject_unknown(jp, f, {"policy", "horizon", "mc_samples", "v0", "agent_order", "de"});
    auto& p = c.planning;
    if (jp.contains("policy")) {
      const auto& v = jp.at("policy");
      const auto k = v.is_string() ? parse_policy(v.get<std::string>()) : std::nullopt;
      if (!k) throw ConfigError("planning.policy", "expected one of base, greedy, rollout-joint, rollout-seq");
      p.policy = *k;
    }
    p.horizon = static_cast<int>(get_int(jp, f, "horizon", p.horizon));
    p.mc_samples = static_cast<int>(get_int(jp, f, "mc_samples", p.mc_samples));
    p.v0 = get_number(jp, f, "v0", p.v0);
    if (jp.contains("agent_order")) {
      const auto& jo = jp.at("agent_order");
      if (!jo.is_array()) throw ConfigError("planning.agent_order", "expected an array of agent ids");
      for (const auto& x : jo) {
        if (!x.is_number_integer()) throw ConfigError("planning.agent_order", "expected integer agent ids");
        p.agent_order.push_back(x.get<int>());
      }
    }
    if (jp.contains("de")) {
      const auto& jd = jp.at("de");
      const std::string fd = "planning.de";
      reject_unknown(jd, fd, {"population", "generations_agent", "generations_joint", "weight", "crossover"});
      auto nonneg = [&](const char* key, std::size_t fallback) {
        const auto v = get_int(jd, fd, key, static_cast<long long>(fallback));
        detail::require(v >= 0, join(fd, key), ">= 0");
        return static_cast<std::size_t>(v);
      };
      p.de.population = nonneg("population", p.de.population);
      p.de.generations_agent = nonneg("generations_agent", p.de.generations_agent);
      p.de.generations_joint = nonneg("generations_joint", p.de.generations_joint);
      p.de.weight = get_number(jd, fd, "weight", p.de.weight);
      p.de.crossover = get_number(jd, fd, "crossover", p.de.crossover);
    }
  }

  if (j.contains("experiment")) {
    const auto& je = j.at("experiment");
    reject_unknown(je, "experiment", {"trials", "epochs", "base_seed"});
    c.experiment.trials = static_cast<int>(get_int(je, "experiment", "trials", c.experiment.trials));
    c.experiment.epochs = static_cast<int>(get_int(je, "experiment", "epochs", c.experiment.epochs));
    const auto seed = get_int(je, "experiment", "base_seed", static_cast<long long>(c.experiment.base_seed));
    detail::require(seed >= 0, "experiment.base_seed", ">= 0");
    c.experiment.base_seed = static_cast<std::uint64_t>(seed);
  }

  if (j.contains("ospa")) {
    const auto& jo = j.at("ospa");
    reject_unknown(jo, "ospa", {"c", "p", "report"});
    c.ospa.params.c = get_number(jo, "ospa", "c", c.ospa.params.c);
    c.ospa.params.p = get_number(jo, "ospa", "p", c.ospa.params.p);
    if (jo.contains("report")) {
      if (!jo.at("report").is_string()) throw ConfigError("ospa.report", "expected a string");
      c.ospa.report = jo.at("report").get<std::string>();
    }
  }

  validate(c);
  return c;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("scenario", "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("scenario", std::string("malformed JSON in ") + path + ": " + e.what());
  }
  return parse_scenario(j);
}

/// Fully resolved configuration (every default made explicit).
inline nlohmann::json to_json(const ScenarioConfig& c) {
  using nlohmann::json;
  auto rect = [](const Rect& r) { return json::array({r.xmin, r.ymin, r.xmax, r.ymax}); };
  json j;
  j["name"] = c.name;
  j["map"]["bounds"] = rect(c.map.bounds);
  j["map"]["occlusions"] = json::array();
  for (const auto& r : c.map.occlusions) j["map"]["occlusions"].push_back(rect(r));
  j["agents"] = json::array();
  for (const auto& a : c.agents)
    j["agents"].push_back({{"id", a.id},
                           {"pos", {a.pos.x(), a.pos.y()}},
                           {"fov_side", a.fov_side},
                           {"alpha", a.alpha},
                           {"v_max", a.v_max},
                           {"d0", a.d0},
                           {"comm_range", a.comm_range}});
  j["targets"]["count"] = c.targets.initial_positions.size();
  j["targets"]["initial_positions"] = json::array();
  for (const auto& p : c.targets.initial_positions) j["targets"]["initial_positions"].push_back({p.x(), p.y()});
  j["targets"]["levy"] = {{"alpha", c.targets.levy.alpha}, {"x_min", c.targets.levy.x_min}, {"l_max", c.targets.levy.l_max}};
  j["targets"]["speed_range"] = {c.targets.levy.speed_min, c.targets.levy.speed_max};
  j["rates"] = {{"obs_hz", c.obs_hz}, {"control_hz", c.control_hz}};
  const auto& t = c.tracking;
  j["tracking"] = {{"gate", t.jpda.gate},
                   {"m_confirm", t.logic.m_confirm},
                   {"n_confirm", t.logic.n_confirm},
                   {"m_delete", t.logic.m_delete},
                   {"n_delete", t.logic.n_delete},
                   {"p_d", t.jpda.p_d},
                   {"clutter_density", t.jpda.clutter_density},
                   {"event_cap", t.jpda.event_cap},
                   {"init_cov", {t.init_cov_diag[0], t.init_cov_diag[1], t.init_cov_diag[2], t.init_cov_diag[3]}},
                   {"r0", t.r0},
                   {"q", t.q}};
  j["consensus"] = {{"L", c.consensus.L}, {"association_gate", c.consensus.association_gate}};
  const auto& p = c.planning;
  j["planning"] = {{"policy", to_string(p.policy)},
                   {"horizon", p.horizon},
                   {"mc_samples", p.mc_samples},
                   {"v0", p.v0},
                   {"agent_order", p.agent_order},
                   {"de",
                    {{"population", p.de.population},
                     {"generations_agent", p.de.generations_agent},
                     {"generations_joint", p.de.generations_joint},
                     {"weight", p.de.weight},
                     {"crossover", p.de.crossover}}}};
  j["experiment"] = {{"trials", c.experiment.trials}, {"epochs", c.experiment.epochs}, {"base_seed", c.experiment.base_seed}};
  j["ospa"] = {{"c", c.ospa.params.c}, {"p", c.ospa.params.p}, {"report", c.ospa.report}};
  return j;
}

}  // namespace swarmtrack
