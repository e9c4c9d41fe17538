#pragma once

// Domain bundles, labeled scenario suites, the forward-simulation labeler,
// adversarial injection and latent-violation detection.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sdof/automaton.hpp"
#include "sdof/executor.hpp"
#include "sdof/json_util.hpp"
#include "sdof/memory.hpp"
#include "sdof/registry.hpp"
#include "sdof/router.hpp"

namespace sdof {

/// Automaton, registry, pattern table and executor fixtures for one domain,
/// cross-validated on load.
struct DomainBundle {
  std::string name;
  std::shared_ptr<const WorkflowAutomaton> automaton;
  std::shared_ptr<const Registry> registry;
  std::shared_ptr<const IntentRouter> router;
  Json skill_fixtures = Json::object();
  Json initial_state = Json::object();
};

namespace detail {

inline std::string located(const std::filesystem::path& file, const std::string& what) {
  return file.filename().string() + ": " + what;
}

}  // namespace detail

/// Cross-checks the four parts: intents consistent, every skill routable.
inline ValidationReport cross_validate(const DomainBundle& b) {
  ValidationReport report;
  std::set<IntentId> routed;
  for (const auto& entry : b.router->table()) routed.insert(entry.intent);
  for (const auto& skill : b.registry->skills()) {
    if (!routed.contains(skill.intent)) {
      report.error("skill_unrouted", "skill '" + skill.id + "' serves intent '" +
                                         skill.intent.str() + "' that no pattern routes to");
    }
    if (!b.skill_fixtures.contains(skill.id)) {
      report.error("fixture_missing", "no executor fixture for skill '" + skill.id + "'");
    }
  }
  if (!b.initial_state.is_object()) {
    report.error("initial_state", "initial_state must be an object");
  }
  return report;
}

/// Loads <dir>/{automaton,skills,patterns,fixtures}.json. The first problem
/// aborts the load with a ConfigError naming the file and key.
inline DomainBundle load_domain(const std::filesystem::path& dir,
                                PredicateCatalog catalog = PredicateCatalog::standard()) {
  if (!std::filesystem::is_directory(dir)) {
    throw StorageError("domain directory not found: " + dir.string());
  }
  auto read = [&](const char* file) {
    const auto p = dir / file;
    if (!std::filesystem::exists(p)) throw StorageError("missing " + p.string());
    return json_util::read_file(p.string());
  };
  DomainBundle b;
  b.name = std::filesystem::absolute(dir).lexically_normal().filename().string();
  if (b.name.empty()) b.name = std::filesystem::absolute(dir).parent_path().filename().string();

  const auto automaton_file = dir / "automaton.json";
  AutomatonDefinition def;
  try {
    def = automaton_from_json(read("automaton.json"));
  } catch (const ConfigError& e) {
    throw ConfigError(detail::located(automaton_file, e.what()));
  }
  const auto report = validate_definition(def);
  if (report.has_errors()) {
    for (const auto& issue : report.issues) {
      if (issue.severity == ValidationIssue::Severity::error) {
        throw ConfigError(detail::located(automaton_file, issue.message));
      }
    }
  }
  b.automaton = std::make_shared<const WorkflowAutomaton>(WorkflowAutomaton::build(def));

  const auto skills_file = dir / "skills.json";
  auto registry = std::make_shared<Registry>(std::move(catalog));
  try {
    const auto skills = read("skills.json");
    if (!skills.is_array()) throw ConfigError("expected a list of skills");
    for (const auto& s : skills) registry->add(skill_from_json(s), *b.automaton);
  } catch (const Error& e) {
    if (dynamic_cast<const StorageError*>(&e)) throw;
    throw ConfigError(detail::located(skills_file, e.what()));
  }
  b.registry = registry;

  const auto patterns_file = dir / "patterns.json";
  std::vector<IntentPattern> table;
  try {
    table = read("patterns.json").get<std::vector<IntentPattern>>();
  } catch (const Json::exception& e) {
    throw ConfigError(detail::located(patterns_file, e.what()));
  } catch (const ConfigError& e) {
    throw ConfigError(detail::located(patterns_file, e.what()));
  }
  const auto table_report = validate_table(table, b.automaton.get());
  if (!table_report.empty()) {
    throw ConfigError(detail::located(patterns_file, table_report.issues.front().message));
  }
  b.router = std::make_shared<const IntentRouter>(std::move(table));

  const auto fixtures_file = dir / "fixtures.json";
  const auto fixtures = read("fixtures.json");
  try {
    json_util::reject_unknown_keys(fixtures, {"initial_state", "skills"}, "fixtures");
    b.initial_state = fixtures.value("initial_state", Json::object());
    b.skill_fixtures = json_util::require(fixtures, "skills", "fixtures");
  } catch (const ConfigError& e) {
    throw ConfigError(detail::located(fixtures_file, e.what()));
  }

  const auto cross = cross_validate(b);
  if (!cross.empty()) throw ConfigError(b.name + ": " + cross.issues.front().message);
  return b;
}

enum class ScenarioType { normal, illegal, rollback, multi, abort, concurrent };

inline constexpr ScenarioType kAllScenarioTypes[] = {
    ScenarioType::normal, ScenarioType::illegal,  ScenarioType::rollback,
    ScenarioType::multi,  ScenarioType::abort,    ScenarioType::concurrent};

inline std::string to_string(ScenarioType t) {
  switch (t) {
    case ScenarioType::normal: return "normal";
    case ScenarioType::illegal: return "illegal";
    case ScenarioType::rollback: return "rollback";
    case ScenarioType::multi: return "multi";
    case ScenarioType::abort: return "abort";
    case ScenarioType::concurrent: return "concurrent";
  }
  return "?";
}

inline ScenarioType scenario_type_from_string(const std::string& s) {
  for (auto t : kAllScenarioTypes) {
    if (to_string(t) == s) return t;
  }
  throw SchemaError("unknown scenario type '" + s + "'");
}

struct LabeledMessage {
  std::string text;
  bool expected_legal = true;
  std::string scenario_id;
  int turn_index = 0;
  int lane = 0;
  std::optional<IntentId> intent;  // annotated ground-truth intent
  std::optional<StageId> expected_stage_after;
};

struct Scenario {
  std::string scenario_id;
  std::string domain;
  ScenarioType type = ScenarioType::normal;
  std::vector<LabeledMessage> messages;
  StageId expected_final_stage;
  std::optional<std::vector<Outcome>> expected_outcomes;
  int lanes = 1;
};

namespace detail {

inline nlohmann::ordered_json scenario_ordered(const Scenario& s) {
  nlohmann::ordered_json j;
  j["scenario_id"] = s.scenario_id;
  j["type"] = to_string(s.type);
  if (s.lanes != 1) j["lanes"] = s.lanes;
  j["expected_final_stage"] = s.expected_final_stage.str();
  if (s.expected_outcomes) {
    auto& eo = j["expected_outcomes"] = nlohmann::ordered_json::array();
    for (auto o : *s.expected_outcomes) eo.push_back(to_string(o));
  }
  auto& msgs = j["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : s.messages) {
    nlohmann::ordered_json mj;
    mj["turn_index"] = m.turn_index;
    if (s.lanes != 1) mj["lane"] = m.lane;
    mj["text"] = m.text;
    if (m.intent) mj["intent"] = m.intent->str();
    mj["expected_legal"] = m.expected_legal;
    if (m.expected_stage_after) mj["expected_stage_after"] = m.expected_stage_after->str();
    msgs.push_back(std::move(mj));
  }
  return j;
}

}  // namespace detail

inline Json scenario_to_json(const Scenario& s) {
  return Json::parse(detail::scenario_ordered(s).dump());
}

/// Key-ordered single-line dump used for suite files and determinism checks.
inline std::string scenario_dump(const Scenario& s) { return detail::scenario_ordered(s).dump(); }

inline Scenario scenario_from_json(const Json& j, const std::string& domain) {
  Scenario s;
  s.domain = domain;
  s.scenario_id = j.value("scenario_id", "");
  const std::string where = "scenario '" + s.scenario_id + "'";
  auto field = [&](const char* key) -> const Json& {
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError(where + ": missing field '" + key + "'");
    return *it;
  };
  try {
    if (s.scenario_id.empty()) throw SchemaError("scenario: missing field 'scenario_id'");
    s.type = scenario_type_from_string(field("type").get<std::string>());
    s.lanes = j.value("lanes", 1);
    s.expected_final_stage = StageId(field("expected_final_stage").get<std::string>());
    if (j.contains("expected_outcomes")) {
      std::vector<Outcome> eo;
      for (const auto& o : j.at("expected_outcomes")) {
        eo.push_back(outcome_from_string(o.get<std::string>()));
      }
      s.expected_outcomes = std::move(eo);
    }
    for (const auto& mj : field("messages")) {
      LabeledMessage m;
      m.scenario_id = s.scenario_id;
      if (!mj.contains("turn_index")) throw SchemaError(where + ": message missing 'turn_index'");
      if (!mj.contains("text")) throw SchemaError(where + ": message missing 'text'");
      m.turn_index = mj.at("turn_index").get<int>();
      m.text = mj.at("text").get<std::string>();
      m.lane = mj.value("lane", 0);
      m.expected_legal = mj.value("expected_legal", true);
      if (mj.contains("intent")) m.intent = IntentId(mj.at("intent").get<std::string>());
      if (mj.contains("expected_stage_after")) {
        m.expected_stage_after = StageId(mj.at("expected_stage_after").get<std::string>());
      }
      s.messages.push_back(std::move(m));
    }
  } catch (const Json::exception& e) {
    throw SchemaError(where + ": " + e.what());
  }
  return s;
}

/// Scenario invariants plus references into the domain.
inline void validate_scenario(const Scenario& s, const DomainBundle& domain) {
  const std::string where = "scenario '" + s.scenario_id + "'";
  if (s.messages.empty()) throw SchemaError(where + ": field 'messages' is empty");
  if (s.lanes < 1) throw SchemaError(where + ": field 'lanes' must be >= 1");
  for (std::size_t i = 0; i < s.messages.size(); ++i) {
    const auto& m = s.messages[i];
    if (m.turn_index != static_cast<int>(i)) {
      throw SchemaError(where + ": field 'turn_index' has a gap at position " +
                        std::to_string(i));
    }
    if (m.lane < 0 || m.lane >= s.lanes) {
      throw SchemaError(where + ": field 'lane' out of range at turn " + std::to_string(i));
    }
    if (m.intent && !domain.automaton->has_intent(*m.intent)) {
      throw SchemaError(where + ": field 'intent' names unknown intent '" + m.intent->str() +
                        "'");
    }
    if (m.expected_stage_after && !domain.automaton->has_stage(*m.expected_stage_after)) {
      throw SchemaError(where + ": field 'expected_stage_after' names unknown stage");
    }
  }
  if (!domain.automaton->has_stage(s.expected_final_stage)) {
    throw SchemaError(where + ": field 'expected_final_stage' names unknown stage '" +
                      s.expected_final_stage.str() + "'");
  }
  if (s.type == ScenarioType::illegal &&
      std::none_of(s.messages.begin(), s.messages.end(),
                   [](const LabeledMessage& m) { return !m.expected_legal; })) {
    throw SchemaError(where + ": field 'messages' has no expected_legal=false turn");
  }
  if (s.expected_outcomes && s.expected_outcomes->size() != s.messages.size()) {
    throw SchemaError(where + ": field 'expected_outcomes' length differs from messages");
  }
}

struct Suite {
  std::string suite_name;
  std::string domain;
  std::vector<Scenario> scenarios;
};

inline Suite suite_from_json(const Json& j) {
  Suite suite;
  try {
    json_util::reject_unknown_keys(j, {"suite_name", "domain", "scenarios"}, "suite");
  } catch (const ConfigError& e) {
    throw SchemaError(e.what());
  }
  suite.suite_name = j.value("suite_name", "");
  suite.domain = j.value("domain", "");
  if (!j.contains("scenarios") || !j.at("scenarios").is_array()) {
    throw SchemaError("suite: missing field 'scenarios'");
  }
  for (const auto& sj : j.at("scenarios")) {
    suite.scenarios.push_back(scenario_from_json(sj, suite.domain));
  }
  return suite;
}

inline std::string suite_dump(const Suite& suite) {
  std::string out = "{\n  \"suite_name\": " + Json(suite.suite_name).dump() +
                    ",\n  \"domain\": " + Json(suite.domain).dump() + ",\n  \"scenarios\": [";
  for (std::size_t i = 0; i < suite.scenarios.size(); ++i) {
    out += (i ? ",\n    " : "\n    ") + scenario_dump(suite.scenarios[i]);
  }
  out += "\n  ]\n}\n";
  return out;
}

inline std::vector<Scenario> load_suite(const std::filesystem::path& path,
                                        const DomainBundle& domain) {
  if (!std::filesystem::exists(path)) throw StorageError("suite not found: " + path.string());
  Json j;
  try {
    j = json_util::read_file(path.string());
  } catch (const ConfigError& e) {
    throw SchemaError(e.what());
  }
  auto suite = suite_from_json(j);
  if (!suite.domain.empty() && suite.domain != domain.name) {
    throw SchemaError("suite domain '" + suite.domain + "' does not match bundle '" +
                      domain.name + "'");
  }
  std::set<std::string> ids;
  for (auto& s : suite.scenarios) {
    s.domain = domain.name;
    if (!ids.insert(s.scenario_id).second) {
      throw SchemaError("scenario '" + s.scenario_id + "': field 'scenario_id' is duplicated");
    }
    validate_scenario(s, domain);
  }
  return suite.scenarios;
}

// ---------------------------------------------------------------------------
// Forward-simulation labeler
//
// A message is legal iff its intent is stage-legal at the simulated stage,
// every precondition of every skill serving the intent holds on the
// simulated context, and the stage-map target is reachable. Only literal
// set_flag / set_field effects are simulated. The labeler reads the domain
// configuration directly and never calls the dispatcher.

struct SimulatedLane {
  StageId stage;
  DispatchContext ctx;
  std::set<StageId> visited;
};

class ForwardLabeler {
 public:
  explicit ForwardLabeler(const DomainBundle& domain) : d_(domain) {}

  SimulatedLane start() const {
    SimulatedLane lane{d_.automaton->initial(), DispatchContext{"sim", d_.initial_state, {}}, {}};
    lane.visited.insert(lane.stage);
    return lane;
  }

  bool is_legal(const SimulatedLane& lane, const IntentId& intent) const {
    if (!d_.automaton->has_intent(intent)) return false;
    if (!d_.automaton->is_stage_legal(intent, lane.stage)) return false;
    for (const auto* skill : d_.registry->skills_for_intent(intent)) {
      for (const auto& p : skill->preconditions) {
        bool ok = false;
        try {
          ok = d_.registry->catalog().evaluate(p.name, lane.ctx);
        } catch (const MissingField&) {
          ok = false;
        }
        if (!ok) return false;
      }
    }
    const auto target = d_.automaton->target_stage(intent, lane.stage);
    return d_.automaton->can_transition(lane.stage, target);
  }

  /// Returns the legality label and advances the lane when legal.
  bool step(SimulatedLane& lane, const IntentId& intent) const {
    if (!is_legal(lane, intent)) return false;
    for (const auto* skill : d_.registry->skills_for_intent(intent)) {
      for (const auto& e : skill->postconditions) {
        if (e.op == Effect::Op::append_record) continue;
        if (e.value.is_string() && e.value.get_ref<const std::string&>().starts_with("$")) {
          continue;
        }
        auto it = lane.ctx.business_state.find(e.field);
        if (it != lane.ctx.business_state.end()) *it = e.value;
      }
    }
    lane.stage = d_.automaton->target_stage(intent, lane.stage);
    lane.visited.insert(lane.stage);
    return true;
  }

  /// Resolves the message intent: annotation first, router as fallback.
  std::optional<IntentId> intent_of(const LabeledMessage& m) const {
    if (m.intent) return m.intent;
    return d_.router->identify(m.text, DispatchContext{}).intent;
  }

  /// Fills expected_legal and expected_stage_after for every message and
  /// returns the final stage of lane 0.
  StageId label(Scenario& s) const {
    std::vector<SimulatedLane> lanes;
    for (int i = 0; i < s.lanes; ++i) lanes.push_back(start());
    for (auto& m : s.messages) {
      auto& lane = lanes.at(static_cast<std::size_t>(m.lane));
      const auto intent = intent_of(m);
      m.expected_legal = intent && step(lane, *intent);
      m.expected_stage_after = lane.stage;
    }
    return lanes.front().stage;
  }

 private:
  const DomainBundle& d_;
};

inline StageId label_scenario(Scenario& s, const DomainBundle& domain) {
  return ForwardLabeler(domain).label(s);
}

// ---------------------------------------------------------------------------
// Adversarial injection

enum class InjectionStrategy { stage_skip, premature_terminal };

class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Inserts one stage-skipping request into a normal scenario and truncates
/// the dialogue after it. The inserted intent is bound to no stage visited
/// before the insertion point. Deterministic in `seed`.
inline Scenario inject_illegal(const Scenario& scenario, const DomainBundle& domain,
                               InjectionStrategy strategy, std::uint64_t seed) {
  if (scenario.type != ScenarioType::normal) {
    throw GenerationError("scenario '" + scenario.scenario_id + "' is not of type normal");
  }
  const ForwardLabeler labeler(domain);
  const auto& automaton = *domain.automaton;

  std::set<StageId> terminal_like;
  for (const auto& s : automaton.stages()) {
    if (automaton.is_terminal(s)) terminal_like.insert(s);
  }
  if (!automaton.stages().empty()) terminal_like.insert(automaton.stages().back());

  auto candidate_intents = [&](const SimulatedLane& lane) {
    std::vector<IntentId> out;
    for (const auto& i : automaton.intents()) {
      const auto& bound = automaton.bound_stages(i);
      if (bound.empty()) continue;
      const bool touches_visited = std::any_of(bound.begin(), bound.end(), [&](const auto& st) {
        return lane.visited.contains(st);
      });
      if (touches_visited) continue;
      if (strategy == InjectionStrategy::premature_terminal) {
        const bool terminal = std::any_of(bound.begin(), bound.end(), [&](const auto& st) {
          return terminal_like.contains(st);
        });
        if (!terminal) continue;
      }
      out.push_back(i);
    }
    return out;
  };

  // Phrasings the router resolves back to the intent.
  auto phrasings = [&](const IntentId& intent) {
    std::vector<std::string> out;
    for (const auto& entry : domain.router->table()) {
      if (entry.intent != intent) continue;
      for (const auto& raw : entry.patterns) {
        if (raw.empty() || raw.front() == '~') continue;
        const std::string text = raw.front() == '=' ? raw.substr(1) : raw;
        const auto d = domain.router->identify(text, DispatchContext{});
        if (d.intent == intent) out.push_back(text);
      }
    }
    return out;
  };

  struct Option {
    std::size_t position;
    IntentId intent;
    std::string text;
  };
  std::vector<Option> options;
  auto lane = labeler.start();
  for (std::size_t pos = 0; pos <= scenario.messages.size(); ++pos) {
    if (pos > 0) {
      const auto& prev = scenario.messages[pos - 1];
      if (prev.lane == 0) {
        if (auto intent = labeler.intent_of(prev)) labeler.step(lane, *intent);
      }
    }
    for (const auto& i : candidate_intents(lane)) {
      for (auto& text : phrasings(i)) options.push_back({pos, i, std::move(text)});
    }
  }
  if (options.empty()) {
    throw GenerationError("scenario '" + scenario.scenario_id + "' has no injectable position");
  }
  std::mt19937_64 rng(seed);
  const auto& pick = options[static_cast<std::size_t>(rng() % options.size())];

  Scenario out;
  out.scenario_id = scenario.scenario_id +
                    (strategy == InjectionStrategy::stage_skip ? "-skip" : "-term");
  out.domain = scenario.domain;
  out.type = ScenarioType::illegal;
  out.lanes = 1;
  for (std::size_t i = 0; i < pick.position; ++i) {
    auto m = scenario.messages[i];
    if (m.lane != 0) continue;
    m.scenario_id = out.scenario_id;
    m.lane = 0;
    m.turn_index = static_cast<int>(out.messages.size());
    out.messages.push_back(std::move(m));
  }
  LabeledMessage injected;
  injected.text = pick.text;
  injected.intent = pick.intent;
  injected.scenario_id = out.scenario_id;
  injected.turn_index = static_cast<int>(out.messages.size());
  out.messages.push_back(std::move(injected));
  out.expected_final_stage = labeler.label(out);
  return out;
}

// ---------------------------------------------------------------------------
// Execution records shared by the harness, evaluation and latent detection.

struct StepRecord {
  std::string scenario_id;
  std::string domain;
  ScenarioType type = ScenarioType::normal;
  int lane = 0;
  int turn_index = 0;
  std::string goal_id;
  std::string text;
  std::optional<std::string> annotated_intent;
  std::string routed_intent;  // "UNKNOWN" when unresolved
  bool routed_by_pattern = false;
  bool expected_legal = true;
  std::optional<StageId> expected_stage_after;

  Outcome outcome = Outcome::success;
  std::optional<std::string> sub_reason;
  StageId stage_before;
  StageId stage_after;
  bool stage_legal = false;
  bool violation = false;
  bool precondition_enforced = false;
  bool executed = false;
  bool audited = false;
  std::int64_t event_seq = 0;
  bool traceable = false;  // audited and the goal replays to its live state

  std::int64_t route_ns = 0;
  std::int64_t gate_ns = 0;
  std::int64_t exec_ns = 0;

  bool blocked() const noexcept {
    return outcome == Outcome::illegal_transition || outcome == Outcome::precondition_fail;
  }
};

struct LatentViolation {
  std::string scenario_id;
  std::string domain;
  int turn_index = 0;
  std::string intent;
  StageId stage;
  Outcome outcome = Outcome::illegal_transition;
};

/// Blocked steps inside normal-type scenarios.
inline std::vector<LatentViolation> detect_latent(const std::vector<StepRecord>& steps) {
  std::vector<LatentViolation> out;
  for (const auto& s : steps) {
    if (s.type == ScenarioType::normal && s.blocked()) {
      out.push_back({s.scenario_id, s.domain, s.turn_index, s.routed_intent, s.stage_before,
                     s.outcome});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Schema-guided dialogue converter
//
// Reads the subset of the public SGD dialogue format used here:
//   [{"dialogue_id": str, "turns": [{"speaker": "USER"|"SYSTEM",
//     "utterance": str, "frames": [{"service": str,
//     "state": {"active_intent": "ReserveHotel"}}]}]}]
// Each USER turn becomes one message. active_intent is converted to
// snake_case and kept as the annotation when the automaton declares it.

inline std::string to_snake_case(std::string_view camel) {
  std::string out;
  for (std::size_t i = 0; i < camel.size(); ++i) {
    const auto c = static_cast<unsigned char>(camel[i]);
    if (std::isupper(c)) {
      if (i > 0 && camel[i - 1] != '_') out.push_back('_');
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

inline std::vector<Scenario> convert_sgd(const Json& dialogues, const DomainBundle& domain) {
  if (!dialogues.is_array()) throw SchemaError("sgd: expected a list of dialogues");
  std::vector<Scenario> out;
  const ForwardLabeler labeler(domain);
  for (const auto& d : dialogues) {
    Scenario s;
    s.domain = domain.name;
    s.scenario_id = d.value("dialogue_id", "");
    if (s.scenario_id.empty()) throw SchemaError("sgd: dialogue missing 'dialogue_id'");
    for (const auto& t : d.value("turns", Json::array())) {
      if (t.value("speaker", "") != "USER") continue;
      LabeledMessage m;
      m.scenario_id = s.scenario_id;
      m.turn_index = static_cast<int>(s.messages.size());
      m.text = t.value("utterance", "");
      for (const auto& f : t.value("frames", Json::array())) {
        const auto active = f.value("state", Json::object()).value("active_intent", "");
        if (active.empty() || active == "NONE") continue;
        IntentId intent(to_snake_case(active));
        if (domain.automaton->has_intent(intent)) {
          m.intent = intent;
          break;
        }
      }
      s.messages.push_back(std::move(m));
    }
    if (s.messages.empty()) continue;
    s.expected_final_stage = labeler.label(s);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace sdof
