#pragma once

// GoalStage workflow automaton: stages, transition relation, intent-stage
// binding and the post-success stage map.

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sdof/ids.hpp"
#include "sdof/json_util.hpp"

namespace sdof {

struct ValidationIssue {
  enum class Severity { error, warning };
  Severity severity = Severity::error;
  std::string code;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool empty() const noexcept { return issues.empty(); }
  bool has_errors() const noexcept {
    return std::any_of(issues.begin(), issues.end(), [](const ValidationIssue& i) {
      return i.severity == ValidationIssue::Severity::error;
    });
  }
  void error(std::string code, std::string message) {
    issues.push_back({ValidationIssue::Severity::error, std::move(code), std::move(message)});
  }
  void warning(std::string code, std::string message) {
    issues.push_back({ValidationIssue::Severity::warning, std::move(code), std::move(message)});
  }
  void merge(const ValidationReport& other) {
    issues.insert(issues.end(), other.issues.begin(), other.issues.end());
  }
  bool mentions(std::string_view needle) const {
    return std::any_of(issues.begin(), issues.end(), [&](const ValidationIssue& i) {
      return i.message.find(needle) != std::string::npos;
    });
  }
};

/// Raw automaton description as authored in a domain config. A stage_map
/// entry of std::nullopt (written "*") means "stay in the current stage".
struct AutomatonDefinition {
  std::vector<StageId> stages;
  StageId initial;
  std::vector<std::pair<StageId, StageId>> transitions;
  std::vector<IntentId> intents;
  std::map<IntentId, std::vector<StageId>> binding;
  std::map<IntentId, std::optional<StageId>> stage_map;
};

inline constexpr std::string_view kStayMarker = "*";

inline ValidationReport validate_definition(const AutomatonDefinition& def) {
  ValidationReport report;
  std::set<StageId> stages;
  for (const auto& s : def.stages) {
    if (s.empty()) {
      report.error("empty_stage", "stage identifier is empty");
    } else if (!stages.insert(s).second) {
      report.error("duplicate_stage", "duplicate stage '" + s.str() + "'");
    }
  }
  if (!stages.contains(def.initial)) {
    report.error("initial_not_in_stages",
                 "initial not in stages: '" + def.initial.str() + "'");
  }
  for (const auto& [from, to] : def.transitions) {
    if (!stages.contains(from)) {
      report.error("transition_unknown_stage",
                   "transition " + from.str() + "->" + to.str() + ": unknown stage '" +
                       from.str() + "'");
    }
    if (!stages.contains(to)) {
      report.error("transition_unknown_stage",
                   "transition " + from.str() + "->" + to.str() + ": unknown stage '" +
                       to.str() + "'");
    }
  }
  std::set<IntentId> intents;
  for (const auto& i : def.intents) {
    if (i.empty()) {
      report.error("empty_intent", "intent identifier is empty");
    } else if (!intents.insert(i).second) {
      report.error("duplicate_intent", "duplicate intent '" + i.str() + "'");
    }
  }
  for (const auto& [intent, bound] : def.binding) {
    if (!intents.contains(intent)) {
      report.error("binding_unknown_intent",
                   "binding key '" + intent.str() + "' is not a declared intent");
    }
    for (const auto& s : bound) {
      if (!stages.contains(s)) {
        report.error("binding_unknown_stage",
                     "binding of '" + intent.str() + "' names unknown stage '" + s.str() + "'");
      }
    }
  }
  for (const auto& [intent, target] : def.stage_map) {
    if (!intents.contains(intent)) {
      report.error("stage_map_unknown_intent",
                   "stage_map key '" + intent.str() + "' is not a declared intent");
    }
    if (target && !stages.contains(*target)) {
      report.error("stage_map_unknown_stage",
                   "stage_map of '" + intent.str() + "' names unknown stage '" + target->str() +
                       "'");
    }
  }
  for (const auto& i : intents) {
    auto b = def.binding.find(i);
    if (b == def.binding.end()) {
      report.error("binding_missing", "intent '" + i.str() + "' missing from binding");
    } else if (b->second.empty()) {
      report.warning("binding_empty", "intent '" + i.str() + "' is legal in no stage");
    }
    if (!def.stage_map.contains(i)) {
      report.error("stage_map_missing", "intent '" + i.str() + "' missing from stage_map");
    }
  }
  return report;
}

/// Validated, immutable automaton answering legality queries.
class WorkflowAutomaton {
 public:
  /// Throws ConfigError carrying every error-level validation entry.
  static WorkflowAutomaton build(AutomatonDefinition def) {
    auto report = validate_definition(def);
    if (report.has_errors()) {
      std::string msg = "invalid automaton:";
      for (const auto& issue : report.issues) {
        if (issue.severity == ValidationIssue::Severity::error) msg += "\n  " + issue.message;
      }
      throw ConfigError(msg);
    }
    return WorkflowAutomaton(std::move(def));
  }

  const AutomatonDefinition& definition() const noexcept { return def_; }
  const std::vector<StageId>& stages() const noexcept { return def_.stages; }
  const std::vector<IntentId>& intents() const noexcept { return def_.intents; }
  const StageId& initial() const noexcept { return def_.initial; }

  bool has_stage(const StageId& s) const { return stage_set_.contains(s); }
  bool has_intent(const IntentId& i) const { return binding_.contains(i); }

  bool is_stage_legal(const IntentId& intent, const StageId& stage) const {
    require_stage(stage);
    return bound_stages(intent).contains(stage);
  }

  /// Self-stay is always permitted.
  bool can_transition(const StageId& from, const StageId& to) const {
    require_stage(from);
    require_stage(to);
    return from == to || transitions_.contains({from, to});
  }

  const std::set<StageId>& bound_stages(const IntentId& intent) const {
    auto it = binding_.find(intent);
    if (it == binding_.end()) {
      throw LookupError(intent.str(), "unknown intent '" + intent.str() + "'");
    }
    return it->second;
  }

  /// Raw stage_map entry; nullopt means the intent keeps the current stage.
  const std::optional<StageId>& stage_map_entry(const IntentId& intent) const {
    auto it = def_.stage_map.find(intent);
    if (it == def_.stage_map.end()) {
      throw LookupError(intent.str(), "unknown intent '" + intent.str() + "'");
    }
    return it->second;
  }

  StageId target_stage(const IntentId& intent, const StageId& current) const {
    require_stage(current);
    const auto& entry = stage_map_entry(intent);
    return entry ? *entry : current;
  }

  std::set<IntentId> legal_intents(const StageId& stage) const {
    require_stage(stage);
    std::set<IntentId> out;
    for (const auto& [intent, bound] : binding_) {
      if (bound.contains(stage)) out.insert(intent);
    }
    return out;
  }

  /// A stage with no outgoing edge other than a self-loop.
  bool is_terminal(const StageId& stage) const {
    require_stage(stage);
    return std::none_of(def_.transitions.begin(), def_.transitions.end(),
                        [&](const auto& t) { return t.first == stage && t.second != stage; });
  }

  std::size_t stage_index(const StageId& stage) const {
    auto it = std::find(def_.stages.begin(), def_.stages.end(), stage);
    if (it == def_.stages.end()) {
      throw LookupError(stage.str(), "unknown stage '" + stage.str() + "'");
    }
    return static_cast<std::size_t>(it - def_.stages.begin());
  }

 private:
  explicit WorkflowAutomaton(AutomatonDefinition def) : def_(std::move(def)) {
    stage_set_.insert(def_.stages.begin(), def_.stages.end());
    transitions_.insert(def_.transitions.begin(), def_.transitions.end());
    for (const auto& i : def_.intents) {
      auto& bound = binding_[i];
      bound.insert(def_.binding.at(i).begin(), def_.binding.at(i).end());
    }
  }

  void require_stage(const StageId& s) const {
    if (!stage_set_.contains(s)) {
      throw LookupError(s.str(), "unknown stage '" + s.str() + "'");
    }
  }

  AutomatonDefinition def_;
  std::set<StageId> stage_set_;
  std::set<std::pair<StageId, StageId>> transitions_;
  std::map<IntentId, std::set<StageId>> binding_;
};

// JSON domain config: stages, initial, transitions, intents, binding, stage_map.

inline AutomatonDefinition automaton_from_json(const Json& j) {
  json_util::reject_unknown_keys(
      j, {"stages", "initial", "transitions", "intents", "binding", "stage_map"}, "automaton");
  AutomatonDefinition def;
  try {
    def.stages = json_util::require(j, "stages", "automaton").get<std::vector<StageId>>();
    def.initial = json_util::require(j, "initial", "automaton").get<StageId>();
    for (const auto& edge : json_util::require(j, "transitions", "automaton")) {
      if (!edge.is_array() || edge.size() != 2) {
        throw ConfigError("automaton: transitions entries must be [from, to] pairs");
      }
      def.transitions.emplace_back(edge[0].get<StageId>(), edge[1].get<StageId>());
    }
    def.intents = json_util::require(j, "intents", "automaton").get<std::vector<IntentId>>();
    for (const auto& [intent, stages] : json_util::require(j, "binding", "automaton").items()) {
      auto& bound = def.binding[IntentId(intent)];
      if (stages.is_string() && stages.get<std::string>() == kStayMarker) {
        bound = def.stages;  // "*" = every stage
      } else {
        bound = stages.get<std::vector<StageId>>();
      }
    }
    for (const auto& [intent, target] : json_util::require(j, "stage_map", "automaton").items()) {
      auto t = target.get<std::string>();
      def.stage_map[IntentId(intent)] =
          t == kStayMarker ? std::nullopt : std::optional<StageId>(StageId(t));
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("automaton: ") + e.what());
  }
  return def;
}

inline Json automaton_to_json(const AutomatonDefinition& def) {
  Json j;
  j["stages"] = def.stages;
  j["initial"] = def.initial;
  j["transitions"] = Json::array();
  for (const auto& [from, to] : def.transitions) j["transitions"].push_back({from, to});
  j["intents"] = def.intents;
  j["binding"] = Json::object();
  for (const auto& [intent, stages] : def.binding) j["binding"][intent.str()] = stages;
  j["stage_map"] = Json::object();
  for (const auto& [intent, target] : def.stage_map) {
    j["stage_map"][intent.str()] = target ? target->str() : std::string(kStayMarker);
  }
  return j;
}

}  // namespace sdof
