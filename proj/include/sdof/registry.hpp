#pragma once

// Skill registry: stage-filtered selection, precondition evaluation,
// declarative postconditions and progressive-disclosure manifests.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sdof/automaton.hpp"
#include "sdof/context.hpp"
#include "sdof/ids.hpp"
#include "sdof/json_util.hpp"

namespace sdof {

/// L0 atomic query, L1 composite operation, L2 policy-level fallback.
enum class RiskLevel { L0 = 0, L1 = 1, L2 = 2 };

inline std::string to_string(RiskLevel level) {
  switch (level) {
    case RiskLevel::L0: return "L0";
    case RiskLevel::L1: return "L1";
    case RiskLevel::L2: return "L2";
  }
  return "L?";
}

inline RiskLevel risk_level_from_string(const std::string& s) {
  if (s == "L0") return RiskLevel::L0;
  if (s == "L1") return RiskLevel::L1;
  if (s == "L2") return RiskLevel::L2;
  throw ConfigError("unknown risk level '" + s + "'");
}

enum class Disclosure { routing, bound };

struct PredicateRef {
  std::string name;
  std::string description;
  friend bool operator==(const PredicateRef& a, const PredicateRef& b) { return a.name == b.name; }
};

/// Thrown by a predicate that needs a context field the context lacks.
class MissingField : public Error {
 public:
  explicit MissingField(const std::string& field)
      : Error("context field '" + field + "' is missing"), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

using Predicate = std::function<bool(const DispatchContext&)>;

/// Named table of pure context predicates, fixed after startup.
class PredicateCatalog {
 public:
  void add(std::string name, std::string description, Predicate fn) {
    if (entries_.contains(name)) {
      throw ConflictError("predicate '" + name + "' already registered");
    }
    entries_.emplace(std::move(name), Entry{std::move(description), std::move(fn)});
  }

  bool contains(const std::string& name) const { return entries_.contains(name); }

  const std::string& description(const std::string& name) const { return entry(name).description; }

  bool evaluate(const std::string& name, const DispatchContext& ctx) const {
    return entry(name).fn(ctx);
  }

  /// True when business_state[field] is boolean true. A missing field is an
  /// evaluation fault, not a false result.
  static Predicate flag_is_set(std::string field) {
    return [field = std::move(field)](const DispatchContext& ctx) {
      auto it = ctx.business_state.find(field);
      if (it == ctx.business_state.end()) throw MissingField(field);
      return it->is_boolean() && it->get<bool>();
    };
  }

  /// Predicates referenced by the shipped HR and SGD-derived domains.
  static PredicateCatalog standard() {
    PredicateCatalog c;
    // pi1 / pi2 of the skill table; the readings below are authoring choices.
    c.add("position_exists", "a position has been created for the goal",
          flag_is_set("position_exists"));
    c.add("candidates_pulled", "candidate list pulled from the talent pool",
          flag_is_set("candidates_pulled"));
    c.add("candidates_screened", "pulled resumes have been screened",
          flag_is_set("candidates_screened"));
    c.add("interview_scheduled", "at least one interview is scheduled",
          flag_is_set("interview_scheduled"));
    c.add("interview_evaluated", "interview feedback has been collected",
          flag_is_set("interview_evaluated"));
    c.add("offer_sent", "an offer has been issued", flag_is_set("offer_sent"));
    c.add("has_candidates", "candidate records are attached to the goal",
          [](const DispatchContext& ctx) {
            auto it = ctx.business_state.find("candidates");
            if (it == ctx.business_state.end()) throw MissingField("candidates");
            return it->is_array() && !it->empty();
          });
    c.add("lookup_done", "the domain's search or lookup call has completed",
          flag_is_set("lookup_done"));
    return c;
  }

 private:
  struct Entry {
    std::string description;
    Predicate fn;
  };

  const Entry& entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
      throw BindingError(name, "unresolvable predicate '" + name + "'");
    }
    return it->second;
  }

  std::map<std::string, Entry> entries_;
};

/// Declarative context mutation. Values may reference the skill result:
/// "$payload", "$payload.<key>" or "$digest".
struct Effect {
  enum class Op { set_flag, set_field, append_record };
  Op op = Op::set_flag;
  std::string field;
  Json value = true;

  friend bool operator==(const Effect&, const Effect&) = default;
};

inline std::string to_string(Effect::Op op) {
  switch (op) {
    case Effect::Op::set_flag: return "set_flag";
    case Effect::Op::set_field: return "set_field";
    case Effect::Op::append_record: return "append_record";
  }
  return "?";
}

inline void to_json(Json& j, const Effect& e) {
  j = Json{{"op", to_string(e.op)}, {"field", e.field}, {"value", e.value}};
}

inline void from_json(const Json& j, Effect& e) {
  json_util::reject_unknown_keys(j, {"op", "field", "value"}, "effect");
  const auto op = json_util::require(j, "op", "effect").get<std::string>();
  if (op == "set_flag") {
    e.op = Effect::Op::set_flag;
  } else if (op == "set_field") {
    e.op = Effect::Op::set_field;
  } else if (op == "append_record") {
    e.op = Effect::Op::append_record;
  } else {
    throw ConfigError("effect: unknown op '" + op + "'");
  }
  e.field = json_util::require(j, "field", "effect").get<std::string>();
  e.value = j.contains("value") ? j.at("value") : Json(true);
  if (e.op != Effect::Op::set_flag && !j.contains("value")) {
    throw ConfigError("effect on '" + e.field + "': " + op + " requires a value");
  }
}

struct SkillSpec {
  std::string id;
  IntentId intent;
  RiskLevel level = RiskLevel::L1;
  std::set<StageId> applicable_stages;
  bool all_stages = false;  // authored as "*"
  std::vector<PredicateRef> preconditions;
  std::vector<Effect> postconditions;
  std::string risk_class;
  Disclosure disclosure = Disclosure::bound;
  std::string description;
};

inline SkillSpec skill_from_json(const Json& j) {
  json_util::reject_unknown_keys(
      j, {"id", "intent", "level", "stages", "pre", "post", "risk", "disclosure", "description"},
      "skill");
  SkillSpec s;
  try {
    s.id = json_util::require(j, "id", "skill").get<std::string>();
    const std::string where = "skill '" + s.id + "'";
    s.intent = json_util::require(j, "intent", where).get<IntentId>();
    s.level = risk_level_from_string(json_util::require(j, "level", where).get<std::string>());
    const auto& stages = json_util::require(j, "stages", where);
    if (stages.is_string()) {
      if (stages.get<std::string>() != kStayMarker) {
        throw ConfigError(where + ": stages must be a list or \"*\"");
      }
      s.all_stages = true;
    } else {
      for (const auto& st : stages) s.applicable_stages.insert(st.get<StageId>());
    }
    if (j.contains("pre")) {
      for (const auto& p : j.at("pre")) s.preconditions.push_back({p.get<std::string>(), {}});
    }
    if (j.contains("post")) s.postconditions = j.at("post").get<std::vector<Effect>>();
    s.risk_class = j.value("risk", "");
    const auto disclosure = j.value("disclosure", "bound");
    if (disclosure == "routing") {
      s.disclosure = Disclosure::routing;
    } else if (disclosure == "bound") {
      s.disclosure = Disclosure::bound;
    } else {
      throw ConfigError(where + ": unknown disclosure '" + disclosure + "'");
    }
    s.description = j.value("description", "");
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("skill: ") + e.what());
  }
  return s;
}

inline Json skill_to_json(const SkillSpec& s) {
  Json j;
  j["id"] = s.id;
  j["intent"] = s.intent;
  j["level"] = to_string(s.level);
  if (s.all_stages) {
    j["stages"] = std::string(kStayMarker);
  } else {
    j["stages"] = Json::array();
    for (const auto& st : s.applicable_stages) j["stages"].push_back(st);
  }
  j["pre"] = Json::array();
  for (const auto& p : s.preconditions) j["pre"].push_back(p.name);
  j["post"] = s.postconditions;
  j["risk"] = s.risk_class;
  j["disclosure"] = s.disclosure == Disclosure::routing ? "routing" : "bound";
  if (!s.description.empty()) j["description"] = s.description;
  return j;
}

struct PredicateResult {
  PredicateRef ref;
  bool value = false;
  bool evaluation_error = false;
  std::string error;
};

struct PreconditionReport {
  bool satisfied = true;
  std::vector<PredicateResult> results;
  std::optional<PredicateRef> first_failure;
};

/// Substitutes "$payload", "$payload.<key>" and "$digest" in effect values.
inline std::vector<Effect> resolve_effects(const SkillSpec& skill, const SkillResult& result) {
  std::vector<Effect> out;
  out.reserve(skill.postconditions.size());
  for (auto e : skill.postconditions) {
    if (e.value.is_string()) {
      const auto& v = e.value.get_ref<const std::string&>();
      if (v == "$payload") {
        e.value = result.payload;
      } else if (v == "$digest") {
        e.value = json_util::digest(result.payload);
      } else if (v.rfind("$payload.", 0) == 0) {
        const auto key = v.substr(9);
        e.value = result.payload.is_object() && result.payload.contains(key)
                      ? result.payload.at(key)
                      : Json(nullptr);
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

/// Applies resolved effects in order. Every target field must already exist.
inline void apply_effects(Json& business_state, const std::vector<Effect>& effects) {
  for (const auto& e : effects) {
    auto it = business_state.find(e.field);
    if (it == business_state.end()) {
      throw ConfigError("postcondition references undefined context field '" + e.field + "'");
    }
    switch (e.op) {
      case Effect::Op::set_flag:
        if (!e.value.is_boolean()) {
          throw ConfigError("set_flag on '" + e.field + "' needs a boolean value");
        }
        *it = e.value;
        break;
      case Effect::Op::set_field:
        *it = e.value;
        break;
      case Effect::Op::append_record:
        if (!it->is_array()) {
          throw ConfigError("append_record target '" + e.field + "' is not a list");
        }
        if (e.value.is_array()) {
          for (const auto& v : e.value) it->push_back(v);
        } else {
          it->push_back(e.value);
        }
        break;
    }
  }
}

inline DispatchContext apply_postconditions(const SkillSpec& skill, const DispatchContext& ctx,
                                            const SkillResult& result) {
  DispatchContext out = ctx;
  apply_effects(out.business_state, resolve_effects(skill, result));
  return out;
}

enum class ManifestPhase { routing, bound };

struct SkillSummary {
  std::string id;
  IntentId intent;
  RiskLevel level = RiskLevel::L0;
  // Present only in the bound phase.
  std::optional<std::string> description;
  std::optional<std::vector<PredicateRef>> preconditions;
};

class Registry {
 public:
  Registry() : catalog_(PredicateCatalog::standard()) {}
  explicit Registry(PredicateCatalog catalog) : catalog_(std::move(catalog)) {}

  /// Validates against the automaton and appends the skill. A "*" stage set
  /// is resolved to every stage of the automaton.
  void add(SkillSpec spec, const WorkflowAutomaton& automaton) {
    if (find(spec.id)) throw ConflictError("skill '" + spec.id + "' already registered");
    if (!automaton.has_intent(spec.intent)) {
      throw ConfigError("skill '" + spec.id + "' serves unknown intent '" + spec.intent.str() +
                        "'");
    }
    if (spec.all_stages) {
      spec.applicable_stages = {automaton.stages().begin(), automaton.stages().end()};
    }
    const auto& legal = automaton.bound_stages(spec.intent);
    for (const auto& s : spec.applicable_stages) {
      if (!automaton.has_stage(s)) {
        throw ConfigError("skill '" + spec.id + "' names unknown stage '" + s.str() + "'");
      }
      if (!legal.contains(s)) {
        throw ConfigError("skill '" + spec.id + "' applicable at '" + s.str() +
                          "' where intent '" + spec.intent.str() + "' is stage-illegal");
      }
    }
    for (auto& p : spec.preconditions) {
      if (!catalog_.contains(p.name)) {
        throw BindingError(p.name, "skill '" + spec.id + "': unresolvable predicate '" +
                                       p.name + "'");
      }
      if (p.description.empty()) p.description = catalog_.description(p.name);
    }
    if (spec.level == RiskLevel::L0 && spec.applicable_stages.size() == automaton.stages().size() &&
        !spec.preconditions.empty()) {
      throw ConfigError("L0 skill '" + spec.id + "' applicable everywhere must be unconditional");
    }
    skills_.push_back(std::move(spec));
  }

  std::size_t size() const noexcept { return skills_.size(); }
  const std::vector<SkillSpec>& skills() const noexcept { return skills_; }
  const PredicateCatalog& catalog() const noexcept { return catalog_; }

  const SkillSpec* find(const std::string& id) const {
    auto it = std::find_if(skills_.begin(), skills_.end(),
                           [&](const SkillSpec& s) { return s.id == id; });
    return it == skills_.end() ? nullptr : &*it;
  }

  /// Lowest risk level wins; ties go to the earliest registration.
  const SkillSpec* select_skill(const IntentId& intent, const StageId& stage) const {
    return pick([&](const SkillSpec& s) {
      return s.intent == intent && s.applicable_stages.contains(stage);
    });
  }

  /// Stage-blind selection used when the stage gate is disabled.
  const SkillSpec* select_by_intent(const IntentId& intent) const {
    return pick([&](const SkillSpec& s) { return s.intent == intent; });
  }

  std::vector<const SkillSpec*> skills_for_intent(const IntentId& intent) const {
    std::vector<const SkillSpec*> out;
    for (const auto& s : skills_) {
      if (s.intent == intent) out.push_back(&s);
    }
    return out;
  }

  /// Evaluates every precondition in declared order; never throws for
  /// predicate faults (they become false results tagged evaluation_error).
  PreconditionReport check_preconditions(const SkillSpec& skill, const DispatchContext& ctx) const {
    PreconditionReport report;
    report.results.reserve(skill.preconditions.size());
    for (const auto& p : skill.preconditions) {
      PredicateResult r{p, false, false, {}};
      try {
        r.value = catalog_.evaluate(p.name, ctx);
      } catch (const BindingError&) {
        throw;
      } catch (const std::exception& e) {
        r.evaluation_error = true;
        r.error = e.what();
      }
      if (!r.value) {
        report.satisfied = false;
        if (!report.first_failure) report.first_failure = p;
      }
      report.results.push_back(std::move(r));
    }
    return report;
  }

  std::vector<SkillSummary> manifest(const StageId& stage, ManifestPhase phase) const {
    std::vector<SkillSummary> out;
    for (const auto& s : skills_) {
      if (!s.applicable_stages.contains(stage)) continue;
      if (phase == ManifestPhase::routing) {
        if (s.disclosure != Disclosure::routing) continue;
        out.push_back({s.id, s.intent, s.level, std::nullopt, std::nullopt});
      } else {
        out.push_back({s.id, s.intent, s.level, s.description, s.preconditions});
      }
    }
    return out;
  }

 private:
  template <class Pred>
  const SkillSpec* pick(Pred match) const {
    const SkillSpec* best = nullptr;
    for (const auto& s : skills_) {
      if (match(s) && (!best || s.level < best->level)) best = &s;
    }
    return best;
  }

  PredicateCatalog catalog_;
  std::vector<SkillSpec> skills_;
};

}  // namespace sdof
