#pragma once

// StateAwareDispatch: route, gate on stage legality and preconditions,
// execute, apply postconditions, advance the stage, audit.
//
// Gate order: the intent-stage binding is checked before any skill is
// selected or executed (sub-reason pre_exec_stage_illegal). The stage-map
// transition is checked after execution (post_exec_transition_rejected);
// a rejected transition commits neither the stage nor the postconditions.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "sdof/automaton.hpp"
#include "sdof/executor.hpp"
#include "sdof/memory.hpp"
#include "sdof/registry.hpp"
#include "sdof/router.hpp"

namespace sdof {

struct DispatchToggles {
  bool stage_check = true;
  bool precondition_check = true;
  bool audit = true;

  friend bool operator==(const DispatchToggles&, const DispatchToggles&) = default;
};

struct DispatchResult {
  Outcome outcome = Outcome::success;
  std::optional<std::string> skill_id;
  StageId stage_before;
  StageId stage_after;
  std::optional<std::string> sub_reason;
  Json detail = Json::object();

  RoutingDecision routing;
  std::optional<IntentId> intent;
  bool stage_legal = false;
  // Evaluated whenever a skill was selected, enforced only when the
  // precondition gate is on.
  std::optional<PreconditionReport> preconditions;
  bool precondition_enforced = false;
  bool executed = false;
  // A stage-illegal or precondition-violating action was attempted.
  bool violation = false;
  bool audited = false;
  std::int64_t event_seq = 0;

  std::int64_t route_ns = 0;
  std::int64_t gate_ns = 0;
  std::int64_t exec_ns = 0;

  bool blocked() const noexcept {
    return outcome == Outcome::illegal_transition || outcome == Outcome::precondition_fail;
  }
};

struct DispatchDeps {
  const Registry& registry;
  const IntentRouter& router;
  GoalManager& goals;
  SkillExecutor& executor;
  const FallbackResolver* fallback = nullptr;
};

namespace detail {

inline std::int64_t elapsed_ns(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() -
                                                              since)
      .count();
}

}  // namespace detail

inline DispatchResult dispatch_with_config(std::string_view message, const std::string& goal_id,
                                           const DispatchDeps& deps, DispatchToggles toggles) {
  using steady = std::chrono::steady_clock;
  auto lease = deps.goals.serialize(goal_id);
  const WorkflowAutomaton& automaton = deps.goals.automaton_for(goal_id);
  const GoalRecord goal = deps.goals.goal(goal_id);
  const DispatchContext ctx = deps.goals.context(goal_id);
  const StageId& stage = goal.current_stage;

  DispatchResult r;
  r.stage_before = r.stage_after = stage;

  std::optional<SkillResult> result;
  std::vector<Effect> effects;
  Json next_state;

  auto finish = [&]() -> DispatchResult {
    const bool commit = r.outcome == Outcome::success && result && result->ok();
    if (toggles.audit) {
      ProcessEvent e;
      e.seq = deps.goals.last_seq(goal_id) + 1;
      e.timestamp = deps.goals.now(goal_id, e.seq);
      e.goal_id = goal_id;
      e.intent = r.intent ? r.intent->str() : kUnknownIntent;
      e.stage_before = r.stage_before;
      e.stage_after = r.stage_after;
      e.skill_id = r.skill_id;
      e.outcome = r.outcome;
      e.sub_reason = r.sub_reason;
      if (r.preconditions) e.precondition_results = r.preconditions->results;
      e.payload = result ? result->payload : Json(nullptr);
      e.payload_digest = json_util::digest(e.payload);
      if (commit) e.effects = effects;
      deps.goals.log_event(e);  // write-ahead: persisted before state moves
      r.audited = true;
      r.event_seq = e.seq;
    }
    if (commit) {
      if (r.stage_after != r.stage_before) {
        deps.goals.advance_stage(goal_id, r.stage_before, r.stage_after);
      }
      deps.goals.set_business_state(goal_id, std::move(next_state));
    }
    if (toggles.audit) deps.goals.checkpoint(goal_id);
    return r;
  };

  const auto route_start = steady::now();
  r.routing = deps.router.identify(message, ctx, deps.fallback);
  r.route_ns = detail::elapsed_ns(route_start);
  if (!r.routing.intent || !automaton.has_intent(*r.routing.intent)) {
    r.outcome = Outcome::skill_not_found;
    r.sub_reason = sub_reason::intent_unresolved;
    if (!r.routing.error.empty()) r.detail["routing_error"] = r.routing.error;
    return finish();
  }
  const IntentId intent = *r.routing.intent;
  r.intent = intent;

  const auto gate_start = steady::now();
  r.stage_legal = automaton.is_stage_legal(intent, stage);
  if (toggles.stage_check && !r.stage_legal) {
    r.outcome = Outcome::illegal_transition;
    r.sub_reason = sub_reason::pre_exec_stage_illegal;
    r.violation = true;
    r.detail["stage"] = stage.str();
    r.gate_ns = detail::elapsed_ns(gate_start);
    return finish();
  }

  const SkillSpec* skill = toggles.stage_check ? deps.registry.select_skill(intent, stage)
                                               : deps.registry.select_by_intent(intent);
  if (!skill) {
    r.outcome = Outcome::skill_not_found;
    r.sub_reason = sub_reason::no_skill_for_stage;
    r.violation = !r.stage_legal;
    r.gate_ns = detail::elapsed_ns(gate_start);
    return finish();
  }
  r.skill_id = skill->id;

  r.preconditions = deps.registry.check_preconditions(*skill, ctx);
  r.precondition_enforced = toggles.precondition_check;
  r.violation = !r.stage_legal || !r.preconditions->satisfied;
  if (toggles.precondition_check && !r.preconditions->satisfied) {
    r.outcome = Outcome::precondition_fail;
    r.detail["first_failure"] = r.preconditions->first_failure->name;
    r.gate_ns = detail::elapsed_ns(gate_start);
    return finish();
  }
  r.gate_ns = detail::elapsed_ns(gate_start);

  const auto exec_start = steady::now();
  try {
    result = deps.executor.execute(*skill, ctx);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    result = SkillResult{SkillResult::Status::failed, nullptr, e.what()};
  }
  r.exec_ns = detail::elapsed_ns(exec_start);
  r.executed = true;

  if (!result->ok()) {
    // Executor failure: recorded on the success path, nothing committed.
    r.outcome = Outcome::success;
    r.sub_reason = sub_reason::execution_error;
    r.detail["error"] = result->error;
    return finish();
  }

  effects = resolve_effects(*skill, *result);
  next_state = ctx.business_state;
  apply_effects(next_state, effects);

  const StageId target = automaton.target_stage(intent, stage);
  if (target != stage && !automaton.can_transition(stage, target)) {
    r.outcome = Outcome::illegal_transition;
    r.sub_reason = sub_reason::post_exec_transition_rejected;
    r.detail["rejected_transition"] = Json::array({stage.str(), target.str()});
    return finish();
  }
  r.stage_after = target;
  r.outcome = Outcome::success;
  r.detail["payload_digest"] = json_util::digest(result->payload);
  return finish();
}

inline DispatchResult dispatch(std::string_view message, const std::string& goal_id,
                               const DispatchDeps& deps) {
  return dispatch_with_config(message, goal_id, deps, DispatchToggles{});
}

/// Convenience holder binding a dependency set and a toggle configuration.
class StateAwareDispatcher {
 public:
  StateAwareDispatcher(DispatchDeps deps, DispatchToggles toggles = {})
      : deps_(deps), toggles_(toggles) {}

  DispatchResult operator()(std::string_view message, const std::string& goal_id) const {
    return dispatch_with_config(message, goal_id, deps_, toggles_);
  }

  const DispatchToggles& toggles() const noexcept { return toggles_; }

 private:
  DispatchDeps deps_;
  DispatchToggles toggles_;
};

}  // namespace sdof
