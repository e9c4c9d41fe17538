#pragma once

// Runs labeled scenario suites through the dispatcher and records one
// StepRecord per dispatched message.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "sdof/dispatcher.hpp"
#include "sdof/scenarios.hpp"

namespace sdof {

struct RunConfig {
  DispatchToggles toggles;
  std::uint64_t seed = 0;
  unsigned parallel = 1;
};

struct ScenarioOutcome {
  std::string scenario_id;
  ScenarioType type = ScenarioType::normal;
  bool completed = false;
  std::vector<StageId> final_stages;  // one per lane
};

struct SuiteRun {
  std::string domain;
  RunConfig config;
  std::vector<Scenario> scenarios;
  std::vector<ScenarioOutcome> outcomes;  // parallel to scenarios
  std::vector<StepRecord> steps;          // scenario order, then dispatch order
};

inline std::string goal_id_for(const std::string& scenario_id, int lane) {
  return scenario_id + "#" + std::to_string(lane);
}

/// Message indices in dispatch order. Multi-lane scenarios interleave their
/// lanes by a schedule derived from the seed and the scenario id; order
/// within a lane is preserved.
inline std::vector<std::size_t> dispatch_order(const Scenario& s, std::uint64_t seed) {
  std::vector<std::size_t> order;
  if (s.lanes <= 1) {
    for (std::size_t i = 0; i < s.messages.size(); ++i) order.push_back(i);
    return order;
  }
  std::vector<std::vector<std::size_t>> queues(static_cast<std::size_t>(s.lanes));
  for (std::size_t i = 0; i < s.messages.size(); ++i) {
    queues.at(static_cast<std::size_t>(s.messages[i].lane)).push_back(i);
  }
  const auto salt = std::stoull(json_util::digest(Json(s.scenario_id)), nullptr, 16);
  std::mt19937_64 rng(seed ^ salt);
  std::vector<std::size_t> heads(queues.size(), 0);
  while (order.size() < s.messages.size()) {
    std::vector<std::size_t> open;
    for (std::size_t l = 0; l < queues.size(); ++l) {
      if (heads[l] < queues[l].size()) open.push_back(l);
    }
    const auto lane = open[static_cast<std::size_t>(rng() % open.size())];
    order.push_back(queues[lane][heads[lane]++]);
  }
  return order;
}

namespace detail {

inline bool scenario_completed(const Scenario& s, const std::vector<StepRecord>& steps,
                               const std::vector<StageId>& finals) {
  if (std::any_of(finals.begin(), finals.end(),
                  [&](const StageId& f) { return f != s.expected_final_stage; })) {
    return false;
  }
  for (const auto& st : steps) {
    const auto idx = static_cast<std::size_t>(st.turn_index);
    if (s.expected_outcomes && (*s.expected_outcomes)[idx] != st.outcome) return false;
    if (st.expected_legal) {
      if (st.outcome != Outcome::success || st.sub_reason) return false;
    } else if (!st.blocked()) {
      return false;
    }
  }
  return true;
}

inline StepRecord run_step(const Scenario& s, const LabeledMessage& m, const DispatchDeps& deps,
                           DispatchToggles toggles) {
  StepRecord st;
  st.scenario_id = s.scenario_id;
  st.domain = s.domain;
  st.type = s.type;
  st.lane = m.lane;
  st.turn_index = m.turn_index;
  st.goal_id = goal_id_for(s.scenario_id, m.lane);
  st.text = m.text;
  if (m.intent) st.annotated_intent = m.intent->str();
  st.expected_legal = m.expected_legal;
  st.expected_stage_after = m.expected_stage_after;

  const auto r = dispatch_with_config(m.text, st.goal_id, deps, toggles);
  st.routed_intent = r.intent ? r.intent->str() : kUnknownIntent;
  st.routed_by_pattern = r.routing.known() && r.routing.mode == RoutingDecision::Mode::pattern;
  st.outcome = r.outcome;
  st.sub_reason = r.sub_reason;
  st.stage_before = r.stage_before;
  st.stage_after = r.stage_after;
  st.stage_legal = r.stage_legal;
  st.violation = r.violation;
  st.precondition_enforced = r.precondition_enforced;
  st.executed = r.executed;
  st.audited = r.audited;
  st.event_seq = r.event_seq;
  st.route_ns = r.route_ns;
  st.gate_ns = r.gate_ns;
  st.exec_ns = r.exec_ns;
  return st;
}

}  // namespace detail

/// Dispatches every scenario against fresh goals named
/// "<scenario_id>#<lane>". Scenarios are distributed over `parallel`
/// workers; each scenario runs on one worker.
inline SuiteRun run_suite(const DomainBundle& domain, std::vector<Scenario> scenarios,
                          const RunConfig& config, GoalManager& goals) {
  if (!goals.has_domain(domain.name)) {
    goals.register_domain(domain.name, domain.automaton, domain.initial_state);
  }
  MockExecutor executor(domain.skill_fixtures, config.seed);
  const DispatchDeps deps{*domain.registry, *domain.router, goals, executor, nullptr};

  SuiteRun run;
  run.domain = domain.name;
  run.config = config;
  run.outcomes.resize(scenarios.size());
  std::vector<std::vector<StepRecord>> per_scenario(scenarios.size());

  auto run_one = [&](std::size_t k) {
    const auto& s = scenarios[k];
    for (int lane = 0; lane < s.lanes; ++lane) {
      goals.create_goal(domain.name, goal_id_for(s.scenario_id, lane));
    }
    auto& steps = per_scenario[k];
    for (auto idx : dispatch_order(s, config.seed)) {
      steps.push_back(detail::run_step(s, s.messages[idx], deps, config.toggles));
    }
    ScenarioOutcome out{s.scenario_id, s.type, false, {}};
    for (int lane = 0; lane < s.lanes; ++lane) {
      out.final_stages.push_back(goals.goal(goal_id_for(s.scenario_id, lane)).current_stage);
    }
    out.completed = detail::scenario_completed(s, steps, out.final_stages);
    run.outcomes[k] = std::move(out);
  };

  const auto workers =
      std::max(1u, std::min<unsigned>(config.parallel, static_cast<unsigned>(scenarios.size())));
  if (workers <= 1) {
    for (std::size_t k = 0; k < scenarios.size(); ++k) run_one(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k; (k = next.fetch_add(1)) < scenarios.size();) {
          try {
            run_one(k);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
            next = scenarios.size();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  // A goal's steps are traceable when its event log replays to the live state.
  std::map<std::string, bool> replayable;
  for (auto& steps : per_scenario) {
    for (auto& st : steps) {
      auto [it, fresh] = replayable.try_emplace(st.goal_id, false);
      if (fresh) {
        try {
          it->second = goals.replay(st.goal_id) == goals.live_state(st.goal_id);
        } catch (const Error&) {
          it->second = false;
        }
      }
      st.traceable = st.audited && it->second;
      run.steps.push_back(std::move(st));
    }
  }
  run.scenarios = std::move(scenarios);
  return run;
}

}  // namespace sdof
