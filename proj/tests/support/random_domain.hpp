#pragma once

// Random automata, registries and routers for property tests. Every intent
// routes by the exact message "<intent name>"; predicates are boolean flags
// f0..f5 plus one predicate whose field never exists.

#include <algorithm>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "sdof/sdof.hpp"

namespace sdof::testing {

inline constexpr int kFlagCount = 6;
inline constexpr const char* kGhostPredicate = "ghost";

struct RandomDomain {
  AutomatonDefinition def;
  std::shared_ptr<const WorkflowAutomaton> automaton;
  std::shared_ptr<Registry> registry;
  std::shared_ptr<const IntentRouter> router;
  std::vector<SkillSpec> skills;  // as registered, "*" resolved
  Json fixtures = Json::object();
  Json initial_state = Json::object();
};

inline std::string flag_name(int k) { return "f" + std::to_string(k); }

inline PredicateCatalog random_catalog() {
  PredicateCatalog c;
  for (int k = 0; k < kFlagCount; ++k) {
    c.add(flag_name(k), "flag " + flag_name(k), PredicateCatalog::flag_is_set(flag_name(k)));
  }
  c.add(kGhostPredicate, "reads an absent field", PredicateCatalog::flag_is_set("absent"));
  return c;
}

struct RandomDomainShape {
  int max_stages = 6;
  int max_intents = 20;
  double edge_p = 0.35;
  double bind_p = 0.5;
  double stay_p = 0.3;
  int max_pre = 4;
};

inline RandomDomain make_random_domain(std::mt19937_64& rng, RandomDomainShape shape = {}) {
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto coin = [&](double p) { return std::bernoulli_distribution(p)(rng); };

  RandomDomain d;
  const int n_stages = uni(2, shape.max_stages);
  const int n_intents = uni(1, shape.max_intents);
  for (int s = 0; s < n_stages; ++s) d.def.stages.emplace_back("s" + std::to_string(s));
  d.def.initial = d.def.stages.front();
  for (const auto& a : d.def.stages) {
    for (const auto& b : d.def.stages) {
      if (a != b && coin(shape.edge_p)) d.def.transitions.emplace_back(a, b);
    }
  }
  for (int i = 0; i < n_intents; ++i) {
    IntentId intent("i" + std::to_string(i));
    d.def.intents.push_back(intent);
    auto& bound = d.def.binding[intent];
    for (const auto& s : d.def.stages) {
      if (coin(shape.bind_p)) bound.push_back(s);
    }
    d.def.stage_map[intent] =
        coin(shape.stay_p) ? std::nullopt
                           : std::optional<StageId>(d.def.stages[static_cast<std::size_t>(
                                 uni(0, n_stages - 1))]);
  }
  d.automaton = std::make_shared<const WorkflowAutomaton>(WorkflowAutomaton::build(d.def));
  d.registry = std::make_shared<Registry>(random_catalog());

  std::vector<std::string> predicates;
  for (int k = 0; k < kFlagCount; ++k) predicates.push_back(flag_name(k));
  predicates.emplace_back(kGhostPredicate);

  int next_skill = 0;
  std::vector<IntentPattern> table;
  for (const auto& intent : d.def.intents) {
    table.push_back({intent, {"=" + intent.str()}, 0});
    const auto& bound = d.def.binding.at(intent);
    if (bound.empty()) continue;
    const int n_skills = uni(0, 2);
    for (int k = 0; k < n_skills; ++k) {
      SkillSpec s;
      s.id = "k" + std::to_string(next_skill++);
      s.intent = intent;
      s.level = static_cast<RiskLevel>(uni(0, 2));
      for (const auto& st : bound) {
        if (coin(0.7)) s.applicable_stages.insert(st);
      }
      if (s.applicable_stages.empty()) s.applicable_stages.insert(bound.front());
      std::shuffle(predicates.begin(), predicates.end(), rng);
      const int n_pre = uni(0, shape.max_pre);
      for (int p = 0; p < n_pre; ++p) {
        // The ghost predicate is rare so most skills stay reachable.
        if (predicates[static_cast<std::size_t>(p)] == kGhostPredicate && !coin(0.2)) continue;
        s.preconditions.push_back({predicates[static_cast<std::size_t>(p)], {}});
      }
      const int n_post = uni(0, 2);
      for (int p = 0; p < n_post; ++p) {
        s.postconditions.push_back(
            Effect{Effect::Op::set_flag, flag_name(uni(0, kFlagCount - 1)), Json(coin(0.75))});
      }
      if (s.level == RiskLevel::L0 &&
          s.applicable_stages.size() == d.def.stages.size() && !s.preconditions.empty()) {
        s.level = RiskLevel::L1;
      }
      d.registry->add(s, *d.automaton);
      d.skills.push_back(*d.registry->find(s.id));
      d.fixtures[s.id] = Json{{"skill", s.id}};
    }
  }
  d.router = std::make_shared<const IntentRouter>(std::move(table));
  for (int k = 0; k < kFlagCount; ++k) d.initial_state[flag_name(k)] = coin(0.3);
  return d;
}

inline DomainBundle as_bundle(const RandomDomain& d, std::string name = "rand") {
  return DomainBundle{std::move(name), d.automaton, d.registry, d.router, d.fixtures,
                      d.initial_state};
}

/// A random message: usually a declared intent name, sometimes noise.
inline std::string random_message(std::mt19937_64& rng, const RandomDomain& d) {
  if (std::bernoulli_distribution(0.05)(rng)) return "no such request";
  const auto& intents = d.def.intents;
  return intents[std::uniform_int_distribution<std::size_t>(0, intents.size() - 1)(rng)].str();
}

}  // namespace sdof::testing
