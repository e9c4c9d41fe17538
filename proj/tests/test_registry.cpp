#include <gtest/gtest.h>

#include <random>

#include "support/random_domain.hpp"
#include "support/shipped.hpp"

namespace sdof {
namespace {

using testing::make_random_domain;

SkillSpec skill(std::string id, const char* intent, RiskLevel level,
                std::set<StageId> stages, std::vector<std::string> pre = {}) {
  SkillSpec s;
  s.id = std::move(id);
  s.intent = IntentId(intent);
  s.level = level;
  s.applicable_stages = std::move(stages);
  for (auto& p : pre) s.preconditions.push_back({std::move(p), {}});
  return s;
}

SkillSpec everywhere(std::string id, const char* intent, RiskLevel level) {
  auto s = skill(std::move(id), intent, level, {});
  s.all_stages = true;
  return s;
}

const StageId kInit("init"), kSrc("src"), kInt("int"), kOff("off"), kOnb("onb"), kClose("close");

TEST(Registry, TenSkillRegistryHasFourL0FourL1TwoL2) {
  const auto& a = *testing::hr_bundle().automaton;
  Registry r;
  r.add(everywhere("get_job_list", "get_job_list", RiskLevel::L0), a);
  r.add(everywhere("get_applicant_list", "list_candidates", RiskLevel::L0), a);
  r.add(skill("pull_parse", "pull_candidates", RiskLevel::L1, {kSrc}, {"position_exists"}), a);
  r.add(skill("screen", "screen_resume", RiskLevel::L1, {kSrc},
              {"position_exists", "candidates_pulled"}),
        a);
  r.add(everywhere("get_goal_status", "query_status", RiskLevel::L0), a);
  r.add(everywhere("get_position_detail", "view_position", RiskLevel::L0), a);
  r.add(skill("schedule_interview", "schedule_interview", RiskLevel::L1, {kInt},
              {"candidates_screened"}),
        a);
  r.add(skill("send_offer", "send_offer", RiskLevel::L1, {kOff}, {"interview_evaluated"}), a);
  r.add(everywhere("ask_missing", "ask_missing", RiskLevel::L2), a);
  r.add(everywhere("human_handoff", "escalate", RiskLevel::L2), a);
  EXPECT_EQ(r.size(), 10u);
  std::map<RiskLevel, int> by_level;
  for (const auto& s : r.skills()) ++by_level[s.level];
  EXPECT_EQ(by_level[RiskLevel::L0], 4);
  EXPECT_EQ(by_level[RiskLevel::L1], 4);
  EXPECT_EQ(by_level[RiskLevel::L2], 2);
}

TEST(Registry, DuplicateIdIsConflict) {
  const auto& a = *testing::hr_bundle().automaton;
  Registry r;
  r.add(everywhere("get_job_list", "get_job_list", RiskLevel::L0), a);
  EXPECT_THROW(r.add(everywhere("get_job_list", "get_job_list", RiskLevel::L0), a),
               ConflictError);
  EXPECT_EQ(r.size(), 1u);
}

TEST(Registry, ForeignStageIsConfigFaultNamingStage) {
  const auto& a = *testing::hr_bundle().automaton;
  Registry r;
  try {
    r.add(skill("screen", "screen_resume", RiskLevel::L1, {StageId("interview_typo")}), a);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("interview_typo"), std::string::npos);
  }
}

TEST(Registry, UnresolvablePredicateIsBindingFault) {
  const auto& a = *testing::hr_bundle().automaton;
  Registry r;
  try {
    r.add(skill("screen", "screen_resume", RiskLevel::L1, {kSrc}, {"pi_unknown"}), a);
    FAIL();
  } catch (const BindingError& e) {
    EXPECT_NE(std::string(e.what()).find("pi_unknown"), std::string::npos);
  }
}

TEST(Registry, SkillOutsideIntentBindingIsRejected) {
  const auto& a = *testing::hr_bundle().automaton;
  Registry r;
  EXPECT_THROW(r.add(skill("screen", "screen_resume", RiskLevel::L1, {kOff}), a), ConfigError);
}

TEST(Registry, UniversalL0WithPreconditionsIsRejected) {
  const auto& a = *testing::hr_bundle().automaton;
  Registry r;
  auto s = everywhere("get_job_list", "get_job_list", RiskLevel::L0);
  s.preconditions.push_back({"position_exists", {}});
  EXPECT_THROW(r.add(s, a), ConfigError);
}

TEST(Registry, ShippedSelection) {
  const auto& r = *testing::hr_bundle().registry;
  const auto* s = r.select_skill(IntentId("screen_resume"), kSrc);
  ASSERT_NE(s, nullptr);
  EXPECT_EQ(s->id, "screen");
  EXPECT_EQ(s->level, RiskLevel::L1);
  EXPECT_EQ(r.select_skill(IntentId("screen_resume"), kOff), nullptr);
}

TEST(Registry, ShippedSkillsStayInsideBinding) {
  const auto& b = testing::hr_bundle();
  for (const auto& s : b.registry->skills()) {
    for (const auto& st : s.applicable_stages) {
      EXPECT_TRUE(b.automaton->is_stage_legal(s.intent, st)) << s.id << "@" << st.str();
    }
  }
}

TEST(Registry, LowestLevelThenRegistrationOrderWins) {
  const auto& a = *testing::hr_bundle().automaton;
  Registry r;
  r.add(skill("b1", "screen_resume", RiskLevel::L2, {kSrc}), a);
  r.add(skill("b2", "screen_resume", RiskLevel::L1, {kSrc}), a);
  r.add(skill("b3", "screen_resume", RiskLevel::L1, {kSrc}), a);
  EXPECT_EQ(r.select_skill(IntentId("screen_resume"), kSrc)->id, "b2");
}

TEST(RegistryProperty, SelectionMatchesLinearScan) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto d = make_random_domain(rng, {.max_intents = 5});
    for (const auto& i : d.def.intents) {
      for (const auto& st : d.def.stages) {
        const SkillSpec* want = nullptr;
        for (const auto& s : d.skills) {
          if (s.intent == i && s.applicable_stages.contains(st) &&
              (!want || s.level < want->level)) {
            want = &s;
          }
        }
        const auto* got = d.registry->select_skill(i, st);
        ASSERT_EQ(got == nullptr, want == nullptr);
        if (got) {
          ASSERT_EQ(got->id, want->id);
          ASSERT_TRUE(got->applicable_stages.contains(st));
        }
      }
    }
  }
}

TEST(Registry, ScreenReportsSecondPredicateWhenCandidatesMissing) {
  const auto& b = testing::hr_bundle();
  DispatchContext ctx{"g", b.initial_state, {}};
  ctx.business_state["position_exists"] = true;
  const auto before = ctx;
  const auto rep = b.registry->check_preconditions(*b.registry->find("screen"), ctx);
  EXPECT_FALSE(rep.satisfied);
  ASSERT_TRUE(rep.first_failure);
  EXPECT_EQ(rep.first_failure->name, "candidates_pulled");
  ASSERT_EQ(rep.results.size(), 2u);
  EXPECT_TRUE(rep.results[0].value);
  EXPECT_FALSE(rep.results[1].value);
  EXPECT_EQ(ctx, before);
}

TEST(Registry, EmptyPreconditionsAreVacuouslySatisfied) {
  const auto& b = testing::hr_bundle();
  const auto rep =
      b.registry->check_preconditions(*b.registry->find("get_job_list"), DispatchContext{});
  EXPECT_TRUE(rep.satisfied);
  EXPECT_TRUE(rep.results.empty());
  EXPECT_FALSE(rep.first_failure);
}

TEST(Registry, MissingFieldBecomesTaggedFalse) {
  const auto& b = testing::hr_bundle();
  const auto rep =
      b.registry->check_preconditions(*b.registry->find("screen"), DispatchContext{});
  EXPECT_FALSE(rep.satisfied);
  ASSERT_EQ(rep.results.size(), 2u);
  for (const auto& r : rep.results) {
    EXPECT_FALSE(r.value);
    EXPECT_TRUE(r.evaluation_error);
  }
}

TEST(RegistryProperty, PreconditionReportIsPureConjunction) {
  std::mt19937_64 rng(13);
  const auto catalog = testing::random_catalog();
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = make_random_domain(rng);
    for (const auto& s : d.skills) {
      DispatchContext ctx{"g", Json::object(), {}};
      for (int k = 0; k < testing::kFlagCount; ++k) {
        ctx.business_state[testing::flag_name(k)] = std::bernoulli_distribution(0.5)(rng);
      }
      const auto before = ctx;
      const auto r1 = d.registry->check_preconditions(s, ctx);
      const auto r2 = d.registry->check_preconditions(s, ctx);
      bool all = true;
      for (const auto& p : s.preconditions) {
        const auto it = ctx.business_state.find(p.name);
        all = all && it != ctx.business_state.end() && it->get<bool>();
      }
      ASSERT_EQ(r1.satisfied, all);
      ASSERT_EQ(r1.results.size(), s.preconditions.size());
      bool fold = true;
      for (std::size_t k = 0; k < r1.results.size(); ++k) {
        ASSERT_EQ(r1.results[k].ref.name, s.preconditions[k].name);
        ASSERT_EQ(r1.results[k].value, r2.results[k].value);
        fold = fold && r1.results[k].value;
      }
      ASSERT_EQ(fold, r1.satisfied);
      ASSERT_EQ(ctx, before);
    }
  }
}

TEST(Registry, PullParseSetsCandidatesPulled) {
  const auto& b = testing::hr_bundle();
  DispatchContext ctx{"g", b.initial_state, {}};
  const SkillResult res{SkillResult::Status::ok, b.skill_fixtures.at("pull_parse"), {}};
  const auto out = apply_postconditions(*b.registry->find("pull_parse"), ctx, res);
  EXPECT_EQ(out.business_state.at("candidates_pulled"), true);
  EXPECT_FALSE(out.business_state.at("candidates").empty());
  auto rest = out.business_state;
  rest.erase("candidates_pulled");
  rest.erase("candidates");
  auto orig = ctx.business_state;
  orig.erase("candidates_pulled");
  orig.erase("candidates");
  EXPECT_EQ(rest, orig);
}

TEST(Registry, EmptyPostconditionsLeaveContextUnchanged) {
  const auto& b = testing::hr_bundle();
  DispatchContext ctx{"g", b.initial_state, {}};
  const auto out = apply_postconditions(*b.registry->find("get_job_list"), ctx, SkillResult{});
  EXPECT_EQ(out, ctx);
}

TEST(Registry, UndefinedFieldEffectNamesField) {
  SkillSpec s = skill("x", "get_job_list", RiskLevel::L1, {});
  s.postconditions.push_back({Effect::Op::set_flag, "not_declared", true});
  try {
    apply_postconditions(s, DispatchContext{}, SkillResult{});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("not_declared"), std::string::npos);
  }
}

TEST(RegistryProperty, FlagEffectsAreIdempotent) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = make_random_domain(rng);
    for (const auto& s : d.skills) {
      DispatchContext ctx{"g", d.initial_state, {}};
      const auto once = apply_postconditions(s, ctx, SkillResult{});
      const auto twice = apply_postconditions(s, once, SkillResult{});
      ASSERT_EQ(once, twice);
    }
  }
}

TEST(Registry, RoutingManifestListsRoutingVisibleL0) {
  const auto& r = *testing::hr_bundle().registry;
  for (const auto& st : testing::hr_bundle().automaton->stages()) {
    const auto m = r.manifest(st, ManifestPhase::routing);
    std::set<std::string> ids;
    for (const auto& e : m) {
      ids.insert(e.id);
      EXPECT_FALSE(e.description);
      EXPECT_FALSE(e.preconditions);
    }
    for (const auto& s : r.skills()) {
      if (s.level == RiskLevel::L0 && s.disclosure == Disclosure::routing) {
        EXPECT_TRUE(ids.contains(s.id)) << s.id;
      }
    }
  }
}

TEST(Registry, EmptyRegistryHasEmptyManifest) {
  EXPECT_TRUE(Registry{}.manifest(kInit, ManifestPhase::routing).empty());
  EXPECT_TRUE(Registry{}.manifest(kInit, ManifestPhase::bound).empty());
}

TEST(Registry, BoundManifestAtSourcingMatchesFilter) {
  const auto& r = *testing::hr_bundle().registry;
  const auto m = r.manifest(kSrc, ManifestPhase::bound);
  std::vector<std::string> want;
  for (const auto& s : r.skills()) {
    if (s.applicable_stages.contains(kSrc)) want.push_back(s.id);
  }
  std::vector<std::string> got;
  for (const auto& e : m) {
    got.push_back(e.id);
    ASSERT_TRUE(e.preconditions);
    EXPECT_EQ(*e.preconditions, r.find(e.id)->preconditions);
  }
  EXPECT_EQ(got, want);
  EXPECT_NE(std::find(got.begin(), got.end(), "pull_parse"), got.end());
  EXPECT_NE(std::find(got.begin(), got.end(), "screen"), got.end());
}

TEST(Registry, RoutingManifestIsSubsetOfBound) {
  const auto& b = testing::hr_bundle();
  for (const auto& st : b.automaton->stages()) {
    std::set<std::string> bound;
    for (const auto& e : b.registry->manifest(st, ManifestPhase::bound)) bound.insert(e.id);
    for (const auto& e : b.registry->manifest(st, ManifestPhase::routing)) {
      EXPECT_TRUE(bound.contains(e.id));
    }
  }
}

TEST(Registry, SkillJsonRoundTrip) {
  const auto& r = *testing::hr_bundle().registry;
  for (const auto& s : r.skills()) {
    const auto back = skill_from_json(skill_to_json(s));
    EXPECT_EQ(back.id, s.id);
    EXPECT_EQ(back.level, s.level);
    EXPECT_EQ(back.postconditions, s.postconditions);
    EXPECT_EQ(back.preconditions, s.preconditions);
  }
  EXPECT_THROW(skill_from_json(Json{{"id", "x"}, {"bogus", 1}}), ConfigError);
}

}  // namespace
}  // namespace sdof
