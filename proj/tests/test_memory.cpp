#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "support/random_domain.hpp"
#include "support/shipped.hpp"

namespace sdof {
namespace {

using testing::Harness;
namespace fs = std::filesystem;

const StageId kInit("init"), kSrc("src"), kInt("int"), kOff("off"), kClose("close");

struct TempDir {
  TempDir() {
    path = fs::temp_directory_path() /
           ("sdof-mem-" + std::to_string(std::random_device{}()) + "-" +
            std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path path;
};

TEST(Memory, CreateGoalStartsAtInitial) {
  Harness h(testing::hr_bundle());
  const auto g = h.goals.create_goal("hr");
  EXPECT_EQ(g.current_stage, kInit);
  EXPECT_EQ(g.status, GoalStatus::active);
  EXPECT_EQ(h.goals.last_seq(g.goal_id), 0);
  EXPECT_NE(h.goals.create_goal("hr").goal_id, g.goal_id);
  EXPECT_THROW(h.goals.create_goal("nope"), ConfigError);
  EXPECT_THROW(h.goals.create_goal("hr", g.goal_id), ConflictError);
}

TEST(Memory, SgdGoalStartsAtFirstServiceStage) {
  const auto banks = load_domain(testing::domain_dir("Banks_1"));
  Harness h(banks);
  EXPECT_EQ(h.goals.create_goal("Banks_1").current_stage, StageId("CheckBalance"));
  const auto hotels = load_domain(testing::domain_dir("Hotels_1"));
  EXPECT_EQ(hotels.automaton->stages(),
            (std::vector<StageId>{StageId("SearchHotel"), StageId("ReserveHotel")}));
}

TEST(Memory, AdvanceStage) {
  Harness h(testing::hr_bundle());
  const auto g = h.goal();
  EXPECT_THROW(h.goals.advance_stage(g, kInit, kOff), TransitionRejected);
  EXPECT_EQ(h.goals.goal(g).current_stage, kInit);
  EXPECT_THROW(h.goals.advance_stage(g, kSrc, kInt), ConflictError);
  for (const auto& [from, to] : std::vector<std::pair<const char*, const char*>>{
           {"init", "src"}, {"src", "int"}, {"int", "off"}, {"off", "onb"}, {"onb", "close"}}) {
    h.goals.advance_stage(g, StageId(from), StageId(to));
  }
  EXPECT_EQ(h.goals.goal(g).current_stage, kClose);
  EXPECT_EQ(h.goals.goal(g).status, GoalStatus::closed);
}

ProcessEvent blank_event(const std::string& goal, std::int64_t seq) {
  ProcessEvent e;
  e.seq = seq;
  e.goal_id = goal;
  e.intent = "query_status";
  e.stage_before = e.stage_after = kInit;
  e.payload = nullptr;
  e.payload_digest = json_util::digest(e.payload);
  return e;
}

TEST(Memory, LogEventSequence) {
  Harness h(testing::hr_bundle());
  const auto g = h.goal();
  EXPECT_TRUE(h.goals.list_events(g).empty());
  h.goals.log_event(blank_event(g, 1));
  EXPECT_EQ(h.goals.list_events(g).at(0).seq, 1);
  EXPECT_THROW(h.goals.log_event(blank_event(g, 1)), IntegrityError);
  EXPECT_THROW(h.goals.log_event(blank_event(g, 3)), IntegrityError);
  EXPECT_THROW(h.goals.list_events("nope"), NotFoundError);
}

TEST(Memory, ZeroEventReplayIsInitialState) {
  Harness h(testing::hr_bundle());
  const auto g = h.goal();
  const auto s = h.goals.replay(g);
  EXPECT_EQ(s.stage, kInit);
  EXPECT_EQ(s.business_state, testing::hr_bundle().initial_state);
  EXPECT_EQ(s.last_seq, 0);
}

SuiteRun run_hr(GoalManager& goals, DispatchToggles t = {}) {
  return run_suite(testing::hr_bundle(), testing::hr_scenarios(), RunConfig{t, 7, 1}, goals);
}

TEST(Memory, SuiteEventsAllRetrievable) {
  GoalManager goals(std::make_shared<InMemoryEventStore>(), logical_clock);
  const auto run = run_hr(goals);
  std::size_t total = 0;
  for (const auto& g : goals.goal_ids()) total += goals.list_events(g).size();
  EXPECT_EQ(total, 882u);
  EXPECT_EQ(run.steps.size(), 882u);
}

TEST(Memory, ReplayMatchesLiveForEveryGoal) {
  GoalManager goals(std::make_shared<InMemoryEventStore>(), logical_clock);
  run_hr(goals);
  for (const auto& g : goals.goal_ids()) ASSERT_EQ(goals.replay(g), goals.live_state(g)) << g;
}

TEST(Memory, PrefixReplayReconstructsIntermediateState) {
  Harness h(testing::hr_bundle());
  const auto& a = *testing::hr_bundle().automaton;
  for (std::size_t k = 0; k < 30; ++k) {
    const auto& s = testing::hr_scenarios()[k];
    const auto g = h.goal(s.scenario_id);
    std::vector<GoalState> live{h.goals.live_state(g)};
    for (const auto& m : s.messages) {
      h.send(g, m.text);
      live.push_back(h.goals.live_state(g));
    }
    const auto events = h.goals.list_events(g);
    for (std::size_t n = 0; n <= events.size(); ++n) {
      const std::vector<ProcessEvent> prefix(events.begin(),
                                             events.begin() + static_cast<std::ptrdiff_t>(n));
      ASSERT_EQ(replay_events(a.initial(), testing::hr_bundle().initial_state, prefix, &a),
                live[n]);
    }
  }
}

TEST(Memory, CorruptLogNamesFirstBadSeq) {
  Harness h(testing::hr_bundle());
  const auto g = h.goal();
  for (const char* m : {"Create a job demand", "Pull candidates", "status", "Screen resumes"}) {
    h.send(g, m);
  }
  auto events = h.goals.list_events(g);
  auto gap = events;
  gap.erase(gap.begin() + 1);
  try {
    replay_events(kInit, testing::hr_bundle().initial_state, gap);
    FAIL();
  } catch (const IntegrityError& e) {
    EXPECT_EQ(e.first_bad_seq(), 2);
  }
  auto tampered = events;
  tampered[2].payload = Json{{"forged", true}};
  try {
    replay_events(kInit, testing::hr_bundle().initial_state, tampered);
    FAIL();
  } catch (const IntegrityError& e) {
    EXPECT_EQ(e.first_bad_seq(), 3);
  }
}

TEST(Memory, FilteredListsPartitionTheLog) {
  GoalManager goals(std::make_shared<InMemoryEventStore>(), logical_clock);
  run_hr(goals);
  long illegal = 0;
  for (const auto& g : goals.goal_ids()) {
    const auto all = goals.list_events(g);
    std::vector<ProcessEvent> merged;
    for (auto o : {Outcome::success, Outcome::skill_not_found, Outcome::precondition_fail,
                   Outcome::illegal_transition}) {
      const auto part = goals.list_events(g, o);
      for (const auto& e : part) ASSERT_EQ(e.outcome, o);
      merged.insert(merged.end(), part.begin(), part.end());
    }
    std::sort(merged.begin(), merged.end(),
              [](const auto& a, const auto& b) { return a.seq < b.seq; });
    ASSERT_EQ(merged.size(), all.size());
    for (std::size_t k = 0; k < all.size(); ++k) ASSERT_EQ(merged[k].seq, all[k].seq);
    illegal += static_cast<long>(goals.list_events(g, Outcome::illegal_transition).size());
  }
  EXPECT_EQ(illegal, 16);
}

TEST(Memory, StageChangesHaveSuccessProvenance) {
  GoalManager goals(std::make_shared<InMemoryEventStore>(), logical_clock);
  run_hr(goals);
  for (const auto& g : goals.goal_ids()) {
    StageId stage = kInit;
    for (const auto& e : goals.list_events(g)) {
      ASSERT_EQ(e.stage_before, stage);
      if (e.stage_after != e.stage_before) {
        ASSERT_EQ(e.outcome, Outcome::success);
      }
      if (e.outcome == Outcome::success) stage = e.stage_after;
    }
    ASSERT_EQ(stage, goals.goal(g).current_stage);
  }
}

TEST(Memory, EventJsonRoundTripKeepsKeyOrder) {
  Harness h(testing::hr_bundle());
  const auto g = h.goal();
  h.send(g, "Create a job demand");
  h.send(g, "Screen resumes");
  for (const auto& e : h.goals.list_events(g)) {
    const auto j = event_to_json(e);
    EXPECT_EQ(j.begin().key(), "seq");
    const auto back = event_from_json(Json::parse(j.dump()));
    EXPECT_EQ(event_to_json(back).dump(), j.dump());
  }
}

TEST(Memory, FileStoreTracesAndSnapshots) {
  TempDir dir;
  {
    GoalManager goals(std::make_shared<FileEventStore>(dir.path, 2), logical_clock);
    goals.register_domain("hr", testing::hr_bundle().automaton,
                          testing::hr_bundle().initial_state);
    MockExecutor ex(testing::hr_bundle().skill_fixtures);
    const DispatchDeps deps{*testing::hr_bundle().registry, *testing::hr_bundle().router, goals,
                            ex, nullptr};
    goals.create_goal("hr", "file#0");
    for (const char* m : {"Create a job demand", "Pull candidates", "Schedule interview"}) {
      dispatch(m, "file#0", deps);
    }
    EXPECT_EQ(goals.replay("file#0"), goals.live_state("file#0"));
  }
  const auto trace = FileEventStore::read_trace(dir.path / "traces" / "file_0.jsonl");
  ASSERT_EQ(trace.size(), 3u);
  EXPECT_EQ(trace[2].outcome, Outcome::precondition_fail);
  const auto snap =
      snapshot_from_json(json_util::read_file((dir.path / "snapshots" / "file_0.json").string()));
  EXPECT_EQ(snap.goal.goal_id, "file#0");
  EXPECT_GE(snap.last_seq, 2);
}

TEST(MemoryConcurrency, SeqGaplessUnderInterleavedGoals) {
  std::mt19937_64 rng(31);
  const auto rd = testing::make_random_domain(rng);
  const auto bundle = testing::as_bundle(rd);
  Harness h(bundle);
  for (int k = 0; k < 3; ++k) h.goal("g" + std::to_string(k));
  std::vector<std::thread> pool;
  for (int t = 0; t < 4; ++t) {
    pool.emplace_back([&, t] {
      std::mt19937_64 local(static_cast<std::uint64_t>(t));
      for (int k = 0; k < 100; ++k) {
        const auto g = "g" + std::to_string(k % 3);
        h.send(g, testing::random_message(local, rd));
      }
    });
  }
  for (auto& t : pool) t.join();
  long total = 0;
  for (const auto& g : h.goals.goal_ids()) {
    const auto events = h.goals.list_events(g);
    total += static_cast<long>(events.size());
    for (std::size_t k = 0; k < events.size(); ++k) ASSERT_EQ(events[k].seq, (long)k + 1);
    EXPECT_EQ(h.goals.replay(g), h.goals.live_state(g));
  }
  EXPECT_EQ(total, 400);
}

}  // namespace
}  // namespace sdof
