#pragma once

// GoalManager: goal-scoped store for goals, positions, candidates and the
// append-only ProcessEvent log, with validated stage advancement and replay.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "sdof/automaton.hpp"
#include "sdof/context.hpp"
#include "sdof/ids.hpp"
#include "sdof/json_util.hpp"
#include "sdof/registry.hpp"

namespace sdof {

enum class Outcome { success, skill_not_found, precondition_fail, illegal_transition };

inline std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::success: return "SUCCESS";
    case Outcome::skill_not_found: return "SKILL_NOT_FOUND";
    case Outcome::precondition_fail: return "PRECONDITION_FAIL";
    case Outcome::illegal_transition: return "ILLEGAL_TRANSITION";
  }
  return "?";
}

inline Outcome outcome_from_string(const std::string& s) {
  if (s == "SUCCESS") return Outcome::success;
  if (s == "SKILL_NOT_FOUND") return Outcome::skill_not_found;
  if (s == "PRECONDITION_FAIL") return Outcome::precondition_fail;
  if (s == "ILLEGAL_TRANSITION") return Outcome::illegal_transition;
  throw SchemaError("unknown outcome '" + s + "'");
}

// Sub-reason tags carried by events and dispatch results.
namespace sub_reason {
inline constexpr const char* pre_exec_stage_illegal = "pre_exec_stage_illegal";
inline constexpr const char* post_exec_transition_rejected = "post_exec_transition_rejected";
inline constexpr const char* intent_unresolved = "intent_unresolved";
inline constexpr const char* no_skill_for_stage = "no_skill_for_stage";
inline constexpr const char* execution_error = "execution_error";
}  // namespace sub_reason

enum class GoalStatus { active, closed };

struct GoalRecord {
  std::string goal_id;
  std::string domain;
  StageId current_stage;
  std::int64_t created_at = 0;
  GoalStatus status = GoalStatus::active;
};

struct PositionRecord {
  std::string id;
  std::string goal_id;
  Json attributes;
};

using CandidateRecord = PositionRecord;

struct ProcessEvent {
  std::int64_t seq = 0;
  std::int64_t timestamp = 0;
  std::string goal_id;
  std::string intent;  // "UNKNOWN" when the router could not resolve one
  StageId stage_before;
  StageId stage_after;
  std::optional<std::string> skill_id;
  Outcome outcome = Outcome::success;
  std::optional<std::string> sub_reason;
  std::vector<PredicateResult> precondition_results;
  std::string payload_digest;
  // Resolved postcondition effects actually committed (SUCCESS only) and the
  // executor payload; both feed replay.
  std::vector<Effect> effects;
  Json payload;
};

inline constexpr const char* kUnknownIntent = "UNKNOWN";

/// Stable key order for diffable JSON-lines traces.
inline nlohmann::ordered_json event_to_json(const ProcessEvent& e) {
  nlohmann::ordered_json j;
  j["seq"] = e.seq;
  j["timestamp"] = e.timestamp;
  j["goal_id"] = e.goal_id;
  j["intent"] = e.intent;
  j["stage_before"] = e.stage_before.str();
  j["stage_after"] = e.stage_after.str();
  j["skill_id"] = e.skill_id ? nlohmann::ordered_json(*e.skill_id) : nlohmann::ordered_json();
  j["outcome"] = to_string(e.outcome);
  j["sub_reason"] = e.sub_reason ? nlohmann::ordered_json(*e.sub_reason) : nlohmann::ordered_json();
  auto& pre = j["precondition_results"] = nlohmann::ordered_json::array();
  for (const auto& r : e.precondition_results) {
    nlohmann::ordered_json pr;
    pr["predicate"] = r.ref.name;
    pr["value"] = r.value;
    if (r.evaluation_error) pr["evaluation_error"] = r.error;
    pre.push_back(std::move(pr));
  }
  j["payload_digest"] = e.payload_digest;
  auto& eff = j["effects"] = nlohmann::ordered_json::array();
  for (const auto& x : e.effects) {
    nlohmann::ordered_json ej;
    ej["op"] = to_string(x.op);
    ej["field"] = x.field;
    ej["value"] = nlohmann::ordered_json::parse(x.value.dump());
    eff.push_back(std::move(ej));
  }
  j["payload"] = nlohmann::ordered_json::parse(e.payload.dump());
  return j;
}

inline ProcessEvent event_from_json(const Json& j) {
  ProcessEvent e;
  try {
    e.seq = j.at("seq").get<std::int64_t>();
    e.timestamp = j.at("timestamp").get<std::int64_t>();
    e.goal_id = j.at("goal_id").get<std::string>();
    e.intent = j.at("intent").get<std::string>();
    e.stage_before = StageId(j.at("stage_before").get<std::string>());
    e.stage_after = StageId(j.at("stage_after").get<std::string>());
    if (!j.at("skill_id").is_null()) e.skill_id = j.at("skill_id").get<std::string>();
    e.outcome = outcome_from_string(j.at("outcome").get<std::string>());
    if (!j.at("sub_reason").is_null()) e.sub_reason = j.at("sub_reason").get<std::string>();
    for (const auto& pr : j.at("precondition_results")) {
      PredicateResult r;
      r.ref.name = pr.at("predicate").get<std::string>();
      r.value = pr.at("value").get<bool>();
      if (pr.contains("evaluation_error")) {
        r.evaluation_error = true;
        r.error = pr.at("evaluation_error").get<std::string>();
      }
      e.precondition_results.push_back(std::move(r));
    }
    e.payload_digest = j.at("payload_digest").get<std::string>();
    e.effects = j.at("effects").get<std::vector<Effect>>();
    e.payload = j.at("payload");
  } catch (const Json::exception& ex) {
    throw SchemaError(std::string("malformed process event: ") + ex.what());
  }
  return e;
}

/// Persistent goal state reconstructed by folding an event log.
struct GoalState {
  StageId stage;
  GoalStatus status = GoalStatus::active;
  Json business_state = Json::object();
  std::int64_t last_seq = 0;

  friend bool operator==(const GoalState&, const GoalState&) = default;
};

inline Json goal_state_to_json(const GoalState& s) {
  return Json{{"stage", s.stage.str()},
              {"status", s.status == GoalStatus::closed ? "closed" : "active"},
              {"flags", s.business_state},
              {"last_seq", s.last_seq}};
}

/// Folds events from seq 1 onto a base state. Throws IntegrityError naming
/// the first bad seq on gaps, digest mismatches or inconsistent stages.
/// `automaton` (optional) resolves the closed status of terminal stages.
inline GoalState replay_events(const StageId& initial_stage, const Json& initial_state,
                               const std::vector<ProcessEvent>& events,
                               const WorkflowAutomaton* automaton = nullptr) {
  GoalState s{initial_stage, GoalStatus::active, initial_state, 0};
  for (const auto& e : events) {
    const auto expected = s.last_seq + 1;
    if (e.seq != expected) {
      throw IntegrityError(expected, "sequence gap: expected seq " + std::to_string(expected) +
                                         ", found " + std::to_string(e.seq));
    }
    if (json_util::digest(e.payload) != e.payload_digest) {
      throw IntegrityError(e.seq, "payload digest mismatch at seq " + std::to_string(e.seq));
    }
    if (e.stage_before != s.stage) {
      throw IntegrityError(e.seq, "stage_before '" + e.stage_before.str() + "' at seq " +
                                      std::to_string(e.seq) + " does not follow '" +
                                      s.stage.str() + "'");
    }
    if (e.outcome != Outcome::success && e.stage_after != e.stage_before) {
      throw IntegrityError(e.seq, "blocked event changes stage at seq " + std::to_string(e.seq));
    }
    if (e.outcome == Outcome::success) {
      try {
        apply_effects(s.business_state, e.effects);
      } catch (const ConfigError& ex) {
        throw IntegrityError(e.seq, "seq " + std::to_string(e.seq) + ": " + ex.what());
      }
      s.stage = e.stage_after;
    }
    s.last_seq = e.seq;
  }
  if (automaton && automaton->has_stage(s.stage) && automaton->is_terminal(s.stage)) {
    s.status = GoalStatus::closed;
  }
  return s;
}

struct Snapshot {
  GoalRecord goal;
  Json flags = Json::object();
  std::int64_t last_seq = 0;
  StageId initial_stage;
  Json initial_state = Json::object();
};

inline Json snapshot_to_json(const Snapshot& s) {
  nlohmann::ordered_json j;
  j["goal_id"] = s.goal.goal_id;
  j["domain"] = s.goal.domain;
  j["current_stage"] = s.goal.current_stage.str();
  j["created_at"] = s.goal.created_at;
  j["status"] = s.goal.status == GoalStatus::closed ? "closed" : "active";
  j["flags"] = nlohmann::ordered_json::parse(s.flags.dump());
  j["last_seq"] = s.last_seq;
  j["initial_stage"] = s.initial_stage.str();
  j["initial_state"] = nlohmann::ordered_json::parse(s.initial_state.dump());
  return Json::parse(j.dump());
}

inline Snapshot snapshot_from_json(const Json& j) {
  Snapshot s;
  try {
    s.goal.goal_id = j.at("goal_id").get<std::string>();
    s.goal.domain = j.at("domain").get<std::string>();
    s.goal.current_stage = StageId(j.at("current_stage").get<std::string>());
    s.goal.created_at = j.at("created_at").get<std::int64_t>();
    s.goal.status = j.at("status").get<std::string>() == "closed" ? GoalStatus::closed
                                                                 : GoalStatus::active;
    s.flags = j.at("flags");
    s.last_seq = j.at("last_seq").get<std::int64_t>();
    s.initial_stage = StageId(j.at("initial_stage").get<std::string>());
    s.initial_state = j.at("initial_state");
  } catch (const Json::exception& ex) {
    throw SchemaError(std::string("malformed snapshot: ") + ex.what());
  }
  return s;
}

/// Storage backend for the audit log. A completed append must be visible to
/// every later load of the same goal.
class EventStore {
 public:
  virtual ~EventStore() = default;
  virtual void append(const ProcessEvent& event) = 0;
  virtual std::vector<ProcessEvent> load(const std::string& goal_id) const = 0;
  virtual void save_snapshot(const Snapshot&) {}
};

class InMemoryEventStore final : public EventStore {
 public:
  void append(const ProcessEvent& event) override {
    std::unique_lock lock(mu_);
    log_[event.goal_id].push_back(event);
  }

  std::vector<ProcessEvent> load(const std::string& goal_id) const override {
    std::shared_lock lock(mu_);
    auto it = log_.find(goal_id);
    return it == log_.end() ? std::vector<ProcessEvent>{} : it->second;
  }

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, std::vector<ProcessEvent>> log_;
};

/// JSON-lines trace per goal under <dir>/traces plus snapshots under
/// <dir>/snapshots, rewritten every `snapshot_interval` events.
class FileEventStore final : public EventStore {
 public:
  explicit FileEventStore(std::filesystem::path dir, std::int64_t snapshot_interval = 50)
      : dir_(std::move(dir)), snapshot_interval_(snapshot_interval) {
    std::filesystem::create_directories(dir_ / "traces");
    std::filesystem::create_directories(dir_ / "snapshots");
  }

  static std::string file_stem(const std::string& goal_id) {
    std::string out = goal_id;
    for (auto& c : out) {
      if (c == '/' || c == '\\' || c == ':' || c == '#' || c == ' ') c = '_';
    }
    return out;
  }

  std::filesystem::path trace_path(const std::string& goal_id) const {
    return dir_ / "traces" / (file_stem(goal_id) + ".jsonl");
  }
  std::filesystem::path snapshot_path(const std::string& goal_id) const {
    return dir_ / "snapshots" / (file_stem(goal_id) + ".json");
  }

  void append(const ProcessEvent& event) override {
    std::lock_guard lock(mu_);
    std::ofstream out(trace_path(event.goal_id), std::ios::app);
    if (!out) throw StorageError("cannot open trace for " + event.goal_id);
    out << event_to_json(event).dump() << '\n';
    out.flush();
    if (!out) throw StorageError("trace write failed for " + event.goal_id);
  }

  std::vector<ProcessEvent> load(const std::string& goal_id) const override {
    return read_trace(trace_path(goal_id));
  }

  void save_snapshot(const Snapshot& s) override {
    if (s.last_seq != 0 && snapshot_interval_ > 0 && s.last_seq % snapshot_interval_ != 0) {
      return;
    }
    write_snapshot(s);
  }

  void write_snapshot(const Snapshot& s) const {
    json_util::write_file(snapshot_path(s.goal.goal_id).string(), snapshot_to_json(s));
  }

  /// Missing file reads as an empty log. Malformed lines raise IntegrityError
  /// with the seq the line should have carried.
  static std::vector<ProcessEvent> read_trace(const std::filesystem::path& path) {
    std::vector<ProcessEvent> out;
    std::ifstream in(path);
    if (!in) return out;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto expected = static_cast<long long>(out.size()) + 1;
      try {
        out.push_back(event_from_json(Json::parse(line)));
      } catch (const std::exception& e) {
        throw IntegrityError(expected, "corrupt trace line for seq " + std::to_string(expected) +
                                           ": " + e.what());
      }
    }
    return out;
  }

 private:
  std::filesystem::path dir_;
  std::int64_t snapshot_interval_;
  std::mutex mu_;
};

/// Stamps an event; receives the goal and the seq being written (0 for goal
/// creation).
using Clock = std::function<std::int64_t(const std::string& goal_id, std::int64_t seq)>;

inline std::int64_t wall_clock_ms(const std::string&, std::int64_t) {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

/// Timestamp equals the seq; keeps traces byte-reproducible.
inline std::int64_t logical_clock(const std::string&, std::int64_t seq) { return seq; }

class TransitionRejected : public Error {
 public:
  using Error::Error;
};

class GoalManager {
 public:
  explicit GoalManager(std::shared_ptr<EventStore> store = std::make_shared<InMemoryEventStore>(),
                       Clock clock = wall_clock_ms)
      : store_(std::move(store)), clock_(std::move(clock)) {}

  GoalManager(const GoalManager&) = delete;
  GoalManager& operator=(const GoalManager&) = delete;

  void register_domain(std::string name, std::shared_ptr<const WorkflowAutomaton> automaton,
                       Json initial_state = Json::object()) {
    std::unique_lock lock(goals_mu_);
    domains_[std::move(name)] = Domain{std::move(automaton), std::move(initial_state)};
  }

  bool has_domain(const std::string& name) const {
    std::shared_lock lock(goals_mu_);
    return domains_.contains(name);
  }

  GoalRecord create_goal(const std::string& domain,
                         std::optional<std::string> goal_id = std::nullopt) {
    std::unique_lock lock(goals_mu_);
    auto d = domains_.find(domain);
    if (d == domains_.end()) throw ConfigError("unknown domain '" + domain + "'");
    std::string id = goal_id ? *goal_id : next_id();
    if (goals_.contains(id)) throw ConflictError("goal '" + id + "' already exists");
    auto slot = std::make_unique<Slot>();
    slot->automaton = d->second.automaton;
    slot->initial_state = d->second.initial_state;
    slot->record = GoalRecord{id, domain, slot->automaton->initial(), clock_(id, 0),
                              GoalStatus::active};
    slot->business_state = d->second.initial_state;
    auto record = slot->record;
    goals_.emplace(id, std::move(slot));
    return record;
  }

  GoalRecord goal(const std::string& goal_id) const {
    const auto& s = slot(goal_id);
    std::shared_lock lock(s.data);
    return s.record;
  }

  std::vector<std::string> goal_ids() const {
    std::shared_lock lock(goals_mu_);
    std::vector<std::string> out;
    for (const auto& [id, _] : goals_) out.push_back(id);
    return out;
  }

  const WorkflowAutomaton& automaton_for(const std::string& goal_id) const {
    return *slot(goal_id).automaton;
  }

  DispatchContext context(const std::string& goal_id) const {
    const auto& s = slot(goal_id);
    std::shared_lock lock(s.data);
    return DispatchContext{goal_id, s.business_state, s.session_vars};
  }

  /// Exclusive per-goal lock held by a dispatcher for one whole dispatch.
  [[nodiscard]] std::unique_lock<std::mutex> serialize(const std::string& goal_id) {
    return std::unique_lock<std::mutex>(slot(goal_id).dispatch);
  }

  std::int64_t last_seq(const std::string& goal_id) const {
    const auto& s = slot(goal_id);
    std::shared_lock lock(s.data);
    return s.last_seq;
  }

  std::int64_t now(const std::string& goal_id, std::int64_t seq) const {
    return clock_(goal_id, seq);
  }

  void advance_stage(const std::string& goal_id, const StageId& from, const StageId& to) {
    auto& s = slot(goal_id);
    std::unique_lock lock(s.data);
    if (s.record.current_stage != from) {
      throw ConflictError("goal '" + goal_id + "' is at '" + s.record.current_stage.str() +
                          "', not '" + from.str() + "'");
    }
    if (!s.automaton->can_transition(from, to)) {
      throw TransitionRejected("transition " + from.str() + "->" + to.str() +
                               " is not declared");
    }
    s.record.current_stage = to;
    s.record.status = s.automaton->is_terminal(to) ? GoalStatus::closed : GoalStatus::active;
  }

  /// GoalManager-mediated business state write.
  void set_business_state(const std::string& goal_id, Json state) {
    auto& s = slot(goal_id);
    std::unique_lock lock(s.data);
    s.business_state = std::move(state);
  }

  void set_session_var(const std::string& goal_id, const std::string& key, Json value) {
    auto& s = slot(goal_id);
    std::unique_lock lock(s.data);
    s.session_vars[key] = std::move(value);
  }

  /// Appends before returning; requires seq = previous seq + 1.
  void log_event(const ProcessEvent& event) {
    auto& s = slot(event.goal_id);
    std::unique_lock lock(s.data);
    if (event.seq != s.last_seq + 1) {
      throw IntegrityError(event.seq, "goal '" + event.goal_id + "': expected seq " +
                                          std::to_string(s.last_seq + 1) + ", got " +
                                          std::to_string(event.seq));
    }
    store_->append(event);
    s.last_seq = event.seq;
  }

  /// Persists a snapshot through the store (the file backend rate-limits).
  void checkpoint(const std::string& goal_id) { store_->save_snapshot(snapshot(goal_id)); }

  Snapshot snapshot(const std::string& goal_id) const {
    const auto& s = slot(goal_id);
    std::shared_lock lock(s.data);
    return Snapshot{s.record, s.business_state, s.last_seq, s.automaton->initial(),
                    s.initial_state};
  }

  GoalState live_state(const std::string& goal_id) const {
    const auto& s = slot(goal_id);
    std::shared_lock lock(s.data);
    return GoalState{s.record.current_stage, s.record.status, s.business_state, s.last_seq};
  }

  GoalState replay(const std::string& goal_id) const {
    const auto& s = slot(goal_id);
    return replay_events(s.automaton->initial(), s.initial_state, store_->load(goal_id),
                         s.automaton.get());
  }

  std::vector<ProcessEvent> list_events(const std::string& goal_id,
                                        std::optional<Outcome> filter = std::nullopt) const {
    slot(goal_id);
    auto events = store_->load(goal_id);
    if (filter) {
      std::erase_if(events, [&](const ProcessEvent& e) { return e.outcome != *filter; });
    }
    return events;
  }

  std::optional<PositionRecord> position(const std::string& goal_id) const {
    const auto& s = slot(goal_id);
    std::shared_lock lock(s.data);
    auto it = s.business_state.find("position");
    if (it == s.business_state.end() || !it->is_object()) return std::nullopt;
    return PositionRecord{it->value("id", goal_id + "/position"), goal_id, *it};
  }

  std::vector<CandidateRecord> candidates(const std::string& goal_id) const {
    const auto& s = slot(goal_id);
    std::shared_lock lock(s.data);
    std::vector<CandidateRecord> out;
    auto it = s.business_state.find("candidates");
    if (it == s.business_state.end() || !it->is_array()) return out;
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& c = (*it)[i];
      out.push_back({c.is_object() ? c.value("id", std::to_string(i)) : std::to_string(i),
                     goal_id, c});
    }
    return out;
  }

  EventStore& store() noexcept { return *store_; }

 private:
  struct Domain {
    std::shared_ptr<const WorkflowAutomaton> automaton;
    Json initial_state;
  };

  struct Slot {
    GoalRecord record;
    Json business_state;
    Json session_vars = Json::object();
    Json initial_state;
    std::int64_t last_seq = 0;
    std::shared_ptr<const WorkflowAutomaton> automaton;
    mutable std::shared_mutex data;
    std::mutex dispatch;
  };

  Slot& slot(const std::string& goal_id) const {
    std::shared_lock lock(goals_mu_);
    auto it = goals_.find(goal_id);
    if (it == goals_.end()) throw NotFoundError("unknown goal '" + goal_id + "'");
    return *it->second;
  }

  std::string next_id() {
    char buf[32];
    std::snprintf(buf, sizeof buf, "goal-%06llu",
                  static_cast<unsigned long long>(++counter_));
    return buf;
  }

  std::shared_ptr<EventStore> store_;
  Clock clock_;
  mutable std::shared_mutex goals_mu_;
  std::map<std::string, Domain> domains_;
  std::map<std::string, std::unique_ptr<Slot>> goals_;
  std::uint64_t counter_ = 0;
};

}  // namespace sdof
