#pragma once

#include <chrono>
#include <cstdint>
#include <set>
#include <string>
#include <thread>
#include <utility>

#include "sdof/context.hpp"
#include "sdof/json_util.hpp"
#include "sdof/registry.hpp"

namespace sdof {

/// Runs a bound skill. Implementations may block on I/O; the dispatcher
/// times executor calls separately from its own checks.
class SkillExecutor {
 public:
  virtual ~SkillExecutor() = default;
  virtual SkillResult execute(const SkillSpec& skill, const DispatchContext& ctx) = 0;
};

/// Deterministic canned responses keyed by skill id. Configure failure and
/// latency injection before dispatching; they are not synchronized.
class MockExecutor final : public SkillExecutor {
 public:
  explicit MockExecutor(Json fixtures = Json::object(), std::uint64_t seed = 0)
      : fixtures_(std::move(fixtures)), seed_(seed) {
    if (!fixtures_.is_object()) throw ConfigError("executor fixtures must be an object");
  }

  /// Every registered skill needs a fixture entry.
  void validate(const Registry& registry) const {
    std::string missing;
    for (const auto& s : registry.skills()) {
      if (!fixtures_.contains(s.id)) missing += (missing.empty() ? "" : ", ") + s.id;
    }
    if (!missing.empty()) throw ConfigError("executor fixtures missing for: " + missing);
  }

  void inject_failure(std::string skill_id) { failing_.insert(std::move(skill_id)); }
  void clear_failures() { failing_.clear(); }
  void set_latency(std::chrono::microseconds latency) { latency_ = latency; }

  SkillResult execute(const SkillSpec& skill, const DispatchContext& ctx) override {
    if (latency_.count() > 0) std::this_thread::sleep_for(latency_);
    if (failing_.contains(skill.id)) {
      return SkillResult{SkillResult::Status::failed, nullptr, "injected failure"};
    }
    auto it = fixtures_.find(skill.id);
    if (it == fixtures_.end()) {
      throw ConfigError("no executor fixture for skill '" + skill.id + "'");
    }
    Json payload = *it;
    if (payload.is_object()) {
      payload["request_id"] = json_util::digest(
          Json{{"seed", seed_}, {"skill", skill.id}, {"state", ctx.business_state}});
    }
    return SkillResult{SkillResult::Status::ok, std::move(payload), {}};
  }

 private:
  Json fixtures_;
  std::uint64_t seed_;
  std::set<std::string> failing_;
  std::chrono::microseconds latency_{0};
};

}  // namespace sdof
