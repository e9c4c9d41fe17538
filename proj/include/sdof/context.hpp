#pragma once

#include <string>

#include "sdof/json_util.hpp"

namespace sdof {

/// Goal-scoped business state consulted by precondition predicates.
/// business_state is a JSON object of named fields; every field a predicate
/// or effect touches must be declared up front (see the domain fixtures).
struct DispatchContext {
  std::string goal_id;
  Json business_state = Json::object();
  Json session_vars = Json::object();

  friend bool operator==(const DispatchContext&, const DispatchContext&) = default;
};

struct SkillResult {
  enum class Status { ok, failed };
  Status status = Status::ok;
  Json payload = Json::object();
  std::string error;

  bool ok() const noexcept { return status == Status::ok; }
};

}  // namespace sdof
