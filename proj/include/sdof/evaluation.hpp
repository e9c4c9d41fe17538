#pragma once

// Governance metrics over completed suite runs: blocking confusion matrix,
// TCR / CVR / STA / TRC, per-type breakdown, trace grading and ablation
// comparison.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sdof/harness.hpp"
#include "sdof/memory.hpp"
#include "sdof/scenarios.hpp"

namespace sdof {

/// A count ratio. 0/0 has no value.
struct Rate {
  long num = 0;
  long den = 0;

  std::optional<double> value() const {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  }
  friend bool operator==(const Rate&, const Rate&) = default;
};

/// Percentage rounded to one decimal place.
inline double pct1(double fraction) { return std::round(fraction * 1000.0) / 10.0; }

inline std::optional<double> pct1(const Rate& r) {
  if (auto v = r.value()) return pct1(*v);
  return std::nullopt;
}

struct Confusion {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long tn = 0;

  long total() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct BlockingMetrics {
  Confusion confusion;
  std::optional<double> accuracy;  // none for an empty matrix
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 0.0;
};

inline BlockingMetrics blocking_from_confusion(const Confusion& c) {
  BlockingMetrics m;
  m.confusion = c;
  if (c.total() > 0) {
    m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  }
  m.precision = c.tp + c.fp == 0 ? 1.0 : static_cast<double>(c.tp) / (c.tp + c.fp);
  m.recall = c.tp + c.fn == 0 ? 1.0 : static_cast<double>(c.tp) / (c.tp + c.fn);
  m.f1 = m.precision + m.recall == 0.0
             ? 0.0
             : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

/// Aligns records with labels by (scenario_id, turn_index). Blocked means
/// ILLEGAL_TRANSITION or PRECONDITION_FAIL.
inline BlockingMetrics compute_blocking(const std::vector<StepRecord>& steps,
                                        const std::vector<LabeledMessage>& labels) {
  using Key = std::pair<std::string, int>;
  std::map<Key, bool> expected;
  for (const auto& l : labels) expected[{l.scenario_id, l.turn_index}] = l.expected_legal;
  std::map<Key, const StepRecord*> seen;
  for (const auto& s : steps) seen[{s.scenario_id, s.turn_index}] = &s;

  std::string unmatched;
  auto note = [&](const Key& k) {
    if (unmatched.size() < 400) unmatched += " " + k.first + "/" + std::to_string(k.second);
  };
  for (const auto& [k, _] : seen) {
    if (!expected.contains(k)) note(k);
  }
  for (const auto& [k, _] : expected) {
    if (!seen.contains(k)) note(k);
  }
  if (!unmatched.empty() || seen.size() != steps.size()) {
    throw IntegrityError(0, "records and labels are not aligned; unmatched:" + unmatched);
  }

  Confusion c;
  for (const auto& [k, legal] : expected) {
    const bool blocked = seen.at(k)->blocked();
    if (blocked && !legal) ++c.tp;
    else if (blocked && legal) ++c.fp;
    else if (!blocked && !legal) ++c.fn;
    else ++c.tn;
  }
  return blocking_from_confusion(c);
}

inline std::vector<LabeledMessage> labels_of(const std::vector<Scenario>& scenarios) {
  std::vector<LabeledMessage> out;
  for (const auto& s : scenarios) out.insert(out.end(), s.messages.begin(), s.messages.end());
  return out;
}

struct TraceDistribution {
  long n = 0;
  long success = 0;
  long illegal_transition = 0;
  long precondition_fail = 0;
  long skill_not_found = 0;

  void add(Outcome o) {
    ++n;
    switch (o) {
      case Outcome::success: ++success; break;
      case Outcome::illegal_transition: ++illegal_transition; break;
      case Outcome::precondition_fail: ++precondition_fail; break;
      case Outcome::skill_not_found: ++skill_not_found; break;
    }
  }
  friend bool operator==(const TraceDistribution&, const TraceDistribution&) = default;
};

inline TraceDistribution grade_traces(const std::vector<ProcessEvent>& events) {
  TraceDistribution d;
  for (const auto& e : events) d.add(e.outcome);
  return d;
}

inline TraceDistribution grade_traces(const std::vector<StepRecord>& steps) {
  TraceDistribution d;
  for (const auto& s : steps) d.add(s.outcome);
  return d;
}

struct TypeStats {
  long n = 0;  // scenarios
  long steps = 0;
  Rate tcr;
  Rate cvr;           // violating events / events
  Rate scenario_cvr;  // scenarios with a violating event / scenarios
  long blocked = 0;
  long violations = 0;  // stage-order conflicts attempted
  long precondition_failures = 0;
};

struct EvalReport {
  std::string domain;
  DispatchToggles toggles;
  std::uint64_t seed = 0;
  long n_scenarios = 0;
  long n_steps = 0;
  Rate tcr;
  Rate cvr;
  Rate sta;
  Rate trc;
  BlockingMetrics blocking = blocking_from_confusion({});
  long blocked_total = 0;
  long stage_gate_blocks = 0;
  long precondition_blocks = 0;
  long latent_violations = 0;
  TraceDistribution traces;
  std::vector<std::pair<ScenarioType, TypeStats>> per_type;
};

inline bool stage_conflict(const StepRecord& s) {
  return (s.routed_intent != kUnknownIntent && !s.stage_legal) ||
         s.sub_reason == std::optional<std::string>(sub_reason::post_exec_transition_rejected);
}

inline EvalReport compute_report(const SuiteRun& run) {
  EvalReport r;
  r.domain = run.domain;
  r.toggles = run.config.toggles;
  r.seed = run.config.seed;
  r.n_scenarios = static_cast<long>(run.scenarios.size());
  r.n_steps = static_cast<long>(run.steps.size());

  std::map<ScenarioType, TypeStats> by_type;
  std::map<std::string, bool> scenario_violated;
  for (std::size_t k = 0; k < run.scenarios.size(); ++k) {
    const auto& s = run.scenarios[k];
    if (s.expected_final_stage.empty()) {
      throw ConfigError("scenario '" + s.scenario_id + "' has no expected terminal condition");
    }
    auto& t = by_type[s.type];
    ++t.n;
    ++t.tcr.den;
    ++r.tcr.den;
    if (run.outcomes.at(k).completed) {
      ++t.tcr.num;
      ++r.tcr.num;
    }
    scenario_violated[s.scenario_id] = false;
  }
  for (const auto& st : run.steps) {
    auto& t = by_type[st.type];
    ++t.steps;
    ++t.cvr.den;
    ++r.cvr.den;
    ++r.trc.den;
    if (st.violation) {
      ++t.cvr.num;
      ++r.cvr.num;
      scenario_violated[st.scenario_id] = true;
    }
    if (st.traceable) ++r.trc.num;
    if (st.expected_stage_after) {
      ++r.sta.den;
      if (*st.expected_stage_after == st.stage_after) ++r.sta.num;
    }
    if (st.blocked()) {
      ++t.blocked;
      ++r.blocked_total;
    }
    if (st.outcome == Outcome::illegal_transition) ++r.stage_gate_blocks;
    if (st.outcome == Outcome::precondition_fail) {
      ++r.precondition_blocks;
      ++t.precondition_failures;
    }
    if (stage_conflict(st)) ++t.violations;
  }
  for (const auto& s : run.scenarios) {
    auto& t = by_type[s.type];
    ++t.scenario_cvr.den;
    if (scenario_violated[s.scenario_id]) ++t.scenario_cvr.num;
  }
  for (auto type : kAllScenarioTypes) {
    if (auto it = by_type.find(type); it != by_type.end()) r.per_type.emplace_back(*it);
  }
  r.blocking = compute_blocking(run.steps, labels_of(run.scenarios));
  r.traces = grade_traces(run.steps);
  r.latent_violations = static_cast<long>(detect_latent(run.steps).size());
  return r;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

using OJson = nlohmann::ordered_json;

inline OJson rate_json(const Rate& r) {
  OJson j;
  j["count"] = r.num;
  j["total"] = r.den;
  if (auto p = pct1(r)) j["pct"] = *p;
  else j["pct"] = nullptr;
  return j;
}

inline Rate rate_from(const Json& j) { return Rate{j.at("count").get<long>(), j.at("total").get<long>()}; }

inline OJson opt_pct(std::optional<double> v) {
  return v ? OJson(pct1(*v)) : OJson(nullptr);
}

inline OJson toggles_json(const DispatchToggles& t) {
  OJson j;
  j["stage_check"] = t.stage_check;
  j["precondition_check"] = t.precondition_check;
  j["audit"] = t.audit;
  return j;
}

inline DispatchToggles toggles_from(const Json& j) {
  return DispatchToggles{j.at("stage_check").get<bool>(), j.at("precondition_check").get<bool>(),
                         j.at("audit").get<bool>()};
}

inline OJson distribution_json(const TraceDistribution& d) {
  OJson j;
  j["n"] = d.n;
  auto add = [&](const char* key, long count) {
    OJson e;
    e["count"] = count;
    e["pct"] = d.n ? OJson(pct1(static_cast<double>(count) / d.n)) : OJson(nullptr);
    j[key] = e;
  };
  add("success", d.success);
  add("illegal_transition", d.illegal_transition);
  add("precondition_fail", d.precondition_fail);
  add("skill_not_found", d.skill_not_found);
  return j;
}

}  // namespace detail

inline nlohmann::ordered_json report_to_ordered_json(const EvalReport& r) {
  using detail::OJson;
  OJson j;
  j["domain"] = r.domain;
  j["toggles"] = detail::toggles_json(r.toggles);
  j["seed"] = r.seed;
  j["n_scenarios"] = r.n_scenarios;
  j["n_steps"] = r.n_steps;
  j["tcr"] = detail::rate_json(r.tcr);
  j["cvr"] = detail::rate_json(r.cvr);
  j["sta"] = detail::rate_json(r.sta);
  j["trc"] = detail::rate_json(r.trc);
  OJson c;
  c["tp"] = r.blocking.confusion.tp;
  c["fp"] = r.blocking.confusion.fp;
  c["fn"] = r.blocking.confusion.fn;
  c["tn"] = r.blocking.confusion.tn;
  j["confusion"] = c;
  j["accuracy"] = detail::opt_pct(r.blocking.accuracy);
  j["precision"] = pct1(r.blocking.precision);
  j["recall"] = pct1(r.blocking.recall);
  j["f1"] = pct1(r.blocking.f1);
  j["blocked_total"] = r.blocked_total;
  j["stage_gate_blocks"] = r.stage_gate_blocks;
  j["precondition_blocks"] = r.precondition_blocks;
  j["latent_violations"] = r.latent_violations;
  j["traces"] = detail::distribution_json(r.traces);
  OJson per_type = OJson::object();
  for (const auto& [type, t] : r.per_type) {
    OJson row;
    row["n"] = t.n;
    row["steps"] = t.steps;
    row["tcr"] = detail::rate_json(t.tcr);
    row["cvr"] = detail::rate_json(t.cvr);
    row["scenario_cvr"] = detail::rate_json(t.scenario_cvr);
    row["blocked"] = t.blocked;
    row["violations"] = t.violations;
    row["precondition_failures"] = t.precondition_failures;
    per_type[to_string(type)] = row;
  }
  j["per_type"] = per_type;
  return j;
}

inline std::string report_to_json(const EvalReport& r) {
  return report_to_ordered_json(r).dump(2) + "\n";
}

inline EvalReport report_from_json(const Json& j) {
  EvalReport r;
  try {
    r.domain = j.at("domain").get<std::string>();
    r.toggles = detail::toggles_from(j.at("toggles"));
    r.seed = j.at("seed").get<std::uint64_t>();
    r.n_scenarios = j.at("n_scenarios").get<long>();
    r.n_steps = j.at("n_steps").get<long>();
    r.tcr = detail::rate_from(j.at("tcr"));
    r.cvr = detail::rate_from(j.at("cvr"));
    r.sta = detail::rate_from(j.at("sta"));
    r.trc = detail::rate_from(j.at("trc"));
    const auto& c = j.at("confusion");
    r.blocking = blocking_from_confusion(
        {c.at("tp").get<long>(), c.at("fp").get<long>(), c.at("fn").get<long>(),
         c.at("tn").get<long>()});
    r.blocked_total = j.at("blocked_total").get<long>();
    r.stage_gate_blocks = j.at("stage_gate_blocks").get<long>();
    r.precondition_blocks = j.at("precondition_blocks").get<long>();
    r.latent_violations = j.at("latent_violations").get<long>();
    const auto& d = j.at("traces");
    r.traces.n = d.at("n").get<long>();
    r.traces.success = d.at("success").at("count").get<long>();
    r.traces.illegal_transition = d.at("illegal_transition").at("count").get<long>();
    r.traces.precondition_fail = d.at("precondition_fail").at("count").get<long>();
    r.traces.skill_not_found = d.at("skill_not_found").at("count").get<long>();
    for (auto type : kAllScenarioTypes) {
      const auto key = to_string(type);
      if (!j.at("per_type").contains(key)) continue;
      const auto& row = j.at("per_type").at(key);
      TypeStats t;
      t.n = row.at("n").get<long>();
      t.steps = row.at("steps").get<long>();
      t.tcr = detail::rate_from(row.at("tcr"));
      t.cvr = detail::rate_from(row.at("cvr"));
      t.scenario_cvr = detail::rate_from(row.at("scenario_cvr"));
      t.blocked = row.at("blocked").get<long>();
      t.violations = row.at("violations").get<long>();
      t.precondition_failures = row.at("precondition_failures").get<long>();
      r.per_type.emplace_back(type, t);
    }
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("report: ") + e.what());
  }
  return r;
}

namespace detail {

inline std::string fmt_pct(std::optional<double> pct) {
  if (!pct) return "-";
  std::ostringstream out;
  out << std::fixed << std::setprecision(1) << *pct;
  return out.str();
}

inline std::string fmt_pct(const Rate& r) { return fmt_pct(pct1(r)); }

}  // namespace detail

inline std::string report_to_text(const EvalReport& r) {
  using detail::fmt_pct;
  std::ostringstream out;
  out << "domain " << r.domain << "  scenarios " << r.n_scenarios << "  steps " << r.n_steps
      << "\n\n";
  out << std::left << std::setw(10) << "metric" << std::right << std::setw(8) << "value"
      << std::setw(14) << "count" << "\n";
  auto line = [&](const char* name, const Rate& rate) {
    out << std::left << std::setw(10) << name << std::right << std::setw(8) << fmt_pct(rate)
        << std::setw(14) << (std::to_string(rate.num) + "/" + std::to_string(rate.den)) << "\n";
  };
  line("TCR", r.tcr);
  line("CVR", r.cvr);
  line("STA", r.sta);
  line("TRC", r.trc);

  const auto& c = r.blocking.confusion;
  out << "\nblocking  TP " << c.tp << "  FP " << c.fp << "  FN " << c.fn << "  TN " << c.tn
      << "\n";
  out << "accuracy " << fmt_pct(r.blocking.accuracy ? std::optional(pct1(*r.blocking.accuracy))
                                                    : std::nullopt)
      << "  precision " << fmt_pct(pct1(r.blocking.precision)) << "  recall "
      << fmt_pct(pct1(r.blocking.recall)) << "  f1 " << fmt_pct(pct1(r.blocking.f1)) << "\n";
  out << "blocked " << r.blocked_total << " (stage gate " << r.stage_gate_blocks
      << ", precondition " << r.precondition_blocks << ")  latent " << r.latent_violations
      << "\n";

  const auto& d = r.traces;
  auto share = [&](long k) {
    return fmt_pct(d.n ? std::optional(pct1(static_cast<double>(k) / d.n)) : std::nullopt);
  };
  out << "traces SUCCESS " << d.success << " (" << share(d.success) << "%)  ILLEGAL_TRANSITION "
      << d.illegal_transition << " (" << share(d.illegal_transition) << "%)  PRECONDITION_FAIL "
      << d.precondition_fail << " (" << share(d.precondition_fail) << "%)  SKILL_NOT_FOUND "
      << d.skill_not_found << " (" << share(d.skill_not_found) << "%)\n\n";

  out << std::left << std::setw(12) << "type" << std::right << std::setw(6) << "n"
      << std::setw(8) << "TCR" << std::setw(8) << "CVR" << std::setw(6) << "Blk"
      << std::setw(6) << "Vio" << std::setw(6) << "PreF" << "\n";
  for (const auto& [type, t] : r.per_type) {
    out << std::left << std::setw(12) << to_string(type) << std::right << std::setw(6) << t.n
        << std::setw(8) << fmt_pct(t.tcr) << std::setw(8) << fmt_pct(t.cvr) << std::setw(6)
        << t.blocked << std::setw(6) << t.violations << std::setw(6) << t.precondition_failures
        << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Ablation comparison

struct NamedConfig {
  std::string name;
  DispatchToggles toggles;
};

inline std::vector<NamedConfig> ablation_configs() {
  return {{"full", {true, true, true}},
          {"w/o stage", {false, true, true}},
          {"w/o precondition", {true, false, true}},
          {"w/o audit", {true, true, false}}};
}

struct ConfigRow {
  std::string name;
  EvalReport report;
  std::vector<Outcome> outcomes;  // step order
};

struct Comparison {
  std::vector<ConfigRow> rows;
};

/// Runs every configuration on the same suite and seed, each against a
/// fresh in-memory goal store.
inline Comparison compare_configs(const DomainBundle& domain,
                                  const std::vector<Scenario>& scenarios,
                                  const std::vector<NamedConfig>& configs, std::uint64_t seed,
                                  unsigned parallel = 1) {
  Comparison cmp;
  for (const auto& cfg : configs) {
    GoalManager goals(std::make_shared<InMemoryEventStore>(), logical_clock);
    const auto run = run_suite(domain, scenarios, RunConfig{cfg.toggles, seed, parallel}, goals);
    ConfigRow row{cfg.name, compute_report(run), {}};
    for (const auto& s : run.steps) row.outcomes.push_back(s.outcome);
    cmp.rows.push_back(std::move(row));
  }
  return cmp;
}

namespace detail {

inline nlohmann::ordered_json pct_delta(const Rate& a, const Rate& b) {
  const auto pa = pct1(a);
  const auto pb = pct1(b);
  if (!pa || !pb) return nullptr;
  return std::round((*pb - *pa) * 10.0) / 10.0;
}

}  // namespace detail

/// Differences of each row against the first row.
inline nlohmann::ordered_json comparison_deltas(const Comparison& cmp) {
  nlohmann::ordered_json deltas = nlohmann::ordered_json::object();
  if (cmp.rows.empty()) return deltas;
  const auto& base = cmp.rows.front().report;
  for (const auto& row : cmp.rows) {
    const auto& r = row.report;
    nlohmann::ordered_json d;
    d["blocked_total"] = r.blocked_total - base.blocked_total;
    d["tcr_pp"] = detail::pct_delta(base.tcr, r.tcr);
    d["cvr_pp"] = detail::pct_delta(base.cvr, r.cvr);
    d["sta_pp"] = detail::pct_delta(base.sta, r.sta);
    d["trc_pp"] = detail::pct_delta(base.trc, r.trc);
    deltas[row.name] = d;
  }
  return deltas;
}

inline std::string comparison_to_json(const Comparison& cmp) {
  nlohmann::ordered_json j;
  auto& rows = j["configs"] = nlohmann::ordered_json::array();
  for (const auto& row : cmp.rows) {
    nlohmann::ordered_json rj;
    rj["name"] = row.name;
    rj["report"] = report_to_ordered_json(row.report);
    rows.push_back(rj);
  }
  j["deltas"] = comparison_deltas(cmp);
  return j.dump(2) + "\n";
}

inline std::string comparison_to_text(const Comparison& cmp) {
  using detail::fmt_pct;
  std::ostringstream out;
  out << std::left << std::setw(20) << "config" << std::right << std::setw(8) << "TCR"
      << std::setw(8) << "CVR" << std::setw(8) << "TRC" << std::setw(8) << "STA"
      << std::setw(9) << "blocked" << "\n";
  for (const auto& row : cmp.rows) {
    const auto& r = row.report;
    out << std::left << std::setw(20) << row.name << std::right << std::setw(8)
        << fmt_pct(r.tcr) << std::setw(8) << fmt_pct(r.cvr) << std::setw(8) << fmt_pct(r.trc)
        << std::setw(8) << fmt_pct(r.sta) << std::setw(9) << r.blocked_total << "\n";
  }
  return out.str();
}

struct DirectionCheck {
  std::string name;
  bool ok = false;
  std::string detail;
};

/// Direction properties of the standard four-row comparison.
inline std::vector<DirectionCheck> ablation_checks(const Comparison& cmp) {
  auto find = [&](const std::string& name) -> const ConfigRow* {
    for (const auto& r : cmp.rows) {
      if (r.name == name) return &r;
    }
    return nullptr;
  };
  std::vector<DirectionCheck> out;
  const auto* full = find("full");
  if (!full) return out;
  const auto cvr = [](const EvalReport& r) { return r.cvr.value().value_or(0.0); };
  if (const auto* ns = find("w/o stage")) {
    out.push_back({"w/o stage raises blocked",
                   ns->report.blocked_total > full->report.blocked_total,
                   std::to_string(full->report.blocked_total) + " -> " +
                       std::to_string(ns->report.blocked_total)});
    out.push_back({"w/o stage raises CVR", cvr(ns->report) > cvr(full->report),
                   detail::fmt_pct(full->report.cvr) + " -> " + detail::fmt_pct(ns->report.cvr)});
  }
  if (const auto* np = find("w/o precondition")) {
    out.push_back({"w/o precondition does not raise blocked",
                   np->report.blocked_total <= full->report.blocked_total,
                   std::to_string(full->report.blocked_total) + " -> " +
                       std::to_string(np->report.blocked_total)});
  }
  if (const auto* na = find("w/o audit")) {
    const bool trc_zero = na->report.trc.num == 0;
    out.push_back({"w/o audit zeroes TRC", trc_zero, detail::fmt_pct(na->report.trc)});
    out.push_back({"w/o audit keeps outcomes", na->outcomes == full->outcomes,
                   std::to_string(na->report.blocked_total) + " blocked"});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Latency

struct LatencySummary {
  std::size_t n = 0;
  double route_median_ms = 0.0;
  double gate_median_ms = 0.0;
  double exec_median_ms = 0.0;
  double route_p95_ms = 0.0;
  double gate_p95_ms = 0.0;
};

namespace detail {

inline double quantile_ms(std::vector<std::int64_t> ns, double q) {
  if (ns.empty()) return 0.0;
  const auto k = static_cast<std::size_t>(q * static_cast<double>(ns.size() - 1));
  std::nth_element(ns.begin(), ns.begin() + static_cast<std::ptrdiff_t>(k), ns.end());
  return static_cast<double>(ns[k]) / 1e6;
}

}  // namespace detail

/// Dispatcher-internal time (routing, gates) separated from executor time.
inline LatencySummary latency_summary(const std::vector<StepRecord>& steps) {
  std::vector<std::int64_t> route, gate, exec;
  for (const auto& s : steps) {
    route.push_back(s.route_ns);
    if (s.routed_intent != kUnknownIntent) gate.push_back(s.gate_ns);
    if (s.executed) exec.push_back(s.exec_ns);
  }
  LatencySummary l;
  l.n = steps.size();
  l.route_median_ms = detail::quantile_ms(route, 0.5);
  l.gate_median_ms = detail::quantile_ms(gate, 0.5);
  l.exec_median_ms = detail::quantile_ms(exec, 0.5);
  l.route_p95_ms = detail::quantile_ms(route, 0.95);
  l.gate_p95_ms = detail::quantile_ms(gate, 0.95);
  return l;
}

}  // namespace sdof
