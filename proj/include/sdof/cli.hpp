#pragma once

// Command implementations behind the sdof executable. Exit codes:
// 0 success, 1 validation failure or divergence, 2 input fault, 3 runtime fault.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sdof/evaluation.hpp"
#include "sdof/harness.hpp"
#include "sdof/scenarios.hpp"

namespace sdof::cli {

namespace fs = std::filesystem;

enum Exit : int { kOk = 0, kInvalid = 1, kInputFault = 2, kRuntimeFault = 3 };

struct Streams {
  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
};

struct RunOptions {
  fs::path domain;
  fs::path suite;
  fs::path out;
  DispatchToggles toggles;
  std::uint64_t seed = 0;
  unsigned parallel = 1;
};

namespace detail {

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw StorageError("cannot write " + p.string());
}

inline std::string run_id(const RunOptions& o) {
  const Json key{{"domain", fs::absolute(o.domain).lexically_normal().filename().string()},
                 {"suite", o.suite.filename().string()},
                 {"stage_check", o.toggles.stage_check},
                 {"precondition_check", o.toggles.precondition_check},
                 {"audit", o.toggles.audit},
                 {"seed", o.seed}};
  return "run-" + json_util::digest(key);
}

struct Loaded {
  DomainBundle domain;
  std::vector<Scenario> scenarios;
};

/// Loads the bundle and suite; returns an exit code on failure.
inline std::optional<Loaded> load_inputs(const RunOptions& o, Streams io, int& code) {
  try {
    Loaded l{load_domain(o.domain), {}};
    l.scenarios = load_suite(o.suite, l.domain);
    return l;
  } catch (const Error& e) {
    io.err << "input fault: " << e.what() << "\n";
  } catch (const Json::exception& e) {
    io.err << "input fault: " << e.what() << "\n";
  }
  code = kInputFault;
  return std::nullopt;
}

inline void print_latency(const LatencySummary& l, std::ostream& out) {
  out << std::fixed << std::setprecision(4) << "latency (median ms): dispatcher route "
      << l.route_median_ms << ", dispatcher gates " << l.gate_median_ms << ", executor "
      << l.exec_median_ms << "\n";
  out.unsetf(std::ios::floatfield);
}

inline Json latency_json(const LatencySummary& l) {
  return Json{{"steps", l.n},
              {"route_median_ms", l.route_median_ms},
              {"route_p95_ms", l.route_p95_ms},
              {"gate_median_ms", l.gate_median_ms},
              {"gate_p95_ms", l.gate_p95_ms},
              {"executor_median_ms", l.exec_median_ms}};
}

}  // namespace detail

/// Prints every validation entry of a bundle directory.
inline int cmd_validate(const fs::path& domain_dir, Streams io = {}) {
  if (!fs::is_directory(domain_dir)) {
    io.err << "input fault: domain directory not found: " << domain_dir.string() << "\n";
    return kInputFault;
  }
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  auto read = [&](const char* file) -> std::optional<Json> {
    const auto p = domain_dir / file;
    if (!fs::exists(p)) throw StorageError("missing " + p.string());
    return json_util::read_file(p.string());
  };
  try {
    const auto automaton_json = read("automaton.json");
    const auto skills_json = read("skills.json");
    const auto patterns_json = read("patterns.json");
    const auto fixtures_json = read("fixtures.json");

    std::shared_ptr<const WorkflowAutomaton> automaton;
    try {
      const auto def = automaton_from_json(*automaton_json);
      const auto report = validate_definition(def);
      for (const auto& issue : report.issues) {
        auto& sink = issue.severity == ValidationIssue::Severity::error ? errors : warnings;
        sink.push_back("automaton.json: [" + issue.code + "] " + issue.message);
      }
      if (!report.has_errors()) {
        automaton = std::make_shared<const WorkflowAutomaton>(WorkflowAutomaton::build(def));
      }
    } catch (const ConfigError& e) {
      errors.push_back(std::string("automaton.json: ") + e.what());
    }

    auto registry = std::make_shared<Registry>();
    if (automaton) {
      if (!skills_json->is_array()) {
        errors.push_back("skills.json: expected a list of skills");
      } else {
        for (const auto& s : *skills_json) {
          try {
            registry->add(skill_from_json(s), *automaton);
          } catch (const Error& e) {
            errors.push_back(std::string("skills.json: ") + e.what());
          }
        }
      }
    }

    std::vector<IntentPattern> table;
    try {
      table = patterns_json->get<std::vector<IntentPattern>>();
      for (const auto& issue : validate_table(table, automaton.get()).issues) {
        errors.push_back("patterns.json: [" + issue.code + "] " + issue.message);
      }
    } catch (const std::exception& e) {
      errors.push_back(std::string("patterns.json: ") + e.what());
    }

    DomainBundle bundle;
    try {
      json_util::reject_unknown_keys(*fixtures_json, {"initial_state", "skills"}, "fixtures");
      bundle.initial_state = fixtures_json->value("initial_state", Json::object());
      bundle.skill_fixtures = json_util::require(*fixtures_json, "skills", "fixtures");
    } catch (const ConfigError& e) {
      errors.push_back(std::string("fixtures.json: ") + e.what());
    }
    if (automaton) {
      bundle.automaton = automaton;
      bundle.registry = registry;
      bundle.router = std::make_shared<const IntentRouter>(table);
      for (const auto& issue : cross_validate(bundle).issues) {
        errors.push_back("bundle: [" + issue.code + "] " + issue.message);
      }
    }
  } catch (const Error& e) {
    io.err << "input fault: " << e.what() << "\n";
    return kInputFault;
  }

  for (const auto& w : warnings) io.out << "warning: " << w << "\n";
  for (const auto& e : errors) io.out << "error: " << e << "\n";
  if (!errors.empty()) {
    io.out << errors.size() << " error(s)\n";
    return kInvalid;
  }
  io.out << "ok: " << domain_dir.string() << "\n";
  return kOk;
}

/// Executes a suite and writes manifest.json, traces/, snapshots/,
/// report.json and latency.json under the output directory.
inline int cmd_run(const RunOptions& o, Streams io = {}) {
  int code = kOk;
  auto loaded = detail::load_inputs(o, io, code);
  if (!loaded) return code;

  const auto id = detail::run_id(o);
  const auto manifest_path = o.out / "manifest.json";
  try {
    fs::create_directories(o.out);
    if (fs::exists(manifest_path)) {
      io.err << "input fault: " << o.out.string() << " already holds a run\n";
      return kInputFault;
    }
    nlohmann::ordered_json manifest;
    manifest["run_id"] = id;
    manifest["domain"] = loaded->domain.name;
    manifest["suite"] = o.suite.string();
    manifest["toggles"] = {{"stage_check", o.toggles.stage_check},
                           {"precondition_check", o.toggles.precondition_check},
                           {"audit", o.toggles.audit}};
    manifest["seed"] = o.seed;
    manifest["parallel"] = o.parallel;
    manifest["started_at"] = detail::utc_now();
    manifest["output_dir"] = o.out.string();
    detail::write_text(manifest_path, manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    io.err << "input fault: " << e.what() << "\n";
    return kInputFault;
  }

  try {
    auto store = std::make_shared<FileEventStore>(o.out);
    GoalManager goals(store, logical_clock);
    const auto run = run_suite(loaded->domain, loaded->scenarios,
                               RunConfig{o.toggles, o.seed, o.parallel}, goals);
    if (o.toggles.audit) {
      for (const auto& g : goals.goal_ids()) store->write_snapshot(goals.snapshot(g));
    }
    const auto report = compute_report(run);
    detail::write_text(o.out / "report.json", report_to_json(report));
    const auto latency = latency_summary(run.steps);
    detail::write_text(o.out / "latency.json", detail::latency_json(latency).dump(2) + "\n");
    io.out << id << "\n" << report_to_text(report);
    detail::print_latency(latency, io.out);
  } catch (const Error& e) {
    io.err << "runtime fault: " << e.what() << "\n";
    return kRuntimeFault;
  } catch (const std::exception& e) {
    io.err << "runtime fault: " << e.what() << "\n";
    return kRuntimeFault;
  }
  return kOk;
}

/// Default snapshot location for <dir>/traces/<stem>.jsonl.
inline fs::path snapshot_for_trace(const fs::path& trace) {
  return trace.parent_path().parent_path() / "snapshots" / (trace.stem().string() + ".json");
}

inline int cmd_replay(const fs::path& trace, std::optional<fs::path> snapshot_path,
                      std::optional<fs::path> domain_dir, Streams io = {}) {
  if (!fs::exists(trace)) {
    io.err << "input fault: trace not found: " << trace.string() << "\n";
    return kInputFault;
  }
  std::optional<Snapshot> snapshot;
  std::optional<DomainBundle> domain;
  try {
    const auto sp = snapshot_path ? *snapshot_path : snapshot_for_trace(trace);
    if (fs::exists(sp)) snapshot = snapshot_from_json(json_util::read_file(sp.string()));
    else if (snapshot_path) throw StorageError("snapshot not found: " + sp.string());
    if (domain_dir) domain = load_domain(*domain_dir);
  } catch (const Error& e) {
    io.err << "input fault: " << e.what() << "\n";
    return kInputFault;
  }
  if (!snapshot && !domain) {
    io.err << "input fault: no snapshot next to the trace; pass --snapshot or --domain\n";
    return kInputFault;
  }
  const StageId initial_stage = snapshot ? snapshot->initial_stage : domain->automaton->initial();
  const Json initial_state = snapshot ? snapshot->initial_state : domain->initial_state;
  const WorkflowAutomaton* automaton = domain ? domain->automaton.get() : nullptr;

  std::vector<ProcessEvent> events;
  GoalState state;
  try {
    events = FileEventStore::read_trace(trace);
    state = replay_events(initial_stage, initial_state, events, automaton);
  } catch (const IntegrityError& e) {
    io.err << "corrupted trace: first bad seq " << e.first_bad_seq() << ": " << e.what() << "\n";
    return kInputFault;
  }
  auto printed = goal_state_to_json(state);
  if (!automaton) printed.erase("status");  // terminal stages unknown without the domain
  io.out << printed.dump(2) << "\n";
  if (!snapshot) return kOk;

  if (snapshot->last_seq > state.last_seq) {
    io.out << "divergence at seq " << state.last_seq + 1 << ": snapshot is ahead of the trace\n";
    return kInvalid;
  }
  std::vector<ProcessEvent> prefix;
  for (const auto& e : events) {
    if (e.seq <= snapshot->last_seq) prefix.push_back(e);
  }
  const auto at_snapshot = replay_events(initial_stage, initial_state, prefix, automaton);
  if (at_snapshot.stage != snapshot->goal.current_stage ||
      at_snapshot.business_state != snapshot->flags) {
    io.out << "divergence at seq " << snapshot->last_seq << ": replayed "
           << goal_state_to_json(at_snapshot).dump() << " vs snapshot stage "
           << snapshot->goal.current_stage.str() << " flags " << snapshot->flags.dump() << "\n";
    return kInvalid;
  }
  io.out << "match: snapshot at seq " << snapshot->last_seq << "\n";
  return kOk;
}

inline int cmd_report(const fs::path& run_dir, const std::string& format, Streams io = {}) {
  if (format != "json" && format != "text") {
    io.err << "input fault: unknown format '" << format << "'\n";
    return kInputFault;
  }
  const auto path = run_dir / "report.json";
  if (!fs::exists(path)) {
    io.err << "input fault: missing " << path.string() << "\n";
    return kInputFault;
  }
  try {
    const auto report = report_from_json(json_util::read_file(path.string()));
    io.out << (format == "json" ? report_to_json(report) : report_to_text(report));
  } catch (const Error& e) {
    io.err << "input fault: " << e.what() << "\n";
    return kInputFault;
  }
  return kOk;
}

/// The four standard configurations on one seed; writes ablation.json.
inline int cmd_ablate(const RunOptions& o, const std::string& format = "text", Streams io = {}) {
  int code = kOk;
  auto loaded = detail::load_inputs(o, io, code);
  if (!loaded) return code;
  try {
    const auto cmp =
        compare_configs(loaded->domain, loaded->scenarios, ablation_configs(), o.seed, o.parallel);
    const auto json = comparison_to_json(cmp);
    if (!o.out.empty()) {
      fs::create_directories(o.out);
      detail::write_text(o.out / "ablation.json", json);
    }
    if (format == "json") {
      io.out << json;
    } else {
      io.out << comparison_to_text(cmp);
      for (const auto& c : ablation_checks(cmp)) {
        io.out << (c.ok ? "holds " : "fails ") << c.name << " (" << c.detail << ")\n";
      }
    }
  } catch (const std::exception& e) {
    io.err << "runtime fault: " << e.what() << "\n";
    return kRuntimeFault;
  }
  return kOk;
}

/// Writes one injected variant per injectable normal scenario.
inline int cmd_inject(const fs::path& domain_dir, const fs::path& suite_path,
                      const fs::path& out_path, const std::string& strategy, std::uint64_t seed,
                      Streams io = {}) {
  InjectionStrategy s;
  if (strategy == "stage_skip") s = InjectionStrategy::stage_skip;
  else if (strategy == "premature_terminal") s = InjectionStrategy::premature_terminal;
  else {
    io.err << "input fault: unknown strategy '" << strategy << "'\n";
    return kInputFault;
  }
  int code = kOk;
  auto loaded = detail::load_inputs(RunOptions{domain_dir, suite_path, {}, {}, seed, 1}, io, code);
  if (!loaded) return code;
  Suite out{suite_path.stem().string() + "-injected", loaded->domain.name, {}};
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < loaded->scenarios.size(); ++i) {
    const auto& sc = loaded->scenarios[i];
    if (sc.type != ScenarioType::normal) continue;
    try {
      out.scenarios.push_back(inject_illegal(sc, loaded->domain, s, seed + i));
    } catch (const GenerationError&) {
      ++skipped;
    }
  }
  if (out.scenarios.empty()) {
    io.err << "no injectable normal scenario\n";
    return kInvalid;
  }
  try {
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    detail::write_text(out_path, suite_dump(out));
  } catch (const std::exception& e) {
    io.err << "runtime fault: " << e.what() << "\n";
    return kRuntimeFault;
  }
  io.out << "wrote " << out.scenarios.size() << " variants (" << skipped << " skipped) to "
         << out_path.string() << "\n";
  return kOk;
}

}  // namespace sdof::cli
