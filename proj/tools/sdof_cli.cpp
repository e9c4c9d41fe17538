#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sdof/cli.hpp"

namespace {

void add_run_flags(CLI::App* cmd, sdof::cli::RunOptions& o, bool& no_stage, bool& no_pre,
                   bool& no_audit) {
  cmd->add_option("--domain", o.domain, "domain bundle directory")->required();
  cmd->add_option("--suite", o.suite, "suite file")->required();
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--seed", o.seed, "seed")->capture_default_str();
  cmd->add_option("--parallel", o.parallel, "concurrent scenarios")->capture_default_str();
  cmd->add_flag("--no-stage-check", no_stage, "disable the stage gate");
  cmd->add_flag("--no-precondition", no_pre, "disable precondition enforcement");
  cmd->add_flag("--no-audit", no_audit, "disable event logging");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace sdof::cli;
  CLI::App app{"Stage-gated skill dispatch: validate, run, replay, report, ablate"};
  app.require_subcommand(1);

  std::string domain;
  auto* validate = app.add_subcommand("validate", "validate a domain bundle");
  validate->add_option("--domain", domain, "domain bundle directory")->required();

  RunOptions run_opts;
  bool no_stage = false, no_pre = false, no_audit = false;
  auto* run = app.add_subcommand("run", "run a suite and write run artifacts");
  add_run_flags(run, run_opts, no_stage, no_pre, no_audit);
  run->get_option("--out")->required();

  std::string trace;
  std::optional<std::string> snapshot, replay_domain;
  auto* replay = app.add_subcommand("replay", "rebuild a goal's state from its trace");
  replay->add_option("trace", trace, "trace file (.jsonl)")->required();
  replay->add_option("--snapshot", snapshot, "snapshot to compare against");
  replay->add_option("--domain", replay_domain, "domain bundle for the initial state");

  std::string run_dir, format = "text";
  auto* report = app.add_subcommand("report", "print a run's evaluation report");
  report->add_option("run_dir", run_dir, "run output directory")->required();
  report->add_option("--format", format, "json or text")->check(CLI::IsMember({"json", "text"}));

  RunOptions ablate_opts;
  bool a_stage = false, a_pre = false, a_audit = false;
  std::string ablate_format = "text";
  auto* ablate = app.add_subcommand("ablate", "compare the four standard configurations");
  add_run_flags(ablate, ablate_opts, a_stage, a_pre, a_audit);
  ablate->add_option("--format", ablate_format, "json or text")
      ->check(CLI::IsMember({"json", "text"}));

  std::string inj_domain, inj_suite, inj_out, strategy = "stage_skip";
  std::uint64_t inj_seed = 0;
  auto* inject = app.add_subcommand("inject", "write stage-skipping variants of normal scenarios");
  inject->add_option("--domain", inj_domain, "domain bundle directory")->required();
  inject->add_option("--suite", inj_suite, "suite file")->required();
  inject->add_option("--out", inj_out, "output suite file")->required();
  inject->add_option("--strategy", strategy, "stage_skip or premature_terminal");
  inject->add_option("--seed", inj_seed, "seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputFault;
  }

  if (*validate) return cmd_validate(domain);
  if (*run) {
    run_opts.toggles = {!no_stage, !no_pre, !no_audit};
    return cmd_run(run_opts);
  }
  if (*replay) {
    std::optional<std::filesystem::path> sp, dp;
    if (snapshot) sp = *snapshot;
    if (replay_domain) dp = *replay_domain;
    return cmd_replay(trace, sp, dp);
  }
  if (*report) return cmd_report(run_dir, format);
  if (*ablate) return cmd_ablate(ablate_opts, ablate_format);
  if (*inject) return cmd_inject(inj_domain, inj_suite, inj_out, strategy, inj_seed);
  return kInputFault;
}
