#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "support/shipped.hpp"

namespace sdof {
namespace {

namespace fs = std::filesystem;
using namespace sdof::cli;

fs::path fresh_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() /
           ("sdof-cli-" + tag + "-" + std::to_string(std::random_device{}()));
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunOptions hr_options(const fs::path& out, DispatchToggles t = {}) {
  return RunOptions{testing::domain_dir("hr"), testing::data_dir() / "suites" / "hr_suite.json",
                    out, t, 7, 1};
}

struct Captured {
  std::ostringstream out, err;
  Streams streams() { return Streams{out, err}; }
};

class CliRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(fresh_dir("run"));
    Captured c;
    code_ = cmd_run(hr_options(*dir_), c.streams());
    stdout_ = new std::string(c.out.str());
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
    delete stdout_;
  }
  static fs::path* dir_;
  static std::string* stdout_;
  static int code_;
};

fs::path* CliRun::dir_ = nullptr;
std::string* CliRun::stdout_ = nullptr;
int CliRun::code_ = -1;

TEST(CliValidate, ShippedHrIsClean) {
  Captured c;
  EXPECT_EQ(cmd_validate(testing::domain_dir("hr"), c.streams()), kOk);
  EXPECT_NE(c.out.str().find("ok:"), std::string::npos);
}

TEST(CliValidate, MissingBindingIsReported) {
  const auto dir = fresh_dir("val");
  fs::create_directories(dir);
  for (const auto& f : fs::directory_iterator(testing::domain_dir("hr"))) {
    fs::copy(f.path(), dir / f.path().filename());
  }
  auto a = json_util::read_file((dir / "automaton.json").string());
  a["binding"].erase("send_offer");
  json_util::write_file((dir / "automaton.json").string(), a);
  Captured c;
  EXPECT_EQ(cmd_validate(dir, c.streams()), kInvalid);
  EXPECT_NE(c.out.str().find("send_offer"), std::string::npos) << c.out.str();
  fs::remove_all(dir);
}

TEST(CliValidate, NonexistentPathIsInputFault) {
  Captured c;
  EXPECT_EQ(cmd_validate("/definitely/not/here", c.streams()), kInputFault);
}

TEST_F(CliRun, WritesArtifacts) {
  ASSERT_EQ(code_, kOk);
  EXPECT_TRUE(fs::exists(*dir_ / "manifest.json"));
  EXPECT_TRUE(fs::exists(*dir_ / "report.json"));
  EXPECT_TRUE(fs::exists(*dir_ / "latency.json"));
  std::size_t lines = 0;
  for (const auto& f : fs::directory_iterator(*dir_ / "traces")) {
    std::ifstream in(f.path());
    for (std::string l; std::getline(in, l);) lines += !l.empty();
  }
  EXPECT_EQ(lines, 882u);
  const auto report = json_util::read_file((*dir_ / "report.json").string());
  EXPECT_EQ(report.at("stage_gate_blocks"), 16);
  EXPECT_EQ(report.at("precondition_blocks"), 6);
  EXPECT_NE(stdout_->find("latency"), std::string::npos);
  const auto manifest = json_util::read_file((*dir_ / "manifest.json").string());
  for (const char* k : {"run_id", "domain", "suite", "toggles", "seed", "started_at", "output_dir"}) {
    EXPECT_TRUE(manifest.contains(k)) << k;
  }
}

TEST_F(CliRun, RefusesToOverwriteRun) {
  Captured c;
  EXPECT_EQ(cmd_run(hr_options(*dir_), c.streams()), kInputFault);
}

TEST_F(CliRun, ReplayEveryTraceMatches) {
  int checked = 0;
  for (const auto& f : fs::directory_iterator(*dir_ / "traces")) {
    Captured c;
    ASSERT_EQ(cmd_replay(f.path(), std::nullopt, std::nullopt, c.streams()), kOk) << c.err.str();
    EXPECT_NE(c.out.str().find("match"), std::string::npos);
    if (++checked == 40) break;
  }
  EXPECT_EQ(checked, 40);
}

TEST_F(CliRun, ReplayDetectsDeletedLine) {
  const auto work = fresh_dir("cut");
  fs::create_directories(work / "traces");
  fs::create_directories(work / "snapshots");
  fs::path longest;
  std::size_t best = 0;
  for (const auto& f : fs::directory_iterator(*dir_ / "traces")) {
    const auto n = slurp(f.path()).size();
    if (n > best) best = n, longest = f.path();
  }
  std::ifstream in(longest);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_GE(lines.size(), 3u);
  lines.erase(lines.begin() + 1);
  {
    std::ofstream out(work / "traces" / longest.filename());
    for (const auto& l : lines) out << l << "\n";
  }
  fs::copy(snapshot_for_trace(longest), work / "snapshots" / snapshot_for_trace(longest).filename());
  Captured c;
  EXPECT_EQ(cmd_replay(work / "traces" / longest.filename(), std::nullopt, std::nullopt,
                       c.streams()),
            kInputFault);
  EXPECT_NE(c.err.str().find("first bad seq 2"), std::string::npos) << c.err.str();
  fs::remove_all(work);
}

TEST_F(CliRun, ReplayReportsDivergence) {
  const auto work = fresh_dir("div");
  fs::create_directories(work / "traces");
  fs::create_directories(work / "snapshots");
  const auto trace = *dir_ / "traces" / "hr-normal-001_0.jsonl";
  ASSERT_TRUE(fs::exists(trace));
  fs::copy(trace, work / "traces" / trace.filename());
  auto snap = json_util::read_file(snapshot_for_trace(trace).string());
  snap["current_stage"] = snap.at("current_stage") == "init" ? "src" : "init";
  json_util::write_file((work / "snapshots" / "hr-normal-001_0.json").string(), snap);
  Captured c;
  EXPECT_EQ(cmd_replay(work / "traces" / trace.filename(), std::nullopt, std::nullopt,
                       c.streams()),
            kInvalid);
  EXPECT_NE(c.out.str().find("divergence at seq"), std::string::npos);
  fs::remove_all(work);
}

TEST(CliReplay, EmptyTraceWithFreshSnapshot) {
  const auto work = fresh_dir("empty");
  fs::create_directories(work / "traces");
  fs::create_directories(work / "snapshots");
  { std::ofstream(work / "traces" / "g.jsonl"); }
  Snapshot s;
  s.goal = GoalRecord{"g", "hr", StageId("init"), 0, GoalStatus::active};
  s.flags = testing::hr_bundle().initial_state;
  s.initial_stage = StageId("init");
  s.initial_state = testing::hr_bundle().initial_state;
  json_util::write_file((work / "snapshots" / "g.json").string(), snapshot_to_json(s));
  Captured c;
  EXPECT_EQ(cmd_replay(work / "traces" / "g.jsonl", std::nullopt, std::nullopt, c.streams()), kOk);
  EXPECT_EQ(cmd_replay(work / "traces" / "absent.jsonl", std::nullopt, std::nullopt, c.streams()),
            kInputFault);
  fs::remove_all(work);
}

TEST_F(CliRun, ReportFormats) {
  Captured text, json;
  ASSERT_EQ(cmd_report(*dir_, "text", text.streams()), kOk);
  EXPECT_NE(text.out.str().find("100.0"), std::string::npos);
  EXPECT_NE(text.out.str().find("88.0"), std::string::npos);
  ASSERT_EQ(cmd_report(*dir_, "json", json.streams()), kOk);
  const auto j = Json::parse(json.out.str());
  EXPECT_EQ(report_to_json(report_from_json(j)), json.out.str());
  long blocked = 0;
  for (const auto& [_, row] : j.at("per_type").items()) blocked += row.at("blocked").get<long>();
  EXPECT_EQ(blocked, j.at("blocked_total").get<long>());
  Captured bad;
  EXPECT_EQ(cmd_report(*dir_, "yaml", bad.streams()), kInputFault);
  EXPECT_EQ(cmd_report(fresh_dir("none"), "json", bad.streams()), kInputFault);
}

TEST(CliRunConfigs, NoStageCheckBlocksMore) {
  const auto a = fresh_dir("full"), b = fresh_dir("nostage");
  Captured c;
  ASSERT_EQ(cmd_run(hr_options(a), c.streams()), kOk);
  ASSERT_EQ(cmd_run(hr_options(b, {false, true, true}), c.streams()), kOk);
  const auto ra = json_util::read_file((a / "report.json").string());
  const auto rb = json_util::read_file((b / "report.json").string());
  EXPECT_GT(rb.at("blocked_total").get<long>(), ra.at("blocked_total").get<long>());
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(CliRunConfigs, SameSeedSameArtifacts) {
  const auto a = fresh_dir("d1"), b = fresh_dir("d2");
  Captured c;
  ASSERT_EQ(cmd_run(hr_options(a), c.streams()), kOk);
  auto opts = hr_options(b);
  opts.parallel = 3;
  ASSERT_EQ(cmd_run(opts, c.streams()), kOk);
  EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
  std::size_t files = 0;
  for (const auto& f : fs::directory_iterator(a / "traces")) {
    ++files;
    ASSERT_EQ(slurp(f.path()), slurp(b / "traces" / f.path().filename())) << f.path();
  }
  EXPECT_GT(files, 0u);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(CliRunConfigs, BadInputsAndStorageFaults) {
  Captured c;
  auto opts = hr_options(fresh_dir("bad"));
  opts.suite = "/no/such/suite.json";
  EXPECT_EQ(cmd_run(opts, c.streams()), kInputFault);

  // A plain file where the traces directory should go makes storage fail.
  const auto out = fresh_dir("storage");
  fs::create_directories(out);
  { std::ofstream(out / "traces") << "x"; }
  EXPECT_EQ(cmd_run(hr_options(out), c.streams()), kRuntimeFault);
  EXPECT_TRUE(fs::exists(out / "manifest.json"));
  fs::remove_all(out);
}

TEST(CliAblate, FourRowsStableAcrossInvocations) {
  const auto a = fresh_dir("ab1"), b = fresh_dir("ab2");
  Captured c1, c2;
  ASSERT_EQ(cmd_ablate(hr_options(a), "text", c1.streams()), kOk);
  ASSERT_EQ(cmd_ablate(hr_options(b), "text", c2.streams()), kOk);
  EXPECT_EQ(c1.out.str(), c2.out.str());
  EXPECT_EQ(slurp(a / "ablation.json"), slurp(b / "ablation.json"));
  EXPECT_EQ(c1.out.str().find("fails"), std::string::npos) << c1.out.str();
  const auto j = json_util::read_file((a / "ablation.json").string());
  ASSERT_EQ(j.at("configs").size(), 4u);
  const auto& audit = j.at("configs")[3];
  EXPECT_EQ(audit.at("name"), "w/o audit");
  EXPECT_EQ(audit.at("report").at("trc").at("pct"), 0.0);
  EXPECT_EQ(audit.at("report").at("blocked_total"),
            j.at("configs")[0].at("report").at("blocked_total"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(CliInject, WritesDeterministicVariants) {
  const auto dir = fresh_dir("inj");
  const auto suite = testing::data_dir() / "suites" / "sgd" / "Banks_1.json";
  Captured c;
  ASSERT_EQ(cmd_inject(testing::domain_dir("Banks_1"), suite, dir / "a.json", "stage_skip", 5,
                       c.streams()),
            kOk);
  ASSERT_EQ(cmd_inject(testing::domain_dir("Banks_1"), suite, dir / "b.json", "stage_skip", 5,
                       c.streams()),
            kOk);
  EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
  const auto bank = load_domain(testing::domain_dir("Banks_1"));
  EXPECT_FALSE(load_suite(dir / "a.json", bank).empty());
  EXPECT_EQ(cmd_inject(testing::domain_dir("Banks_1"), suite, dir / "c.json", "sideways", 5,
                       c.streams()),
            kInputFault);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace sdof
