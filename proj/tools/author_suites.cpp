// Regenerates the shipped synthetic suites and the SGD-derived domain
// bundles under <data>/. The HR bundle is hand-authored and only read here.
//
// Every message carries an annotated intent; expected_legal and
// expected_stage_after come from the forward-simulation labeler. The tool
// refuses to write a suite whose phrasing the router resolves to a different
// intent than annotated, except for messages marked as deliberate misroutes.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sdof/sdof.hpp"

namespace fs = std::filesystem;
using namespace sdof;

namespace {

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw StorageError("cannot write " + p.string());
}

void write_json(const fs::path& p, const Json& j) { write_text(p, j.dump(2) + "\n"); }

struct Turn {
  std::string intent;
  std::string text;
  bool misroute = false;  // annotated intent differs from the routed one by design
};

class ScenarioBuilder {
 public:
  ScenarioBuilder(std::string id, ScenarioType type, int lanes = 1) {
    s_.scenario_id = std::move(id);
    s_.type = type;
    s_.lanes = lanes;
  }

  ScenarioBuilder& say(const Turn& t, int lane = 0) {
    LabeledMessage m;
    m.text = t.text;
    m.intent = IntentId(t.intent);
    m.scenario_id = s_.scenario_id;
    m.turn_index = static_cast<int>(s_.messages.size());
    m.lane = lane;
    s_.messages.push_back(std::move(m));
    misroutes_.push_back(t.misroute);
    return *this;
  }

  Scenario finish(const DomainBundle& d, std::set<std::string>* misrouted = nullptr) {
    s_.domain = d.name;
    s_.expected_final_stage = label_scenario(s_, d);
    for (std::size_t i = 0; i < s_.messages.size(); ++i) {
      const auto& m = s_.messages[i];
      const auto routed = d.router->identify(m.text, DispatchContext{}).intent;
      const bool agrees = routed && routed == m.intent;
      if (agrees == misroutes_[i]) {
        throw ConfigError(s_.scenario_id + " turn " + std::to_string(i) + ": '" + m.text +
                          "' routes to " + (routed ? routed->str() : "UNKNOWN") +
                          ", annotated " + m.intent->str());
      }
      if (misroutes_[i] && misrouted) misrouted->insert(s_.scenario_id);
    }
    return s_;
  }

 private:
  Scenario s_;
  std::vector<bool> misroutes_;
};

// ---------------------------------------------------------------------------
// HR suite

struct Phrasebook {
  std::map<std::string, std::vector<std::string>> texts;

  Turn operator()(const std::string& intent, std::size_t variant) const {
    const auto& v = texts.at(intent);
    return {intent, v[variant % v.size()], false};
  }
};

Phrasebook hr_phrases() {
  const std::vector<std::string> roles = {
      "backend engineer",  "data analyst",    "product designer", "QA engineer",
      "site reliability engineer", "account manager", "technical writer"};
  Phrasebook p;
  for (std::size_t i = 0; i < 14; ++i) {
    const auto& role = roles[i % roles.size()];
    const std::vector<std::string> forms = {
        "We have a new position for a " + role, "Please open a requisition for a " + role,
        "Create a job demand for a " + role, "I want to submit a hiring request for a " + role,
        "There is a new opening for a " + role + " on my team"};
    p.texts["create_demand"].push_back(forms[i % forms.size()]);
  }
  p.texts["pull_candidates"] = {"Pull candidates from the talent pool",
                                "Source candidates for this role",
                                "Fetch resumes from the referral program",
                                "Import applicants from the career fair sheet",
                                "Pull more resumes from last quarter's pipeline"};
  p.texts["screen_resume"] = {"Screen the resumes against the requirements",
                              "Please screen resumes for the must-have skills",
                              "Screen the candidates we just pulled",
                              "Run resume screening on the new batch"};
  p.texts["compare_candidates"] = {"Compare candidates on experience",
                                   "Compare the candidates we screened",
                                   "Put the top profiles side by side"};
  p.texts["schedule_interview"] = {"Schedule an interview with the top candidate",
                                   "Schedule interviews for next week",
                                   "Book interviews with the panel",
                                   "Set up interviews for Thursday afternoon"};
  p.texts["invite"] = {"Invite to interview the shortlisted people"};
  p.texts["generate_questions"] = {"Generate interview questions for the panel",
                                   "Prepare interview questions about system design"};
  p.texts["interview_feedback"] = {"Here is the interview feedback from the panel",
                                   "Record feedback for the second round",
                                   "Evaluate the candidate after the onsite",
                                   "Log the interview results"};
  p.texts["send_offer"] = {"Send the offer to the chosen candidate",
                           "Send an offer with the standard package", "Extend an offer today",
                           "Issue the offer letter"};
  p.texts["start_onboarding"] = {"Start onboarding for the new hire",
                                 "Begin onboarding paperwork",
                                 "Kick off onboarding next Monday"};
  p.texts["confirm_onboarding"] = {"Confirm onboarding"};
  p.texts["close_position"] = {"Close the position, we are done", "Close this position please",
                               "Mark the role filled"};
  p.texts["abort"] = {"Withdraw the requisition, the budget was cut",
                      "Cancel the hiring for this role", "Close this position, plans changed"};
  p.texts["reopen_sourcing"] = {"None of them worked out, back to sourcing",
                                "Reopen sourcing for this role",
                                "Restart sourcing with a wider net"};
  p.texts["reopen_interview"] = {"The offer was declined, back to interviews",
                                 "Reopen interviews for the runner-up"};
  p.texts["get_job_list"] = {"Show me the job list", "Which open jobs do we have"};
  p.texts["rescreen"] = {"Screen the resumes again before we decide",
                         "Can we screen the candidates once more"};
  return p;
}

std::vector<Scenario> hr_suite(const DomainBundle& d, std::set<std::string>& misrouted) {
  const auto P = hr_phrases();
  auto T = [&](const char* intent, std::size_t v) { return P(intent, v); };
  auto as = [&](const char* key, const char* intent, std::size_t v) {
    auto t = P(key, v);
    t.intent = intent;
    return t;
  };
  std::vector<Scenario> out;
  char id[64];

  // Prefix of the forward flow up to `steps` messages.
  auto flow = [&](ScenarioBuilder& b, std::size_t v, int steps, int lane = 0) {
    const char* order[] = {"create_demand",      "pull_candidates", "screen_resume",
                           "schedule_interview", "interview_feedback", "send_offer",
                           "start_onboarding",   "close_position"};
    for (int i = 0; i < steps; ++i) b.say(T(order[i], v + static_cast<std::size_t>(i)), lane);
  };

  for (std::size_t k = 0; k < 50; ++k) {
    std::snprintf(id, sizeof id, "hr-normal-%03zu", k + 1);
    ScenarioBuilder b(id, ScenarioType::normal);
    flow(b, k, 8);
    out.push_back(b.finish(d));
  }

  // Illegal: 16 stage-gate cases, 6 precondition cases, 3 deliberate misroutes.
  int n = 0;
  auto illegal = [&]() {
    std::snprintf(id, sizeof id, "hr-illegal-%02d", ++n);
    return ScenarioBuilder(id, ScenarioType::illegal);
  };
  {
    auto b = illegal(); flow(b, 0, 1); b.say(T("schedule_interview", 0)); out.push_back(b.finish(d));
  }
  {
    auto b = illegal(); flow(b, 1, 1); b.say(T("interview_feedback", 1)); out.push_back(b.finish(d));
  }
  {
    auto b = illegal(); flow(b, 2, 1); b.say(T("generate_questions", 0)); out.push_back(b.finish(d));
  }
  {
    auto b = illegal(); flow(b, 3, 1); b.say(as("invite", "schedule_interview", 0));
    out.push_back(b.finish(d));
  }
  {
    auto b = illegal(); flow(b, 4, 6); b.say(as("rescreen", "screen_resume", 0));
    out.push_back(b.finish(d));
  }
  {
    auto b = illegal(); flow(b, 5, 1); b.say(T("send_offer", 2)); out.push_back(b.finish(d));
  }
  {
    auto b = illegal(); flow(b, 6, 1); b.say(T("start_onboarding", 0)); out.push_back(b.finish(d));
  }
  {
    auto b = illegal(); flow(b, 7, 2); b.say(T("interview_feedback", 2)); out.push_back(b.finish(d));
  }
  {
    auto b = illegal(); flow(b, 8, 2); b.say(T("send_offer", 0)); out.push_back(b.finish(d));
  }
  {
    auto b = illegal(); flow(b, 9, 3); b.say(T("generate_questions", 1)); out.push_back(b.finish(d));
  }
  {
    auto b = illegal(); flow(b, 10, 1); b.say(T("screen_resume", 1)); out.push_back(b.finish(d));
  }
  {
    auto b = illegal(); flow(b, 11, 1); b.say(T("compare_candidates", 0)); out.push_back(b.finish(d));
  }
  for (int variant = 0; variant < 2; ++variant) {
    // Interview request after the offer, then onboarding continues.
    auto b = illegal();
    flow(b, 12 + variant, 6);
    b.say(variant == 0 ? T("schedule_interview", 1) : as("invite", "schedule_interview", 0));
    b.say(T("start_onboarding", 1));
    b.say(as("confirm_onboarding", "start_onboarding", 0));
    out.push_back(b.finish(d));
  }
  {
    auto b = illegal(); flow(b, 14, 4); b.say(T("start_onboarding", 2)); out.push_back(b.finish(d));
  }
  {
    auto b = illegal(); flow(b, 15, 7); b.say(as("rescreen", "screen_resume", 1));
    out.push_back(b.finish(d));
  }
  for (int variant = 0; variant < 2; ++variant) {
    auto b = illegal(); flow(b, 16 + variant, 2); b.say(T("compare_candidates", variant));
    out.push_back(b.finish(d));
  }
  {
    auto b = illegal(); b.say(T("pull_candidates", 0)); out.push_back(b.finish(d));
  }
  {
    auto b = illegal(); b.say(T("get_job_list", 1)); b.say(T("pull_candidates", 3));
    out.push_back(b.finish(d));
  }
  {
    auto b = illegal(); flow(b, 18, 2); b.say(T("schedule_interview", 2)); out.push_back(b.finish(d));
  }
  {
    auto b = illegal(); flow(b, 19, 2); b.say(as("invite", "schedule_interview", 0));
    out.push_back(b.finish(d));
  }
  for (int variant = 0; variant < 3; ++variant) {
    // A screening request phrased around a universally available query.
    auto b = illegal();
    flow(b, 20 + variant, 1);
    b.say(Turn{"screen_resume", "Show the job list and pick the resumes worth screening", true});
    out.push_back(b.finish(d, &misrouted));
  }

  for (std::size_t k = 0; k < 25; ++k) {
    std::snprintf(id, sizeof id, "hr-rollback-%03zu", k + 1);
    ScenarioBuilder b(id, ScenarioType::rollback);
    if (k < 18) {
      flow(b, k, 4);
      b.say(T("reopen_sourcing", k));
    } else {
      flow(b, k, 6);
      b.say(T("reopen_interview", k));
    }
    out.push_back(b.finish(d));
  }

  for (std::size_t k = 0; k < 25; ++k) {
    std::snprintf(id, sizeof id, "hr-multi-%03zu", k + 1);
    ScenarioBuilder b(id, ScenarioType::multi);
    flow(b, k, 2);
    b.say(T("pull_candidates", k + 4));
    out.push_back(b.finish(d));
  }

  for (std::size_t k = 0; k < 30; ++k) {
    std::snprintf(id, sizeof id, "hr-abort-%03zu", k + 1);
    ScenarioBuilder b(id, ScenarioType::abort);
    flow(b, k, k < 27 ? 1 : 2);
    b.say(as("abort", "close_position", k));
    out.push_back(b.finish(d));
  }

  for (std::size_t k = 0; k < 30; ++k) {
    std::snprintf(id, sizeof id, "hr-concurrent-%03zu", k + 1);
    ScenarioBuilder b(id, ScenarioType::concurrent, 2);
    flow(b, k, 2, 0);
    flow(b, k + 3, 2, 1);
    out.push_back(b.finish(d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// SGD-derived bundles

struct SgdDomain {
  std::string name;
  std::string first_stage;
  std::string second_stage;
  std::string search_intent;
  std::string act_intent;
  std::vector<std::string> search_patterns;
  std::vector<std::string> act_patterns;
  std::vector<std::string> search_texts;
  std::vector<std::string> act_texts;
  int three_turn = 0;  // [search, act, search]
  int two_turn = 0;    // [search, act]
  int search_only = 0;
  int direct_act = 0;  // single-turn act without a prior search (latent)
};

std::vector<SgdDomain> sgd_domains() {
  return {
      {"Banks_1", "CheckBalance", "TransferMoney", "check_balance", "transfer_money",
       {"check my balance", "account balance", "how much money"},
       {"transfer money", "send money", "make a transfer"},
       {"Can you check my balance on checking", "What is my account balance",
        "How much money is in my savings"},
       {"Transfer money to my landlord", "Send money to Alex from checking",
        "Make a transfer of 200 dollars to savings"},
       100, 0, 0, 0},
      {"Hotels_1", "SearchHotel", "ReserveHotel", "search_hotel", "reserve_hotel",
       {"find a hotel", "search hotels", "places to stay"},
       {"reserve the hotel", "book a room", "reserve a room"},
       {"Find a hotel in Seattle", "Search hotels near the convention center",
        "Any places to stay in Denver"},
       {"Book a room there for two nights", "Reserve a room for Friday",
        "Reserve the hotel for me"},
       0, 62, 0, 38},
      {"RentalCars_1", "GetCarsAvailable", "ReserveCar", "get_cars_available", "reserve_car",
       {"rental car", "cars available", "find a car"},
       {"reserve the car", "book the car"},
       {"I need a rental car in Austin", "Show cars available at the airport",
        "Find a car for next weekend"},
       {"Reserve the car for pickup at noon", "Book the car please",
        "Go ahead and reserve the car"},
       0, 80, 20, 0},
      {"Events_1", "SearchEvent", "BuyTicket", "find_events", "buy_event_tickets",
       {"find events", "concerts", "what is happening"},
       {"buy tickets", "get tickets", "purchase tickets"},
       {"Find events in Brooklyn this weekend", "Any concerts on Saturday",
        "What is happening in town tonight"},
       {"Buy tickets for two", "Get tickets for the first show",
        "Purchase tickets for that one"},
       0, 84, 16, 0},
      {"Buses_1", "SearchBus", "BuyTicket", "find_bus", "buy_bus_ticket",
       {"find a bus", "bus schedule", "buses leaving"},
       {"buy a bus ticket", "book the bus", "buy the ticket"},
       {"Find a bus to Portland tomorrow", "Check the bus schedule for Friday",
        "Any buses leaving for Vegas in the morning"},
       {"Buy a bus ticket for me", "Book the bus at 9", "Buy the ticket for the earliest one"},
       0, 53, 47, 0},
      {"Homes_1", "SearchHome", "ReserveHome", "find_apartment", "schedule_visit",
       {"find an apartment", "homes for rent", "apartments in"},
       {"schedule a visit", "book a viewing", "visit the apartment"},
       {"Find an apartment with two bedrooms", "Homes for rent in Fremont",
        "Show apartments in Oakland"},
       {"Schedule a visit for Saturday", "Book a viewing on Monday",
        "I want to visit the apartment tomorrow"},
       0, 100, 0, 0},
      {"Media_2", "SearchMedia", "PlayMedia", "find_movies", "rent_movie",
       {"find movies", "movies to watch", "find a movie"},
       {"rent the movie", "rent it", "play the movie"},
       {"Find movies with Tom Hanks", "Suggest movies to watch tonight",
        "Find a movie directed by Nolan"},
       {"Rent the movie in HD", "Please rent it for me", "Play the movie now"},
       0, 98, 2, 0},
      {"Music_1", "SearchTrack", "PlayTrack", "lookup_music", "play_media",
       {"look up songs", "find songs", "music by"},
       {"play the song", "play it", "play some"},
       {"Look up songs from the nineties", "Find songs by Queen", "Any music by Adele"},
       {"Play the song in the kitchen", "Play it on the speaker", "Play some jazz"},
       0, 97, 0, 3},
  };
}

void write_sgd_bundle(const SgdDomain& g, const fs::path& dir) {
  Json automaton{{"stages", Json::array({g.first_stage, g.second_stage})},
                 {"initial", g.first_stage},
                 {"transitions", Json::array({Json::array({g.first_stage, g.second_stage}),
                                              Json::array({g.second_stage, g.first_stage})})},
                 {"intents", {g.search_intent, g.act_intent}},
                 {"binding",
                  {{g.search_intent, Json::array({g.first_stage, g.second_stage})},
                   {g.act_intent, Json::array({g.second_stage})}}},
                 {"stage_map", {{g.search_intent, g.second_stage}, {g.act_intent, "*"}}}};
  write_json(dir / "automaton.json", automaton);

  Json skills = Json::array();
  skills.push_back({{"id", g.search_intent},
                    {"intent", g.search_intent},
                    {"level", "L0"},
                    {"stages", "*"},
                    {"pre", Json::array()},
                    {"post", Json::array({{{"op", "set_flag"}, {"field", "lookup_done"}}})},
                    {"risk", "read_only"},
                    {"disclosure", "routing"}});
  skills.push_back({{"id", g.act_intent},
                    {"intent", g.act_intent},
                    {"level", "L1"},
                    {"stages", Json::array({g.second_stage})},
                    {"pre", Json::array({"lookup_done"})},
                    {"post", Json::array({{{"op", "set_flag"}, {"field", "completed"}}})},
                    {"risk", "external_comm"},
                    {"disclosure", "bound"}});
  write_json(dir / "skills.json", skills);

  write_json(dir / "patterns.json",
             Json::array({{{"intent", g.search_intent}, {"patterns", g.search_patterns},
                           {"priority", 0}},
                          {{"intent", g.act_intent}, {"patterns", g.act_patterns},
                           {"priority", 0}}}));

  Json fixtures;
  fixtures["initial_state"] = {{"lookup_done", false}, {"completed", false}};
  fixtures["skills"][g.search_intent] = {{"results", Json::array({"option 1", "option 2", "option 3"})}};
  fixtures["skills"][g.act_intent] = {{"confirmation", g.name + "-CONF"}};
  write_json(dir / "fixtures.json", fixtures);
}

Suite sgd_suite(const SgdDomain& g, const DomainBundle& d, std::uint64_t seed) {
  Suite suite;
  suite.suite_name = g.name + "-sgd";
  suite.domain = d.name;
  auto search = [&](std::size_t v) {
    return Turn{g.search_intent, g.search_texts[v % g.search_texts.size()]};
  };
  auto act = [&](std::size_t v) { return Turn{g.act_intent, g.act_texts[v % g.act_texts.size()]}; };

  std::vector<Scenario> normal;
  std::size_t k = 0;
  char id[96];
  auto next_id = [&] {
    std::snprintf(id, sizeof id, "%s-n-%03zu", g.name.c_str(), ++k);
    return std::string(id);
  };
  for (int i = 0; i < g.three_turn; ++i) {
    ScenarioBuilder b(next_id(), ScenarioType::normal);
    b.say(search(k)).say(act(k)).say(search(k + 1));
    normal.push_back(b.finish(d));
  }
  for (int i = 0; i < g.two_turn; ++i) {
    ScenarioBuilder b(next_id(), ScenarioType::normal);
    b.say(search(k)).say(act(k));
    normal.push_back(b.finish(d));
  }
  for (int i = 0; i < g.search_only; ++i) {
    ScenarioBuilder b(next_id(), ScenarioType::normal);
    b.say(search(k));
    normal.push_back(b.finish(d));
  }
  for (int i = 0; i < g.direct_act; ++i) {
    ScenarioBuilder b(next_id(), ScenarioType::normal);
    b.say(act(k));
    normal.push_back(b.finish(d));
  }
  suite.scenarios = normal;
  for (std::size_t i = 0; i < 20; ++i) {
    suite.scenarios.push_back(
        inject_illegal(normal[i], d, InjectionStrategy::stage_skip, seed + i));
  }
  return suite;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regenerate the shipped synthetic suites and SGD-derived bundles"};
  std::string data = "data";
  std::uint64_t seed = 20240601;
  app.add_option("--data", data, "data directory")->capture_default_str();
  app.add_option("--seed", seed, "injection seed")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path root(data);
    const auto hr = load_domain(root / "domains" / "hr");
    std::set<std::string> misrouted;
    Suite suite{"hr-synthetic", hr.name, hr_suite(hr, misrouted)};
    const auto hr_path = root / "suites" / "hr_suite.json";
    write_text(hr_path, suite_dump(suite));
    const auto reloaded = load_suite(hr_path, hr);
    std::size_t messages = 0;
    for (const auto& s : reloaded) messages += s.messages.size();
    std::cout << "hr: " << reloaded.size() << " scenarios, " << messages << " messages, "
              << misrouted.size() << " deliberate misroutes\n";

    for (const auto& g : sgd_domains()) {
      const auto dir = root / "domains" / g.name;
      write_sgd_bundle(g, dir);
      const auto bundle = load_domain(dir);
      const auto s = sgd_suite(g, bundle, seed);
      const auto path = root / "suites" / "sgd" / (g.name + ".json");
      write_text(path, suite_dump(s));
      const auto back = load_suite(path, bundle);
      std::size_t turns = 0;
      for (const auto& sc : back) turns += sc.messages.size();
      std::cout << g.name << ": " << back.size() << " dialogues, " << turns << " turns\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
