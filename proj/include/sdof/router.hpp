#pragma once

// Deterministic intent recognition: normalized pattern matching with an
// optional fallback resolver for messages no pattern covers.

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "sdof/automaton.hpp"
#include "sdof/context.hpp"
#include "sdof/ids.hpp"
#include "sdof/json_util.hpp"

namespace sdof {

/// NFC, lowercase, punctuation to space, whitespace collapsed and trimmed.
inline std::string normalize_message(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  icu::UnicodeString raw = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString norm = U_SUCCESS(status) ? nfc->normalize(raw, status) : raw;
  if (U_FAILURE(status)) norm = raw;
  norm.toLower(icu::Locale::getRoot());

  icu::UnicodeString cleaned;
  bool pending_space = false;
  for (int32_t i = 0; i < norm.length();) {
    const UChar32 c = norm.char32At(i);
    i += U16_LENGTH(c);
    if (u_ispunct(c) || u_isUWhiteSpace(c) || u_iscntrl(c)) {
      pending_space = cleaned.length() > 0;
      continue;
    }
    if (pending_space) {
      cleaned.append(static_cast<UChar>(' '));
      pending_space = false;
    }
    cleaned.append(c);
  }
  std::string out;
  cleaned.toUTF8String(out);
  return out;
}

inline std::vector<std::string> tokenize(std::string_view normalized) {
  std::vector<std::string> out;
  std::istringstream in{std::string(normalized)};
  for (std::string tok; in >> tok;) out.push_back(std::move(tok));
  return out;
}

struct IntentPattern {
  IntentId intent;
  // "=text" exact phrase, "~a b" token set, anything else a token-aligned
  // substring of the normalized message.
  std::vector<std::string> patterns;
  int priority = 0;
};

inline void to_json(Json& j, const IntentPattern& p) {
  j = Json{{"intent", p.intent}, {"patterns", p.patterns}, {"priority", p.priority}};
}

inline void from_json(const Json& j, IntentPattern& p) {
  json_util::reject_unknown_keys(j, {"intent", "patterns", "priority"}, "pattern table entry");
  p.intent = json_util::require(j, "intent", "pattern table entry").get<IntentId>();
  p.patterns =
      json_util::require(j, "patterns", "pattern table entry").get<std::vector<std::string>>();
  p.priority = j.value("priority", 0);
}

struct RoutingDecision {
  enum class Mode { pattern, fallback };
  std::optional<IntentId> intent;  // nullopt = UNKNOWN
  Mode mode = Mode::pattern;
  double confidence = 0.0;
  std::optional<std::string> matched_pattern;
  std::string error;

  bool known() const noexcept { return intent.has_value(); }
  friend bool operator==(const RoutingDecision&, const RoutingDecision&) = default;
};

struct FallbackMatch {
  IntentId intent;
  double confidence = 0.0;
  std::string matched;
};

/// Resolves messages no pattern matched. Implementations may call a model;
/// faults are caught by the router.
class FallbackResolver {
 public:
  virtual ~FallbackResolver() = default;
  virtual std::optional<FallbackMatch> resolve(const std::string& normalized,
                                               const DispatchContext& ctx) const = 0;
};

namespace detail {

struct CompiledPattern {
  enum class Kind { exact, tokens, substring };
  Kind kind = Kind::substring;
  std::string source;  // as authored
  std::string text;    // normalized
  std::vector<std::string> tokens;
  IntentId intent;
  int priority = 0;
};

inline CompiledPattern compile_pattern(const std::string& raw, const IntentId& intent,
                                       int priority) {
  CompiledPattern p;
  p.source = raw;
  p.intent = intent;
  p.priority = priority;
  std::string_view body = raw;
  if (!body.empty() && body.front() == '=') {
    p.kind = CompiledPattern::Kind::exact;
    body.remove_prefix(1);
  } else if (!body.empty() && body.front() == '~') {
    p.kind = CompiledPattern::Kind::tokens;
    body.remove_prefix(1);
  }
  p.text = normalize_message(body);
  p.tokens = tokenize(p.text);
  std::sort(p.tokens.begin(), p.tokens.end());
  p.tokens.erase(std::unique(p.tokens.begin(), p.tokens.end()), p.tokens.end());
  return p;
}

inline bool pattern_matches(const CompiledPattern& p, const std::string& padded_message,
                            const std::set<std::string>& message_tokens) {
  if (p.text.empty()) return false;
  switch (p.kind) {
    case CompiledPattern::Kind::exact:
      return padded_message == " " + p.text + " ";
    case CompiledPattern::Kind::tokens:
      return std::all_of(p.tokens.begin(), p.tokens.end(),
                         [&](const std::string& t) { return message_tokens.contains(t); });
    case CompiledPattern::Kind::substring:
      return padded_message.find(" " + p.text + " ") != std::string::npos;
  }
  return false;
}

}  // namespace detail

/// Table-driven stub for the fallback path: token overlap against every
/// pattern, accepted when the best overlap reaches the threshold.
class TokenOverlapFallback final : public FallbackResolver {
 public:
  explicit TokenOverlapFallback(const std::vector<IntentPattern>& table, double threshold = 0.6)
      : threshold_(threshold) {
    for (const auto& entry : table) {
      for (const auto& raw : entry.patterns) {
        patterns_.push_back(detail::compile_pattern(raw, entry.intent, entry.priority));
      }
    }
  }

  std::optional<FallbackMatch> resolve(const std::string& normalized,
                                       const DispatchContext&) const override {
    const auto toks = tokenize(normalized);
    const std::set<std::string> msg(toks.begin(), toks.end());
    const detail::CompiledPattern* best = nullptr;
    double best_score = 0.0;
    for (const auto& p : patterns_) {
      if (p.tokens.empty()) continue;
      const auto hits = std::count_if(p.tokens.begin(), p.tokens.end(),
                                      [&](const std::string& t) { return msg.contains(t); });
      const double score = static_cast<double>(hits) / static_cast<double>(p.tokens.size());
      if (score > best_score) {
        best_score = score;
        best = &p;
      }
    }
    if (!best || best_score < threshold_) return std::nullopt;
    return FallbackMatch{best->intent, best_score, best->source};
  }

 private:
  double threshold_;
  std::vector<detail::CompiledPattern> patterns_;
};

class IntentRouter {
 public:
  IntentRouter() = default;
  explicit IntentRouter(std::vector<IntentPattern> table) : table_(std::move(table)) {
    for (const auto& entry : table_) {
      for (const auto& raw : entry.patterns) {
        compiled_.push_back(detail::compile_pattern(raw, entry.intent, entry.priority));
      }
    }
    // Priority, then longer match, then lexicographic pattern text.
    std::stable_sort(compiled_.begin(), compiled_.end(), [](const auto& a, const auto& b) {
      return std::tuple(-a.priority, -static_cast<long>(a.text.size()), a.text) <
             std::tuple(-b.priority, -static_cast<long>(b.text.size()), b.text);
    });
  }

  const std::vector<IntentPattern>& table() const noexcept { return table_; }
  std::size_t pattern_count() const noexcept { return compiled_.size(); }

  RoutingDecision identify(std::string_view message, const DispatchContext& ctx,
                           const FallbackResolver* fallback = nullptr) const {
    RoutingDecision d;
    const std::string norm = normalize_message(message);
    if (norm.empty()) return d;
    const std::string padded = " " + norm + " ";
    const auto toks = tokenize(norm);
    const std::set<std::string> msg_tokens(toks.begin(), toks.end());
    for (const auto& p : compiled_) {
      if (detail::pattern_matches(p, padded, msg_tokens)) {
        d.intent = p.intent;
        d.mode = RoutingDecision::Mode::pattern;
        d.confidence = 1.0;
        d.matched_pattern = p.source;
        return d;
      }
    }
    if (!fallback) return d;
    d.mode = RoutingDecision::Mode::fallback;
    try {
      if (auto m = fallback->resolve(norm, ctx)) {
        d.intent = m->intent;
        d.confidence = std::clamp(m->confidence, 0.0, 1.0);
        d.matched_pattern = m->matched;
      }
    } catch (const std::exception& e) {
      d.intent.reset();
      d.confidence = 0.0;
      d.error = std::string("fallback resolver fault: ") + e.what();
    }
    return d;
  }

 private:
  std::vector<IntentPattern> table_;
  std::vector<detail::CompiledPattern> compiled_;
};

/// Ambiguous pattern pairs and intents the automaton does not declare.
inline ValidationReport validate_table(const std::vector<IntentPattern>& table,
                                       const WorkflowAutomaton* automaton = nullptr) {
  ValidationReport report;
  std::map<std::tuple<int, int, std::string>, IntentId> seen;
  for (const auto& entry : table) {
    if (automaton && !automaton->has_intent(entry.intent)) {
      report.error("pattern_unknown_intent",
                   "pattern table references intent '" + entry.intent.str() +
                       "' absent from the automaton");
    }
    for (const auto& raw : entry.patterns) {
      const auto p = detail::compile_pattern(raw, entry.intent, entry.priority);
      if (p.text.empty()) {
        report.error("pattern_empty", "pattern '" + raw + "' normalizes to nothing");
        continue;
      }
      const auto key = std::tuple(entry.priority, static_cast<int>(p.kind), p.text);
      auto [it, inserted] = seen.emplace(key, entry.intent);
      if (!inserted && it->second != entry.intent) {
        report.error("pattern_ambiguous", "pattern '" + p.text + "' maps to both '" +
                                              it->second.str() + "' and '" + entry.intent.str() +
                                              "' at priority " + std::to_string(entry.priority));
      }
    }
  }
  return report;
}

}  // namespace sdof
