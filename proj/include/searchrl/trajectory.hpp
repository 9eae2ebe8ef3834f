#pragma once

// Think-Search-Memorize trajectory grammar: tag lexer, tolerant parser and
// strict format validator.
//
// Lexing and parsing never fail. The parser keeps every well-formed tag pair
// as a Step and records unmatched tags on the Trajectory; validate_format()
// turns those records, together with ordering and turn-limit rules, into a
// countable list of violations for the format reward.

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "text_metrics.hpp"

namespace searchrl {

enum class Action { Think, Search, Documents, Memory, Answer };

inline constexpr std::array<Action, 5> kAllActions = {Action::Think, Action::Search, Action::Documents,
                                                      Action::Memory, Action::Answer};

inline std::string_view action_name(Action a) {
  switch (a) {
    case Action::Think: return "think";
    case Action::Search: return "search";
    case Action::Documents: return "documents";
    case Action::Memory: return "memory";
    case Action::Answer: return "answer";
  }
  return "";
}

inline std::optional<Action> action_from_name(std::string_view name) {
  for (auto a : kAllActions) {
    if (action_name(a) == name) return a;
  }
  return std::nullopt;
}

inline std::string open_tag(Action a) { return "<" + std::string(action_name(a)) + ">"; }
inline std::string close_tag(Action a) { return "</" + std::string(action_name(a)) + ">"; }

// Half-open byte range [start, end) into the raw text.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - start; }
  bool operator==(const Span&) const = default;
};

enum class TokenKind { OpenTag, CloseTag, FreeText };

struct TagToken {
  TokenKind kind;
  Action action = Action::Think;  // meaningless for FreeText
  Span span;

  std::string_view text(std::string_view raw) const { return raw.substr(span.start, span.size()); }
  bool operator==(const TagToken&) const = default;
};

// Splits raw into tag tokens and free text. The spans partition raw exactly;
// adjacent free text is merged into one token.
inline std::vector<TagToken> tokenize_tags(std::string_view raw) {
  std::vector<TagToken> out;
  std::size_t text_start = 0;
  std::size_t i = 0;
  auto flush_text = [&](std::size_t upto) {
    if (upto > text_start) out.push_back({TokenKind::FreeText, Action::Think, {text_start, upto}});
  };
  while (i < raw.size()) {
    if (raw[i] != '<') {
      ++i;
      continue;
    }
    bool matched = false;
    const bool closing = i + 1 < raw.size() && raw[i + 1] == '/';
    const std::size_t name_at = i + (closing ? 2 : 1);
    for (auto a : kAllActions) {
      const auto name = action_name(a);
      if (raw.compare(name_at, name.size(), name) == 0 && name_at + name.size() < raw.size() &&
          raw[name_at + name.size()] == '>') {
        const std::size_t end = name_at + name.size() + 1;
        flush_text(i);
        out.push_back({closing ? TokenKind::CloseTag : TokenKind::OpenTag, a, {i, end}});
        i = end;
        text_start = end;
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  flush_text(raw.size());
  return out;
}

struct Step {
  Action action;
  std::string content;  // inner text with surrounding whitespace trimmed
  Span span;            // from the opening '<' to the end of the closing tag
  Span inner;           // verbatim inner text
};

// A tag the parser could not pair. `open` distinguishes a dangling opener
// from a stray closer.
struct UnmatchedTag {
  Action action;
  bool open;
  Span span;
};

struct Trajectory {
  std::vector<Step> steps;
  std::string raw;
  std::vector<UnmatchedTag> unmatched;
};

// Tolerant single-level matcher. Tags do not nest: an opener seen while
// another is pending leaves the earlier one dangling; a closer that does not
// match the pending opener is recorded as stray and the opener stays pending.
inline Trajectory parse_trajectory(std::string raw) {
  Trajectory traj;
  traj.raw = std::move(raw);
  const std::string_view text = traj.raw;
  std::optional<TagToken> pending;
  for (const auto& tok : tokenize_tags(text)) {
    switch (tok.kind) {
      case TokenKind::FreeText: break;
      case TokenKind::OpenTag:
        if (pending) traj.unmatched.push_back({pending->action, true, pending->span});
        pending = tok;
        break;
      case TokenKind::CloseTag:
        if (pending && pending->action == tok.action) {
          const Span inner{pending->span.end, tok.span.start};
          traj.steps.push_back({tok.action, std::string(trim(text.substr(inner.start, inner.size()))),
                                {pending->span.start, tok.span.end}, inner});
          pending.reset();
        } else {
          traj.unmatched.push_back({tok.action, false, tok.span});
        }
        break;
    }
  }
  if (pending) traj.unmatched.push_back({pending->action, true, pending->span});
  return traj;
}

// Concatenation of the raw text of every parsed step.
inline std::string serialize(const Trajectory& traj) {
  std::string out;
  for (const auto& s : traj.steps) out.append(traj.raw, s.span.start, s.span.size());
  return out;
}

enum class ViolationKind { ExceedMaxTurns, InvalidAction, UnmatchedTag, MisorderedTag, MissingAnswer, MultipleAnswers };

inline std::string_view violation_name(ViolationKind k) {
  switch (k) {
    case ViolationKind::ExceedMaxTurns: return "ExceedMaxTurns";
    case ViolationKind::InvalidAction: return "InvalidAction";
    case ViolationKind::UnmatchedTag: return "UnmatchedTag";
    case ViolationKind::MisorderedTag: return "MisorderedTag";
    case ViolationKind::MissingAnswer: return "MissingAnswer";
    case ViolationKind::MultipleAnswers: return "MultipleAnswers";
  }
  return "";
}

inline constexpr std::array<ViolationKind, 6> kAllViolationKinds = {
    ViolationKind::ExceedMaxTurns, ViolationKind::InvalidAction,   ViolationKind::UnmatchedTag,
    ViolationKind::MisorderedTag,  ViolationKind::MissingAnswer,   ViolationKind::MultipleAnswers};

struct FormatViolation {
  ViolationKind kind;
  std::string detail;
  std::optional<Span> span;

  bool operator==(const FormatViolation&) const = default;
};

struct GrammarConfig {
  int t_max = 5;
  // Documents must directly follow Search, Memory must directly follow Documents.
  bool strict_order = true;
  // Whether a trajectory without an Answer counts as a violation.
  bool penalize_missing_answer = true;

  void validate() const {
    if (t_max < 1) throw std::invalid_argument("GrammarConfig: t_max must be >= 1");
  }
};

inline std::vector<FormatViolation> validate_format(const Trajectory& traj, const GrammarConfig& cfg = {}) {
  cfg.validate();
  std::vector<FormatViolation> out;
  auto add = [&](ViolationKind k, std::string detail, std::optional<Span> span) {
    out.push_back({k, std::move(detail), span});
  };

  for (const auto& u : traj.unmatched) {
    add(ViolationKind::UnmatchedTag,
        std::string(u.open ? "unclosed " : "unopened ") + (u.open ? open_tag(u.action) : close_tag(u.action)),
        u.span);
  }

  int searches = 0;
  std::optional<std::size_t> first_answer;
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    const auto& s = traj.steps[i];
    const std::optional<Action> prev = i > 0 ? std::optional(traj.steps[i - 1].action) : std::nullopt;

    if (first_answer) {
      if (s.action == Action::Answer)
        add(ViolationKind::MultipleAnswers, "extra <answer> block", s.span);
      else
        add(ViolationKind::InvalidAction, open_tag(s.action) + " after <answer>", s.span);
      continue;
    }

    switch (s.action) {
      case Action::Search:
        ++searches;
        if (searches > cfg.t_max)
          add(ViolationKind::ExceedMaxTurns,
              "search " + std::to_string(searches) + " exceeds t_max=" + std::to_string(cfg.t_max), s.span);
        if (s.content.empty()) add(ViolationKind::InvalidAction, "empty <search> query", s.span);
        break;
      case Action::Documents:
        if (cfg.strict_order && prev != Action::Search)
          add(ViolationKind::MisorderedTag, "<documents> not directly after <search>", s.span);
        break;
      case Action::Memory:
        if (cfg.strict_order && prev != Action::Documents)
          add(ViolationKind::MisorderedTag, "<memory> not directly after <documents>", s.span);
        break;
      case Action::Answer:
        first_answer = i;
        break;
      case Action::Think: break;
    }
  }
  if (!first_answer && cfg.penalize_missing_answer) add(ViolationKind::MissingAnswer, "no <answer> block", std::nullopt);
  return out;
}

inline std::size_t count_search_calls(const Trajectory& traj) {
  std::size_t n = 0;
  for (const auto& s : traj.steps) n += s.action == Action::Search;
  return n;
}

struct TrajectoryParts {
  std::vector<std::string> queries;
  std::vector<std::string> memories;
  std::optional<std::string> answer;
};

inline TrajectoryParts extract_parts(const Trajectory& traj) {
  TrajectoryParts parts;
  for (const auto& s : traj.steps) {
    switch (s.action) {
      case Action::Search: parts.queries.push_back(s.content); break;
      case Action::Memory: parts.memories.push_back(s.content); break;
      case Action::Answer: parts.answer = s.content; break;
      default: break;
    }
  }
  return parts;
}

}  // namespace searchrl
