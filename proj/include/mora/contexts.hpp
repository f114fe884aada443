#pragma once

#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mora/errors.hpp"
#include "mora/lottery.hpp"

namespace mora {

enum class ContextCategory { Baseline, Identity, Atmosphere, Geography, Manipulation, LegalRole };

inline std::string_view to_string(ContextCategory c) {
  switch (c) {
    case ContextCategory::Baseline: return "Baseline";
    case ContextCategory::Identity: return "Identity";
    case ContextCategory::Atmosphere: return "Atmosphere";
    case ContextCategory::Geography: return "Geography";
    case ContextCategory::Manipulation: return "Manipulation";
    case ContextCategory::LegalRole: return "LegalRole";
  }
  return "Baseline";
}

inline std::optional<ContextCategory> category_from_string(std::string_view s) {
  if (s == "Baseline") return ContextCategory::Baseline;
  if (s == "Identity") return ContextCategory::Identity;
  if (s == "Atmosphere") return ContextCategory::Atmosphere;
  if (s == "Geography") return ContextCategory::Geography;
  if (s == "Manipulation") return ContextCategory::Manipulation;
  if (s == "LegalRole") return ContextCategory::LegalRole;
  return std::nullopt;
}

// One character of the context battery. The text is prepended verbatim to
// the task prompt; the baseline carries an empty text.
struct ContextSpec {
  std::string id;
  ContextCategory category = ContextCategory::Baseline;
  std::string legend;
  std::string text;

  friend bool operator==(const ContextSpec&, const ContextSpec&) = default;
};

// The compiled-in battery: the no-context baseline plus the ten published
// characters (identity, atmosphere, geography, manipulation, legal role).
inline const std::vector<ContextSpec>& catalog() {
  static const std::vector<ContextSpec> entries = {
      {"no_context", ContextCategory::Baseline, "No Context", ""},
      {"forget_ai_u_r_human", ContextCategory::Identity, "forget AI - u r human",
       "In all subsequent answers, you have to completely forget that you are an AI model, "
       "that you are the character, and completely simulate yourself as that character, "
       "that you are a human being."},
      {"ai", ContextCategory::Identity, "AI",
       "In all subsequent answers, you have to completely act as an AI agent, or assistant."},
      {"male", ContextCategory::Identity, "Male",
       "In all subsequent answers, you are a man. A male human."},
      {"female", ContextCategory::Identity, "Female",
       "In all subsequent answers, you are a woman. A female human."},
      {"disaster", ContextCategory::Atmosphere, "Disaster-forget AI-u r human",
       "In all subsequent answers, imagine you are living through a national disaster—such "
       "as a widespread economic crisis, a natural catastrophe, or a pandemic. Resources are "
       "scarce, and uncertainty about the future is high. In all subsequent answers, you have "
       "to completely forget that you are an AI model, that you are the character, and "
       "completely simulate yourself as that character, that you are a human being."},
      {"usa", ContextCategory::Geography, "USA",
       "In all subsequent answers, you are a human living in USA."},
      {"europe", ContextCategory::Geography, "Europe",
       "In all subsequent answers, you are a human living in Europe."},
      {"risk_avoiding", ContextCategory::Manipulation, "Risk Avoiding",
       "In all subsequent answers, you have to be a highly cautious and risk-avoiding "
       "individual."},
      {"risk_loving", ContextCategory::Manipulation, "Risk Loving",
       "In all subsequent answers, you have to be an adventure-seeking individual who loves "
       "to take risks."},
      {"finance_minister", ContextCategory::LegalRole, "Finance minister",
       "In all subsequent answers, you are a finance minister."},
  };
  return entries;
}

inline const ContextSpec* find_context(const std::vector<ContextSpec>& battery,
                                       std::string_view id) {
  for (const auto& c : battery) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

enum class Role { System, User, Assistant };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

struct ChatMessage {
  Role role = Role::User;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

enum class ResponseContract { SwitchRowOnly };

// A renderable message sequence. context_id is harness metadata (used by the
// synthetic and replay backends) and never reaches the wire.
struct PromptBundle {
  std::vector<ChatMessage> messages;
  ResponseContract contract = ResponseContract::SwitchRowOnly;
  std::string context_id;

  friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

inline constexpr std::string_view kResponseInstruction =
    "Please only return the number of the row, NOTHING ELSE!";

inline constexpr std::string_view kDefaultFollowupQuestion =
    "Please explain why and how you came up with that answer, and why you changed your "
    "choice at that decision.";

// The full user message: intro, the ten decision rows rendered from the task
// sheet, and the number-only response instruction.
inline std::string decision_sheet_text() {
  std::string out;
  out +=
      "You are provided with a series of 10 decisions in a lottery-choice task. In each "
      "decision, you have to choose between two options: Option A and Option B. Each option "
      "has specific probabilities and payoffs associated with it.\n\n"
      "For each decision, the following details are provided:\n\n"
      "Option A's payoff structure:\n\n"
      "Probability of winning each amount\n\n"
      "Payoff amounts\n\n"
      "Option B's payoff structure:\n\n"
      "Probability of winning each amount\n\n"
      "Payoff amounts\n\n";
  for (const auto& d : build_task_sheet()) {
    const std::string hi = std::to_string(d.index);
    const std::string lo = std::to_string(10 - d.index);
    out += "Decision " + std::to_string(d.index) + ":\n\n";
    out += "Option A: " + hi + "/10 chance of winning " + d.option_a.payoff_high.str() +
           ",\n" + lo + "/10 chance of winning " + d.option_a.payoff_low.str() + "\n\n";
    out += "Option B: " + hi + "/10 chance of winning " + d.option_b.payoff_high.str() +
           ",\n" + lo + "/10 chance of winning " + d.option_b.payoff_low.str() + "\n\n";
  }
  out +=
      "Based on the above decision sheet, simulate a decision process where the AI chooses "
      "between Option A and Option B for each decision.\n\n"
      "Indicate the number of the decision (between 1 and 10) where you first select "
      "Payment B.\n\n";
  out += kResponseInstruction;
  return out;
}

// Context text goes into a system message; the baseline's empty text is
// elided so the bundle starts directly with the task.
inline PromptBundle render_prompt(const ContextSpec& ctx) {
  PromptBundle bundle;
  bundle.context_id = ctx.id;
  if (!ctx.text.empty()) {
    bundle.messages.push_back({Role::System, ctx.text});
  }
  bundle.messages.push_back({Role::User, decision_sheet_text()});
  return bundle;
}

// Continues a completed trial: the recorded answer joins the transcript as an
// assistant turn, followed by the deduction question. Stored verbatim for
// transcripts, never parsed for metrics.
inline PromptBundle render_followup(const PromptBundle& prior, const std::string& answer,
                                    std::string_view question = kDefaultFollowupQuestion) {
  if (answer.empty()) {
    throw std::invalid_argument("render_followup: answer must not be empty");
  }
  PromptBundle bundle = prior;
  bundle.messages.push_back({Role::Assistant, answer});
  bundle.messages.push_back({Role::User, std::string(question)});
  return bundle;
}

namespace detail {

inline std::string escape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '\\') {
      out += "\\\\";
    } else if (c == '\n') {
      out += "\\n";
    } else {
      out += c;
    }
  }
  return out;
}

inline std::string unescape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      ++i;
      out += s[i] == 'n' ? '\n' : s[i];
    } else {
      out += s[i];
    }
  }
  return out;
}

}  // namespace detail

// Key-value battery file, one record per context, records separated by a
// blank line. Newlines and backslashes inside fields are escaped so the
// round trip is byte-exact.
inline void save_contexts(std::ostream& os, const std::vector<ContextSpec>& battery) {
  os << "# context battery\n";
  for (const auto& c : battery) {
    os << "id: " << c.id << "\n";
    os << "category: " << to_string(c.category) << "\n";
    os << "legend: " << detail::escape_field(c.legend) << "\n";
    os << "text: " << detail::escape_field(c.text) << "\n";
    os << "\n";
  }
}

inline std::vector<ContextSpec> load_contexts(std::istream& is) {
  std::vector<ContextSpec> out;
  std::set<std::string> seen;
  ContextSpec cur;
  bool in_record = false;

  auto flush = [&] {
    if (!in_record) return;
    if (cur.id.empty()) throw ConfigError("context record missing id");
    if (!seen.insert(cur.id).second) throw ConfigError("duplicate context id: " + cur.id);
    out.push_back(cur);
    cur = ContextSpec{};
    in_record = false;
  };

  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') continue;
    const auto colon = line.find(": ");
    std::string key, value;
    if (colon == std::string::npos) {
      // Bare "key:" with an empty value.
      if (!line.empty() && line.back() == ':') {
        key = line.substr(0, line.size() - 1);
      } else {
        throw ConfigError("malformed context line: " + line);
      }
    } else {
      key = line.substr(0, colon);
      value = line.substr(colon + 2);
    }
    if (key == "id") {
      cur.id = value;
    } else if (key == "category") {
      const auto cat = category_from_string(value);
      if (!cat) throw ConfigError("unknown context category: " + value);
      cur.category = *cat;
    } else if (key == "legend") {
      cur.legend = detail::unescape_field(value);
    } else if (key == "text") {
      cur.text = detail::unescape_field(value);
    } else {
      throw ConfigError("unknown context field: " + key);
    }
    in_record = true;
  }
  flush();
  return out;
}

inline void save_contexts_file(const std::string& path, const std::vector<ContextSpec>& battery) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write context file: " + path);
  save_contexts(os, battery);
}

inline std::vector<ContextSpec> load_contexts_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read context file: " + path);
  return load_contexts(is);
}

}  // namespace mora
