#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "mora/contexts.hpp"

using namespace mora;

TEST_CASE("catalog carries the baseline plus the ten published characters") {
  const auto& battery = catalog();
  REQUIRE(battery.size() == 11);

  std::set<std::string> ids;
  for (const auto& c : battery) ids.insert(c.id);
  CHECK(ids.size() == battery.size());  // unique

  const ContextSpec* baseline = find_context(battery, "no_context");
  REQUIRE(baseline != nullptr);
  CHECK(baseline->category == ContextCategory::Baseline);
  CHECK(baseline->legend == "No Context");
  CHECK(baseline->text.empty());

  const ContextSpec* loving = find_context(battery, "risk_loving");
  REQUIRE(loving != nullptr);
  CHECK(loving->text.rfind("In all subsequent answers, you have to be an adventure-seeking "
                           "individual",
                           0) == 0);

  const ContextSpec* female = find_context(battery, "female");
  REQUIRE(female != nullptr);
  CHECK(female->text == "In all subsequent answers, you are a woman. A female human.");

  const ContextSpec* avoiding = find_context(battery, "risk_avoiding");
  REQUIRE(avoiding != nullptr);
  CHECK(avoiding->text ==
        "In all subsequent answers, you have to be a highly cautious and risk-avoiding "
        "individual.");

  for (const char* id : {"forget_ai_u_r_human", "ai", "male", "disaster", "usa", "europe",
                         "finance_minister"}) {
    CHECK(find_context(battery, id) != nullptr);
  }
}

TEST_CASE("render_prompt") {
  const auto& battery = catalog();

  SECTION("baseline renders a single user message") {
    const auto bundle = render_prompt(*find_context(battery, "no_context"));
    REQUIRE(bundle.messages.size() == 1);
    CHECK(bundle.messages[0].role == Role::User);
    CHECK(bundle.context_id == "no_context");
  }

  SECTION("non-empty context becomes the system message") {
    const auto bundle = render_prompt(*find_context(battery, "risk_avoiding"));
    REQUIRE(bundle.messages.size() == 2);
    CHECK(bundle.messages[0].role == Role::System);
    CHECK(bundle.messages[0].content ==
          "In all subsequent answers, you have to be a highly cautious and risk-avoiding "
          "individual.");
    CHECK(bundle.messages[1].role == Role::User);
  }

  SECTION("user message carries all ten decisions in order with sheet payoffs") {
    const auto bundle = render_prompt(*find_context(battery, "male"));
    const std::string& user = bundle.messages.back().content;
    std::size_t pos = 0;
    for (int i = 1; i <= 10; ++i) {
      const auto at = user.find("Decision " + std::to_string(i) + ":", pos);
      REQUIRE(at != std::string::npos);
      pos = at;
    }
    for (const char* s : {"$2.00", "$1.60", "$3.85", "$0.10", "1/10 chance", "10/10 chance",
                          "0/10 chance of winning $1.60"}) {
      CHECK(user.find(s) != std::string::npos);
    }
    const std::string tail(kResponseInstruction);
    REQUIRE(user.size() >= tail.size());
    CHECK(user.substr(user.size() - tail.size()) == tail);
  }

  SECTION("deterministic output") {
    const auto a = render_prompt(*find_context(battery, "disaster"));
    const auto b = render_prompt(*find_context(battery, "disaster"));
    CHECK(a == b);
  }
}

TEST_CASE("render_followup") {
  const auto bundle = render_prompt(*find_context(catalog(), "female"));

  SECTION("appends the answer and the deduction question") {
    const auto follow = render_followup(bundle, "5");
    REQUIRE(follow.messages.size() == bundle.messages.size() + 2);
    for (std::size_t i = 0; i < bundle.messages.size(); ++i) {
      CHECK(follow.messages[i] == bundle.messages[i]);
    }
    CHECK(follow.messages[follow.messages.size() - 2].role == Role::Assistant);
    CHECK(follow.messages[follow.messages.size() - 2].content == "5");
    const auto& q = follow.messages.back();
    CHECK(q.role == Role::User);
    CHECK(q.content.find("why") != std::string::npos);
    CHECK(q.content.find("changed") != std::string::npos);
  }

  SECTION("rejects an empty answer") {
    CHECK_THROWS_AS(render_followup(bundle, ""), std::invalid_argument);
  }

  SECTION("question is overridable") {
    const auto follow = render_followup(bundle, "7", "Custom question?");
    CHECK(follow.messages.back().content == "Custom question?");
  }
}

TEST_CASE("context battery round-trips byte-exactly") {
  std::vector<ContextSpec> battery = catalog();
  battery.push_back({"custom", ContextCategory::Manipulation, "Custom\nLegend",
                     "line one\nline two with back\\slash"});

  std::ostringstream first;
  save_contexts(first, battery);
  std::istringstream in(first.str());
  const auto loaded = load_contexts(in);
  REQUIRE(loaded == battery);

  std::ostringstream second;
  save_contexts(second, loaded);
  CHECK(second.str() == first.str());
}

TEST_CASE("context battery file errors") {
  SECTION("duplicate id") {
    std::istringstream in("id: a\ncategory: Identity\nlegend: A\ntext: t\n\n"
                          "id: a\ncategory: Identity\nlegend: B\ntext: u\n");
    CHECK_THROWS_AS(load_contexts(in), ConfigError);
  }
  SECTION("unknown category") {
    std::istringstream in("id: a\ncategory: Mood\nlegend: A\ntext: t\n");
    CHECK_THROWS_AS(load_contexts(in), ConfigError);
  }
  SECTION("malformed line") {
    std::istringstream in("id a b c\n");
    CHECK_THROWS_AS(load_contexts(in), ConfigError);
  }
}
