#include <gtest/gtest.h>

#include <random>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "todllm/prompts.hpp"

using namespace todllm;

namespace {

const std::vector<std::string> kDomains = {"restaurant", "hotel", "attraction", "taxi", "train"};

const DomainSchema& hotel() { return *fixture::multiwoz().schema("hotel"); }

size_t count_of(const std::string& hay, const std::string& needle) {
  size_t n = 0;
  for (size_t p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

StoredExample example(const std::string& id, const std::string& domain, SlotMap pairs, bool negative = false) {
  StoredExample ex;
  ex.id = id;
  ex.domain = domain;
  ex.context_key = "Customer: utterance " + id;
  ex.gold_update = {domain, pairs, {}};
  ex.gold_state.domains[domain] = pairs;
  ex.gold_response_delex = "We have [" + domain + "_name].";
  ex.negative = negative;
  return ex;
}

}  // namespace

TEST(GoldenPrompt, DomainZeroShot) {
  auto p = render_domain_prompt(fixture::templates("multiwoz"), {}, "I am looking for a cheap place to stay.", kDomains);
  EXPECT_EQ(p.text, fixture::read(fixture::data("golden/prompts/domain_zero_shot.txt")));
  EXPECT_EQ(p.kind, PromptKind::domain_detect);
}

TEST(GoldenPrompt, StateZeroShotHotel) {
  auto p = render_state_prompt(fixture::templates("multiwoz"), hotel(), {}, "I want a cheap place to stay.", {}, {},
                               true);
  EXPECT_EQ(p.text, fixture::read(fixture::data("golden/prompts/state_zero_shot_hotel.txt")));
}

TEST(GoldenPrompt, ResponseZeroShotHotel) {
  BeliefState st;
  st.domains["hotel"]["pricerange"] = "cheap";
  DbResult db{"hotel", 23, {}, false, {}};
  auto p = render_response_prompt(fixture::templates("multiwoz"), hotel(), {}, "I want a cheap place to stay.", st, db,
                                  {}, true);
  EXPECT_EQ(p.text, fixture::read(fixture::data("golden/prompts/response_zero_shot_hotel.txt")));
}

TEST(PromptTemplate, EscapesAndDropsEmptyLines) {
  auto t = PromptTemplate::parse("{{literal}}\n{history}\nCustomer: {user_utterance}  \n");
  EXPECT_EQ(t.render({{"history", ""}, {"user_utterance", "hi"}}), "{literal}\nCustomer: hi");
  EXPECT_EQ(t.render({{"history", "Customer: a\nAssistant: b"}, {"user_utterance", "hi"}}),
            "{literal}\nCustomer: a\nAssistant: b\nCustomer: hi");
}

TEST(PromptTemplate, RejectsUnknownPlaceholder) {
  EXPECT_THROW(PromptTemplate::parse("hello {nope}"), Error);
  EXPECT_THROW(PromptTemplate::parse("hello {history"), Error);
  EXPECT_THROW(PromptTemplate::parse("hello }"), Error);
}

TEST(PromptTemplate, MissingValueThrows) {
  auto t = PromptTemplate::parse("{history}");
  EXPECT_THROW(t.render({}), Error);
}

TEST(TemplateSet, FallsBackToDefault) {
  const auto& ts = fixture::templates("multiwoz");
  EXPECT_EQ(ts.response_template("attraction").name(), "attraction.response.txt");
  EXPECT_EQ(ts.response_template("train").name(), "_default.response.txt");
  EXPECT_EQ(ts.state_template("hotel").name(), "_default.state.txt");
  EXPECT_EQ(ts.fingerprint().size(), 64u);
}

TEST(TemplateSet, SlotListFromSchemaWhenNoDescriptions) {
  const auto& ts = fixture::templates("sgd");
  for (const auto& schema : fixture::sgd().schemas) {
    std::string list = ts.slot_list(schema);
    for (const auto& s : schema.slots)
      if (s.informable && !s.booking) EXPECT_NE(list.find("- \"" + s.name + "\":"), std::string::npos) << s.name;
  }
}

TEST(RenderHistory, WindowKeepsTail) {
  DialogueHistory h;
  h.add_customer("a");
  h.add_assistant("b");
  h.add_customer("c");
  h.add_assistant("d");
  EXPECT_EQ(render_history(h, 0), "Customer: a\nAssistant: b\nCustomer: c\nAssistant: d");
  EXPECT_EQ(render_history(h, 2), "Customer: c\nAssistant: d");
}

TEST(SerializeBelief, Format) {
  BeliefState st;
  st.domains["hotel"] = {{"area", "north"}, {"pricerange", "cheap"}};
  EXPECT_EQ(serialize_belief("hotel", st), "hotel { area: \"north\", pricerange: \"cheap\"}");
  EXPECT_EQ(serialize_belief("taxi", st), "");
}

TEST(SerializeDb, CountsAndRows) {
  EXPECT_EQ(serialize_db(DbResult{"hotel", 2, {}, false, {}}), "hotels: 2");
  EXPECT_EQ(serialize_db(std::nullopt), "");
  DbResult top{"hotel", 2, {{"hotel", {{"name", "acorn"}}}}, false, {}};
  EXPECT_EQ(serialize_db(top, true), "hotels: 2; top: name: \"acorn\"");
  DbResult ext{"restaurants", 1, {{"restaurants", {{"name", "x"}}}}, true, {}};
  EXPECT_EQ(serialize_db(ext).rfind("restaurants: 1 [", 0), 0u);
}

TEST(FewShotPrompt, StateBlocksAndLabels) {
  std::vector<StoredExample> pos = {example("a:0", "hotel", {{"area", "north"}}),
                                    example("b:1", "hotel", {{"stars", "4"}})};
  std::vector<StoredExample> neg = {example("a:0#neg", "hotel", {{"area", "south"}}, true)};
  auto p = render_state_prompt(fixture::templates("multiwoz"), hotel(), {}, "hi", pos, neg, false);
  EXPECT_EQ(count_of(p.text, "------- Example "), 3u);
  EXPECT_NE(p.text.find("------- Example 3: --------\nCustomer: utterance a:0#neg\nIncorrect: area:\"south\""),
            std::string::npos);
  EXPECT_NE(p.text.find("Output: area:\"north\""), std::string::npos);
  EXPECT_EQ(count_of(p.text, "\n-----------\n"), 1u);
  EXPECT_EQ(p.provenance, (std::vector<std::string>{"a:0", "b:1"}));
  EXPECT_TRUE(unresolved_placeholders(p.text).empty());
}

TEST(FewShotPrompt, ResponseBlocks) {
  std::vector<StoredExample> ex = {example("a:0", "hotel", {{"area", "north"}})};
  auto p = render_response_prompt(fixture::templates("multiwoz"), hotel(), {}, "hi", {}, std::nullopt, ex, false);
  EXPECT_NE(p.text.find("------- Example 1: --------\nCustomer: utterance a:0\nState: hotel { area: \"north\"}\n"
                        "Response: We have [hotel_name].\n-----------"),
            std::string::npos);
}

TEST(FewShotPrompt, ZeroShotRejectsExamples) {
  std::vector<StoredExample> ex = {example("a:0", "hotel", {{"area", "north"}})};
  const auto& ts = fixture::templates("multiwoz");
  EXPECT_THROW(render_state_prompt(ts, hotel(), {}, "hi", ex, {}, true), Error);
  EXPECT_THROW(render_response_prompt(ts, hotel(), {}, "hi", {}, std::nullopt, ex, true), Error);
}

TEST(FewShotPrompt, ForeignDomainExampleRejected) {
  std::vector<StoredExample> ex = {example("a:0", "restaurant", {{"area", "north"}})};
  EXPECT_THROW(render_state_prompt(fixture::templates("multiwoz"), hotel(), {}, "hi", ex, {}, false), Error);
}

TEST(DomainPrompt, EmptyListRejected) {
  EXPECT_THROW(render_domain_prompt(fixture::templates("multiwoz"), {}, "hi", {}), Error);
}

TEST(PromptProperty, BlockCountMatchesExamples) {
  std::mt19937_64 rng(17);
  const auto& ts = fixture::templates("multiwoz");
  for (int trial = 0; trial < 200; ++trial) {
    size_t k = oracle::pick(rng, 6), nneg = k == 0 ? 0 : oracle::pick(rng, k + 1);
    std::vector<StoredExample> pos, neg;
    for (size_t i = 0; i < k; ++i) pos.push_back(example("p" + std::to_string(i), "hotel", {{"area", "north"}}));
    for (size_t i = 0; i < nneg; ++i) neg.push_back(example("n" + std::to_string(i), "hotel", {{"area", "x"}}, true));
    auto p = render_state_prompt(ts, hotel(), {}, "hi", pos, neg, false);
    ASSERT_EQ(count_of(p.text, "------- Example "), k + nneg);
    ASSERT_EQ(count_of(p.text, "\nOutput: "), k);
    ASSERT_EQ(count_of(p.text, "\nIncorrect: "), nneg);
    ASSERT_EQ(count_of(p.text, "\n-----------\n"), k + nneg > 0 ? 1u : 0u);
    for (size_t i = 1; i <= k + nneg; ++i)
      ASSERT_NE(p.text.find("------- Example " + std::to_string(i) + ": --------"), std::string::npos);
    ASSERT_TRUE(unresolved_placeholders(p.text).empty());
  }
}
