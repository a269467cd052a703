#include <gtest/gtest.h>

#include <random>

#include "support/generators.hpp"
#include "support/oracles.hpp"
#include "todllm/parsing.hpp"

using namespace todllm;
using namespace gen;

namespace {

DomainSchema hotel_schema() {
  return {"hotel",
          "",
          {{"pricerange", "", {"cheap", "moderate", "expensive"}},
           {"area", "", {"north", "east", "west", "south", "centre"}},
           {"type", "", {"guesthouse", "hotel"}},
           {"name", "", {}},
           {"stars", "", {"0", "1", "2", "3", "4", "5"}},
           {"bookday", "", {"monday", "tuesday"}}}};
}

bool has(const std::vector<std::string>& w, const std::string& tag) {
  return std::find(w.begin(), w.end(), tag) != w.end();
}

const std::vector<std::string> kDomains = {"restaurant", "hotel", "attraction", "taxi", "train"};

}  // namespace

TEST(ParseState, HyphenPairSingle) {
  auto r = parse_state_output("pricerange:\"cheap\"", hotel_schema());
  EXPECT_EQ(r.value.pairs, (SlotMap{{"pricerange", "cheap"}}));
  EXPECT_EQ(r.value.domain, "hotel");
  EXPECT_TRUE(r.clean());
}

TEST(ParseState, JsonObject) {
  auto r = parse_state_output("{\"pricerange\": \"cheap\", \"area\": \"north\"}", hotel_schema());
  EXPECT_EQ(r.value.pairs, (SlotMap{{"pricerange", "cheap"}, {"area", "north"}}));
  EXPECT_TRUE(r.clean());
}

TEST(ParseState, ChatterAroundPairs) {
  auto r = parse_state_output("Sure! Here is the state: pricerange:\"cheap\"-area:\"north\" Hope that helps",
                              hotel_schema());
  EXPECT_EQ(r.value.pairs, (SlotMap{{"pricerange", "cheap"}, {"area", "north"}}));
  EXPECT_EQ(r.warnings, std::vector<std::string>{warning::kExtraContentTruncated});
}

TEST(ParseState, UnquotedPairsAndSpaces) {
  auto r = parse_state_output("pricerange:cheap - area: north-name:a and b guest house", hotel_schema());
  EXPECT_EQ(r.value.pairs, (SlotMap{{"pricerange", "cheap"}, {"area", "north"}, {"name", "a and b guest house"}}));
}

TEST(ParseState, HyphenInsideValueIsKept) {
  auto r = parse_state_output("name:\"2-3 castle street\"-area:\"west\"", hotel_schema());
  EXPECT_EQ(r.value.pairs.at("name"), "2-3 castle street");
  auto u = parse_state_output("name:cherry-hinton hall-area:west", hotel_schema());
  EXPECT_EQ(u.value.pairs.at("name"), "cherry-hinton hall");
  EXPECT_EQ(u.value.pairs.at("area"), "west");
}

TEST(ParseState, NestedUnderDomainAndPrefixedKeys) {
  auto r = parse_state_output("{\"hotel\": {\"hotel-area\": \"north\", \"stars\": 4}}", hotel_schema());
  EXPECT_EQ(r.value.pairs, (SlotMap{{"area", "north"}, {"stars", "4"}}));
}

TEST(ParseState, LooseBraceBlock) {
  auto r = parse_state_output("{pricerange: cheap, area: 'north'}", hotel_schema());
  EXPECT_EQ(r.value.pairs, (SlotMap{{"pricerange", "cheap"}, {"area", "north"}}));
}

TEST(ParseState, UnknownSlotDropped) {
  auto r = parse_state_output("pricerange:\"cheap\"-wifi:\"yes\"", hotel_schema());
  EXPECT_EQ(r.value.pairs, (SlotMap{{"pricerange", "cheap"}}));
  EXPECT_TRUE(has(r.warnings, warning::kUnknownSlotDropped));
}

TEST(ParseState, SlotNamesAreNotFuzzy) {
  auto r = parse_state_output("pricerang:\"cheap\"", hotel_schema());
  EXPECT_TRUE(r.value.pairs.empty());
  EXPECT_TRUE(has(r.warnings, warning::kUnknownSlotDropped));
}

TEST(ParseState, EmptyValuesAreDropped) {
  auto r = parse_state_output("pricerange:\"\"-area:\"north\"", hotel_schema());
  EXPECT_EQ(r.value.pairs, (SlotMap{{"area", "north"}}));
}

TEST(ParseState, ValuesCanonicalized) {
  auto r = parse_state_output("pricerange:\"Cheap\"-area:\"center\"-type:\"guest house\"", hotel_schema());
  EXPECT_EQ(r.value.pairs, (SlotMap{{"pricerange", "cheap"}, {"area", "centre"}, {"type", "guesthouse"}}));
}

TEST(ParseState, DuplicateSlotLastWins) {
  auto r = parse_state_output("area:\"north\"-area:\"south\"", hotel_schema());
  EXPECT_EQ(r.value.pairs.at("area"), "south");
  EXPECT_TRUE(has(r.warnings, warning::kDuplicateSlot));
}

TEST(ParseState, GarbageGivesInvalidStructure) {
  auto r = parse_state_output("I cannot help with that.", hotel_schema());
  EXPECT_TRUE(r.value.pairs.empty());
  EXPECT_EQ(r.warnings, std::vector<std::string>{warning::kInvalidStructure});
}

TEST(ParseState, EmptyCompletionIsAnEmptyUpdate) {
  auto r = parse_state_output("   ", hotel_schema());
  EXPECT_TRUE(r.value.pairs.empty());
  EXPECT_TRUE(r.clean());
}

TEST(ParseDomain, ExactWord) {
  auto r = parse_domain_output("hotel", kDomains);
  EXPECT_EQ(r.value, "hotel");
  EXPECT_TRUE(r.clean());
}

TEST(ParseDomain, CaseAndPunctuation) {
  auto r = parse_domain_output(" Hotel.\n", kDomains);
  EXPECT_EQ(r.value, "hotel");
  EXPECT_TRUE(r.clean());
}

TEST(ParseDomain, TokenInSentence) {
  EXPECT_EQ(parse_domain_output("I believe this is about a restaurant booking", kDomains).value, "restaurant");
  EXPECT_EQ(parse_domain_output("Domain: train", kDomains).value, "train");
}

TEST(ParseDomain, FallbackCarriesPreviousDomain) {
  auto r = parse_domain_output("no idea", kDomains, std::string("taxi"));
  EXPECT_EQ(r.value, "taxi");
  EXPECT_EQ(r.warnings, std::vector<std::string>{warning::kNoDomainFound});
  EXPECT_EQ(parse_domain_output("no idea", kDomains).value, "restaurant");
}

TEST(ParseDomain, AmbiguousPicksFirstListed) {
  auto r = parse_domain_output("a hotel near the restaurant", kDomains);
  EXPECT_EQ(r.value, "restaurant");
  EXPECT_TRUE(has(r.warnings, warning::kAmbiguousDomain));
}

TEST(SanitizeResponse, TruncatesAtSpeakerMarker) {
  auto r = sanitize_response("We have [choice] hotels. Customer: great");
  EXPECT_EQ(r.value, "We have [choice] hotels.");
  EXPECT_EQ(r.warnings, std::vector<std::string>{warning::kExtraContentTruncated});
}

TEST(SanitizeResponse, StripsRoleLabelAndQuotes) {
  auto r = sanitize_response("Assistant: \"It is [hotel_address].\"");
  EXPECT_EQ(r.value, "It is [hotel_address].");
  EXPECT_TRUE(r.clean());
}

TEST(SanitizeResponse, CleanInputUnchanged) {
  auto r = sanitize_response("plain reply");
  EXPECT_EQ(r.value, "plain reply");
  EXPECT_TRUE(r.clean());
}

TEST(SanitizeResponse, MultilineAndUserMarker) {
  EXPECT_EQ(sanitize_response("Sure.\n\nUser: and then?").value, "Sure.");
  EXPECT_EQ(sanitize_response("  Booked,   ref [reference]. \n").value, "Booked, ref [reference].");
}

TEST(ExtractPlaceholders, InOrder) {
  EXPECT_EQ(extract_placeholders("It is [hotel_address], postcode [hotel_postcode]"),
            (std::vector<std::string>{"hotel_address", "hotel_postcode"}));
  EXPECT_TRUE(extract_placeholders("no placeholders").empty());
  EXPECT_EQ(extract_placeholders("booked, reference [reference]"), std::vector<std::string>{"reference"});
  EXPECT_EQ(extract_placeholders("[Hotel_Name] [] [a b]"), std::vector<std::string>{"hotel_name"});
}

TEST(ParserProperty, TotalOnFuzzedInput) {
  std::mt19937_64 rng(2024);
  DomainSchema schema = hotel_schema();
  for (int i = 0; i < 1000; ++i) {
    std::string s = fuzz_string(rng);
    ASSERT_NO_THROW({
      auto st = parse_state_output(s, schema);
      auto d = parse_domain_output(s, kDomains);
      auto r = sanitize_response(s);
      (void)extract_placeholders(s);
      for (const auto& [k, v] : st.value.pairs) {
        ASSERT_NE(schema.find(k), nullptr);
        ASSERT_FALSE(v.empty());
      }
      ASSERT_TRUE(contains_domain(kDomains, d.value));
      (void)r;
    }) << "input: " << s;
  }
}

TEST(ParserProperty, HyphenPairsRoundTrip) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 1000; ++i) {
    DomainSchema schema = random_schema(rng);
    StateUpdate u = random_well_formed(rng, schema);
    auto r = parse_state_output(format_state_pairs(u.pairs), schema);
    ASSERT_EQ(r.value.pairs, u.pairs) << format_state_pairs(u.pairs);
    ASSERT_TRUE(r.clean()) << format_state_pairs(u.pairs);
  }
}

TEST(ParserProperty, JsonObjectRoundTrip) {
  std::mt19937_64 rng(100);
  for (int i = 0; i < 1000; ++i) {
    DomainSchema schema = random_schema(rng);
    StateUpdate u = random_well_formed(rng, schema);
    if (u.pairs.empty()) u.pairs[schema.slots.front().name] = "x y";
    auto r = parse_state_output(format_state_object(u.pairs), schema);
    ASSERT_EQ(r.value.pairs, u.pairs) << format_state_object(u.pairs);
    ASSERT_TRUE(r.clean());
  }
}

TEST(ParserProperty, SanitizeIsIdempotent) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    std::string s = fuzz_string(rng);
    std::string once = sanitize_response(s).value;
    ASSERT_EQ(sanitize_response(once).value, once) << "input: " << s;
    ASSERT_TRUE(sanitize_response(once).clean()) << "input: " << s;
  }
}

TEST(ParserProperty, SanitizeKeepsPlaceholders) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 1000; ++i) {
    std::string name = oracle::random_word(rng, 1, 6) + "_" + oracle::random_word(rng, 1, 6);
    std::string s = "Assistant: " + oracle::random_word(rng, 0, 5) + " [" + name + "] " + oracle::random_word(rng, 0, 5);
    auto ph = extract_placeholders(sanitize_response(s).value);
    ASSERT_EQ(ph, std::vector<std::string>{name});
  }
}
