#include <gtest/gtest.h>

#include <random>

#include "support/oracles.hpp"
#include "todllm/core.hpp"

using namespace todllm;

namespace {

const std::vector<std::string> kDomains = {"hotel", "restaurant", "train", "taxi", "attraction"};

StateUpdate upd(const std::string& d, SlotMap pairs) { return {d, std::move(pairs), {}}; }

BeliefState belief(std::map<std::string, SlotMap> m) { return {std::move(m)}; }

}  // namespace

TEST(ApplyStateUpdate, AddsPairToEmptyState) {
  BeliefState s = apply_state_update({}, upd("hotel", {{"pricerange", "cheap"}}), kDomains);
  EXPECT_EQ(s, belief({{"hotel", {{"pricerange", "cheap"}}}}));
}

TEST(ApplyStateUpdate, EmptyUpdateIsIdentity) {
  BeliefState s = belief({{"hotel", {{"area", "north"}}}});
  EXPECT_EQ(apply_state_update(s, upd("train", {}), kDomains), s);
  EXPECT_EQ(apply_state_update(s, upd("train", {}), kDomains).domains.count("train"), 0u);
}

TEST(ApplyStateUpdate, LastWriteWins) {
  BeliefState s = belief({{"hotel", {{"area", "north"}}}});
  EXPECT_EQ(apply_state_update(s, upd("hotel", {{"area", "south"}}), kDomains), belief({{"hotel", {{"area", "south"}}}}));
}

TEST(ApplyStateUpdate, InputIsNotModified) {
  const BeliefState s = belief({{"hotel", {{"area", "north"}}}});
  BeliefState copy = s;
  (void)apply_state_update(s, upd("hotel", {{"stars", "4"}}), kDomains);
  EXPECT_EQ(s, copy);
}

TEST(ApplyStateUpdate, UnknownDomainRejected) {
  EXPECT_THROW(apply_state_update({}, upd("spaceship", {{"a", "b"}}), kDomains), UnknownDomainError);
  try {
    apply_state_update({}, upd("spaceship", {{"a", "b"}}), kDomains);
  } catch (const UnknownDomainError& e) {
    EXPECT_EQ(e.domain(), "spaceship");
  }
}

TEST(DiffStates, AllPairsNewFromEmpty) {
  auto d = diff_states({}, belief({{"hotel", {{"stars", "4"}}}}));
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0], upd("hotel", {{"stars", "4"}}));
}

TEST(DiffStates, IdenticalStatesGiveNothing) {
  BeliefState s = belief({{"hotel", {{"stars", "4"}}}, {"train", {{"day", "monday"}}}});
  EXPECT_TRUE(diff_states(s, s).empty());
}

TEST(DiffStates, AddedPairsAcrossDomains) {
  auto d = diff_states(belief({{"hotel", {{"stars", "4"}}}}),
                       belief({{"hotel", {{"stars", "4"}, {"area", "west"}}}, {"train", {{"day", "monday"}}}}));
  std::vector<StateUpdate> want = {upd("hotel", {{"area", "west"}}), upd("train", {{"day", "monday"}})};
  EXPECT_EQ(d, want);
  EXPECT_EQ(d, oracle::brute_force_diff(belief({{"hotel", {{"stars", "4"}}}}),
                                        belief({{"hotel", {{"stars", "4"}, {"area", "west"}}},
                                                {"train", {{"day", "monday"}}}})));
}

TEST(DiffStates, DeletionsAreIgnored) {
  auto d = diff_states(belief({{"hotel", {{"stars", "4"}, {"area", "west"}}}}), belief({{"hotel", {{"stars", "5"}}}}));
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].pairs, (SlotMap{{"stars", "5"}}));
}

TEST(StateAlgebraProperty, DiffMatchesBruteForceOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    BeliefState a = oracle::random_state(rng, kDomains);
    BeliefState b = oracle::random_state(rng, kDomains);
    ASSERT_EQ(diff_states(a, b), oracle::brute_force_diff(a, b)) << "trial " << trial;
  }
}

TEST(StateAlgebraProperty, ApplyIsIdempotent) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    BeliefState s = oracle::random_state(rng, kDomains);
    StateUpdate u = oracle::random_update(rng, kDomains);
    BeliefState once = apply_state_update(s, u, kDomains);
    ASSERT_EQ(apply_state_update(once, u, kDomains), once);
  }
}

TEST(StateAlgebraProperty, DisjointDomainUpdatesCommute) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    BeliefState s = oracle::random_state(rng, kDomains);
    StateUpdate u = oracle::random_update(rng, kDomains);
    StateUpdate v = oracle::random_update(rng, kDomains);
    if (u.domain == v.domain) continue;
    ASSERT_EQ(apply_state_update(apply_state_update(s, u, kDomains), v, kDomains),
              apply_state_update(apply_state_update(s, v, kDomains), u, kDomains));
  }
}

TEST(StateAlgebraProperty, FoldOfDiffsReproducesMonotoneClosure) {
  for (uint64_t seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 rng(seed);
    auto seq = oracle::random_state_sequence(rng, kDomains, 1 + static_cast<int>(seed % 8));
    BeliefState folded, closure, prev;
    for (const auto& next : seq) {
      for (const auto& u : diff_states(prev, next)) folded = apply_state_update(folded, u, kDomains);
      closure = oracle::merge_overwrite(closure, next);
      prev = next;
      ASSERT_EQ(folded, closure) << "seed " << seed;
    }
  }
}

TEST(StateAlgebraProperty, FoldIsExactForMonotoneSequences) {
  for (uint64_t seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    auto seq = oracle::random_monotone_sequence(rng, kDomains, 1 + static_cast<int>(seed % 8));
    BeliefState folded, prev;
    for (const auto& next : seq) {
      for (const auto& u : diff_states(prev, next)) folded = apply_state_update(folded, u, kDomains);
      prev = next;
    }
    ASSERT_EQ(folded, seq.back()) << "seed " << seed;
  }
}

TEST(FuzzyEqual, CaseInsensitive) { EXPECT_TRUE(fuzzy_equal("Cheap", "cheap", 0.9)); }

TEST(FuzzyEqual, Reflexive) { EXPECT_TRUE(fuzzy_equal("x", "x", 0.9)); }

TEST(FuzzyEqual, GuestHouseSpacing) {
  EXPECT_TRUE(fuzzy_equal("guesthouse", "guest house", 0.9));
  // The raw edit ratio also clears the threshold: one insertion over 11 characters.
  EXPECT_NEAR(similarity_ratio("guesthouse", "guest house"), 10.0 / 11.0, 1e-12);
}

TEST(FuzzyEqual, OneCharacterTypoInLongValue) {
  EXPECT_TRUE(fuzzy_equal("bed and breakfast", "bed and brekfast", 0.9));
  EXPECT_TRUE(fuzzy_equal("Cambridge", "cambrige", 0.85));
}

TEST(FuzzyEqual, ShortValuesNeedExactMatchAtDefaultThreshold) {
  EXPECT_FALSE(fuzzy_equal("north", "south", 0.9));
  EXPECT_FALSE(fuzzy_equal("cheap", "chep", 0.9));
}

TEST(FuzzyEqual, AliasesResolve) {
  EXPECT_TRUE(fuzzy_equal("center", "centre", 1.0));
  EXPECT_TRUE(fuzzy_equal("don't care", "dontcare", 1.0));
}

TEST(FuzzyEqual, DontCareIsNeverFuzzy) {
  EXPECT_FALSE(fuzzy_equal("dontcare", "dontcars", 0.5));
  EXPECT_TRUE(fuzzy_equal("dontcare", "DontCare", 1.0));
}

TEST(FuzzyEqualProperty, SymmetricAndThresholdOneIsNormalizedEquality) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    std::string a = oracle::random_word(rng, 1, 12), b = oracle::random_word(rng, 1, 12);
    if (trial % 3 == 0) b = oracle::mutate_once(rng, a);
    double t = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    ASSERT_EQ(fuzzy_equal(a, b, t), fuzzy_equal(b, a, t));
    ASSERT_EQ(fuzzy_equal(a, b, 1.0), normalize_value(a) == normalize_value(b));
    ASSERT_TRUE(fuzzy_equal(a, a, t));
  }
}

TEST(SimilarityRatio, MatchesFullMatrixLevenshtein) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    std::string a = oracle::random_word(rng, 0, 10), b = oracle::random_word(rng, 0, 10);
    ASSERT_EQ(levenshtein(a, b), oracle::levenshtein_matrix(a, b)) << a << " / " << b;
  }
}

TEST(CanonicalizeValue, EnumeratedValues) {
  SlotSpec price{"pricerange", "", {"cheap", "moderate", "expensive"}};
  EXPECT_EQ(canonicalize_value("Cheap", price), "cheap");
  EXPECT_EQ(canonicalize_value("\"expensiv\"", price, 0.85), "expensive");
  EXPECT_EQ(canonicalize_value("dontcare", price), "dontcare");
  EXPECT_EQ(canonicalize_value("any", price), "dontcare");
}

TEST(CanonicalizeValue, CentreOfTownStaysRaw) {
  SlotSpec area{"area", "", {"north", "east", "west", "south", "centre"}};
  double best = 0.0;
  for (const auto& v : area.values) best = std::max(best, oracle::ratio(oracle::levenshtein_matrix("centre of town", v), "centre of town", v));
  ASSERT_LT(best, 0.9);
  EXPECT_EQ(canonicalize_value("centre of town", area, 0.9), "centre of town");
  EXPECT_EQ(canonicalize_value("  Center ", area, 0.9), "centre");
}

TEST(CanonicalizeValueProperty, OutputIsMemberOrNormalizedRaw) {
  SlotSpec area{"area", "", {"north", "east", "west", "south", "centre"}};
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    std::string raw = trial % 2 ? oracle::mutate_once(rng, area.values[trial % 5]) : oracle::random_word(rng, 1, 8);
    std::string out = canonicalize_value(raw, area, 0.8);
    bool member = std::find(area.values.begin(), area.values.end(), out) != area.values.end();
    ASSERT_TRUE(member || out == normalize_value(raw)) << raw << " -> " << out;
  }
}

TEST(NormalizeValue, TrimsQuotesCaseAndSpaces) {
  EXPECT_EQ(normalize_value("  \"Guest   House\" "), "guesthouse");
  EXPECT_EQ(normalize_value("'North'"), "north");
}

TEST(DialogueHistory, MustAlternateStartingWithCustomer) {
  DialogueHistory h;
  EXPECT_THROW(h.add_assistant("hi"), Error);
  h.add_customer("hello");
  EXPECT_THROW(h.add_customer("again"), Error);
  h.add_assistant("hi");
  EXPECT_EQ(h.size(), 2u);
  EXPECT_EQ(h.tail(1).front().text, "hi");
  EXPECT_EQ(h.tail(0).size(), 2u);
}

TEST(DomainSchema, RejectsDuplicateSlotNames) {
  DomainSchema s{"hotel", "", {{"area", "", {}}, {"area", "", {}}}};
  EXPECT_THROW(s.validate(), Error);
}

TEST(PipelineConfig, DefaultsAndLabels) {
  PipelineConfig c;
  EXPECT_EQ(c.retrieval_k, 2);
  EXPECT_EQ(c.negatives_per_example, 1);
  EXPECT_EQ(c.pool_size_per_domain, 10);
  EXPECT_EQ(c.context_window_utterances, 2);
  EXPECT_DOUBLE_EQ(c.fuzzy_threshold, 0.9);
  EXPECT_EQ(c.variant_label(), "zs-gbs");
  c.few_shot = true;
  c.oracle_state = true;
  EXPECT_EQ(c.variant_label(), "fs-obs");
  c.oracle_domain = true;
  EXPECT_EQ(c.variant_label(), "fs-obs-od");
}

TEST(PipelineConfig, Validation) {
  PipelineConfig c;
  c.retrieval_k = -1;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.few_shot = true;
  c.pool_size_per_domain = 1;
  EXPECT_THROW(c.validate(), Error);
  c.few_shot = false;
  EXPECT_NO_THROW(c.validate());
  c.fuzzy_threshold = 1.5;
  EXPECT_THROW(c.validate(), Error);
}

TEST(PipelineConfig, JsonOverlayRejectsUnknownFields) {
  PipelineConfig c = config_from_json({{"few_shot", true}, {"retrieval_k", 3}});
  EXPECT_TRUE(c.few_shot);
  EXPECT_EQ(c.retrieval_k, 3);
  EXPECT_EQ(c.pool_size_per_domain, 10);
  EXPECT_THROW(config_from_json({{"fewshot", true}}), Error);
  EXPECT_EQ(to_json(config_from_json(to_json(c))), to_json(c));
}

TEST(JsonForms, TurnRoundTrip) {
  Turn t;
  t.user_utterance = "I want a cheap place to stay.";
  t.system_response_delex = "[hotel_name] is cheap.";
  t.gold_state = belief({{"hotel", {{"pricerange", "cheap"}}}});
  t.gold_domain = "hotel";
  t.requested_slots = {"phone"};
  t.gold_updates = {upd("hotel", {{"pricerange", "cheap"}})};
  t.service_results = std::vector<SlotMap>{{{"name", "x"}}};
  Turn back = turn_from_json(to_json(t));
  EXPECT_EQ(to_json(back), to_json(t));
}
