/**
 * @file core.hpp
 * @brief Dialogue domain types, belief-state algebra and fuzzy value matching.
 *
 * Everything here is a value type or a pure function. The belief state is
 * accumulated from turn-level updates; updates only add or overwrite pairs,
 * there is no deletion channel.
 */
#pragma once

#include <json.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "todllm/text.hpp"

namespace todllm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownDomainError : public Error {
 public:
  explicit UnknownDomainError(const std::string& domain)
      : Error("unknown domain: " + domain), domain_(domain) {}
  const std::string& domain() const { return domain_; }

 private:
  std::string domain_;
};

inline constexpr std::string_view kDontCare = "dontcare";

using SlotMap = std::map<std::string, std::string>;

struct BeliefState {
  std::map<std::string, SlotMap> domains;

  bool empty() const { return domains.empty(); }

  const SlotMap* find(const std::string& domain) const {
    auto it = domains.find(domain);
    return it == domains.end() ? nullptr : &it->second;
  }

  std::optional<std::string> get(const std::string& domain, const std::string& slot) const {
    if (const SlotMap* m = find(domain)) {
      auto it = m->find(slot);
      if (it != m->end()) return it->second;
    }
    return std::nullopt;
  }

  size_t pair_count() const {
    size_t n = 0;
    for (const auto& [_, m] : domains) n += m.size();
    return n;
  }

  friend bool operator==(const BeliefState&, const BeliefState&) = default;
};

struct StateUpdate {
  std::string domain;
  SlotMap pairs;
  std::vector<std::string> warnings;

  friend bool operator==(const StateUpdate&, const StateUpdate&) = default;
};

enum class Speaker { customer, assistant };

inline std::string_view speaker_label(Speaker s) {
  return s == Speaker::customer ? "Customer" : "Assistant";
}

struct Utterance {
  Speaker speaker;
  std::string text;
  friend bool operator==(const Utterance&, const Utterance&) = default;
};

/// Alternating customer/assistant utterances, starting with the customer.
class DialogueHistory {
 public:
  DialogueHistory() = default;

  void add(Speaker speaker, std::string text) {
    Speaker expected = utterances_.size() % 2 == 0 ? Speaker::customer : Speaker::assistant;
    if (speaker != expected) throw Error("dialogue history must alternate starting with the customer");
    utterances_.push_back({speaker, std::move(text)});
  }
  void add_customer(std::string text) { add(Speaker::customer, std::move(text)); }
  void add_assistant(std::string text) { add(Speaker::assistant, std::move(text)); }

  const std::vector<Utterance>& utterances() const { return utterances_; }
  size_t size() const { return utterances_.size(); }
  bool empty() const { return utterances_.empty(); }

  /// The last `n` utterances (all of them when n == 0 or n >= size).
  std::vector<Utterance> tail(size_t n) const {
    if (n == 0 || n >= utterances_.size()) return utterances_;
    return {utterances_.end() - static_cast<std::ptrdiff_t>(n), utterances_.end()};
  }

  friend bool operator==(const DialogueHistory&, const DialogueHistory&) = default;

 private:
  std::vector<Utterance> utterances_;
};

struct SlotSpec {
  std::string name;
  std::string description;
  std::vector<std::string> values;  // canonical enumeration; empty for open slots
  bool informable = true;
  bool requestable = true;
  bool booking = false;  // booking-only slots never constrain database queries
};

struct DomainSchema {
  std::string name;
  std::string description;
  std::vector<SlotSpec> slots;

  const SlotSpec* find(std::string_view slot) const {
    for (const auto& s : slots)
      if (s.name == slot) return &s;
    return nullptr;
  }

  void validate() const {
    std::vector<std::string> names;
    for (const auto& s : slots) {
      if (s.name.empty()) throw Error("schema " + name + ": empty slot name");
      names.push_back(s.name);
    }
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end())
      throw Error("schema " + name + ": duplicate slot names");
  }
};

/// Gold annotation for one user turn plus the system response that followed it.
struct Turn {
  std::string user_utterance;
  std::optional<std::string> system_response;        // lexicalized gold
  std::optional<std::string> system_response_delex;  // delexicalized gold
  std::optional<BeliefState> gold_state;
  std::optional<std::string> gold_domain;
  std::vector<std::string> requested_slots;
  std::vector<StateUpdate> gold_updates;  // filled by ingest::derive_gold_updates
  // Dataset-provided service results (SGD); nullopt when the dataset has none for the turn.
  std::optional<std::vector<SlotMap>> service_results;
};

struct PipelineConfig {
  bool few_shot = false;
  bool oracle_state = false;
  bool oracle_domain = false;
  int retrieval_k = 2;
  int negatives_per_example = 1;
  int pool_size_per_domain = 10;
  int context_window_utterances = 2;
  double fuzzy_threshold = 0.9;
  int history_window = 0;  // utterances of history in prompts; 0 = entire dialogue
  bool gold_history = false;
  bool include_top_entity = false;
  int max_tokens_domain = 8;
  int max_tokens_state = 64;
  int max_tokens_response = 128;
  double temperature = 0.0;
  unsigned long long seed = 0;

  void validate() const {
    if (retrieval_k < 0) throw Error("retrieval_k must be >= 0");
    if (negatives_per_example < 0) throw Error("negatives_per_example must be >= 0");
    if (pool_size_per_domain < 0) throw Error("pool_size_per_domain must be >= 0");
    if (few_shot && pool_size_per_domain < retrieval_k)
      throw Error("pool_size_per_domain must be >= retrieval_k in few-shot mode");
    if (context_window_utterances < 1) throw Error("context_window_utterances must be >= 1");
    if (fuzzy_threshold < 0.0 || fuzzy_threshold > 1.0) throw Error("fuzzy_threshold must be in [0,1]");
    if (history_window < 0) throw Error("history_window must be >= 0");
    if (max_tokens_domain <= 0 || max_tokens_state <= 0 || max_tokens_response <= 0)
      throw Error("max_tokens must be > 0");
    if (temperature < 0.0) throw Error("temperature must be >= 0");
  }

  std::string variant_label() const {
    std::string label = few_shot ? "fs" : "zs";
    label += oracle_state ? "-obs" : "-gbs";
    if (oracle_domain) label += "-od";
    return label;
  }
};

// ---------------------------------------------------------------------------
// Belief-state algebra

inline bool contains_domain(const std::vector<std::string>& domains, const std::string& d) {
  return std::find(domains.begin(), domains.end(), d) != domains.end();
}

/// Merges `update` into a copy of `state` (last write wins).
inline BeliefState apply_state_update(const BeliefState& state, const StateUpdate& update,
                                      const std::vector<std::string>& known_domains) {
  if (!contains_domain(known_domains, update.domain)) throw UnknownDomainError(update.domain);
  BeliefState out = state;
  if (update.pairs.empty()) return out;
  SlotMap& target = out.domains[update.domain];
  for (const auto& [slot, value] : update.pairs) target[slot] = value;
  return out;
}

/// Added or changed pairs going from `prev` to `next`, one update per domain in
/// name order. Pairs missing from `next` are not reported.
inline std::vector<StateUpdate> diff_states(const BeliefState& prev, const BeliefState& next) {
  std::vector<StateUpdate> out;
  for (const auto& [domain, slots] : next.domains) {
    StateUpdate u{domain, {}, {}};
    const SlotMap* before = prev.find(domain);
    for (const auto& [slot, value] : slots) {
      if (before) {
        auto it = before->find(slot);
        if (it != before->end() && it->second == value) continue;
      }
      u.pairs[slot] = value;
    }
    if (!u.pairs.empty()) out.push_back(std::move(u));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Value normalization and fuzzy matching

inline size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<size_t> row(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    size_t diag = row[0];
    row[0] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
      size_t up = row[j];
      size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + cost});
      diag = up;
    }
  }
  return row[b.size()];
}

/// 1 - levenshtein / max(length); two empty strings are identical.
inline double similarity_ratio(std::string_view a, std::string_view b) {
  size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

/// Spelling variants that denote the same value.
inline std::string canonical_alias(const std::string& normalized) {
  static const std::map<std::string, std::string> aliases = {
      {"center", "centre"},          {"guest house", "guesthouse"},
      {"don't care", "dontcare"},    {"dont care", "dontcare"},
      {"do not care", "dontcare"},   {"do n't care", "dontcare"},
      {"doesn't matter", "dontcare"}, {"any", "dontcare"},
  };
  auto it = aliases.find(normalized);
  return it == aliases.end() ? normalized : it->second;
}

/// Lowercased, trimmed, unquoted, whitespace-collapsed, aliases resolved.
inline std::string normalize_value(std::string_view raw) {
  return canonical_alias(text::lower(text::collapse_whitespace(text::strip_quotes(raw))));
}

inline bool fuzzy_equal(std::string_view a, std::string_view b, double threshold = 0.9) {
  std::string na = normalize_value(a);
  std::string nb = normalize_value(b);
  if (na == nb) return true;
  if (na == kDontCare || nb == kDontCare) return false;
  return similarity_ratio(na, nb) >= threshold;
}

/// Maps a raw value onto the slot's enumeration when one is close enough,
/// otherwise returns the normalized raw text.
inline std::string canonicalize_value(std::string_view raw, const SlotSpec& slot,
                                      double threshold = 0.9) {
  std::string n = normalize_value(raw);
  if (n == kDontCare || slot.values.empty()) return n;
  const std::string* best = nullptr;
  double best_ratio = -1.0;
  for (const auto& v : slot.values) {
    double r = similarity_ratio(n, normalize_value(v));
    if (r > best_ratio) {
      best_ratio = r;
      best = &v;
    }
  }
  if (best && best_ratio >= threshold) return *best;
  return n;
}

// ---------------------------------------------------------------------------
// JSON forms

inline nlohmann::json to_json(const SlotMap& m) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

inline SlotMap slot_map_from_json(const nlohmann::json& j) {
  SlotMap m;
  for (auto it = j.begin(); it != j.end(); ++it) m[it.key()] = it.value().get<std::string>();
  return m;
}

inline nlohmann::json to_json(const BeliefState& s) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [d, m] : s.domains) j[d] = to_json(m);
  return j;
}

inline BeliefState belief_from_json(const nlohmann::json& j) {
  BeliefState s;
  for (auto it = j.begin(); it != j.end(); ++it) {
    SlotMap m = slot_map_from_json(it.value());
    if (!m.empty()) s.domains[it.key()] = std::move(m);
  }
  return s;
}

inline nlohmann::json to_json(const StateUpdate& u) {
  return {{"domain", u.domain}, {"pairs", to_json(u.pairs)}, {"warnings", u.warnings}};
}

inline StateUpdate update_from_json(const nlohmann::json& j) {
  return {j.at("domain").get<std::string>(), slot_map_from_json(j.at("pairs")),
          j.value("warnings", std::vector<std::string>{})};
}

inline nlohmann::json to_json(const Turn& t) {
  nlohmann::json j = {{"user", t.user_utterance}};
  if (t.system_response) j["system"] = *t.system_response;
  if (t.system_response_delex) j["system_delex"] = *t.system_response_delex;
  if (t.gold_state) j["gold_state"] = to_json(*t.gold_state);
  if (t.gold_domain) j["gold_domain"] = *t.gold_domain;
  if (!t.requested_slots.empty()) j["requested_slots"] = t.requested_slots;
  if (!t.gold_updates.empty()) {
    nlohmann::json u = nlohmann::json::array();
    for (const auto& x : t.gold_updates) u.push_back(to_json(x));
    j["gold_updates"] = u;
  }
  if (t.service_results) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& m : *t.service_results) r.push_back(to_json(m));
    j["service_results"] = r;
  }
  return j;
}

inline Turn turn_from_json(const nlohmann::json& j) {
  Turn t;
  t.user_utterance = j.at("user").get<std::string>();
  if (j.contains("system")) t.system_response = j["system"].get<std::string>();
  if (j.contains("system_delex")) t.system_response_delex = j["system_delex"].get<std::string>();
  if (j.contains("gold_state")) t.gold_state = belief_from_json(j["gold_state"]);
  if (j.contains("gold_domain")) t.gold_domain = j["gold_domain"].get<std::string>();
  t.requested_slots = j.value("requested_slots", std::vector<std::string>{});
  if (j.contains("gold_updates"))
    for (const auto& u : j["gold_updates"]) t.gold_updates.push_back(update_from_json(u));
  if (j.contains("service_results")) {
    std::vector<SlotMap> rows;
    for (const auto& r : j["service_results"]) rows.push_back(slot_map_from_json(r));
    t.service_results = std::move(rows);
  }
  return t;
}

inline nlohmann::json to_json(const DomainSchema& s) {
  nlohmann::json slots = nlohmann::json::array();
  for (const auto& sl : s.slots)
    slots.push_back({{"name", sl.name},
                     {"description", sl.description},
                     {"values", sl.values},
                     {"informable", sl.informable},
                     {"requestable", sl.requestable},
                     {"booking", sl.booking}});
  return {{"name", s.name}, {"description", s.description}, {"slots", slots}};
}

inline DomainSchema schema_from_json(const nlohmann::json& j) {
  DomainSchema s;
  s.name = j.at("name").get<std::string>();
  s.description = j.value("description", "");
  for (const auto& sl : j.at("slots")) {
    SlotSpec spec;
    spec.name = sl.at("name").get<std::string>();
    spec.description = sl.value("description", "");
    spec.values = sl.value("values", std::vector<std::string>{});
    spec.informable = sl.value("informable", true);
    spec.requestable = sl.value("requestable", true);
    spec.booking = sl.value("booking", false);
    s.slots.push_back(std::move(spec));
  }
  s.validate();
  return s;
}

inline nlohmann::json to_json(const PipelineConfig& c) {
  return {{"few_shot", c.few_shot},
          {"oracle_state", c.oracle_state},
          {"oracle_domain", c.oracle_domain},
          {"retrieval_k", c.retrieval_k},
          {"negatives_per_example", c.negatives_per_example},
          {"pool_size_per_domain", c.pool_size_per_domain},
          {"context_window_utterances", c.context_window_utterances},
          {"fuzzy_threshold", c.fuzzy_threshold},
          {"history_window", c.history_window},
          {"gold_history", c.gold_history},
          {"include_top_entity", c.include_top_entity},
          {"max_tokens_domain", c.max_tokens_domain},
          {"max_tokens_state", c.max_tokens_state},
          {"max_tokens_response", c.max_tokens_response},
          {"temperature", c.temperature},
          {"seed", c.seed}};
}

/// Overlays the fields present in `j` onto `base`; unknown keys are rejected.
inline PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {}) {
  if (!j.is_object()) throw Error("pipeline config must be an object");
  nlohmann::json known = to_json(base);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.contains(it.key())) throw Error("unknown pipeline config field: " + it.key());
  auto pick = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  pick("few_shot", base.few_shot);
  pick("oracle_state", base.oracle_state);
  pick("oracle_domain", base.oracle_domain);
  pick("retrieval_k", base.retrieval_k);
  pick("negatives_per_example", base.negatives_per_example);
  pick("pool_size_per_domain", base.pool_size_per_domain);
  pick("context_window_utterances", base.context_window_utterances);
  pick("fuzzy_threshold", base.fuzzy_threshold);
  pick("history_window", base.history_window);
  pick("gold_history", base.gold_history);
  pick("include_top_entity", base.include_top_entity);
  pick("max_tokens_domain", base.max_tokens_domain);
  pick("max_tokens_state", base.max_tokens_state);
  pick("max_tokens_response", base.max_tokens_response);
  pick("temperature", base.temperature);
  pick("seed", base.seed);
  base.validate();
  return base;
}

}  // namespace todllm
