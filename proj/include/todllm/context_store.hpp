/**
 * @file context_store.hpp
 * @brief Few-shot example pool: embedding, exact retrieval and corruption.
 *
 * The pool per domain is small (tens of examples), so retrieval is an exact
 * brute-force cosine scan.
 */
#pragma once

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <tuple>
#include <string>
#include <vector>

#include "todllm/core.hpp"
#include "todllm/hashing.hpp"

namespace todllm {

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(std::string_view text) const = 0;
  virtual size_t dimension() const = 0;
  virtual std::string id() const = 0;
};

/// L2-normalized hashed character-trigram counts. Deterministic and local.
class HashedTrigramEmbedder : public Embedder {
 public:
  explicit HashedTrigramEmbedder(size_t dimension = 512) : dim_(dimension) {
    if (dim_ == 0) throw Error("embedding dimension must be > 0");
  }

  std::vector<double> embed(std::string_view input) const override {
    std::vector<double> v(dim_, 0.0);
    std::string s = " " + text::lower(text::collapse_whitespace(input)) + " ";
    for (size_t i = 0; i + 3 <= s.size(); ++i) v[fnv1a64(std::string_view(s).substr(i, 3)) % dim_] += 1.0;
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0)
      for (double& x : v) x /= norm;
    return v;
  }

  size_t dimension() const override { return dim_; }
  std::string id() const override { return "hashed-trigram-" + std::to_string(dim_); }

 private:
  size_t dim_;
};

inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error("cosine_similarity: dimension mismatch");
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

struct StoredExample {
  std::string id;
  std::string domain;
  std::string dialogue_id;
  int turn_index = 0;
  std::string context_key;
  StateUpdate gold_update;
  BeliefState gold_state;
  std::string gold_response_delex;
  std::vector<double> key_vector;
  bool negative = false;
};

/// A candidate pool entry before sampling and embedding.
struct Snippet {
  std::string dialogue_id;
  int turn_index = 0;
  std::string domain;
  bool single_domain = true;
  std::string context_key;
  StateUpdate gold_update;
  BeliefState gold_state;
  std::string gold_response_delex;
};

/// Speaker-labelled last (window - 1) history utterances plus the current
/// customer utterance, newline separated.
inline std::string make_context_key(const DialogueHistory& history, std::string_view utterance, int window) {
  if (window < 1) throw Error("context window must be >= 1");
  std::string key;
  if (window > 1) {
    auto tail = history.tail(static_cast<size_t>(window - 1));
    for (const auto& u : tail) {
      key += speaker_label(u.speaker);
      key += ": ";
      key += u.text;
      key += '\n';
    }
  }
  key += "Customer: ";
  key += utterance;
  return key;
}

class ContextStore {
 public:
  ContextStore() = default;
  ContextStore(std::string embedder_id, size_t dimension) : embedder_id_(std::move(embedder_id)), dim_(dimension) {}

  void add(StoredExample ex) {
    if (dim_ != 0 && ex.key_vector.size() != dim_) throw Error("stored example vector has wrong dimension");
    buckets_[ex.domain].push_back(std::move(ex));
  }

  const std::vector<StoredExample>& bucket(const std::string& domain) const {
    static const std::vector<StoredExample> empty;
    auto it = buckets_.find(domain);
    return it == buckets_.end() ? empty : it->second;
  }

  std::vector<std::string> domains() const {
    std::vector<std::string> out;
    for (const auto& [d, _] : buckets_) out.push_back(d);
    return out;
  }

  size_t size() const {
    size_t n = 0;
    for (const auto& [_, b] : buckets_) n += b.size();
    return n;
  }

  const std::string& embedder_id() const { return embedder_id_; }
  size_t dimension() const { return dim_; }

  /// Values seen per slot across a domain's examples (updates and states).
  std::map<std::string, std::set<std::string>> slot_values(const std::string& domain) const {
    std::map<std::string, std::set<std::string>> out;
    for (const auto& ex : bucket(domain)) {
      for (const auto& [s, v] : ex.gold_update.pairs) out[s].insert(v);
      if (const SlotMap* m = ex.gold_state.find(domain))
        for (const auto& [s, v] : *m) out[s].insert(v);
    }
    return out;
  }

  /// One JSON record per line.
  void save(const std::filesystem::path& path) const;
  static ContextStore load(const std::filesystem::path& path);

 private:
  std::string embedder_id_;
  size_t dim_ = 0;
  std::map<std::string, std::vector<StoredExample>> buckets_;
};

/// Samples up to `pool_size` single-domain snippets per domain (seeded,
/// uniform without replacement) and embeds their context keys.
inline ContextStore build_store(std::vector<Snippet> snippets, int pool_size, const Embedder& embedder,
                                uint64_t seed) {
  if (pool_size < 0) throw Error("pool size must be >= 0");
  std::map<std::string, std::vector<Snippet>> by_domain;
  for (auto& s : snippets)
    if (s.single_domain) by_domain[s.domain].push_back(std::move(s));

  ContextStore store(embedder.id(), embedder.dimension());
  for (auto& [domain, group] : by_domain) {
    std::sort(group.begin(), group.end(), [](const Snippet& a, const Snippet& b) {
      return std::tie(a.dialogue_id, a.turn_index) < std::tie(b.dialogue_id, b.turn_index);
    });
    Rng rng = derive_rng(seed, domain);
    size_t take = std::min(group.size(), static_cast<size_t>(pool_size));
    std::vector<size_t> idx(group.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (size_t i = 0; i < take; ++i) std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
    idx.resize(take);
    std::sort(idx.begin(), idx.end());
    for (size_t i : idx) {
      Snippet& s = group[i];
      StoredExample ex;
      ex.id = s.dialogue_id + ":" + std::to_string(s.turn_index);
      ex.domain = domain;
      ex.dialogue_id = s.dialogue_id;
      ex.turn_index = s.turn_index;
      ex.context_key = s.context_key;
      ex.gold_update = s.gold_update;
      ex.gold_update.domain = domain;
      ex.gold_state = s.gold_state;
      ex.gold_response_delex = s.gold_response_delex;
      ex.key_vector = embedder.embed(s.context_key);
      store.add(std::move(ex));
    }
  }
  return store;
}

/// The k most similar examples of `domain`, by descending cosine similarity
/// (ties by id).
inline std::vector<StoredExample> retrieve(const ContextStore& store, const std::vector<double>& query,
                                           const std::string& domain, int k) {
  if (k < 0) throw Error("k must be >= 0");
  const auto& bucket = store.bucket(domain);
  std::vector<std::pair<double, const StoredExample*>> scored;
  scored.reserve(bucket.size());
  for (const auto& ex : bucket) scored.emplace_back(cosine_similarity(query, ex.key_vector), &ex);
  size_t take = std::min(scored.size(), static_cast<size_t>(k));
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                    [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second->id < b.second->id;
                    });
  std::vector<StoredExample> out;
  for (size_t i = 0; i < take; ++i) out.push_back(*scored[i].second);
  return out;
}

inline std::vector<StoredExample> retrieve(const ContextStore& store, const Embedder& embedder,
                                           std::string_view key, const std::string& domain, int k) {
  if (k == 0 || store.bucket(domain).empty()) return {};
  return retrieve(store, embedder.embed(key), domain, k);
}

class UncorruptibleExample : public Error {
 public:
  explicit UncorruptibleExample(const std::string& id) : Error("example has no replaceable slot: " + id) {}
};

/// Negative copy of `example`: one or more update values swapped for a
/// different valid value of the same slot (schema enumeration, or values seen
/// in the pool for open slots). Slot names never change.
inline StoredExample corrupt_example(const StoredExample& example, const DomainSchema& schema,
                                     const std::map<std::string, std::set<std::string>>& pool_values, Rng& rng) {
  std::vector<std::pair<std::string, std::vector<std::string>>> candidates;
  for (const auto& [slot, value] : example.gold_update.pairs) {
    std::vector<std::string> alts;
    const SlotSpec* spec = schema.find(slot);
    std::vector<std::string> source;
    if (spec && !spec->values.empty()) {
      source = spec->values;
    } else if (auto it = pool_values.find(slot); it != pool_values.end()) {
      source.assign(it->second.begin(), it->second.end());
    }
    std::string current = normalize_value(value);
    for (const auto& v : source) {
      std::string n = normalize_value(v);
      if (n == current || n == kDontCare) continue;
      if (std::find(alts.begin(), alts.end(), v) == alts.end()) alts.push_back(v);
    }
    if (!alts.empty()) candidates.emplace_back(slot, std::move(alts));
  }
  if (candidates.empty()) throw UncorruptibleExample(example.id);

  StoredExample neg = example;
  neg.id = example.id + "#neg";
  neg.negative = true;
  size_t forced = uniform_index(rng, candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) {
    if (i != forced && uniform_index(rng, 2) == 0) continue;
    const auto& [slot, alts] = candidates[i];
    const std::string& replacement = alts[uniform_index(rng, alts.size())];
    neg.gold_update.pairs[slot] = replacement;
    neg.gold_state.domains[neg.domain][slot] = replacement;
  }
  return neg;
}

inline nlohmann::json to_json(const StoredExample& ex) {
  return {{"id", ex.id},
          {"domain", ex.domain},
          {"dialogue_id", ex.dialogue_id},
          {"turn_index", ex.turn_index},
          {"context_key", ex.context_key},
          {"gold_update", to_json(ex.gold_update)},
          {"gold_state", to_json(ex.gold_state)},
          {"gold_response_delex", ex.gold_response_delex},
          {"negative", ex.negative},
          {"vector", ex.key_vector}};
}

inline StoredExample stored_example_from_json(const nlohmann::json& j) {
  StoredExample ex;
  ex.id = j.at("id").get<std::string>();
  ex.domain = j.at("domain").get<std::string>();
  ex.dialogue_id = j.value("dialogue_id", "");
  ex.turn_index = j.value("turn_index", 0);
  ex.context_key = j.at("context_key").get<std::string>();
  ex.gold_update = update_from_json(j.at("gold_update"));
  ex.gold_state = belief_from_json(j.at("gold_state"));
  ex.gold_response_delex = j.value("gold_response_delex", "");
  ex.negative = j.value("negative", false);
  ex.key_vector = j.at("vector").get<std::vector<double>>();
  return ex;
}

inline void ContextStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write context store: " + path.string());
  for (const auto& [_, bucket] : buckets_)
    for (const auto& ex : bucket) {
      nlohmann::json j = to_json(ex);
      j["embedder"] = embedder_id_;
      out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
    }
  if (!out) throw Error("write failed: " + path.string());
}

inline ContextStore ContextStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open context store: " + path.string());
  ContextStore store;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim_view(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error(path.string() + ":" + std::to_string(lineno) + ": malformed record");
    StoredExample ex = stored_example_from_json(j);
    if (store.dim_ == 0) {
      store.dim_ = ex.key_vector.size();
      store.embedder_id_ = j.value("embedder", "");
    }
    store.add(std::move(ex));
  }
  return store;
}

}  // namespace todllm
