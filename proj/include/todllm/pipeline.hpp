/**
 * @file pipeline.hpp
 * @brief Per-turn orchestration: domain -> (retrieval) -> state -> database -> response.
 *
 * Prediction file (one JSON record per turn, keys sorted, no timing data):
 *
 *   {"belief": {...}, "db_count": 23, "db_top": {...}|null, "detected_domain": "hotel",
 *    "dialogue_id": "MUL0001.json", "error": null, "response_delex": "...",
 *    "turn_index": 0, "update": {"domain": "hotel", "pairs": {...}}, "warnings": [...]}
 */
#pragma once

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "todllm/backends.hpp"
#include "todllm/context_store.hpp"
#include "todllm/core.hpp"
#include "todllm/database.hpp"
#include "todllm/ingest.hpp"
#include "todllm/parsing.hpp"
#include "todllm/prompts.hpp"

namespace todllm {

/// Shared, read-only resources for running turns.
struct PipelineContext {
  const TemplateSet* templates = nullptr;
  std::vector<DomainSchema> schemas;
  std::vector<std::string> domains;  // domain-detection choice list; defaults to schema order
  Backend* backend = nullptr;
  const ContextStore* store = nullptr;
  const Embedder* embedder = nullptr;
  const Database* db = nullptr;
  bool external_results = false;  // use dataset-provided service results instead of querying

  const DomainSchema* schema(const std::string& domain) const {
    for (const auto& s : schemas)
      if (s.name == domain) return &s;
    return nullptr;
  }

  const std::vector<std::string>& domain_list() const { return domains; }
};

inline PipelineContext make_context(const Corpus& corpus, const TemplateSet& templates, Backend& backend) {
  PipelineContext ctx;
  ctx.templates = &templates;
  ctx.schemas = corpus.schemas;
  ctx.domains = corpus.domain_names();
  ctx.backend = &backend;
  ctx.external_results = corpus.name == "sgd";
  return ctx;
}

struct CallRecord {
  PromptKind kind = PromptKind::response;
  std::string fingerprint;
  std::string completion;
  double latency_ms = 0.0;
};

struct TurnRecord {
  int turn_index = 0;
  std::string utterance;
  std::string detected_domain;
  std::vector<RenderedPrompt> prompts;
  std::vector<CallRecord> calls;
  std::vector<std::string> negative_ids;
  StateUpdate update;
  BeliefState belief;
  std::optional<DbResult> db;
  std::string raw_response;
  std::string response_delex;  // sanitized
  std::vector<std::string> placeholders;
  std::vector<std::string> warnings;
  std::optional<std::string> error;

  size_t backend_calls() const { return calls.size(); }
};

struct SessionState {
  std::string id;
  PipelineConfig config;
  DialogueHistory history;
  BeliefState belief;
  std::optional<std::string> active_domain;
  std::vector<TurnRecord> records;
};

namespace detail {

inline CompletionResult call_backend(const PipelineContext& ctx, const RenderedPrompt& prompt, int max_tokens,
                                     double temperature, TurnRecord& rec) {
  CompletionRequest req{prompt.text, max_tokens, temperature, {}, prompt.kind};
  CompletionResult r = ctx.backend->complete(req);
  rec.prompts.push_back(prompt);
  rec.calls.push_back({prompt.kind, fingerprint(req), r.text, r.latency_ms});
  return r;
}

inline void add_warnings(std::vector<std::string>& out, const std::string& prefix, const std::vector<std::string>& w) {
  for (const auto& s : w) out.push_back(prefix + ":" + s);
}

}  // namespace detail

/// Runs one turn. On a backend failure the returned record carries `error`
/// and the session is left untouched; otherwise the record is appended to
/// the session and history/belief advance.
inline TurnRecord run_turn(SessionState& session, const std::string& utterance, const PipelineContext& ctx,
                           const Turn* gold = nullptr) {
  const PipelineConfig& cfg = session.config;
  if (!ctx.templates || !ctx.backend) throw Error("pipeline context lacks templates or backend");
  if (utterance.empty()) throw Error("user utterance must be non-empty");
  if (cfg.oracle_domain && !(gold && gold->gold_domain)) throw Error("oracle domain requested without gold domain");
  if (cfg.oracle_state && !(gold && gold->gold_state)) throw Error("oracle state requested without gold state");

  TurnRecord rec;
  rec.turn_index = static_cast<int>(session.records.size());
  rec.utterance = utterance;
  const int hw = cfg.history_window;

  try {
    // Domain
    std::string domain;
    if (cfg.oracle_domain) {
      domain = *gold->gold_domain;
    } else {
      RenderedPrompt p = render_domain_prompt(*ctx.templates, session.history, utterance, ctx.domain_list(), hw);
      CompletionResult r = detail::call_backend(ctx, p, cfg.max_tokens_domain, cfg.temperature, rec);
      auto parsed = parse_domain_output(r.text, ctx.domain_list(), session.active_domain);
      domain = parsed.value;
      detail::add_warnings(rec.warnings, "domain", parsed.warnings);
    }
    const DomainSchema* schema = ctx.schema(domain);
    if (!schema) throw UnknownDomainError(domain);
    rec.detected_domain = domain;

    // Retrieval
    std::vector<StoredExample> positives, negatives;
    if (cfg.few_shot && ctx.store && ctx.embedder && cfg.retrieval_k > 0) {
      std::string key = make_context_key(session.history, utterance, cfg.context_window_utterances);
      positives = retrieve(*ctx.store, *ctx.embedder, key, domain, cfg.retrieval_k);
      auto pool_values = ctx.store->slot_values(domain);
      for (const auto& ex : positives)
        for (int n = 0; n < cfg.negatives_per_example; ++n) {
          Rng rng = derive_rng(cfg.seed, session.id + ":" + std::to_string(rec.turn_index) + ":" + ex.id + ":" +
                                             std::to_string(n));
          try {
            negatives.push_back(corrupt_example(ex, *schema, pool_values, rng));
          } catch (const UncorruptibleExample&) {
            rec.warnings.push_back("retrieval:uncorruptible-example:" + ex.id);
          }
        }
      for (const auto& n : negatives) rec.negative_ids.push_back(n.id);
    }
    const bool zero_shot = positives.empty();

    // State
    BeliefState belief;
    if (cfg.oracle_state) {
      belief = *gold->gold_state;
      rec.update.domain = domain;
      for (const auto& u : diff_states(session.belief, belief))
        if (u.domain == domain) rec.update.pairs = u.pairs;
    } else {
      RenderedPrompt p = render_state_prompt(*ctx.templates, *schema, session.history, utterance, positives,
                                             negatives, zero_shot, hw);
      CompletionResult r = detail::call_backend(ctx, p, cfg.max_tokens_state, cfg.temperature, rec);
      auto parsed = parse_state_output(r.text, *schema, cfg.fuzzy_threshold);
      rec.update = parsed.value;
      rec.update.domain = domain;
      detail::add_warnings(rec.warnings, "state", parsed.warnings);
      belief = apply_state_update(session.belief, rec.update, ctx.domain_list());
    }
    rec.belief = belief;

    // Database
    if (ctx.external_results) {
      if (gold) {
        rec.db = external_result(domain, *gold);
      } else {
        rec.db = DbResult{domain, 0, {}, true, {"missing-service-results"}};
      }
    } else if (ctx.db && ctx.db->has_domain(domain)) {
      rec.db = ctx.db->query(domain, belief, schema, cfg.fuzzy_threshold);
    }
    if (rec.db) detail::add_warnings(rec.warnings, "db", rec.db->warnings);

    // Response
    RenderedPrompt p = render_response_prompt(*ctx.templates, *schema, session.history, utterance, belief, rec.db,
                                              positives, zero_shot, hw, cfg.include_top_entity);
    CompletionResult r = detail::call_backend(ctx, p, cfg.max_tokens_response, cfg.temperature, rec);
    rec.raw_response = r.text;
    auto sanitized = sanitize_response(r.text);
    rec.response_delex = sanitized.value;
    detail::add_warnings(rec.warnings, "response", sanitized.warnings);
    rec.placeholders = extract_placeholders(rec.response_delex);
  } catch (const BackendError& e) {
    rec.error = e.what();
    return rec;
  }

  session.history.add_customer(utterance);
  std::string system_text = rec.response_delex;
  if (cfg.gold_history && gold && gold->system_response_delex) system_text = *gold->system_response_delex;
  session.history.add_assistant(system_text);
  session.belief = rec.belief;
  session.active_domain = rec.detected_domain;
  session.records.push_back(rec);
  return rec;
}

/// Feeds the gold user utterances turn by turn; stops after the first failed turn.
inline std::vector<TurnRecord> run_dialogue(const Dialogue& dialogue, const PipelineConfig& config,
                                            const PipelineContext& ctx) {
  SessionState session;
  session.id = dialogue.id;
  session.config = config;
  std::vector<TurnRecord> out;
  for (const auto& t : dialogue.turns) {
    TurnRecord rec = run_turn(session, t.user_utterance, ctx, &t);
    bool failed = rec.error.has_value();
    out.push_back(std::move(rec));
    if (failed) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Records and corpus runs

inline nlohmann::json prediction_json(const std::string& dialogue_id, const TurnRecord& r) {
  nlohmann::json j;
  j["dialogue_id"] = dialogue_id;
  j["turn_index"] = r.turn_index;
  j["detected_domain"] = r.detected_domain;
  j["update"] = to_json(r.update);
  j["belief"] = to_json(r.belief);
  j["response_delex"] = r.response_delex;
  j["db_count"] = r.db ? nlohmann::json(r.db->count) : nlohmann::json(nullptr);
  j["db_top"] = r.db && r.db->top() ? to_json(r.db->top()->attributes) : nlohmann::json(nullptr);
  j["warnings"] = r.warnings;
  j["error"] = r.error ? nlohmann::json(*r.error) : nlohmann::json(nullptr);
  return j;
}

/// Full audit form of a record; prompt texts are replaced by their length
/// unless `include_prompts`.
inline nlohmann::json turn_record_json(const TurnRecord& r, bool include_prompts) {
  nlohmann::json prompts = nlohmann::json::array();
  for (const auto& p : r.prompts) {
    nlohmann::json pj = {{"kind", to_string(p.kind)}, {"domain", p.domain}, {"provenance", p.provenance}};
    if (include_prompts) pj["text"] = p.text;
    else pj["chars"] = p.text.size();
    prompts.push_back(pj);
  }
  nlohmann::json calls = nlohmann::json::array();
  for (const auto& c : r.calls)
    calls.push_back({{"kind", to_string(c.kind)},
                     {"fingerprint", c.fingerprint},
                     {"completion", c.completion},
                     {"latency_ms", c.latency_ms}});
  nlohmann::json j = prediction_json("", r);
  j.erase("dialogue_id");
  j["utterance"] = r.utterance;
  j["prompts"] = prompts;
  j["calls"] = calls;
  j["negative_ids"] = r.negative_ids;
  j["raw_response"] = r.raw_response;
  j["placeholders"] = r.placeholders;
  j["db"] = r.db ? to_json(*r.db) : nlohmann::json(nullptr);
  return j;
}

struct Prediction {
  std::string dialogue_id;
  int turn_index = 0;
  std::string detected_domain;
  StateUpdate update;
  BeliefState belief;
  std::string response_delex;
  std::optional<int> db_count;
  std::optional<SlotMap> db_top;
  std::vector<std::string> warnings;
  std::optional<std::string> error;
};

inline Prediction prediction_from_json(const nlohmann::json& j) {
  Prediction p;
  p.dialogue_id = j.at("dialogue_id").get<std::string>();
  p.turn_index = j.at("turn_index").get<int>();
  p.detected_domain = j.value("detected_domain", "");
  if (j.contains("update")) p.update = update_from_json(j["update"]);
  p.belief = belief_from_json(j.value("belief", nlohmann::json::object()));
  p.response_delex = j.value("response_delex", "");
  if (j.contains("db_count") && !j["db_count"].is_null()) p.db_count = j["db_count"].get<int>();
  if (j.contains("db_top") && !j["db_top"].is_null()) p.db_top = slot_map_from_json(j["db_top"]);
  p.warnings = j.value("warnings", std::vector<std::string>{});
  if (j.contains("error") && !j["error"].is_null()) p.error = j["error"].get<std::string>();
  return p;
}

inline Prediction to_prediction(const std::string& dialogue_id, const TurnRecord& r) {
  return prediction_from_json(prediction_json(dialogue_id, r));
}

struct DialogueRun {
  std::string dialogue_id;
  std::vector<TurnRecord> records;
  std::optional<std::string> error;
};

struct RunArtifact {
  std::vector<DialogueRun> dialogues;
  nlohmann::json manifest;

  std::string predictions_jsonl() const {
    std::string out;
    for (const auto& d : dialogues)
      for (const auto& r : d.records)
        out += prediction_json(d.dialogue_id, r).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + '\n';
    return out;
  }

  std::vector<Prediction> predictions() const {
    std::vector<Prediction> out;
    for (const auto& d : dialogues)
      for (const auto& r : d.records) out.push_back(to_prediction(d.dialogue_id, r));
    return out;
  }

  size_t failures() const {
    size_t n = 0;
    for (const auto& d : dialogues) n += d.error ? 1 : 0;
    return n;
  }
};

inline std::string utc_timestamp() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Runs every dialogue of `corpus` whose split is in `splits` (all when empty)
/// on `parallelism` workers. Output order follows the corpus order.
inline RunArtifact run_corpus(const Corpus& corpus, const PipelineConfig& config, const PipelineContext& ctx,
                              int parallelism = 1, const std::set<std::string>& splits = {}) {
  config.validate();
  std::vector<const Dialogue*> selected;
  for (const auto& d : corpus.dialogues)
    if (splits.empty() || splits.count(d.split)) selected.push_back(&d);

  RunArtifact art;
  art.dialogues.resize(selected.size());
  std::string started = utc_timestamp();
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < selected.size(); i = next++) {
      DialogueRun& out = art.dialogues[i];
      out.dialogue_id = selected[i]->id;
      try {
        out.records = run_dialogue(*selected[i], config, ctx);
        if (!out.records.empty() && out.records.back().error) out.error = out.records.back().error;
      } catch (const std::exception& e) {
        out.error = e.what();
      }
    }
  };
  int n = std::max(1, std::min<int>(parallelism, static_cast<int>(std::max<size_t>(selected.size(), 1))));
  std::vector<std::thread> threads;
  for (int t = 1; t < n; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  size_t turns = 0, calls = 0;
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& d : art.dialogues) {
    turns += d.records.size();
    for (const auto& r : d.records) calls += r.calls.size();
    if (d.error) failures.push_back({{"dialogue_id", d.dialogue_id}, {"error", *d.error}});
  }
  art.manifest = {{"corpus", corpus.name},
                  {"variant", config.variant_label()},
                  {"config", to_json(config)},
                  {"seed", config.seed},
                  {"template_fingerprint", ctx.templates ? ctx.templates->fingerprint() : ""},
                  {"backend_id", ctx.backend ? ctx.backend->id() : ""},
                  {"embedder_id", ctx.embedder ? ctx.embedder->id() : ""},
                  {"store_examples", ctx.store ? ctx.store->size() : 0},
                  {"splits", std::vector<std::string>(splits.begin(), splits.end())},
                  {"dialogues", art.dialogues.size()},
                  {"turns", turns},
                  {"backend_calls", calls},
                  {"failures", failures},
                  {"parallelism", n},
                  {"started_at", started},
                  {"finished_at", utc_timestamp()}};
  return art;
}

inline std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open predictions: " + path.string());
  std::vector<Prediction> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim_view(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error(path.string() + ":" + std::to_string(lineno) + ": malformed prediction");
    out.push_back(prediction_from_json(j));
  }
  return out;
}

}  // namespace todllm
