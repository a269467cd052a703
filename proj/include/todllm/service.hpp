/**
 * @file service.hpp
 * @brief Chat and annotation HTTP service (JSON over /v1).
 *
 *   POST /v1/sessions                      {"config": {...}?, "goal_id": "..."?}
 *                                          -> 201 {session_id, goal_id, goal_message, goal}
 *   GET  /v1/sessions/{id}/transcript      ?debug=1 includes prompt texts
 *   POST /v1/sessions/{id}/messages        {"text": "..."}
 *                                          -> 200 {response_lexicalized, response_delex, belief,
 *                                                  detected_domain, db_count, warnings, turn_index}
 *   POST /v1/sessions/{id}/annotation      {q1_successful_subdialogues | q1_domain_flags,
 *                                           q2_clarifications, q3_all_captured, note, overwrite?}
 *   GET  /v1/annotations/export            {records, aggregate, table}
 *   GET  /v1/instructions                  annotator instructions (configurable text)
 *   GET  /v1/health
 *
 * Errors: 400 bad body, 404 unknown session/goal, 409 busy session or repeated
 * annotation, 422 invalid annotation/config, 502 backend failure, 503 no goals.
 *
 * State is persisted as append-only JSON lines (session, turn, annotation
 * events) and replayed on start.
 */
#pragma once

#include <httplib.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "todllm/database.hpp"
#include "todllm/eval.hpp"
#include "todllm/hashing.hpp"
#include "todllm/ingest.hpp"
#include "todllm/pipeline.hpp"

namespace todllm {

struct ServiceOptions {
  uint64_t seed = 0;
  PipelineConfig base_config;
  std::filesystem::path state_file;  // empty = in-memory only
  std::string cors_origin = "*";
  std::filesystem::path static_dir;  // optional UI bundle
  std::string instructions =
      "Talk to the assistant to reach the goal shown on the goal card. When the conversation is over, answer the "
      "three questions below.";
};

struct ServiceReply {
  int status = 200;
  nlohmann::json body;
};

class ChatService {
 public:
  ChatService(const Corpus* corpus, PipelineContext ctx, ServiceOptions options)
      : corpus_(corpus), ctx_(std::move(ctx)), opts_(std::move(options)), goal_rng_(opts_.seed) {
    if (corpus_)
      for (const auto& d : corpus_->dialogues)
        if (d.goal) goal_ids_.push_back(d.id);
    std::sort(goal_ids_.begin(), goal_ids_.end());
    if (!opts_.state_file.empty()) replay_state();
  }

  ServiceReply create_session(const nlohmann::json& body) {
    if (goal_ids_.empty()) return error(503, "no corpus with goals loaded");
    if (!body.is_object()) return error(400, "body must be a JSON object");
    PipelineConfig cfg = opts_.base_config;
    try {
      if (body.contains("config")) cfg = config_from_json(body["config"], cfg);
    } catch (const std::exception& e) {
      return error(422, e.what());
    }
    if (cfg.oracle_state || cfg.oracle_domain) return error(422, "oracle modes need gold annotations; not available live");

    std::lock_guard<std::mutex> lock(mu_);
    std::string goal_id;
    if (body.contains("goal_id") && !body["goal_id"].is_null()) {
      goal_id = body["goal_id"].get<std::string>();
      if (!std::binary_search(goal_ids_.begin(), goal_ids_.end(), goal_id)) return error(404, "unknown goal " + goal_id);
    } else {
      goal_id = goal_ids_[uniform_index(goal_rng_, goal_ids_.size())];
    }
    auto s = std::make_shared<Session>();
    s->id = next_session_id();
    s->goal_id = goal_id;
    s->goal = *corpus_->dialogue(goal_id)->goal;
    s->state.id = s->id;
    s->state.config = cfg;
    s->created = s->updated = utc_timestamp();
    sessions_[s->id] = s;
    persist({{"type", "session"},
             {"session_id", s->id},
             {"goal_id", goal_id},
             {"config", to_json(cfg)},
             {"created", s->created}});
    return {201, session_summary(*s)};
  }

  ServiceReply post_message(const std::string& id, const nlohmann::json& body) {
    auto s = find(id);
    if (!s) return error(404, "unknown session " + id);
    if (!body.is_object() || !body.contains("text") || !body["text"].is_string()) return error(400, "body needs \"text\"");
    std::string text = text::trim(body["text"].get<std::string>());
    if (text.empty()) return error(400, "message text is empty");

    std::unique_lock<std::mutex> lock(s->mu, std::try_to_lock);
    if (!lock.owns_lock()) return error(409, "session is busy with another message");

    TurnRecord rec;
    try {
      rec = run_turn(s->state, text, ctx_);
    } catch (const std::exception& e) {
      return error(422, e.what());
    }
    if (rec.error) return error(502, "backend failure: " + *rec.error);

    auto [lexicalized, warnings] = lexicalize_for_display(*s, rec);
    nlohmann::json turn = turn_record_json(rec, true);
    turn["response_lexicalized"] = lexicalized;
    s->transcript.push_back(turn);
    s->updated = utc_timestamp();
    persist({{"type", "turn"},
             {"session_id", s->id},
             {"record", turn},
             {"assistant", s->state.history.utterances().back().text},
             {"updated", s->updated}});

    nlohmann::json all_warnings = rec.warnings;
    for (const auto& w : warnings) all_warnings.push_back(w);
    return {200,
            {{"turn_index", rec.turn_index},
             {"response_lexicalized", lexicalized},
             {"response_delex", rec.response_delex},
             {"belief", to_json(rec.belief)},
             {"detected_domain", rec.detected_domain},
             {"db_count", rec.db ? nlohmann::json(rec.db->count) : nlohmann::json(nullptr)},
             {"warnings", all_warnings}}};
  }

  ServiceReply annotate(const std::string& id, const nlohmann::json& body, bool overwrite_flag = false) {
    auto s = find(id);
    if (!s) return error(404, "unknown session " + id);
    if (!body.is_object()) return error(400, "body must be a JSON object");
    AnnotationRecord a;
    try {
      a = annotation_from_json(body);
    } catch (const std::exception& e) {
      return error(422, e.what());
    }
    a.session_id = s->id;
    a.goal_domains = static_cast<int>(s->goal.domains.size());
    for (const auto& [d, ok] : a.q1_domain_flags)
      if (!s->goal.domains.count(d)) return error(422, "domain " + d + " is not part of the goal");
    if (a.q1_successful_subdialogues > a.goal_domains)
      return error(422, "q1 exceeds the number of goal domains (" + std::to_string(a.goal_domains) + ")");
    bool overwrite = overwrite_flag || body.value("overwrite", false);

    std::lock_guard<std::mutex> lock(s->mu);
    if (s->annotation && !overwrite) return error(409, "session already annotated");
    s->annotation = a;
    s->updated = utc_timestamp();
    persist({{"type", "annotation"}, {"session_id", s->id}, {"annotation", to_json(a)}, {"updated", s->updated}});
    return {201, to_json(a)};
  }

  ServiceReply transcript(const std::string& id, bool debug) {
    auto s = find(id);
    if (!s) return error(404, "unknown session " + id);
    std::lock_guard<std::mutex> lock(s->mu);
    nlohmann::json turns = nlohmann::json::array();
    for (auto t : s->transcript) {
      if (!debug)
        for (auto& p : t["prompts"])
          if (p.contains("text")) {
            p["chars"] = p["text"].get<std::string>().size();
            p.erase("text");
          }
      turns.push_back(std::move(t));
    }
    nlohmann::json body = session_summary(*s);
    body["turns"] = turns;
    body["belief"] = to_json(s->state.belief);
    body["annotation"] = s->annotation ? to_json(*s->annotation) : nlohmann::json(nullptr);
    body["created"] = s->created;
    body["updated"] = s->updated;
    return {200, body};
  }

  ServiceReply export_annotations() {
    std::vector<AnnotationRecord> records;
    {
      std::lock_guard<std::mutex> lock(mu_);
      for (const auto& [id, s] : sessions_) {
        std::lock_guard<std::mutex> sl(s->mu);
        if (s->annotation) records.push_back(*s->annotation);
      }
    }
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : records) arr.push_back(to_json(r));
    AnnotationTable t = aggregate_annotations(records);
    return {200, {{"records", arr}, {"aggregate", to_json(t)}, {"table", render_annotation_table(t)}}};
  }

  size_t session_count() const {
    std::lock_guard<std::mutex> lock(mu_);
    return sessions_.size();
  }

  /// Registers the routes on an httplib server.
  void attach(httplib::Server& server) {
    auto send = [this](httplib::Response& res, const ServiceReply& r) {
      res.status = r.status;
      res.set_content(r.body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace), "application/json");
    };
    auto parse = [](const httplib::Request& req, nlohmann::json& out) {
      if (req.body.empty()) {
        out = nlohmann::json::object();
        return true;
      }
      out = nlohmann::json::parse(req.body, nullptr, false);
      return !out.is_discarded();
    };
    server.set_default_headers({{"Access-Control-Allow-Origin", opts_.cors_origin},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.Get("/v1/health", [send](const httplib::Request&, httplib::Response& res) {
      send(res, {200, {{"status", "ok"}}});
    });
    server.Get("/v1/instructions", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, {200, {{"instructions", opts_.instructions}}});
    });
    server.Post("/v1/sessions", [this, send, parse](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json body;
      if (!parse(req, body)) return send(res, error(400, "malformed JSON"));
      send(res, create_session(body));
    });
    server.Post(R"(/v1/sessions/([^/]+)/messages)", [this, send, parse](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json body;
      if (!parse(req, body)) return send(res, error(400, "malformed JSON"));
      send(res, post_message(req.matches[1], body));
    });
    server.Post(R"(/v1/sessions/([^/]+)/annotation)", [this, send, parse](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json body;
      if (!parse(req, body)) return send(res, error(400, "malformed JSON"));
      bool overwrite = req.has_param("overwrite") && req.get_param_value("overwrite") != "0";
      send(res, annotate(req.matches[1], body, overwrite));
    });
    server.Get(R"(/v1/sessions/([^/]+)/transcript)", [this, send](const httplib::Request& req, httplib::Response& res) {
      bool debug = req.has_param("debug") && req.get_param_value("debug") != "0";
      send(res, transcript(req.matches[1], debug));
    });
    server.Get("/v1/annotations/export", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, export_annotations());
    });
    if (!opts_.static_dir.empty()) server.set_mount_point("/", opts_.static_dir.string());
  }

  /// Deterministic stand-in booking reference for a (session, domain) pair.
  static std::string pseudo_reference(const std::string& session_id, const std::string& domain) {
    std::string h = sha256_hex(session_id + ":" + domain).substr(0, 8);
    for (auto& c : h) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return h;
  }

 private:
  struct Session {
    std::string id;
    std::string goal_id;
    GoalSpec goal;
    SessionState state;
    std::vector<nlohmann::json> transcript;
    std::optional<AnnotationRecord> annotation;
    std::string created;
    std::string updated;
    std::mutex mu;
  };

  static ServiceReply error(int status, const std::string& message) { return {status, {{"error", message}}}; }

  std::shared_ptr<Session> find(const std::string& id) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  std::string next_session_id() {
    return "s" + sha256_hex(std::to_string(opts_.seed) + ":" + std::to_string(created_++)).substr(0, 12);
  }

  nlohmann::json session_summary(const Session& s) const {
    return {{"session_id", s.id},
            {"goal_id", s.goal_id},
            {"goal_message", describe_goal(s.goal)},
            {"goal", to_json(s.goal)},
            {"config", to_json(s.state.config)}};
  }

  std::pair<std::string, std::vector<std::string>> lexicalize_for_display(const Session& s, const TurnRecord& rec) const {
    SlotMap extras = {{"reference", pseudo_reference(s.id, rec.detected_domain)}};
    const Entity* top = nullptr;
    if (rec.db) {
      extras["choice"] = std::to_string(rec.db->count);
      top = rec.db->top();
    }
    LexicalizeResult lx = lexicalize(rec.response_delex, top, extras);
    std::vector<std::string> warnings;
    for (const auto& u : lx.unresolved) warnings.push_back("lexicalize:unresolved:" + u);
    return {lx.text, warnings};
  }

  void persist(const nlohmann::json& event) {
    if (opts_.state_file.empty()) return;
    std::lock_guard<std::mutex> lock(file_mu_);
    std::ofstream out(opts_.state_file, std::ios::app | std::ios::binary);
    if (!out) throw Error("cannot write service state: " + opts_.state_file.string());
    out << event.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }

  void replay_state() {
    std::ifstream in(opts_.state_file);
    if (!in) return;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::trim_view(line).empty()) continue;
      nlohmann::json e = nlohmann::json::parse(line, nullptr, false);
      if (e.is_discarded())
        throw Error(opts_.state_file.string() + ":" + std::to_string(lineno) + ": malformed service record");
      std::string type = e.value("type", "");
      std::string id = e.value("session_id", "");
      if (type == "session") {
        const Dialogue* d = corpus_ ? corpus_->dialogue(e.at("goal_id").get<std::string>()) : nullptr;
        if (!d || !d->goal) throw Error("service state references unknown goal " + e.at("goal_id").dump());
        auto s = std::make_shared<Session>();
        s->id = id;
        s->goal_id = d->id;
        s->goal = *d->goal;
        s->state.id = id;
        s->state.config = config_from_json(e.at("config"));
        s->created = s->updated = e.value("created", "");
        sessions_[id] = s;
        ++created_;
        // Keep the goal stream aligned with the original run.
        uniform_index(goal_rng_, goal_ids_.size());
      } else if (type == "turn") {
        auto s = sessions_.at(id);
        const auto& r = e.at("record");
        TurnRecord rec;
        rec.turn_index = r.at("turn_index").get<int>();
        rec.utterance = r.at("utterance").get<std::string>();
        rec.detected_domain = r.at("detected_domain").get<std::string>();
        rec.belief = belief_from_json(r.at("belief"));
        s->state.history.add_customer(rec.utterance);
        s->state.history.add_assistant(e.at("assistant").get<std::string>());
        s->state.belief = rec.belief;
        s->state.active_domain = rec.detected_domain;
        s->state.records.push_back(rec);
        s->transcript.push_back(r);
        s->updated = e.value("updated", s->updated);
      } else if (type == "annotation") {
        auto s = sessions_.at(id);
        s->annotation = annotation_from_json(e.at("annotation"));
        s->updated = e.value("updated", s->updated);
      }
    }
  }

  const Corpus* corpus_;
  PipelineContext ctx_;
  ServiceOptions opts_;
  std::vector<std::string> goal_ids_;
  Rng goal_rng_;
  size_t created_ = 0;
  mutable std::mutex mu_;
  std::mutex file_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace todllm
