/**
 * @file backends.hpp
 * @brief Text-completion contract plus record/replay implementations.
 *
 * A cassette is a JSON-lines file, one record per completed request:
 *
 *   {"fingerprint": "<sha256>", "request": {"tag": "state", "max_tokens": 64,
 *    "temperature": 0.0, "stop": [], "prompt_head": "Definition: ..."},
 *    "result": {"text": "...", "latency_ms": 812.0, "prompt_tokens": 301,
 *               "completion_tokens": 6, "backend_id": "http:..."}}
 *
 * The fingerprint covers the prompt text and sampling parameters only, so a
 * cassette stays valid as long as the prompts it was recorded with do not change.
 * When a fingerprint appears more than once the last record wins.
 */
#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "todllm/core.hpp"
#include "todllm/hashing.hpp"
#include "todllm/prompts.hpp"

namespace todllm {

struct CompletionRequest {
  std::string prompt;
  int max_tokens = 128;
  double temperature = 0.0;
  std::vector<std::string> stop_sequences;
  PromptKind tag = PromptKind::response;
};

struct CompletionResult {
  std::string text;
  double latency_ms = 0.0;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  std::string backend_id;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

class CassetteMiss : public BackendError {
 public:
  explicit CassetteMiss(const std::string& fingerprint)
      : BackendError("cassette miss for fingerprint " + fingerprint), fingerprint_(fingerprint) {}
  const std::string& fingerprint() const { return fingerprint_; }

 private:
  std::string fingerprint_;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual CompletionResult complete(const CompletionRequest& request) = 0;
  virtual std::string id() const = 0;
};

inline std::string fingerprint(const CompletionRequest& r) {
  if (r.max_tokens <= 0) throw Error("max_tokens must be > 0");
  nlohmann::json j = {{"prompt", r.prompt},
                      {"max_tokens", r.max_tokens},
                      {"temperature", r.temperature},
                      {"stop", r.stop_sequences}};
  return sha256_hex(j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
}

inline nlohmann::json to_json(const CompletionResult& r) {
  return {{"text", r.text},
          {"latency_ms", r.latency_ms},
          {"prompt_tokens", r.prompt_tokens},
          {"completion_tokens", r.completion_tokens},
          {"backend_id", r.backend_id}};
}

inline CompletionResult completion_result_from_json(const nlohmann::json& j) {
  CompletionResult r;
  r.text = j.at("text").get<std::string>();
  r.latency_ms = j.value("latency_ms", 0.0);
  r.prompt_tokens = j.value("prompt_tokens", 0);
  r.completion_tokens = j.value("completion_tokens", 0);
  r.backend_id = j.value("backend_id", "");
  return r;
}

struct CassetteRecord {
  std::string fingerprint;
  CompletionRequest request;
  CompletionResult result;
};

inline std::string cassette_line(const CassetteRecord& rec) {
  std::string head = rec.request.prompt.substr(0, std::min<size_t>(rec.request.prompt.size(), 120));
  nlohmann::json j = {{"fingerprint", rec.fingerprint},
                      {"request",
                       {{"tag", to_string(rec.request.tag)},
                        {"max_tokens", rec.request.max_tokens},
                        {"temperature", rec.request.temperature},
                        {"stop", rec.request.stop_sequences},
                        {"prompt_head", head}}},
                      {"result", to_json(rec.result)}};
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

class Cassette {
 public:
  static Cassette load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open cassette: " + path.string());
    Cassette c;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::trim_view(line).empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("fingerprint") || !j.contains("result"))
        throw Error(path.string() + ":" + std::to_string(lineno) + ": malformed cassette record");
      c.put(j["fingerprint"].get<std::string>(), completion_result_from_json(j["result"]));
    }
    return c;
  }

  void put(const std::string& fp, CompletionResult r) { entries_[fp] = std::move(r); }

  const CompletionResult* find(const std::string& fp) const {
    auto it = entries_.find(fp);
    return it == entries_.end() ? nullptr : &it->second;
  }

  size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::string, CompletionResult> entries_;
};

/// Plays back recorded completions. Strict mode throws CassetteMiss for
/// unknown fingerprints; lenient mode answers with an empty completion.
class ReplayBackend : public Backend {
 public:
  explicit ReplayBackend(Cassette cassette, bool strict = true) : cassette_(std::move(cassette)), strict_(strict) {}

  CompletionResult complete(const CompletionRequest& request) override {
    std::string fp = fingerprint(request);
    if (const CompletionResult* r = cassette_.find(fp)) return *r;
    if (strict_) throw CassetteMiss(fp);
    return {"", 0.0, 0, 0, "replay-miss"};
  }

  std::string id() const override { return strict_ ? "replay-strict" : "replay"; }
  const Cassette& cassette() const { return cassette_; }

 private:
  Cassette cassette_;
  bool strict_;
};

/// Forwards to another backend and appends every completed call to a cassette.
class RecordingBackend : public Backend {
 public:
  RecordingBackend(std::shared_ptr<Backend> inner, const std::filesystem::path& cassette_path)
      : inner_(std::move(inner)), out_(cassette_path, std::ios::app | std::ios::binary), path_(cassette_path) {
    if (!out_) throw Error("cannot open cassette for writing: " + cassette_path.string());
  }

  CompletionResult complete(const CompletionRequest& request) override {
    CompletionResult r = inner_->complete(request);
    CassetteRecord rec{fingerprint(request), request, r};
    std::lock_guard<std::mutex> lock(mu_);
    out_ << cassette_line(rec) << '\n';
    out_.flush();
    if (!out_) throw Error("cassette write failed: " + path_.string());
    ++recorded_;
    return r;
  }

  std::string id() const override { return "record(" + inner_->id() + ")"; }

  size_t recorded() const {
    std::lock_guard<std::mutex> lock(mu_);
    return recorded_;
  }

 private:
  std::shared_ptr<Backend> inner_;
  std::ofstream out_;
  std::filesystem::path path_;
  mutable std::mutex mu_;
  size_t recorded_ = 0;
};

/// Adapts a callable; handy for scripted test doubles.
class FunctionBackend : public Backend {
 public:
  using Fn = std::function<CompletionResult(const CompletionRequest&)>;
  FunctionBackend(Fn fn, std::string id) : fn_(std::move(fn)), id_(std::move(id)) {}

  CompletionResult complete(const CompletionRequest& request) override {
    CompletionResult r = fn_(request);
    if (r.backend_id.empty()) r.backend_id = id_;
    return r;
  }
  std::string id() const override { return id_; }

 private:
  Fn fn_;
  std::string id_;
};

}  // namespace todllm
