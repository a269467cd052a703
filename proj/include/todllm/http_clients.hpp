/**
 * @file http_clients.hpp
 * @brief HTTP completion backend and remote embedder.
 *
 * Two wire shapes are supported for completions:
 *
 *   completion: POST {"model", "prompt", "max_tokens", "temperature", "stop"}
 *               -> {"choices": [{"text": ...}], "usage": {...}}
 *   chat:       POST {"model", "messages": [{"role": "user", "content": prompt}], ...}
 *               -> {"choices": [{"message": {"content": ...}}], "usage": {...}}
 *
 * The embedder posts {"model", "input"} and reads data[0].embedding.
 */
#pragma once

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <semaphore>
#include <string>
#include <thread>

#include "todllm/backends.hpp"
#include "todllm/context_store.hpp"

namespace todllm {

enum class WireShape { completion, chat };

inline WireShape wire_shape_from_string(const std::string& s) {
  if (s == "completion") return WireShape::completion;
  if (s == "chat") return WireShape::chat;
  throw Error("unknown wire shape: " + s);
}

struct HttpEndpoint {
  std::string base_url;  // scheme://host[:port]
  std::string path;
  std::string auth_header = "Authorization";
  std::string auth_value;  // e.g. "Bearer <key>"; empty = no auth header
  std::string model;
  double timeout_s = 60.0;
  int max_retries = 3;
  int backoff_ms = 500;
};

namespace detail {

inline void set_timeouts(httplib::Client& cli, double timeout_s) {
  auto secs = static_cast<time_t>(timeout_s);
  auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
}

// POSTs JSON with retries on connection failures, 429 and 5xx responses.
inline nlohmann::json post_json(const HttpEndpoint& ep, const nlohmann::json& body) {
  httplib::Headers headers;
  if (!ep.auth_value.empty()) headers.emplace(ep.auth_header, ep.auth_value);
  std::string payload = body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  std::string last_error;
  for (int attempt = 0; attempt <= ep.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ep.backoff_ms << (attempt - 1)));
    httplib::Client cli(ep.base_url);
    set_timeouts(cli, ep.timeout_s);
    auto res = cli.Post(ep.path, headers, payload, "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status == 401 || res->status == 403) throw TransportError("authentication failed (HTTP " + std::to_string(res->status) + ")");
    if (res->status < 200 || res->status >= 300)
      throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded()) throw TransportError("response body is not JSON");
    return j;
  }
  throw TransportError(ep.base_url + ep.path + ": " + last_error + " after " + std::to_string(ep.max_retries + 1) +
                       " attempts");
}

}  // namespace detail

class HttpBackend : public Backend {
 public:
  HttpBackend(HttpEndpoint endpoint, WireShape shape, int max_concurrency = 4)
      : ep_(std::move(endpoint)), shape_(shape), slots_(std::max(1, max_concurrency)) {
    if (ep_.timeout_s <= 0) throw Error("HTTP backend timeout must be > 0");
  }

  CompletionResult complete(const CompletionRequest& request) override {
    nlohmann::json body = {{"model", ep_.model}, {"max_tokens", request.max_tokens}, {"temperature", request.temperature}};
    if (!request.stop_sequences.empty()) body["stop"] = request.stop_sequences;
    if (shape_ == WireShape::chat)
      body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}});
    else
      body["prompt"] = request.prompt;

    slots_.acquire();
    auto start = std::chrono::steady_clock::now();
    nlohmann::json j;
    try {
      j = detail::post_json(ep_, body);
    } catch (...) {
      slots_.release();
      throw;
    }
    slots_.release();
    auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    CompletionResult r;
    r.latency_ms = elapsed;
    r.backend_id = id();
    try {
      const auto& choice = j.at("choices").at(0);
      if (shape_ == WireShape::chat) {
        const auto& content = choice.at("message").at("content");
        r.text = content.is_null() ? "" : content.get<std::string>();
      } else {
        r.text = choice.at("text").get<std::string>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("unexpected response shape: ") + e.what());
    }
    if (j.contains("usage") && j["usage"].is_object()) {
      r.prompt_tokens = j["usage"].value("prompt_tokens", 0);
      r.completion_tokens = j["usage"].value("completion_tokens", 0);
    }
    return r;
  }

  std::string id() const override { return "http:" + ep_.base_url + ep_.path + (ep_.model.empty() ? "" : "#" + ep_.model); }

 private:
  HttpEndpoint ep_;
  WireShape shape_;
  std::counting_semaphore<1024> slots_;
};

class RemoteEmbedder : public Embedder {
 public:
  RemoteEmbedder(HttpEndpoint endpoint, size_t dimension) : ep_(std::move(endpoint)), dim_(dimension) {}

  std::vector<double> embed(std::string_view input) const override {
    nlohmann::json body = {{"model", ep_.model}, {"input", std::string(input)}};
    nlohmann::json j = detail::post_json(ep_, body);
    std::vector<double> v;
    try {
      v = j.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("unexpected embedding response: ") + e.what());
    }
    if (v.size() != dim_)
      throw TransportError("embedding has dimension " + std::to_string(v.size()) + ", expected " + std::to_string(dim_));
    return v;
  }

  size_t dimension() const override { return dim_; }
  std::string id() const override { return "remote:" + ep_.base_url + ep_.path + "#" + ep_.model; }

 private:
  HttpEndpoint ep_;
  size_t dim_;
};

}  // namespace todllm
