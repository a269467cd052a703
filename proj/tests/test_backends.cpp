#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "support/fixtures.hpp"
#include "todllm/backends.hpp"
#include "todllm/http_clients.hpp"

using namespace todllm;

namespace {

CompletionRequest req(const std::string& prompt, PromptKind tag = PromptKind::state) {
  CompletionRequest r;
  r.prompt = prompt;
  r.max_tokens = 32;
  r.tag = tag;
  return r;
}

std::shared_ptr<FunctionBackend> echo() {
  return std::make_shared<FunctionBackend>(
      [](const CompletionRequest& r) { return CompletionResult{"echo:" + r.prompt, 1.0, 3, 2, ""}; }, "echo");
}

/// Minimal local stand-in for a completion server.
class FakeServer {
 public:
  FakeServer() {
    server_.Post("/v1/completions", [this](const httplib::Request& rq, httplib::Response& rs) {
      ++hits_;
      last_body_ = rq.body;
      last_auth_ = rq.get_header_value("Authorization");
      if (fail_first_ > 0) {
        --fail_first_;
        rs.status = 503;
        return;
      }
      auto j = nlohmann::json::parse(rq.body);
      rs.set_content(nlohmann::json{{"choices", {{{"text", "done:" + j["prompt"].get<std::string>()}}}},
                                    {"usage", {{"prompt_tokens", 5}, {"completion_tokens", 1}}}}
                         .dump(),
                     "application/json");
    });
    server_.Post("/v1/chat/completions", [this](const httplib::Request& rq, httplib::Response& rs) {
      ++hits_;
      auto j = nlohmann::json::parse(rq.body);
      std::string content = j["messages"][0]["content"];
      rs.set_content(nlohmann::json{{"choices", {{{"message", {{"content", "chat:" + content}}}}}}}.dump(),
                     "application/json");
    });
    server_.Post("/denied", [this](const httplib::Request&, httplib::Response& rs) {
      ++hits_;
      rs.status = 401;
    });
    server_.Post("/weird", [](const httplib::Request&, httplib::Response& rs) {
      rs.set_content("{\"nothing\": true}", "application/json");
    });
    server_.Post("/embed", [](const httplib::Request& rq, httplib::Response& rs) {
      auto j = nlohmann::json::parse(rq.body);
      double len = static_cast<double>(j["input"].get<std::string>().size());
      rs.set_content(nlohmann::json{{"data", {{{"embedding", {len, 1.0, 0.0}}}}}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  HttpEndpoint endpoint(const std::string& path) const {
    HttpEndpoint ep;
    ep.base_url = "http://127.0.0.1:" + std::to_string(port_);
    ep.path = path;
    ep.model = "m";
    ep.timeout_s = 5;
    ep.max_retries = 2;
    ep.backoff_ms = 1;
    return ep;
  }

  std::atomic<int> hits_{0};
  std::atomic<int> fail_first_{0};
  std::string last_body_, last_auth_;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(Fingerprint, CoversPromptAndSamplingOnly) {
  auto a = req("p");
  auto b = a;
  b.tag = PromptKind::response;
  EXPECT_EQ(fingerprint(a), fingerprint(b));
  b.max_tokens = 33;
  EXPECT_NE(fingerprint(a), fingerprint(b));
  b = a;
  b.temperature = 0.5;
  EXPECT_NE(fingerprint(a), fingerprint(b));
  b = a;
  b.stop_sequences = {"\n"};
  EXPECT_NE(fingerprint(a), fingerprint(b));
  b = a;
  b.prompt = "p ";
  EXPECT_NE(fingerprint(a), fingerprint(b));
  EXPECT_EQ(fingerprint(a).size(), 64u);
  a.max_tokens = 0;
  EXPECT_THROW(fingerprint(a), Error);
}

TEST(Cassette, RecordThenReplay) {
  auto path = fixture::scratch("cassette") / "c.jsonl";
  {
    RecordingBackend rec(echo(), path);
    EXPECT_EQ(rec.complete(req("one")).text, "echo:one");
    EXPECT_EQ(rec.complete(req("two")).text, "echo:two");
    EXPECT_EQ(rec.recorded(), 2u);
    EXPECT_EQ(rec.id(), "record(echo)");
  }
  ReplayBackend replay(Cassette::load(path));
  auto r = replay.complete(req("two"));
  EXPECT_EQ(r.text, "echo:two");
  EXPECT_EQ(r.prompt_tokens, 3);
  EXPECT_EQ(r.backend_id, "echo");
  EXPECT_EQ(replay.cassette().size(), 2u);
}

TEST(Cassette, StrictMissThrowsWithFingerprint) {
  ReplayBackend replay(Cassette{});
  try {
    replay.complete(req("absent"));
    FAIL() << "expected CassetteMiss";
  } catch (const CassetteMiss& e) {
    EXPECT_EQ(e.fingerprint(), fingerprint(req("absent")));
  }
  ReplayBackend lenient(Cassette{}, false);
  EXPECT_EQ(lenient.complete(req("absent")).text, "");
}

TEST(Cassette, LastRecordWins) {
  auto path = fixture::scratch("lastwins") / "c.jsonl";
  std::ofstream out(path);
  CompletionRequest r = req("same");
  out << cassette_line({fingerprint(r), r, {"first", 0, 0, 0, "x"}}) << "\n\n";
  out << cassette_line({fingerprint(r), r, {"second", 0, 0, 0, "x"}}) << "\n";
  out.close();
  Cassette c = Cassette::load(path);
  EXPECT_EQ(c.size(), 1u);
  EXPECT_EQ(ReplayBackend(c).complete(r).text, "second");
}

TEST(Cassette, MalformedLineRejected) {
  auto path = fixture::scratch("badcassette") / "c.jsonl";
  std::ofstream(path) << "{\"fingerprint\": \"x\"}\n";
  EXPECT_THROW(Cassette::load(path), Error);
  EXPECT_THROW(Cassette::load(path.parent_path() / "missing.jsonl"), Error);
}

TEST(Cassette, CheckedInCassettesLoad) {
  EXPECT_EQ(Cassette::load(fixture::data("cassettes/multiwoz.jsonl")).size(), 176u);
  EXPECT_EQ(Cassette::load(fixture::data("cassettes/sgd.jsonl")).size(), 75u);
}

TEST(HttpBackend, CompletionWire) {
  FakeServer srv;
  auto ep = srv.endpoint("/v1/completions");
  ep.auth_value = "Bearer k";
  HttpBackend b(ep, WireShape::completion);
  auto r = b.complete(req("hello"));
  EXPECT_EQ(r.text, "done:hello");
  EXPECT_EQ(r.prompt_tokens, 5);
  EXPECT_EQ(r.completion_tokens, 1);
  EXPECT_EQ(srv.last_auth_, "Bearer k");
  auto body = nlohmann::json::parse(srv.last_body_);
  EXPECT_EQ(body["model"], "m");
  EXPECT_EQ(body["max_tokens"], 32);
  EXPECT_FALSE(body.contains("stop"));
}

TEST(HttpBackend, ChatWire) {
  FakeServer srv;
  HttpBackend b(srv.endpoint("/v1/chat/completions"), WireShape::chat);
  EXPECT_EQ(b.complete(req("hi")).text, "chat:hi");
}

TEST(HttpBackend, RetriesServerErrors) {
  FakeServer srv;
  srv.fail_first_ = 2;
  HttpBackend b(srv.endpoint("/v1/completions"), WireShape::completion);
  EXPECT_EQ(b.complete(req("x")).text, "done:x");
  EXPECT_EQ(srv.hits_, 3);

  srv.fail_first_ = 5;
  srv.hits_ = 0;
  EXPECT_THROW(b.complete(req("x")), TransportError);
  EXPECT_EQ(srv.hits_, 3);
}

TEST(HttpBackend, AuthFailureIsNotRetried) {
  FakeServer srv;
  HttpBackend b(srv.endpoint("/denied"), WireShape::completion);
  EXPECT_THROW(b.complete(req("x")), TransportError);
  EXPECT_EQ(srv.hits_, 1);
}

TEST(HttpBackend, UnexpectedShapeAndNoServer) {
  FakeServer srv;
  HttpBackend weird(srv.endpoint("/weird"), WireShape::completion);
  EXPECT_THROW(weird.complete(req("x")), TransportError);

  HttpEndpoint dead = srv.endpoint("/v1/completions");
  dead.base_url = "http://127.0.0.1:1";
  dead.max_retries = 0;
  EXPECT_THROW(HttpBackend(dead, WireShape::completion).complete(req("x")), BackendError);
  EXPECT_THROW(wire_shape_from_string("soap"), Error);
}

TEST(RemoteEmbedder, ReadsVectorAndChecksDimension) {
  FakeServer srv;
  RemoteEmbedder emb(srv.endpoint("/embed"), 3);
  EXPECT_EQ(emb.embed("abcd"), (std::vector<double>{4, 1, 0}));
  RemoteEmbedder wrong(srv.endpoint("/embed"), 4);
  EXPECT_THROW(wrong.embed("abcd"), TransportError);
}
