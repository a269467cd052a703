/**
 * @file cli.hpp
 * @brief The `todllm` command line: ingest, build-store, run, record,
 * evaluate, sweep and serve.
 *
 * Exit codes: 0 success, 1 evaluation mismatch (evaluate --expect), 2 input
 * error, 3 backend error. Pipeline settings resolve as flags > --config file
 * (a flat JSON object with PipelineConfig field names) > defaults. Every
 * command that writes files also writes a manifest.json next to them.
 */
#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fixtures/scripted_backend.hpp"
#include "todllm/backends.hpp"
#include "todllm/context_store.hpp"
#include "todllm/database.hpp"
#include "todllm/eval.hpp"
#include "todllm/http_clients.hpp"
#include "todllm/ingest.hpp"
#include "todllm/pipeline.hpp"
#include "todllm/service.hpp"

namespace todllm::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kMismatch = 1, kInputError = 2, kBackendError = 3 };

// ---------------------------------------------------------------------------
// Helpers

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
  if (!out) throw Error("cannot write " + p.string());
}

/// sha256 of a file, or of a directory's sorted (relative path, file hash) listing.
inline std::string path_sha256(const fs::path& p) {
  if (fs::is_regular_file(p)) return sha256_hex(read_file(p));
  if (!fs::is_directory(p)) throw Error("not found: " + p.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(p))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string listing;
  for (const auto& f : files) listing += fs::relative(f, p).generic_string() + ' ' + sha256_hex(read_file(f)) + '\n';
  return sha256_hex(listing);
}

inline std::set<std::string> parse_splits(const std::string& s) {
  if (s == "all" || s.empty()) return {};
  std::set<std::string> out;
  for (const auto& part : text::split(s, ',')) {
    std::string p = text::trim(part);
    if (p != "train" && p != "dev" && p != "test") throw Error("unknown split: " + p);
    out.insert(p);
  }
  return out;
}

/// A unified corpus directory (from `ingest`) or a raw MultiWOZ 2.2 / SGD directory.
inline Corpus open_corpus(const fs::path& p) {
  if (fs::exists(p / "corpus.jsonl")) return load_corpus(p);
  if (fs::exists(p / "schema.json")) return load_multiwoz(p);
  for (const char* split : {"train", "dev", "test"})
    if (fs::exists(p / split / "schema.json")) return load_sgd(p);
  throw Error("not a corpus directory: " + p.string());
}

inline nlohmann::json input_entry(const fs::path& p) { return {{"path", p.string()}, {"sha256", path_sha256(p)}}; }

struct Manifest {
  nlohmann::json j;

  Manifest(const std::string& command, const std::vector<std::string>& argv) {
    j = {{"command", command}, {"argv", argv}, {"inputs", nlohmann::json::object()},
         {"outputs", nlohmann::json::array()}, {"started_at", utc_timestamp()}};
  }
  void input(const std::string& name, const fs::path& p) { j["inputs"][name] = input_entry(p); }
  void output(const fs::path& p) { j["outputs"].push_back(p.string()); }
  void write(const fs::path& p) {
    j["finished_at"] = utc_timestamp();
    write_file(p, j.dump(2) + "\n");
  }
};

// ---------------------------------------------------------------------------
// Pipeline configuration flags

struct ConfigFlags {
  fs::path config_file;
  bool few_shot = false, oracle_state = false, oracle_domain = false, gold_history = false, top_entity = false;
  int k = 0, negatives = 0, pool_size = 0, window = 0, history_window = 0;
  int max_domain = 0, max_state = 0, max_response = 0;
  double fuzzy = 0, temperature = 0;
  unsigned long long seed = 0;
  std::vector<std::pair<std::string, CLI::Option*>> options;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "flat JSON file with pipeline config fields")->check(CLI::ExistingFile);
    options = {
        {"few_shot", app->add_flag("--few-shot", few_shot, "retrieve in-context examples")},
        {"oracle_state", app->add_flag("--oracle-state", oracle_state, "use the gold belief state")},
        {"oracle_domain", app->add_flag("--oracle-domain", oracle_domain, "use the gold domain")},
        {"retrieval_k", app->add_option("--k", k, "examples retrieved per prompt")},
        {"negatives_per_example", app->add_option("--negatives", negatives, "corrupted negatives per example")},
        {"pool_size_per_domain", app->add_option("--pool-size", pool_size, "context-store examples per domain")},
        {"context_window_utterances", app->add_option("--context-window", window, "utterances in a retrieval key")},
        {"fuzzy_threshold", app->add_option("--fuzzy-threshold", fuzzy, "value matching threshold")},
        {"history_window", app->add_option("--history-window", history_window, "history utterances in prompts (0 = all)")},
        {"gold_history", app->add_flag("--gold-history", gold_history, "feed gold system turns into the history")},
        {"include_top_entity", app->add_flag("--include-top-entity", top_entity, "show the top DB entity in prompts")},
        {"max_tokens_domain", app->add_option("--max-tokens-domain", max_domain)},
        {"max_tokens_state", app->add_option("--max-tokens-state", max_state)},
        {"max_tokens_response", app->add_option("--max-tokens-response", max_response)},
        {"temperature", app->add_option("--temperature", temperature)},
        {"seed", app->add_option("--seed", seed, "seed for sampling and corruption")},
    };
  }

  PipelineConfig resolve() const {
    nlohmann::json j = nlohmann::json::object();
    if (!config_file.empty()) {
      j = nlohmann::json::parse(read_file(config_file), nullptr, false);
      if (j.is_discarded() || !j.is_object()) throw Error("config file must hold a JSON object: " + config_file.string());
    }
    for (const auto& [key, opt] : options) {
      if (opt->count() == 0) continue;
      if (key == "few_shot") j[key] = few_shot;
      else if (key == "oracle_state") j[key] = oracle_state;
      else if (key == "oracle_domain") j[key] = oracle_domain;
      else if (key == "retrieval_k") j[key] = k;
      else if (key == "negatives_per_example") j[key] = negatives;
      else if (key == "pool_size_per_domain") j[key] = pool_size;
      else if (key == "context_window_utterances") j[key] = window;
      else if (key == "fuzzy_threshold") j[key] = fuzzy;
      else if (key == "history_window") j[key] = history_window;
      else if (key == "gold_history") j[key] = gold_history;
      else if (key == "include_top_entity") j[key] = top_entity;
      else if (key == "max_tokens_domain") j[key] = max_domain;
      else if (key == "max_tokens_state") j[key] = max_state;
      else if (key == "max_tokens_response") j[key] = max_response;
      else if (key == "temperature") j[key] = temperature;
      else if (key == "seed") j[key] = seed;
    }
    return config_from_json(j);
  }
};

// ---------------------------------------------------------------------------
// Backends and embedders

struct BackendFlags {
  std::string kind = "replay";
  fs::path cassette;
  std::string url, path = "/v1/completions", wire = "completion", model, auth_header = "Authorization";
  std::string api_key_env;
  double timeout = 60.0;
  int retries = 3;
  int concurrency = 4;

  void attach(CLI::App* app) {
    app->add_option("--backend", kind, "replay | replay-lenient | http | scripted")
        ->check(CLI::IsMember({"replay", "replay-lenient", "http", "scripted"}));
    app->add_option("--cassette", cassette, "cassette file (replay)");
    app->add_option("--url", url, "base URL of the completion endpoint (http)");
    app->add_option("--path", path, "request path (http)");
    app->add_option("--wire", wire, "completion | chat")->check(CLI::IsMember({"completion", "chat"}));
    app->add_option("--model", model, "model name sent with each request");
    app->add_option("--auth-header", auth_header);
    app->add_option("--api-key-env", api_key_env, "environment variable holding the API key");
    app->add_option("--timeout", timeout, "per-request timeout in seconds");
    app->add_option("--retries", retries);
    app->add_option("--max-concurrency", concurrency, "in-flight HTTP requests");
  }

  std::shared_ptr<Backend> make(const Corpus& corpus) const {
    if (kind == "replay" || kind == "replay-lenient") {
      if (cassette.empty()) throw Error("--cassette is required for replay");
      return std::make_shared<ReplayBackend>(Cassette::load(cassette), kind == "replay");
    }
    if (kind == "scripted") return fixtures::scripted_backend(corpus);
    if (url.empty()) throw Error("--url is required for the http backend");
    HttpEndpoint ep;
    ep.base_url = url;
    ep.path = path;
    ep.model = model;
    ep.auth_header = auth_header;
    ep.timeout_s = timeout;
    ep.max_retries = retries;
    if (!api_key_env.empty()) {
      const char* key = std::getenv(api_key_env.c_str());
      if (!key) throw Error("environment variable " + api_key_env + " is not set");
      ep.auth_value = auth_header == "Authorization" ? std::string("Bearer ") + key : std::string(key);
    }
    return std::make_shared<HttpBackend>(ep, wire_shape_from_string(wire), concurrency);
  }

  void record_inputs(Manifest& m) const {
    m.j["backend"] = kind;
    if ((kind == "replay" || kind == "replay-lenient") && !cassette.empty()) m.input("cassette", cassette);
  }
};

struct EmbedderFlags {
  std::string kind = "hashed";
  std::string url, path = "/v1/embeddings", model, api_key_env;
  size_t dimension = 512;

  void attach(CLI::App* app) {
    app->add_option("--embedder", kind, "hashed | remote")->check(CLI::IsMember({"hashed", "remote"}));
    app->add_option("--embed-url", url);
    app->add_option("--embed-path", path);
    app->add_option("--embed-model", model);
    app->add_option("--embed-api-key-env", api_key_env);
    app->add_option("--embed-dim", dimension, "embedding dimension");
  }

  std::unique_ptr<Embedder> make() const {
    if (kind == "hashed") return std::make_unique<HashedTrigramEmbedder>(dimension);
    if (url.empty()) throw Error("--embed-url is required for the remote embedder");
    HttpEndpoint ep;
    ep.base_url = url;
    ep.path = path;
    ep.model = model;
    if (!api_key_env.empty()) {
      const char* key = std::getenv(api_key_env.c_str());
      if (!key) throw Error("environment variable " + api_key_env + " is not set");
      ep.auth_value = std::string("Bearer ") + key;
    }
    return std::make_unique<RemoteEmbedder>(ep, dimension);
  }
};

// ---------------------------------------------------------------------------
// Commands

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

struct RunInputs {
  fs::path corpus, templates, db, store, out;
  std::string splits = "test";
  std::string store_splits = "train";
  int parallelism = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  bool records = false;

  void attach(CLI::App* app, bool with_out = true) {
    app->add_option("--corpus", corpus, "corpus directory")->required();
    app->add_option("--templates", templates, "prompt template directory")->required();
    app->add_option("--db", db, "database directory (MultiWOZ layout)");
    app->add_option("--store", store, "context store file; built from --store-splits when omitted");
    app->add_option("--splits", splits, "dialogue splits to run: comma list or 'all'");
    app->add_option("--store-splits", store_splits, "splits feeding an on-the-fly context store");
    app->add_option("--parallelism", parallelism, "dialogue-level workers")->check(CLI::PositiveNumber);
    if (with_out) {
      app->add_option("--out", out, "output directory")->required();
      app->add_flag("--records", records, "also write full turn records with prompts");
    }
  }
};

/// Loaded resources shared by run, record, sweep and serve.
struct Workspace {
  Corpus corpus;
  TemplateSet templates;
  std::optional<Database> db;
  std::unique_ptr<Embedder> embedder;
  std::optional<ContextStore> store;
  std::shared_ptr<Backend> backend;

  PipelineContext context() {
    PipelineContext ctx = make_context(corpus, templates, *backend);
    ctx.db = db ? &*db : nullptr;
    ctx.embedder = embedder.get();
    ctx.store = store ? &*store : nullptr;
    return ctx;
  }
};

inline ContextStore make_store(const Corpus& corpus, const PipelineConfig& cfg, const Embedder& embedder,
                               const std::string& splits) {
  return build_store(collect_snippets(corpus, cfg.context_window_utterances, parse_splits(splits)),
                     cfg.pool_size_per_domain, embedder, cfg.seed);
}

inline void open_workspace(Workspace& ws, const RunInputs& in, const EmbedderFlags& ef, Manifest& m) {
  ws.corpus = open_corpus(in.corpus);
  ws.templates = TemplateSet::load(in.templates);
  m.input("corpus", in.corpus);
  m.input("templates", in.templates);
  if (!in.db.empty()) {
    ws.db = Database::load_directory(in.db);
    m.input("db", in.db);
  }
  ws.embedder = ef.make();
  if (!in.store.empty()) {
    ws.store = ContextStore::load(in.store);
    if (ws.store->embedder_id() != ws.embedder->id())
      throw Error("store was built with embedder " + ws.store->embedder_id() + ", not " + ws.embedder->id());
    m.input("store", in.store);
  }
}

/// Backend failures map to exit 3; other per-dialogue failures to exit 2.
inline int report_failures(const RunArtifact& art, Streams io) {
  int code = kOk;
  for (const auto& d : art.dialogues) {
    if (!d.error) continue;
    bool backend = !d.records.empty() && d.records.back().error;
    io.err << "dialogue " << d.dialogue_id << ": " << *d.error << "\n";
    code = std::max(code, backend ? static_cast<int>(kBackendError) : static_cast<int>(kInputError));
  }
  return code;
}

inline std::string records_jsonl(const RunArtifact& art) {
  std::string out;
  for (const auto& d : art.dialogues)
    for (const auto& r : d.records) {
      nlohmann::json j = turn_record_json(r, true);
      j["dialogue_id"] = d.dialogue_id;
      out += j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
    }
  return out;
}

inline int execute_run(Workspace& ws, const PipelineConfig& cfg, const RunInputs& in, Manifest& m, Streams io) {
  if (cfg.few_shot && !ws.store) ws.store = make_store(ws.corpus, cfg, *ws.embedder, in.store_splits);
  RunArtifact art = run_corpus(ws.corpus, cfg, ws.context(), in.parallelism, parse_splits(in.splits));
  fs::create_directories(in.out);
  write_file(in.out / "predictions.jsonl", art.predictions_jsonl());
  m.output(in.out / "predictions.jsonl");
  if (in.records) {
    write_file(in.out / "records.jsonl", records_jsonl(art));
    m.output(in.out / "records.jsonl");
  }
  for (auto it = art.manifest.begin(); it != art.manifest.end(); ++it)
    if (it.key() != "started_at" && it.key() != "finished_at") m.j[it.key()] = it.value();
  m.write(in.out / "manifest.json");
  io.out << art.manifest["variant"].get<std::string>() << ": " << art.manifest["dialogues"] << " dialogues, "
         << art.manifest["turns"] << " turns, " << art.manifest["backend_calls"] << " backend calls, "
         << art.failures() << " failures\n";
  return report_failures(art, io);
}

inline int cmd_ingest(const std::string& dataset, const fs::path& path, const fs::path& out, Manifest& m, Streams io) {
  Corpus c = dataset == "multiwoz" ? load_multiwoz(path) : load_sgd(path);
  m.input("dataset", path);
  save_corpus(c, out);
  m.output(out / "corpus.jsonl");
  m.output(out / "schemas.json");
  m.j["dataset"] = dataset;
  m.j["dialogues"] = c.dialogues.size();
  m.j["schemas"] = c.domain_names();
  m.j["warnings"] = c.warnings;
  m.write(out / "manifest.json");
  for (const auto& w : c.warnings) io.err << "warning: " << w << "\n";
  io.out << c.dialogues.size() << " dialogues, " << c.schemas.size() << " schemas\n";
  return kOk;
}

struct EvalFlags {
  fs::path predictions, corpus, db, out, expect;
  double fuzzy = 0.9;
  double tolerance = 1e-9;
  bool per_domain = false;
  bool lenient = false;
  std::vector<std::string> include_domains;

  void attach(CLI::App* app) {
    app->add_option("--predictions", predictions, "prediction file")->required()->check(CLI::ExistingFile);
    app->add_option("--corpus", corpus, "corpus directory")->required();
    app->add_option("--db", db, "database directory for MultiWOZ success");
    app->add_option("--fuzzy-threshold", fuzzy, "value matching threshold")->check(CLI::Range(0.0, 1.0));
    app->add_flag("--per-domain", per_domain, "print per-domain JGA and domain accuracy");
    app->add_flag("--lenient", lenient, "allow extra predicted slots in JGA");
    app->add_option("--success-domains", include_domains,
                    "domains to keep in success even if excluded by default (e.g. police)");
    app->add_option("--out", out, "write the report as JSON");
    app->add_option("--expect", expect, "reference report; mismatch exits 1")->check(CLI::ExistingFile);
    app->add_option("--tolerance", tolerance, "allowed absolute difference for --expect");
  }
};

inline bool reports_match(const EvalReport& a, const EvalReport& b, double tol, std::vector<std::string>& diffs) {
  auto cmp = [&](const char* name, std::optional<double> x, std::optional<double> y) {
    if (x.has_value() != y.has_value() || (x && std::abs(*x - *y) > tol))
      diffs.push_back(std::string(name) + ": " + (x ? fixed(*x, 6) : "-") + " vs " + (y ? fixed(*y, 6) : "-"));
  };
  cmp("domain_accuracy", a.domain_accuracy, b.domain_accuracy);
  cmp("jga", a.jga, b.jga);
  cmp("slot_f1", a.slots.f1, b.slots.f1);
  cmp("bleu", a.bleu, b.bleu);
  cmp("success", a.success, b.success);
  return diffs.empty();
}

inline int cmd_evaluate(const EvalFlags& f, Manifest& m, Streams io) {
  Corpus corpus = open_corpus(f.corpus);
  std::optional<Database> db;
  if (!f.db.empty()) db = Database::load_directory(f.db);
  m.input("predictions", f.predictions);
  m.input("corpus", f.corpus);
  if (db) m.input("db", f.db);
  EvalOptions opts;
  opts.fuzzy_threshold = f.fuzzy;
  opts.lenient_jga = f.lenient;
  for (const auto& d : f.include_domains) opts.excluded_success_domains.erase(d);
  EvalReport r = evaluate(corpus, load_predictions(f.predictions), db ? &*db : nullptr, opts);
  io.out << render_report_table(r, f.per_domain);
  for (const auto& w : r.warnings) io.err << "warning: " << w << "\n";
  if (!f.out.empty()) {
    write_file(f.out, to_json(r).dump(2) + "\n");
    m.output(f.out);
    m.j["report"] = to_json(r);
    m.write(f.out.parent_path() / (f.out.stem().string() + ".manifest.json"));
  }
  if (!f.expect.empty()) {
    nlohmann::json ej = nlohmann::json::parse(read_file(f.expect), nullptr, false);
    if (ej.is_discarded()) throw Error("malformed expected report: " + f.expect.string());
    std::vector<std::string> diffs;
    if (!reports_match(r, eval_report_from_json(ej), f.tolerance, diffs)) {
      for (const auto& d : diffs) io.err << "mismatch " << d << "\n";
      return kMismatch;
    }
    io.out << "report matches " << f.expect.string() << "\n";
  }
  return kOk;
}

inline std::vector<int> parse_pool_sizes(const std::string& s) {
  std::vector<int> out;
  for (const auto& part : text::split(s, ',')) {
    std::string p = text::trim(part);
    try {
      size_t used = 0;
      int v = std::stoi(p, &used);
      if (used != p.size() || v < 0) throw std::invalid_argument(p);
      out.push_back(v);
    } catch (const std::exception&) {
      throw Error("bad pool size: " + p);
    }
  }
  if (out.empty()) throw Error("no pool sizes given");
  return out;
}

inline int cmd_sweep(Workspace& ws, PipelineConfig base, const RunInputs& in, const std::string& sizes,
                     const std::vector<std::string>& argv, Streams io) {
  base.few_shot = true;
  nlohmann::json points = nlohmann::json::array();
  int code = kOk;
  std::ostringstream table;
  table << "pool  JGA     Slot-F1  BLEU    Success\n";
  for (int size : parse_pool_sizes(sizes)) {
    PipelineConfig cfg = base;
    cfg.pool_size_per_domain = size;
    cfg.retrieval_k = std::min(base.retrieval_k, size);
    RunInputs point = in;
    point.out = in.out / ("pool-" + std::to_string(size));
    Manifest m("sweep", argv);
    m.j["pool_size"] = size;
    m.input("corpus", in.corpus);
    m.input("templates", in.templates);
    ws.store = make_store(ws.corpus, cfg, *ws.embedder, in.store_splits);
    code = std::max(code, execute_run(ws, cfg, point, m, io));
    EvalReport r = evaluate(ws.corpus, load_predictions(point.out / "predictions.jsonl"), ws.db ? &*ws.db : nullptr,
                            EvalOptions{cfg.fuzzy_threshold});
    write_file(point.out / "report.json", to_json(r).dump(2) + "\n");
    auto cell = [](const std::optional<double>& v, double scale) { return v ? fixed(*v * scale, 2) : std::string("-"); };
    table << std::left << std::setw(6) << size << std::setw(8) << cell(r.jga, 100) << std::setw(9)
          << fixed(r.slots.f1 * 100, 2) << std::setw(8) << cell(r.bleu, 1) << cell(r.success, 100) << "\n";
    points.push_back({{"pool_size", size}, {"store_examples", ws.store->size()}, {"report", to_json(r)}});
  }
  write_file(in.out / "sweep.json", nlohmann::json{{"points", points}}.dump(2) + "\n");
  io.out << table.str();
  return code;
}

namespace detail {
inline httplib::Server* g_server = nullptr;
inline void stop_server(int) {
  if (g_server) g_server->stop();
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Entry point

inline int main_entry(const std::vector<std::string>& args, Streams io) {
  CLI::App app{"LLM task-oriented dialogue pipeline and evaluation", "todllm"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // ingest
  std::string dataset;
  fs::path ingest_path, ingest_out;
  auto* ingest = app.add_subcommand("ingest", "convert a MultiWOZ 2.2 or SGD directory into a unified corpus");
  ingest->add_option("dataset", dataset, "multiwoz | sgd")->required()->check(CLI::IsMember({"multiwoz", "sgd"}));
  ingest->add_option("path", ingest_path, "dataset directory")->required();
  ingest->add_option("out", ingest_out, "output directory")->required();

  // build-store
  fs::path bs_corpus, bs_out;
  std::string bs_splits = "train";
  ConfigFlags bs_cfg;
  EmbedderFlags bs_emb;
  auto* build = app.add_subcommand("build-store", "sample and embed a context store");
  build->add_option("--corpus", bs_corpus, "corpus directory")->required();
  build->add_option("--out", bs_out, "store file")->required();
  build->add_option("--splits", bs_splits, "splits feeding the pool: comma list or 'all'");
  bs_cfg.attach(build);
  bs_emb.attach(build);

  // run / record
  RunInputs run_in, rec_in, sweep_in, serve_in;
  ConfigFlags run_cfg, rec_cfg, sweep_cfg, serve_cfg;
  BackendFlags run_be, rec_be, sweep_be, serve_be;
  EmbedderFlags run_emb, rec_emb, sweep_emb, serve_emb;
  auto* run = app.add_subcommand("run", "run a pipeline variant over a corpus");
  run_in.attach(run);
  run_cfg.attach(run);
  run_be.attach(run);
  run_emb.attach(run);

  fs::path rec_cassette;
  auto* record = app.add_subcommand("record", "run while appending every completion to a cassette");
  rec_in.attach(record);
  rec_cfg.attach(record);
  rec_be.attach(record);
  rec_emb.attach(record);
  record->add_option("--cassette-out", rec_cassette, "cassette file to append to")->required();

  // evaluate
  EvalFlags ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "score a prediction file");
  ev.attach(evaluate_cmd);

  // sweep
  std::string pool_sizes = "0,2,5,10,25,50,100";
  auto* sweep = app.add_subcommand("sweep", "few-shot runs over a range of context-store pool sizes");
  sweep_in.attach(sweep);
  sweep_cfg.attach(sweep);
  sweep_be.attach(sweep);
  sweep_emb.attach(sweep);
  sweep->add_option("--pool-sizes", pool_sizes, "comma-separated pool sizes");

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  uint64_t serve_seed = 0;
  fs::path state_file, static_dir, instructions_file;
  std::string cors = "*";
  auto* serve = app.add_subcommand("serve", "HTTP chat and annotation service");
  serve_in.attach(serve, false);
  serve_cfg.attach(serve);
  serve_be.attach(serve);
  serve_emb.attach(serve);
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--server-seed", serve_seed, "seed for goal selection and session ids");
  serve->add_option("--state-file", state_file, "append-only session store");
  serve->add_option("--static-dir", static_dir, "UI bundle to serve at /")->check(CLI::ExistingDirectory);
  serve->add_option("--instructions-file", instructions_file, "annotator instruction text")->check(CLI::ExistingFile);
  serve->add_option("--cors-origin", cors);

  std::vector<const char*> argv{"todllm"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    io.out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    io.out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    io.err << "error: " << e.what() << "\n";
    return kInputError;
  }

  try {
    if (*ingest) {
      Manifest m("ingest", args);
      return cmd_ingest(dataset, ingest_path, ingest_out, m, io);
    }
    if (*build) {
      Manifest m("build-store", args);
      PipelineConfig cfg = bs_cfg.resolve();
      Corpus corpus = open_corpus(bs_corpus);
      m.input("corpus", bs_corpus);
      auto emb = bs_emb.make();
      ContextStore store = make_store(corpus, cfg, *emb, bs_splits);
      store.save(bs_out);
      m.output(bs_out);
      m.j["config"] = to_json(cfg);
      m.j["seed"] = cfg.seed;
      m.j["embedder_id"] = emb->id();
      m.j["examples"] = store.size();
      m.write(bs_out.string() + ".manifest.json");
      io.out << store.size() << " examples over " << store.domains().size() << " domains\n";
      return kOk;
    }
    if (*run || *record) {
      bool rec = record->parsed();
      RunInputs& in = rec ? rec_in : run_in;
      Manifest m(rec ? "record" : "run", args);
      PipelineConfig cfg = (rec ? rec_cfg : run_cfg).resolve();
      Workspace ws;
      open_workspace(ws, in, rec ? rec_emb : run_emb, m);
      const BackendFlags& bf = rec ? rec_be : run_be;
      bf.record_inputs(m);
      ws.backend = bf.make(ws.corpus);
      if (rec) {
        ws.backend = std::make_shared<RecordingBackend>(ws.backend, rec_cassette);
        m.output(rec_cassette);
      }
      return execute_run(ws, cfg, in, m, io);
    }
    if (*evaluate_cmd) {
      Manifest m("evaluate", args);
      return cmd_evaluate(ev, m, io);
    }
    if (*sweep) {
      Manifest m("sweep", args);
      PipelineConfig cfg = sweep_cfg.resolve();
      Workspace ws;
      open_workspace(ws, sweep_in, sweep_emb, m);
      ws.backend = sweep_be.make(ws.corpus);
      return cmd_sweep(ws, cfg, sweep_in, pool_sizes, args, io);
    }
    if (*serve) {
      Manifest m("serve", args);
      PipelineConfig cfg = serve_cfg.resolve();
      Workspace ws;
      open_workspace(ws, serve_in, serve_emb, m);
      ws.backend = serve_be.make(ws.corpus);
      if (cfg.few_shot && !ws.store) ws.store = make_store(ws.corpus, cfg, *ws.embedder, serve_in.store_splits);
      ServiceOptions opts;
      opts.seed = serve_seed;
      opts.base_config = cfg;
      opts.state_file = state_file;
      opts.static_dir = static_dir;
      opts.cors_origin = cors;
      if (!instructions_file.empty()) opts.instructions = read_file(instructions_file);
      ChatService service(&ws.corpus, ws.context(), opts);
      httplib::Server server;
      service.attach(server);
      detail::g_server = &server;
      std::signal(SIGINT, detail::stop_server);
      std::signal(SIGTERM, detail::stop_server);
      io.out << "listening on http://" << host << ":" << port << "/v1\n" << std::flush;
      bool ok = server.listen(host, port);
      detail::g_server = nullptr;
      if (!ok) {
        io.err << "error: cannot listen on " << host << ":" << port << "\n";
        return kInputError;
      }
      return kOk;
    }
  } catch (const CassetteMiss& e) {
    io.err << "error: " << e.what() << "\n";
    return kBackendError;
  } catch (const BackendError& e) {
    io.err << "error: " << e.what() << "\n";
    return kBackendError;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace todllm::cli
