// Paths and cached loaders for the checked-in fixture data.
#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "todllm/context_store.hpp"
#include "todllm/database.hpp"
#include "todllm/ingest.hpp"
#include "todllm/backends.hpp"
#include "todllm/pipeline.hpp"
#include "todllm/prompts.hpp"

namespace fixture {

inline std::filesystem::path root() { return TODLLM_SOURCE_DIR; }
inline std::filesystem::path data(const std::string& rel) { return root() / "data" / rel; }

inline const todllm::Corpus& multiwoz() {
  static const todllm::Corpus c = todllm::load_multiwoz(data("multiwoz"));
  return c;
}

inline const todllm::Corpus& sgd() {
  static const todllm::Corpus c = todllm::load_sgd(data("sgd"));
  return c;
}

inline const todllm::TemplateSet& templates(const std::string& name) {
  static const todllm::TemplateSet mw = todllm::TemplateSet::load(data("templates/multiwoz"));
  static const todllm::TemplateSet sg = todllm::TemplateSet::load(data("templates/sgd"));
  return name == "sgd" ? sg : mw;
}

inline const todllm::Database& multiwoz_db() {
  static const todllm::Database db = todllm::Database::load_directory(data("multiwoz/db"));
  return db;
}

inline todllm::ContextStore store(const std::string& name) {
  return todllm::ContextStore::load(data("stores/" + name + ".jsonl"));
}

inline std::string read(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("todllm-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Replay context over the checked-in cassette, store and database.
struct Rig {
  explicit Rig(const std::string& name, bool strict = true)
      : corpus(name == "sgd" ? sgd() : multiwoz()),
        store(fixture::store(name)),
        backend(todllm::Cassette::load(data("cassettes/" + name + ".jsonl")), strict),
        ctx(todllm::make_context(corpus, templates(name), backend)) {
    ctx.store = &store;
    ctx.embedder = &embedder;
    if (name != "sgd") ctx.db = &multiwoz_db();
  }

  const todllm::Corpus& corpus;
  todllm::ContextStore store;
  todllm::HashedTrigramEmbedder embedder;
  todllm::ReplayBackend backend;
  todllm::PipelineContext ctx;
};

inline std::vector<todllm::PipelineConfig> variant_grid() {
  std::vector<todllm::PipelineConfig> out;
  for (bool few : {false, true})
    for (bool obs : {false, true})
      for (bool od : {false, true}) {
        todllm::PipelineConfig c;
        c.few_shot = few;
        c.oracle_state = obs;
        c.oracle_domain = od;
        out.push_back(c);
      }
  return out;
}

}  // namespace fixture
