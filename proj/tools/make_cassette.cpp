// Authors the fixture cassettes, context stores and golden prediction files
// from the scripted model. Usage: make_cassette <repo-root>
#include <fstream>
#include <iostream>
#include <map>

#include "fixtures/scripted_backend.hpp"
#include "todllm/pipeline.hpp"

namespace fs = std::filesystem;
using namespace todllm;

namespace {

std::vector<PipelineConfig> variant_grid() {
  std::vector<PipelineConfig> out;
  for (bool few : {false, true})
    for (bool obs : {false, true})
      for (bool od : {false, true}) {
        PipelineConfig c;
        c.few_shot = few;
        c.oracle_state = obs;
        c.oracle_domain = od;
        out.push_back(c);
      }
  return out;
}

void write_text(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << s;
  if (!out) throw Error("cannot write " + p.string());
}

void author(const fs::path& root, const Corpus& corpus, const Database* db, bool golden) {
  TemplateSet templates = TemplateSet::load(root / "data/templates" / corpus.name);
  HashedTrigramEmbedder embedder;
  PipelineConfig defaults;
  ContextStore store = build_store(collect_snippets(corpus, defaults.context_window_utterances, {"train"}),
                                   defaults.pool_size_per_domain, embedder, defaults.seed);
  fs::path store_path = root / "data/stores" / (corpus.name + ".jsonl");
  fs::create_directories(store_path.parent_path());
  store.save(store_path);

  auto scripted = fixtures::scripted_backend(corpus);
  std::map<std::string, std::string> lines;
  std::mutex mu;
  FunctionBackend recorder(
      [&](const CompletionRequest& req) {
        CompletionResult r = scripted->complete(req);
        std::lock_guard<std::mutex> lock(mu);
        lines[fingerprint(req)] = cassette_line({fingerprint(req), req, r});
        return r;
      },
      scripted->id());

  PipelineContext ctx = make_context(corpus, templates, recorder);
  ctx.store = &store;
  ctx.embedder = &embedder;
  ctx.db = db;
  for (const auto& cfg : variant_grid()) {
    RunArtifact art = run_corpus(corpus, cfg, ctx, 1);
    if (art.failures() > 0) throw Error("scripted run failed for " + cfg.variant_label());
    if (golden && (cfg.variant_label() == "fs-gbs" || cfg.variant_label() == "zs-obs"))
      write_text(root / "data/golden/predictions" / (corpus.name + "." + cfg.variant_label() + ".jsonl"),
                 art.predictions_jsonl());
    std::cout << corpus.name << " " << cfg.variant_label() << ": " << art.manifest["backend_calls"] << " calls\n";
  }
  std::string cassette;
  for (const auto& [_, line] : lines) cassette += line + "\n";
  write_text(root / "data/cassettes" / (corpus.name + ".jsonl"), cassette);
  std::cout << corpus.name << ": " << lines.size() << " cassette records, " << store.size() << " stored examples\n";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_cassette <repo-root>\n";
    return 2;
  }
  try {
    fs::path root = argv[1];
    Corpus mwz = load_multiwoz(root / "data/multiwoz");
    Database db = Database::load_directory(root / "data/multiwoz/db");
    author(root, mwz, &db, true);
    author(root, load_sgd(root / "data/sgd"), nullptr, false);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
