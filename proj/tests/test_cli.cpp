#include <gtest/gtest.h>

#include "cli.hpp"
#include "support/fixtures.hpp"

using namespace todllm;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cli::main_entry(args, {out, err});
  return {code, out.str(), err.str()};
}

nlohmann::json read_json(const std::filesystem::path& p) { return nlohmann::json::parse(fixture::read(p)); }

std::vector<std::string> run_args(const std::string& cmd, const std::filesystem::path& out) {
  return {cmd,          "--corpus", fixture::data("multiwoz").string(), "--templates",
          fixture::data("templates/multiwoz").string(),       "--db",  fixture::data("multiwoz/db").string(),
          "--out",      out.string()};
}

std::vector<std::string> operator+(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

const std::string kCassette = fixture::data("cassettes/multiwoz.jsonl").string();

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({"evaluate", "--corpus", "x"}).code, 2);
  Outcome help = invoke({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("evaluate"), std::string::npos);
}

TEST(Cli, IngestWritesCorpusAndManifest) {
  auto out = fixture::scratch("cli-ingest");
  Outcome r = invoke({"ingest", "multiwoz", fixture::data("multiwoz").string(), out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "12 dialogues, 7 schemas\n");
  auto m = read_json(out / "manifest.json");
  EXPECT_EQ(m["command"], "ingest");
  EXPECT_EQ(m["dialogues"], 12);
  EXPECT_EQ(m["inputs"]["dataset"]["sha256"].get<std::string>().size(), 64u);
  EXPECT_EQ(load_corpus(out).dialogues.size(), 12u);
  EXPECT_EQ(invoke({"ingest", "multiwoz", (out / "missing").string(), out.string()}).code, 2);
}

TEST(Cli, ReplayRunReproducesGoldenPredictions) {
  auto out = fixture::scratch("cli-run");
  Outcome r = invoke(run_args("run", out) + std::vector<std::string>{"--cassette", kCassette, "--few-shot", "--splits", "all",
                                                                   "--store", fixture::data("stores/multiwoz.jsonl").string(),
                                                                   "--parallelism", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(fixture::read(out / "predictions.jsonl"),
            fixture::read(fixture::data("golden/predictions/multiwoz.fs-gbs.jsonl")));
  auto m = read_json(out / "manifest.json");
  EXPECT_EQ(m["command"], "run");
  EXPECT_EQ(m["variant"], "fs-gbs");
  EXPECT_EQ(m["backend"], "replay");
  EXPECT_TRUE(m["inputs"].contains("cassette"));
  EXPECT_TRUE(m["inputs"].contains("store"));
  EXPECT_EQ(m["outputs"][0], (out / "predictions.jsonl").string());
}

TEST(Cli, DefaultSplitIsTest) {
  auto out = fixture::scratch("cli-split");
  Outcome r = invoke(run_args("run", out) + std::vector<std::string>{"--cassette", kCassette});
  ASSERT_EQ(r.code, 0) << r.err;
  std::set<std::string> ids;
  for (const auto& p : load_predictions(out / "predictions.jsonl")) ids.insert(p.dialogue_id);
  EXPECT_EQ(ids.size(), 4u);
  for (const auto& id : ids) EXPECT_EQ(fixture::multiwoz().dialogue(id)->split, "test");
}

TEST(Cli, ConfigPrecedenceFlagsOverFileOverDefaults) {
  auto dir = fixture::scratch("cli-config");
  std::ofstream(dir / "cfg.json") << R"({"retrieval_k": 1, "pool_size_per_domain": 4, "few_shot": true})";
  cli::ConfigFlags flags;
  CLI::App app;
  flags.attach(&app);
  std::vector<const char*> argv = {"x", "--config", nullptr, "--k", "3"};
  std::string path = (dir / "cfg.json").string();
  argv[2] = path.c_str();
  app.parse(static_cast<int>(argv.size()), argv.data());
  PipelineConfig c = flags.resolve();
  EXPECT_EQ(c.retrieval_k, 3);
  EXPECT_EQ(c.pool_size_per_domain, 4);
  EXPECT_TRUE(c.few_shot);
  EXPECT_EQ(c.negatives_per_example, PipelineConfig{}.negatives_per_example);

  std::ofstream(dir / "bad.json") << R"({"retrieval_kk": 1})";
  auto out = dir / "run";
  Outcome bad = invoke(run_args("run", out) +
                    std::vector<std::string>{"--cassette", kCassette, "--config", (dir / "bad.json").string()});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("retrieval_kk"), std::string::npos);
}

TEST(Cli, CassetteMissExitsThree) {
  auto dir = fixture::scratch("cli-miss");
  std::ofstream(dir / "empty.jsonl") << "";
  Outcome r = invoke(run_args("run", dir / "out") + std::vector<std::string>{"--cassette", (dir / "empty.jsonl").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("cassette miss"), std::string::npos);
  EXPECT_EQ(invoke(run_args("run", dir / "out")).code, 2);
}

TEST(Cli, RecordThenReplay) {
  auto dir = fixture::scratch("cli-record");
  auto cassette = dir / "c.jsonl";
  Outcome rec = invoke(run_args("record", dir / "rec") +
                    std::vector<std::string>{"--backend", "scripted", "--cassette-out", cassette.string(), "--oracle-domain"});
  ASSERT_EQ(rec.code, 0) << rec.err;
  Outcome rep = invoke(run_args("run", dir / "rep") +
                    std::vector<std::string>{"--cassette", cassette.string(), "--oracle-domain"});
  ASSERT_EQ(rep.code, 0) << rep.err;
  EXPECT_EQ(fixture::read(dir / "rec/predictions.jsonl"), fixture::read(dir / "rep/predictions.jsonl"));
}

TEST(Cli, BuildStoreMatchesCheckedInStore) {
  auto dir = fixture::scratch("cli-store");
  Outcome r = invoke({"build-store", "--corpus", fixture::data("multiwoz").string(), "--out", (dir / "s.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(fixture::read(dir / "s.jsonl"), fixture::read(fixture::data("stores/multiwoz.jsonl")));
  EXPECT_EQ(read_json(dir / "s.jsonl.manifest.json")["seed"], 0);
}

TEST(Cli, EvaluateWithExpectedReport) {
  auto dir = fixture::scratch("cli-eval");
  std::vector<std::string> base = {"evaluate", "--predictions",
                                   fixture::data("golden/predictions/multiwoz.fs-gbs.jsonl").string(), "--corpus",
                                   fixture::data("multiwoz").string(), "--db", fixture::data("multiwoz/db").string()};
  Outcome r = invoke(base + std::vector<std::string>{"--out", (dir / "report.json").string(), "--per-domain"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("BLEU", 0), 0u);
  EXPECT_TRUE(std::filesystem::exists(dir / "report.manifest.json"));

  EXPECT_EQ(invoke(base + std::vector<std::string>{"--expect", (dir / "report.json").string()}).code, 0);
  auto report = read_json(dir / "report.json");
  report["jga"] = report["jga"].get<double>() + 0.01;
  std::ofstream(dir / "off.json") << report.dump();
  Outcome off = invoke(base + std::vector<std::string>{"--expect", (dir / "off.json").string()});
  EXPECT_EQ(off.code, 1);
  EXPECT_NE(off.err.find("mismatch jga"), std::string::npos);
  EXPECT_EQ(invoke(base + std::vector<std::string>{"--expect", (dir / "off.json").string(), "--tolerance", "0.02"}).code, 0);
}

TEST(Cli, SweepWritesOnePointPerPoolSize) {
  auto dir = fixture::scratch("cli-sweep");
  Outcome r = invoke(run_args("sweep", dir) + std::vector<std::string>{"--backend", "scripted", "--pool-sizes", "0,2"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto sweep = read_json(dir / "sweep.json");
  ASSERT_EQ(sweep["points"].size(), 2u);
  EXPECT_EQ(sweep["points"][0]["store_examples"], 0);
  EXPECT_GT(sweep["points"][1]["store_examples"].get<size_t>(), 0u);
  EXPECT_TRUE(std::filesystem::exists(dir / "pool-2/report.json"));
  EXPECT_EQ(invoke(run_args("sweep", dir) + std::vector<std::string>{"--backend", "scripted", "--pool-sizes", "x"}).code, 2);
}
