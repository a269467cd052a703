/**
 * @file scripted_backend.hpp
 * @brief Deterministic stand-in for a cooperative LLM, used to author the
 * fixture cassettes and in tests.
 *
 * The current customer utterance is recovered from the last `Customer:` line
 * of the prompt and looked up in the corpus; the answer is derived from the
 * gold annotation of that turn. Output formats rotate so that the tolerant
 * parsers are exercised, and a few turns are deliberately wrong so that
 * fixture metrics are not all perfect.
 */
#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>

#include "todllm/backends.hpp"
#include "todllm/ingest.hpp"

namespace todllm::fixtures {

/// Text following the last "Customer:" label, trimmed and unquoted.
inline std::string last_customer_line(const std::string& prompt) {
  size_t pos = prompt.rfind("\nCustomer:");
  size_t start = pos == std::string::npos ? (prompt.rfind("Customer:", 0) == 0 ? 0 : std::string::npos) : pos + 1;
  if (start == std::string::npos) return "";
  size_t end = prompt.find('\n', start);
  std::string line = prompt.substr(start + 9, end == std::string::npos ? std::string::npos : end - start - 9);
  return text::strip_quotes(text::trim(line));
}

struct ScriptFaults {
  std::set<std::string> drop_slot;        // "dialogue:turn:slot" omitted from the state answer
  std::set<std::string> vague_response;   // "dialogue:turn" answered without placeholders
};

/// The faults baked into the shipped cassettes.
inline ScriptFaults default_faults() {
  return {{"MUL0009.json:0:area", "SNG0005.json:0:stars"}, {"SNG0010.json:0"}};
}

class ScriptedModel {
 public:
  explicit ScriptedModel(const Corpus& corpus, ScriptFaults faults = default_faults()) : faults_(std::move(faults)) {
    for (const auto& d : corpus.dialogues)
      for (size_t i = 0; i < d.turns.size(); ++i) turns_[d.turns[i].user_utterance] = {&d, static_cast<int>(i)};
  }

  CompletionResult operator()(const CompletionRequest& req) const {
    CompletionResult r;
    r.latency_ms = 1.0;
    auto it = turns_.find(last_customer_line(req.prompt));
    if (it == turns_.end()) return r;
    const Dialogue& d = *it->second.first;
    const int idx = it->second.second;
    const Turn& t = d.turns[static_cast<size_t>(idx)];
    const std::string domain = t.gold_domain.value_or("");
    const std::string key = d.id + ":" + std::to_string(idx);
    const size_t style = (fnv1a64(key) >> 7) % 3;

    switch (req.tag) {
      case PromptKind::domain_detect:
        r.text = style == 0 ? domain : style == 1 ? "Domain: " + domain : " " + domain + ".";
        break;
      case PromptKind::state: {
        SlotMap pairs;
        for (const auto& u : t.gold_updates)
          if (u.domain == domain) pairs = u.pairs;
        for (auto p = pairs.begin(); p != pairs.end();)
          p = faults_.drop_slot.count(key + ":" + p->first) ? pairs.erase(p) : std::next(p);
        if (style == 1) r.text = format_state_object(pairs);
        else if (style == 2 && !pairs.empty()) r.text = format_state_pairs(pairs) + "\nThose are the captured values.";
        else r.text = format_state_pairs(pairs);
        break;
      }
      case PromptKind::response: {
        std::string resp = t.system_response_delex.value_or("");
        if (faults_.vague_response.count(key)) resp = "I have found a place that suits you.";
        r.text = style == 2 ? "Assistant: " + resp + "\nCustomer: Thank you!" : resp;
        break;
      }
    }
    r.completion_tokens = static_cast<int>(text::word_tokens(r.text).size());
    return r;
  }

 private:
  ScriptFaults faults_;
  std::map<std::string, std::pair<const Dialogue*, int>> turns_;
};

inline std::shared_ptr<Backend> scripted_backend(const Corpus& corpus, ScriptFaults faults = default_faults()) {
  auto model = std::make_shared<ScriptedModel>(corpus, std::move(faults));
  return std::make_shared<FunctionBackend>([model](const CompletionRequest& r) { return (*model)(r); },
                                           "scripted-" + corpus.name);
}

}  // namespace todllm::fixtures
