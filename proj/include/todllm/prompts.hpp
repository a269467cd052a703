/**
 * @file prompts.hpp
 * @brief Prompt templates and the three per-turn prompt renderers.
 *
 * Templates are plain text files with `{placeholder}` markers (`{{` and `}}`
 * escape literal braces). A template directory holds one set per dataset:
 *
 *   domain.txt                  domain detection prompt (static examples inline)
 *   <domain>.state.txt          state-update prompt for one domain
 *   <domain>.response.txt       response prompt for one domain
 *   _default.state.txt          fallback for domains without their own file
 *   _default.response.txt
 *   slot_descriptions.json      optional: {"hotel": [{"slot": .., "text": ..}, ..]}
 *   domain_descriptions.json    optional: {"hotel": "text", ..}
 *
 * A line holding nothing but a placeholder whose value is empty is dropped,
 * and trailing whitespace is stripped from every rendered line.
 */
#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "todllm/context_store.hpp"
#include "todllm/core.hpp"
#include "todllm/database.hpp"
#include "todllm/hashing.hpp"
#include "todllm/parsing.hpp"

namespace todllm {

enum class PromptKind { domain_detect, state, response };

inline std::string to_string(PromptKind k) {
  switch (k) {
    case PromptKind::domain_detect: return "domain_detect";
    case PromptKind::state: return "state";
    case PromptKind::response: return "response";
  }
  return "unknown";
}

inline PromptKind prompt_kind_from_string(const std::string& s) {
  if (s == "domain_detect") return PromptKind::domain_detect;
  if (s == "state") return PromptKind::state;
  if (s == "response") return PromptKind::response;
  throw Error("unknown prompt kind: " + s);
}

inline const std::set<std::string>& known_placeholders() {
  static const std::set<std::string> s = {
      "domain",        "domain_list", "domain_description",          "slot_list",
      "static_examples", "retrieved_positive_examples", "retrieved_negative_examples",
      "history",       "user_utterance", "belief_state",             "db_results"};
  return s;
}

class PromptTemplate {
 public:
  PromptTemplate() = default;

  static PromptTemplate parse(std::string_view source, const std::string& name = "template") {
    PromptTemplate t;
    t.name_ = name;
    std::string body(source);
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
    for (auto& raw_line : text::split(body, '\n')) {
      if (!raw_line.empty() && raw_line.back() == '\r') raw_line.pop_back();
      std::vector<Segment> line;
      std::string literal;
      for (size_t i = 0; i < raw_line.size(); ++i) {
        char c = raw_line[i];
        if ((c == '{' || c == '}') && i + 1 < raw_line.size() && raw_line[i + 1] == c) {
          literal.push_back(c);
          ++i;
          continue;
        }
        if (c == '}') throw Error(name + ": unmatched '}'");
        if (c != '{') {
          literal.push_back(c);
          continue;
        }
        size_t close = raw_line.find('}', i);
        if (close == std::string::npos) throw Error(name + ": unterminated placeholder");
        std::string key = raw_line.substr(i + 1, close - i - 1);
        if (!known_placeholders().count(key)) throw Error(name + ": unknown placeholder {" + key + "}");
        if (!literal.empty()) line.push_back({false, std::move(literal)});
        literal.clear();
        line.push_back({true, key});
        t.placeholders_.insert(key);
        i = close;
      }
      if (!literal.empty()) line.push_back({false, std::move(literal)});
      t.lines_.push_back(std::move(line));
    }
    return t;
  }

  static PromptTemplate load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open template: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.filename().string());
  }

  const std::set<std::string>& placeholders() const { return placeholders_; }
  const std::string& name() const { return name_; }

  std::string render(const std::map<std::string, std::string>& values) const {
    std::vector<std::string> out;
    for (const auto& line : lines_) {
      if (line.size() == 1 && line[0].placeholder && lookup(values, line[0].text).empty()) continue;
      std::string rendered;
      for (const auto& seg : line) rendered += seg.placeholder ? lookup(values, seg.text) : seg.text;
      for (auto& l : text::split(rendered, '\n')) {
        while (!l.empty() && text::is_space(l.back())) l.pop_back();
        out.push_back(std::move(l));
      }
    }
    return text::join(out, "\n");
  }

 private:
  struct Segment {
    bool placeholder;
    std::string text;
  };

  const std::string& lookup(const std::map<std::string, std::string>& values, const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw Error(name_ + ": no value for placeholder {" + key + "}");
    return it->second;
  }

  std::string name_;
  std::vector<std::vector<Segment>> lines_;
  std::set<std::string> placeholders_;
};

class TemplateSet {
 public:
  static TemplateSet load(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error("template directory not found: " + dir.string());
    TemplateSet ts;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string digest_input;
    for (const auto& path : files) {
      std::string name = path.filename().string();
      std::ifstream in(path, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      std::string content = ss.str();
      digest_input += name + '\0' + content + '\0';
      if (name == "domain.txt") {
        ts.domain_ = PromptTemplate::parse(content, name);
      } else if (name == "slot_descriptions.json") {
        auto j = nlohmann::json::parse(content, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw Error("malformed " + path.string());
        for (auto it = j.begin(); it != j.end(); ++it)
          for (const auto& entry : it.value())
            ts.slot_text_[it.key()].emplace_back(entry.at("slot").get<std::string>(),
                                                 entry.at("text").get<std::string>());
      } else if (name == "domain_descriptions.json") {
        auto j = nlohmann::json::parse(content, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw Error("malformed " + path.string());
        for (auto it = j.begin(); it != j.end(); ++it) ts.domain_text_[it.key()] = it.value().get<std::string>();
      } else if (ends_with(name, ".state.txt")) {
        ts.state_[name.substr(0, name.size() - 10)] = PromptTemplate::parse(content, name);
      } else if (ends_with(name, ".response.txt")) {
        ts.response_[name.substr(0, name.size() - 13)] = PromptTemplate::parse(content, name);
      }
    }
    if (!ts.domain_) throw Error("template directory lacks domain.txt: " + dir.string());
    ts.fingerprint_ = sha256_hex(digest_input);
    return ts;
  }

  const PromptTemplate& domain_template() const { return *domain_; }
  const PromptTemplate& state_template(const std::string& domain) const { return pick(state_, domain, "state"); }
  const PromptTemplate& response_template(const std::string& domain) const {
    return pick(response_, domain, "response");
  }

  std::string domain_description(const DomainSchema& schema) const {
    auto it = domain_text_.find(schema.name);
    return it != domain_text_.end() ? it->second : schema.description;
  }

  /// `- "slot": text` lines; uses slot_descriptions.json when it covers the
  /// domain, else every informable non-booking schema slot.
  std::string slot_list(const DomainSchema& schema) const {
    std::vector<std::string> lines;
    auto it = slot_text_.find(schema.name);
    if (it != slot_text_.end()) {
      for (const auto& [slot, desc] : it->second) {
        std::string sep = !desc.empty() && desc.front() == ':' ? "" : " ";
        lines.push_back("- \"" + slot + "\"" + sep + desc);
      }
    } else {
      for (const auto& s : schema.slots) {
        if (!s.informable || s.booking) continue;
        std::string line = "- \"" + s.name + "\": " + s.description;
        if (!s.values.empty()) line += " (" + text::join(s.values, "/") + ")";
        lines.push_back(line);
      }
    }
    return text::join(lines, "\n");
  }

  const std::string& fingerprint() const { return fingerprint_; }

 private:
  static bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  }

  static const PromptTemplate& pick(const std::map<std::string, PromptTemplate>& m, const std::string& domain,
                                    const char* kind) {
    auto it = m.find(domain);
    if (it != m.end()) return it->second;
    it = m.find("_default");
    if (it != m.end()) return it->second;
    throw Error(std::string("no ") + kind + " template for domain " + domain);
  }

  std::optional<PromptTemplate> domain_;
  std::map<std::string, PromptTemplate> state_;
  std::map<std::string, PromptTemplate> response_;
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> slot_text_;
  std::map<std::string, std::string> domain_text_;
  std::string fingerprint_;
};

struct RenderedPrompt {
  PromptKind kind = PromptKind::domain_detect;
  std::string domain;  // empty for domain detection
  std::string text;
  std::vector<std::string> provenance;  // ids of retrieved examples
};

// ---------------------------------------------------------------------------
// Segment formatting

inline std::string render_history(const DialogueHistory& history, int window) {
  std::vector<std::string> lines;
  for (const auto& u : history.tail(static_cast<size_t>(window)))
    lines.push_back(std::string(speaker_label(u.speaker)) + ": " + u.text);
  return text::join(lines, "\n");
}

/// `hotel { pricerange: "cheap", area: "north"}`; empty when the domain has no state.
inline std::string serialize_belief(const std::string& domain, const BeliefState& state) {
  const SlotMap* m = state.find(domain);
  if (!m || m->empty()) return "";
  std::string out = domain + " {";
  bool first = true;
  for (const auto& [slot, value] : *m) {
    out += first ? " " : ", ";
    out += slot + ": \"" + value + "\"";
    first = false;
  }
  return out + "}";
}

inline std::string plural_domain(const std::string& domain) {
  if (!domain.empty() && domain.back() == 's') return domain;
  return domain + "s";
}

/// `hotels: 23`. Externally provided results are followed by the rows
/// themselves; `include_top_entity` appends the first match for queried ones.
inline std::string serialize_db(const std::optional<DbResult>& db, bool include_top_entity = false) {
  if (!db) return "";
  std::string out = plural_domain(db->domain) + ": " + std::to_string(db->count);
  if (db->provided_externally && !db->entities.empty()) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& e : db->entities) rows.push_back(to_json(e));
    out += " " + rows.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  } else if (include_top_entity && db->top()) {
    std::vector<std::string> attrs;
    for (const auto& [k, v] : db->top()->attributes) attrs.push_back(k + ": \"" + v + "\"");
    out += "; top: " + text::join(attrs, ", ");
  }
  return out;
}

inline std::string example_header(size_t n) { return "------- Example " + std::to_string(n) + ": --------"; }
inline constexpr const char* kExampleRule = "-----------";

inline std::string format_state_example(size_t n, const StoredExample& ex) {
  return example_header(n) + "\n" + ex.context_key + "\n" + (ex.negative ? "Incorrect: " : "Output: ") +
         format_state_pairs(ex.gold_update.pairs);
}

inline std::string format_response_example(size_t n, const StoredExample& ex) {
  std::string state = serialize_belief(ex.domain, ex.gold_state);
  return example_header(n) + "\n" + ex.context_key + "\n" + "State: " + state + "\n" +
         "Response: " + ex.gold_response_delex;
}

namespace detail {

inline void check_example_domains(const std::vector<StoredExample>& examples, const std::string& domain) {
  for (const auto& ex : examples)
    if (ex.domain != domain) throw Error("example " + ex.id + " is from domain " + ex.domain + ", not " + domain);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Renderers

inline RenderedPrompt render_domain_prompt(const TemplateSet& templates, const DialogueHistory& history,
                                           const std::string& utterance, const std::vector<std::string>& domains,
                                           int history_window = 0) {
  if (domains.empty()) throw Error("domain list is empty");
  std::map<std::string, std::string> v = {
      {"domain", ""},
      {"domain_list", text::join(domains, ", ")},
      {"domain_description", ""},
      {"slot_list", ""},
      {"static_examples", ""},
      {"retrieved_positive_examples", ""},
      {"retrieved_negative_examples", ""},
      {"history", render_history(history, history_window)},
      {"user_utterance", utterance},
      {"belief_state", ""},
      {"db_results", ""},
  };
  return {PromptKind::domain_detect, "", templates.domain_template().render(v), {}};
}

inline RenderedPrompt render_state_prompt(const TemplateSet& templates, const DomainSchema& schema,
                                          const DialogueHistory& history, const std::string& utterance,
                                          const std::vector<StoredExample>& positives,
                                          const std::vector<StoredExample>& negatives, bool zero_shot,
                                          int history_window = 0) {
  if (zero_shot && (!positives.empty() || !negatives.empty()))
    throw Error("zero-shot state prompt cannot carry examples");
  detail::check_example_domains(positives, schema.name);
  detail::check_example_domains(negatives, schema.name);

  std::vector<std::string> pos, neg;
  size_t n = 0;
  for (const auto& ex : positives) pos.push_back(format_state_example(++n, ex));
  for (const auto& ex : negatives) neg.push_back(format_state_example(++n, ex));
  if (!neg.empty()) neg.push_back(kExampleRule);
  else if (!pos.empty()) pos.push_back(kExampleRule);

  std::map<std::string, std::string> v = {
      {"domain", schema.name},
      {"domain_list", ""},
      {"domain_description", templates.domain_description(schema)},
      {"slot_list", templates.slot_list(schema)},
      {"static_examples", ""},
      {"retrieved_positive_examples", text::join(pos, "\n")},
      {"retrieved_negative_examples", text::join(neg, "\n")},
      {"history", render_history(history, history_window)},
      {"user_utterance", utterance},
      {"belief_state", ""},
      {"db_results", ""},
  };
  RenderedPrompt out{PromptKind::state, schema.name, templates.state_template(schema.name).render(v), {}};
  for (const auto& ex : positives) out.provenance.push_back(ex.id);
  return out;
}

inline RenderedPrompt render_response_prompt(const TemplateSet& templates, const DomainSchema& schema,
                                             const DialogueHistory& history, const std::string& utterance,
                                             const BeliefState& state, const std::optional<DbResult>& db,
                                             const std::vector<StoredExample>& examples, bool zero_shot,
                                             int history_window = 0, bool include_top_entity = false) {
  if (zero_shot && !examples.empty()) throw Error("zero-shot response prompt cannot carry examples");
  detail::check_example_domains(examples, schema.name);

  std::vector<std::string> blocks;
  size_t n = 0;
  for (const auto& ex : examples) blocks.push_back(format_response_example(++n, ex));
  if (!blocks.empty()) blocks.push_back(kExampleRule);

  std::map<std::string, std::string> v = {
      {"domain", schema.name},
      {"domain_list", ""},
      {"domain_description", templates.domain_description(schema)},
      {"slot_list", ""},
      {"static_examples", ""},
      {"retrieved_positive_examples", text::join(blocks, "\n")},
      {"retrieved_negative_examples", ""},
      {"history", render_history(history, history_window)},
      {"user_utterance", utterance},
      {"belief_state", serialize_belief(schema.name, state)},
      {"db_results", serialize_db(db, include_top_entity)},
  };
  RenderedPrompt out{PromptKind::response, schema.name, templates.response_template(schema.name).render(v), {}};
  for (const auto& ex : examples) out.provenance.push_back(ex.id);
  return out;
}

/// `{placeholder}` markers of known names still present in rendered text.
inline std::vector<std::string> unresolved_placeholders(std::string_view rendered) {
  std::vector<std::string> out;
  for (const auto& key : known_placeholders()) {
    std::string marker = "{" + key + "}";
    if (rendered.find(marker) != std::string_view::npos) out.push_back(key);
  }
  return out;
}

}  // namespace todllm
