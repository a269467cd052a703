/**
 * @file parsing.hpp
 * @brief Tolerant parsers for raw model completions.
 *
 * None of these functions throw. Anything that deviates from the requested
 * output format is repaired where possible and reported as a warning tag.
 */
#pragma once

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "todllm/core.hpp"
#include "todllm/text.hpp"

namespace todllm {

namespace warning {
inline constexpr const char* kInvalidStructure = "invalid-structure";
inline constexpr const char* kUnknownSlotDropped = "unknown-slot-dropped";
inline constexpr const char* kExtraContentTruncated = "extra-content-truncated";
inline constexpr const char* kDuplicateSlot = "duplicate-slot";
inline constexpr const char* kNoDomainFound = "no-domain-found";
inline constexpr const char* kAmbiguousDomain = "ambiguous-domain";
}  // namespace warning

template <typename T>
struct ParseOutcome {
  T value;
  std::vector<std::string> warnings;

  bool clean() const { return warnings.empty(); }
};

namespace detail {

inline void add_warning(std::vector<std::string>& w, const std::string& tag) {
  if (std::find(w.begin(), w.end(), tag) == w.end()) w.push_back(tag);
}

inline bool is_key_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool is_key_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

struct RawPair {
  std::string key;
  std::string value;
};

struct PairScan {
  std::vector<RawPair> pairs;
  bool extra_content = false;
};

// Tries to read `key:value` at position i. Keys may be quoted; values are either
// a double-quoted string or unquoted text running to the next `-key:`, newline
// or end of input.
inline bool read_pair(std::string_view s, size_t i, RawPair& out, size_t& end) {
  size_t p = i;
  bool quoted_key = false;
  if (p < s.size() && s[p] == '"') {
    quoted_key = true;
    ++p;
  }
  if (p >= s.size() || !is_key_start(s[p])) return false;
  size_t ks = p;
  while (p < s.size() && is_key_char(s[p])) ++p;
  std::string key(s.substr(ks, p - ks));
  if (quoted_key) {
    if (p >= s.size() || s[p] != '"') return false;
    ++p;
  }
  while (p < s.size() && (s[p] == ' ' || s[p] == '\t')) ++p;
  if (p >= s.size() || s[p] != ':') return false;
  ++p;
  while (p < s.size() && (s[p] == ' ' || s[p] == '\t')) ++p;
  if (p < s.size() && s[p] == '"') {
    size_t close = s.find('"', p + 1);
    if (close == std::string_view::npos) return false;
    out = {std::move(key), std::string(s.substr(p + 1, close - p - 1))};
    end = close + 1;
    return true;
  }
  size_t vs = p;
  while (p < s.size() && s[p] != '\n' && s[p] != '"') {
    if (s[p] == '-') {
      // A hyphen ends the value only when another key follows.
      size_t q = p + 1;
      while (q < s.size() && s[q] == ' ') ++q;
      if (q < s.size() && s[q] == '"') ++q;
      if (q < s.size() && is_key_start(s[q])) {
        size_t r = q;
        while (r < s.size() && is_key_char(s[r])) ++r;
        if (r < s.size() && s[r] == '"') ++r;
        while (r < s.size() && s[r] == ' ') ++r;
        if (r < s.size() && s[r] == ':') break;
      }
    }
    ++p;
  }
  if (p < s.size() && s[p] == '"') return false;
  out = {std::move(key), text::trim(s.substr(vs, p - vs))};
  end = p;
  return true;
}

inline PairScan scan_pairs(std::string_view s) {
  PairScan scan;
  size_t i = 0;
  bool expect_separator = false;
  while (i < s.size()) {
    char c = s[i];
    if (text::is_space(c)) {
      ++i;
      continue;
    }
    if (expect_separator && c == '-') {
      expect_separator = false;
      ++i;
      continue;
    }
    bool at_word_start = i == 0 || !is_key_char(s[i - 1]);
    RawPair pair;
    size_t end = 0;
    if (at_word_start && read_pair(s, i, pair, end)) {
      scan.pairs.push_back(std::move(pair));
      i = end;
      expect_separator = true;
      continue;
    }
    scan.extra_content = true;
    expect_separator = false;
    ++i;
  }
  return scan;
}

inline std::string json_scalar_to_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "";
  if (v.is_array() && !v.empty()) return json_scalar_to_string(v.front());
  if (v.is_array()) return "";
  return v.dump();
}

// Reads the first balanced {...} block as an object. Returns nullopt when no
// brace block parses.
inline std::optional<std::vector<RawPair>> scan_object(std::string_view s, const std::string& domain,
                                                       bool& extra_content) {
  size_t open = s.find('{');
  if (open == std::string_view::npos) return std::nullopt;
  int depth = 0;
  bool in_string = false;
  size_t close = std::string_view::npos;
  for (size_t i = open; i < s.size(); ++i) {
    char c = s[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) {
      close = i;
      break;
    }
  }
  if (close == std::string_view::npos) return std::nullopt;
  std::string_view body = s.substr(open, close - open + 1);
  extra_content = !text::trim_view(s.substr(0, open)).empty() ||
                  !text::trim_view(s.substr(close + 1)).empty();

  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  std::vector<RawPair> pairs;
  if (!j.is_discarded() && j.is_object()) {
    // {"hotel": {...}} nests the update under the domain name.
    if (j.size() == 1 && j.begin().value().is_object()) {
      if (text::lower(j.begin().key()) == domain) j = j.begin().value();
    }
    for (auto it = j.begin(); it != j.end(); ++it)
      pairs.push_back({it.key(), json_scalar_to_string(it.value())});
    return pairs;
  }
  // Not valid JSON: accept loose `key: value` pairs separated by commas.
  std::string_view inner = body.substr(1, body.size() - 2);
  for (const auto& part : text::split(inner, ',')) {
    size_t colon = part.find(':');
    if (colon == std::string::npos) {
      if (!text::trim_view(part).empty()) return std::nullopt;
      continue;
    }
    std::string key = text::strip_quotes(part.substr(0, colon));
    std::string value = text::strip_quotes(part.substr(colon + 1));
    if (key.empty()) return std::nullopt;
    pairs.push_back({std::move(key), std::move(value)});
  }
  if (pairs.empty()) return std::nullopt;
  extra_content = true;
  return pairs;
}

inline std::string strip_domain_prefix(const std::string& key, const std::string& domain) {
  for (char sep : {'-', '.', '_'}) {
    std::string prefix = domain + sep;
    if (key.size() > prefix.size() && key.compare(0, prefix.size(), prefix) == 0)
      return key.substr(prefix.size());
  }
  return key;
}

}  // namespace detail

/// Parses a state-update completion. Tries a brace-delimited object first,
/// then the hyphen-separated `slot:"value"` list.
inline ParseOutcome<StateUpdate> parse_state_output(std::string_view completion, const DomainSchema& schema,
                                                    double threshold = 0.9) {
  ParseOutcome<StateUpdate> out{{schema.name, {}, {}}, {}};
  std::string_view s = text::trim_view(completion);
  if (s.empty()) return out;

  std::vector<detail::RawPair> raw;
  bool extra = false;
  bool parsed = false;
  if (auto obj = detail::scan_object(s, schema.name, extra)) {
    raw = std::move(*obj);
    parsed = true;
  } else {
    detail::PairScan scan = detail::scan_pairs(s);
    if (!scan.pairs.empty()) {
      raw = std::move(scan.pairs);
      extra = scan.extra_content;
      parsed = true;
    }
  }
  if (!parsed) {
    detail::add_warning(out.warnings, warning::kInvalidStructure);
    return out;
  }
  if (extra) detail::add_warning(out.warnings, warning::kExtraContentTruncated);

  for (auto& p : raw) {
    std::string key = text::lower(text::trim(p.key));
    const SlotSpec* spec = schema.find(key);
    if (!spec) {
      key = detail::strip_domain_prefix(key, schema.name);
      spec = schema.find(key);
    }
    if (!spec) {
      detail::add_warning(out.warnings, warning::kUnknownSlotDropped);
      continue;
    }
    std::string value = canonicalize_value(p.value, *spec, threshold);
    if (value.empty()) continue;
    if (out.value.pairs.count(key)) detail::add_warning(out.warnings, warning::kDuplicateSlot);
    out.value.pairs[key] = std::move(value);
  }
  out.value.warnings = out.warnings;
  return out;
}

/// `slot:"value"` pairs joined by hyphens, the format the state prompt asks for.
inline std::string format_state_pairs(const SlotMap& pairs) {
  std::string out;
  for (const auto& [slot, value] : pairs) {
    if (!out.empty()) out += '-';
    out += slot + ":\"" + value + "\"";
  }
  return out;
}

inline std::string format_state_object(const SlotMap& pairs) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [slot, value] : pairs) j[slot] = value;
  return j.dump();
}

/// Picks the first listed domain that appears as a word in the completion.
/// Falls back to `previous` (or the first domain) with a warning.
inline ParseOutcome<std::string> parse_domain_output(std::string_view completion,
                                                     const std::vector<std::string>& domains,
                                                     const std::optional<std::string>& previous = std::nullopt) {
  ParseOutcome<std::string> out;
  if (domains.empty()) {
    out.warnings.push_back(warning::kNoDomainFound);
    return out;
  }
  std::string cleaned = text::lower(text::trim(completion));
  while (!cleaned.empty() && (cleaned.back() == '.' || text::is_space(cleaned.back()))) cleaned.pop_back();
  if (contains_domain(domains, cleaned)) {
    out.value = cleaned;
    return out;
  }
  auto tokens = text::word_tokens(completion);
  std::vector<std::string> found;
  for (const auto& d : domains)
    if (std::find(tokens.begin(), tokens.end(), d) != tokens.end()) found.push_back(d);
  if (!found.empty()) {
    out.value = found.front();
    out.warnings.push_back(found.size() > 1 ? warning::kAmbiguousDomain : warning::kExtraContentTruncated);
    return out;
  }
  out.value = previous && contains_domain(domains, *previous) ? *previous : domains.front();
  out.warnings.push_back(warning::kNoDomainFound);
  return out;
}

namespace detail {

inline const std::vector<std::string>& speaker_markers() {
  static const std::vector<std::string> m = {"customer:", "assistant:", "user:"};
  return m;
}

inline const std::vector<std::string>& leading_labels() {
  static const std::vector<std::string> m = {"assistant:", "system:", "response:"};
  return m;
}

// Position of the first speaker marker outside brackets, or npos.
inline size_t find_speaker_marker(std::string_view s) {
  int bracket = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '[') ++bracket;
    else if (s[i] == ']' && bracket > 0) --bracket;
    if (bracket > 0) continue;
    if (i > 0 && is_key_char(s[i - 1])) continue;
    for (const auto& m : speaker_markers())
      if (text::starts_with_ci(s.substr(i), m)) return i;
  }
  return std::string_view::npos;
}

inline std::string sanitize_once(const std::string& in, bool& truncated) {
  std::string s = text::strip_quotes(in);
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& label : leading_labels()) {
      if (text::starts_with_ci(s, label)) {
        s = text::strip_quotes(s.substr(label.size()));
        changed = true;
      }
    }
  }
  size_t marker = find_speaker_marker(s);
  if (marker != std::string::npos) {
    s = s.substr(0, marker);
    truncated = true;
  }
  return text::strip_quotes(text::collapse_whitespace(s));
}

}  // namespace detail

/// Cleans a response completion: drops role labels and quotes, cuts at the
/// first hallucinated speaker turn, collapses whitespace.
inline ParseOutcome<std::string> sanitize_response(std::string_view completion) {
  ParseOutcome<std::string> out;
  bool truncated = false;
  std::string s(completion);
  // Passes never lengthen the text, so this reaches a fixed point.
  while (true) {
    std::string next = detail::sanitize_once(s, truncated);
    if (next == s) break;
    s = std::move(next);
  }
  out.value = std::move(s);
  if (truncated) out.warnings.push_back(warning::kExtraContentTruncated);
  return out;
}

/// Names of `[placeholder]` tokens in order of appearance, lowercased.
inline std::vector<std::string> extract_placeholders(std::string_view s) {
  std::vector<std::string> out;
  size_t i = 0;
  while ((i = s.find('[', i)) != std::string_view::npos) {
    size_t j = i + 1;
    while (j < s.size() && detail::is_key_char(s[j])) ++j;
    if (j < s.size() && s[j] == ']' && j > i + 1) {
      out.push_back(text::lower(s.substr(i + 1, j - i - 1)));
      i = j + 1;
    } else {
      ++i;
    }
  }
  return out;
}

}  // namespace todllm
