/**
 * @file database.hpp
 * @brief Per-domain entity tables queried with the belief state.
 *
 * Database directories follow the MultiWOZ layout: one `<domain>_db.json`
 * file per domain, each an array of flat attribute records, e.g.
 *
 *   [{"name": "acorn guest house", "area": "north", "pricerange": "moderate",
 *     "type": "guesthouse", "address": "154 chesterton road", ...}, ...]
 *
 * Attribute names are lowercased with spaces removed on load (`leaveAt` ->
 * `leaveat`, `entrance fee` -> `entrancefee`). Non-string attribute values are
 * stored as their compact JSON text. Fields read per domain:
 *
 *   hotel       name, area, pricerange, type, stars, parking, internet,
 *               address, phone, postcode
 *   restaurant  name, area, pricerange, food, address, phone, postcode
 *   attraction  name, area, type, entrance fee, openhours, address, phone, postcode
 *   train       trainID, departure, destination, day, leaveAt, arriveBy,
 *               duration, price
 *   police, hospital  name/department, address, phone, postcode
 *
 * Any other field is kept and can be lexicalized, but only attributes named
 * like a belief-state slot constrain queries.
 */
#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "todllm/core.hpp"

namespace todllm {

struct Entity {
  std::string domain;
  SlotMap attributes;

  const std::string* attribute(const std::string& name) const {
    auto it = attributes.find(name);
    return it == attributes.end() ? nullptr : &it->second;
  }

  friend bool operator==(const Entity&, const Entity&) = default;
};

struct DbResult {
  std::string domain;
  size_t count = 0;               // full match cardinality
  std::vector<Entity> entities;   // possibly truncated
  bool provided_externally = false;
  std::vector<std::string> warnings;

  const Entity* top() const { return entities.empty() ? nullptr : &entities.front(); }
};

namespace detail {

inline std::optional<int> parse_clock(const std::string& s) {
  std::string t = text::trim(s);
  size_t colon = t.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 3 != t.size()) return std::nullopt;
  int h = 0, m = 0;
  for (size_t i = 0; i < colon; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(t[i]))) return std::nullopt;
    h = h * 10 + (t[i] - '0');
  }
  for (size_t i = colon + 1; i < t.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(t[i]))) return std::nullopt;
    m = m * 10 + (t[i] - '0');
  }
  if (m > 59) return std::nullopt;
  return h * 60 + m;
}

inline std::string json_attribute_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace detail

/// Attributes compared by normalized equality instead of fuzzy similarity.
inline const std::set<std::string>& exact_match_attributes() {
  static const std::set<std::string> s = {"address", "phone", "postcode", "id", "trainid", "reference"};
  return s;
}

/// Does `entity` satisfy a single slot constraint? Departure-time slots compare
/// as clock times (`leaveat`: at or after, `arriveby`: at or before).
inline bool attribute_matches(const std::string& slot, const std::string& entity_value,
                              const std::string& constraint, double threshold) {
  if (slot == "leaveat" || slot == "arriveby") {
    auto e = detail::parse_clock(entity_value);
    auto c = detail::parse_clock(constraint);
    if (e && c) return slot == "leaveat" ? *e >= *c : *e <= *c;
  }
  if (exact_match_attributes().count(slot)) return normalize_value(entity_value) == normalize_value(constraint);
  return fuzzy_equal(entity_value, constraint, threshold);
}

/// The constraints a belief state places on a domain table: informable,
/// non-booking slots whose value is not `dontcare`.
inline SlotMap query_constraints(const std::string& domain, const BeliefState& state,
                                 const DomainSchema* schema) {
  SlotMap out;
  const SlotMap* slots = state.find(domain);
  if (!slots) return out;
  for (const auto& [slot, value] : *slots) {
    if (normalize_value(value) == kDontCare) continue;
    if (schema) {
      const SlotSpec* spec = schema->find(slot);
      if (spec && (spec->booking || !spec->informable)) continue;
    } else if (slot.rfind("book", 0) == 0) {
      continue;
    }
    out[slot] = value;
  }
  return out;
}

/// Slots without a same-named attribute impose no constraint.
inline bool entity_matches(const Entity& entity, const SlotMap& constraints, double threshold) {
  for (const auto& [slot, value] : constraints) {
    const std::string* attr = entity.attribute(slot);
    if (!attr) continue;
    if (!attribute_matches(slot, *attr, value, threshold)) return false;
  }
  return true;
}

class Database {
 public:
  Database() = default;

  static Database load_directory(const std::filesystem::path& dir) {
    Database db;
    if (!std::filesystem::is_directory(dir)) throw Error("database directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
      std::string name = path.filename().string();
      const std::string suffix = "_db.json";
      if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
        continue;
      db.load_table(name.substr(0, name.size() - suffix.size()), path);
    }
    return db;
  }

  void load_table(const std::string& domain, const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open database file: " + file.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_array()) throw Error("database file is not a JSON array: " + file.string());
    std::vector<Entity> rows;
    for (const auto& rec : j) {
      if (!rec.is_object()) throw Error("database record is not an object in " + file.string());
      Entity e{domain, {}};
      for (auto it = rec.begin(); it != rec.end(); ++it) {
        std::string key = text::lower(it.key());
        key.erase(std::remove(key.begin(), key.end(), ' '), key.end());
        e.attributes[key] = detail::json_attribute_text(it.value());
      }
      rows.push_back(std::move(e));
    }
    add_table(domain, std::move(rows));
  }

  void add_table(const std::string& domain, std::vector<Entity> rows) {
    for (auto& r : rows) r.domain = domain;
    tables_[domain] = std::move(rows);
  }

  bool has_domain(const std::string& domain) const { return tables_.count(domain) > 0; }

  const std::vector<Entity>& table(const std::string& domain) const {
    auto it = tables_.find(domain);
    if (it == tables_.end()) throw UnknownDomainError(domain);
    return it->second;
  }

  std::vector<std::string> domains() const {
    std::vector<std::string> out;
    for (const auto& [d, _] : tables_) out.push_back(d);
    return out;
  }

  /// Every entity of `domain` consistent with the belief state. `max_entities`
  /// caps the returned list; `count` is always the full cardinality.
  DbResult query(const std::string& domain, const BeliefState& state, const DomainSchema* schema = nullptr,
                 double threshold = 0.9, size_t max_entities = 5) const {
    const auto& rows = table(domain);
    SlotMap constraints = query_constraints(domain, state, schema);
    DbResult r{domain, 0, {}, false, {}};
    for (const auto& e : rows) {
      if (!entity_matches(e, constraints, threshold)) continue;
      ++r.count;
      if (r.entities.size() < max_entities) r.entities.push_back(e);
    }
    return r;
  }

 private:
  std::map<std::string, std::vector<Entity>> tables_;
};

/// Wraps dataset-provided service results; no query is performed.
inline DbResult external_result(const std::string& domain, const Turn& turn, size_t max_entities = 5) {
  DbResult r{domain, 0, {}, true, {}};
  if (!turn.service_results) {
    r.warnings.push_back("missing-service-results");
    return r;
  }
  r.count = turn.service_results->size();
  for (const auto& attrs : *turn.service_results) {
    if (r.entities.size() >= max_entities) break;
    r.entities.push_back({domain, attrs});
  }
  return r;
}

struct LexicalizeResult {
  std::string text;
  std::vector<std::string> unresolved;
};

/// Fills `[name]` placeholders from the entity (after stripping a
/// `<domain>_` prefix) or from `extras`; unknown ones are left in place.
inline LexicalizeResult lexicalize(const std::string& templ, const Entity* entity, const SlotMap& extras) {
  LexicalizeResult out;
  size_t i = 0;
  while (i < templ.size()) {
    if (templ[i] != '[') {
      out.text.push_back(templ[i++]);
      continue;
    }
    size_t j = i + 1;
    while (j < templ.size() && (std::isalnum(static_cast<unsigned char>(templ[j])) || templ[j] == '_')) ++j;
    if (j >= templ.size() || templ[j] != ']' || j == i + 1) {
      out.text.push_back(templ[i++]);
      continue;
    }
    std::string name = text::lower(templ.substr(i + 1, j - i - 1));
    const std::string* value = nullptr;
    if (entity) {
      std::string bare = name;
      std::string prefix = entity->domain + "_";
      if (bare.rfind(prefix, 0) == 0 && bare.size() > prefix.size()) bare = bare.substr(prefix.size());
      value = entity->attribute(bare);
      if (!value) {
        std::string squashed = bare;
        squashed.erase(std::remove(squashed.begin(), squashed.end(), '_'), squashed.end());
        value = entity->attribute(squashed);
      }
    }
    if (!value) {
      auto it = extras.find(name);
      if (it != extras.end()) value = &it->second;
    }
    if (value) {
      out.text += *value;
    } else {
      out.text += templ.substr(i, j - i + 1);
      out.unresolved.push_back(name);
    }
    i = j + 1;
  }
  return out;
}

inline nlohmann::json to_json(const Entity& e) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : e.attributes) j[k] = v;
  return j;
}

inline nlohmann::json to_json(const DbResult& r) {
  nlohmann::json ents = nlohmann::json::array();
  for (const auto& e : r.entities) ents.push_back(to_json(e));
  return {{"domain", r.domain},
          {"count", r.count},
          {"entities", ents},
          {"provided_externally", r.provided_externally},
          {"warnings", r.warnings}};
}

inline DbResult db_result_from_json(const nlohmann::json& j) {
  DbResult r;
  r.domain = j.at("domain").get<std::string>();
  r.count = j.at("count").get<size_t>();
  for (const auto& e : j.at("entities")) {
    Entity ent{r.domain, {}};
    for (auto it = e.begin(); it != e.end(); ++it) ent.attributes[it.key()] = it.value().get<std::string>();
    r.entities.push_back(std::move(ent));
  }
  r.provided_externally = j.value("provided_externally", false);
  r.warnings = j.value("warnings", std::vector<std::string>{});
  return r;
}

}  // namespace todllm
