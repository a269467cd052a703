/**
 * @file ingest.hpp
 * @brief Corpus loaders for MultiWOZ 2.2 and SGD shaped data.
 *
 * MultiWOZ 2.2 directory:
 *   schema.json                  services with `slots` ({name: "hotel-area",
 *                                description, is_categorical, possible_values})
 *                                and `intents` (required_slots, optional_slots)
 *   {train,dev,test}/dialogues_*.json
 *                                arrays of {dialogue_id, services, turns}; user
 *                                turns carry frames[].state.{active_intent,
 *                                slot_values, requested_slots}; system turns
 *                                carry frames[].slots span annotations
 *                                ({slot, start, exclusive_end})
 *   db/<domain>_db.json          entity tables (see database.hpp)
 *   goals.json                   optional: {dialogue_id: {<domain>: {info,
 *                                reqt, book}, message}}
 *
 * SGD directory:
 *   {train,dev,test}/schema.json and {train,dev,test}/dialogues_*.json; system
 *   turn frames may carry service_call and service_results. Service families
 *   ("Restaurants_1" -> "restaurants") are the domains.
 *
 * Unified corpus (written by save_corpus): corpus.jsonl with one dialogue per
 * line, and schemas.json holding {"name", "schemas"}.
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

#include "todllm/context_store.hpp"
#include "todllm/core.hpp"
#include "todllm/database.hpp"

namespace todllm {

struct DomainGoal {
  SlotMap informable;
  std::vector<std::string> requested;
  SlotMap booking;
};

struct GoalSpec {
  std::map<std::string, DomainGoal> domains;
  std::string message;
};

struct Dialogue {
  std::string id;
  std::string split;
  std::vector<std::string> domains;
  std::optional<GoalSpec> goal;
  std::vector<Turn> turns;
};

struct Corpus {
  std::string name;
  std::vector<Dialogue> dialogues;
  std::vector<DomainSchema> schemas;
  std::vector<std::string> warnings;

  std::vector<std::string> domain_names() const {
    std::vector<std::string> out;
    for (const auto& s : schemas) out.push_back(s.name);
    return out;
  }

  const DomainSchema* schema(const std::string& domain) const {
    for (const auto& s : schemas)
      if (s.name == domain) return &s;
    return nullptr;
  }

  const Dialogue* dialogue(const std::string& id) const {
    for (const auto& d : dialogues)
      if (d.id == id) return &d;
    return nullptr;
  }
};

inline const std::vector<std::string>& multiwoz_domains() {
  static const std::vector<std::string> d = {"restaurant", "hotel", "attraction", "taxi", "train", "hospital", "police"};
  return d;
}

namespace detail {

inline nlohmann::json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot open " + p.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error("malformed JSON in " + p.string());
  return j;
}

inline std::vector<std::filesystem::path> dialogue_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    std::string name = e.path().filename().string();
    if (name.rfind("dialogues_", 0) == 0 && e.path().extension() == ".json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::pair<std::string, std::string> split_service_slot(const std::string& full) {
  size_t dash = full.find('-');
  if (dash == std::string::npos) return {"", text::lower(full)};
  return {text::lower(full.substr(0, dash)), text::lower(full.substr(dash + 1))};
}

inline std::string first_value(const nlohmann::json& v) {
  if (v.is_array()) return v.empty() ? "" : first_value(v.front());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

// Placeholder name for a span-annotated MultiWOZ slot.
inline std::string multiwoz_placeholder(const std::string& domain, const std::string& slot) {
  if (slot == "ref" || slot == "reference") return "reference";
  if (slot == "choice") return "choice";
  return domain + "_" + slot;
}

struct Span {
  size_t start;
  size_t end;
  std::string placeholder;
};

inline std::string apply_spans(const std::string& utterance, std::vector<Span> spans, const std::string& dialogue_id) {
  std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.start > b.start; });
  std::string out = utterance;
  size_t limit = out.size();
  for (const auto& s : spans) {
    if (s.start >= s.end || s.end > limit)
      throw Error("dialogue " + dialogue_id + ": span annotation out of range or overlapping");
    out.replace(s.start, s.end - s.start, "[" + s.placeholder + "]");
    limit = s.start;
  }
  return out;
}

inline bool word_boundary(const std::string& s, size_t pos, size_t len) {
  auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  bool left = pos == 0 || !alnum(s[pos - 1]);
  bool right = pos + len >= s.size() || !alnum(s[pos + len]);
  return left && right;
}

}  // namespace detail

/// Replaces occurrences of entity attribute values with `[domain_attribute]`,
/// longest value first, case-insensitively on word boundaries.
inline std::string delexicalize_with_entities(const std::string& utterance, const std::string& domain,
                                              const std::vector<Entity>& entities) {
  std::vector<std::pair<std::string, std::string>> values;  // lowered value, placeholder
  std::set<std::string> seen;
  for (const auto& e : entities)
    for (const auto& [attr, value] : e.attributes) {
      std::string v = text::lower(text::trim(value));
      if (v.size() < 3 || v.front() == '{' || v.front() == '[') continue;
      if (seen.insert(v + '\0' + attr).second) values.emplace_back(v, domain + "_" + attr);
    }
  std::stable_sort(values.begin(), values.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
  std::string out = utterance;
  for (const auto& [v, ph] : values) {
    std::string lowered = text::lower(out);
    size_t pos = 0;
    std::string replaced;
    size_t last = 0;
    bool any = false;
    while ((pos = lowered.find(v, pos)) != std::string::npos) {
      // Skip text already inside a placeholder.
      size_t open = lowered.rfind('[', pos);
      size_t close = lowered.rfind(']', pos);
      bool inside = open != std::string::npos && (close == std::string::npos || close < open);
      if (!inside && detail::word_boundary(lowered, pos, v.size())) {
        replaced += out.substr(last, pos - last) + "[" + ph + "]";
        last = pos + v.size();
        any = true;
      }
      pos += v.size();
    }
    if (any) out = replaced + out.substr(last);
  }
  return out;
}

inline GoalSpec parse_multiwoz_goal(const nlohmann::json& g, const std::vector<std::string>& domains) {
  static const std::map<std::string, std::string> reqt_names = {{"car type", "type"}, {"entrance fee", "entrancefee"}};
  GoalSpec goal;
  for (const auto& d : domains) {
    if (!g.contains(d) || !g[d].is_object() || g[d].empty()) continue;
    DomainGoal dg;
    const auto& gd = g[d];
    if (gd.contains("info"))
      for (auto it = gd["info"].begin(); it != gd["info"].end(); ++it)
        dg.informable[text::lower(it.key())] = normalize_value(detail::first_value(it.value()));
    if (gd.contains("reqt")) {
      for (const auto& r : gd["reqt"]) {
        std::string name = text::lower(r.get<std::string>());
        auto it = reqt_names.find(name);
        if (it != reqt_names.end()) name = it->second;
        name.erase(std::remove(name.begin(), name.end(), ' '), name.end());
        dg.requested.push_back(name);
      }
    }
    if (gd.contains("book"))
      for (auto it = gd["book"].begin(); it != gd["book"].end(); ++it) {
        if (it.key() == "invalid" || it.key() == "pre_invalid") continue;
        dg.booking[text::lower(it.key())] = normalize_value(detail::first_value(it.value()));
      }
    goal.domains[d] = std::move(dg);
  }
  if (g.contains("message")) {
    if (g["message"].is_array()) {
      std::vector<std::string> parts;
      for (const auto& m : g["message"]) parts.push_back(m.get<std::string>());
      goal.message = text::join(parts, " ");
    } else {
      goal.message = g["message"].get<std::string>();
    }
  }
  return goal;
}

/// Human-readable goal text when the dataset provides none.
inline std::string describe_goal(const GoalSpec& goal) {
  if (!goal.message.empty()) return goal.message;
  std::vector<std::string> parts;
  for (const auto& [d, g] : goal.domains) {
    std::string p = "You are looking for a " + d;
    std::vector<std::string> c;
    for (const auto& [s, v] : g.informable) c.push_back(s + " " + v);
    if (!c.empty()) p += " with " + text::join(c, ", ");
    if (!g.booking.empty()) {
      std::vector<std::string> b;
      for (const auto& [s, v] : g.booking) b.push_back(s + " " + v);
      p += "; book it for " + text::join(b, ", ");
    }
    if (!g.requested.empty()) p += "; ask for the " + text::join(g.requested, ", ");
    parts.push_back(p + ".");
  }
  return text::join(parts, " ");
}

/// Annotates every turn with diff_states(previous gold state, current gold state).
inline void derive_gold_updates(Corpus& corpus) {
  for (auto& d : corpus.dialogues) {
    BeliefState prev;
    for (auto& t : d.turns) {
      t.gold_updates.clear();
      if (!t.gold_state) continue;
      t.gold_updates = diff_states(prev, *t.gold_state);
      prev = *t.gold_state;
    }
  }
}

inline Corpus load_multiwoz(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) throw Error("MultiWOZ directory not found: " + root.string());
  Corpus corpus;
  corpus.name = "multiwoz";
  const auto& known = multiwoz_domains();

  // Schema
  nlohmann::json schema = detail::read_json_file(root / "schema.json");
  if (!schema.is_array()) throw Error("schema.json must be an array of services");
  std::map<std::string, DomainSchema> by_name;
  for (const auto& svc : schema) {
    std::string name = text::lower(svc.at("service_name").get<std::string>());
    if (!contains_domain(known, name)) continue;
    std::set<std::string> informable;
    if (svc.contains("intents"))
      for (const auto& intent : svc["intents"]) {
        for (const auto& s : intent.value("required_slots", nlohmann::json::array()))
          informable.insert(detail::split_service_slot(s.get<std::string>()).second);
        if (intent.contains("optional_slots"))
          for (auto it = intent["optional_slots"].begin(); it != intent["optional_slots"].end(); ++it)
            informable.insert(detail::split_service_slot(it.key()).second);
      }
    DomainSchema ds{name, svc.value("description", ""), {}};
    for (const auto& sl : svc.at("slots")) {
      SlotSpec spec;
      spec.name = detail::split_service_slot(sl.at("name").get<std::string>()).second;
      spec.description = sl.value("description", "");
      if (sl.value("is_categorical", false))
        for (const auto& v : sl.value("possible_values", nlohmann::json::array())) spec.values.push_back(text::lower(v.get<std::string>()));
      spec.informable = informable.count(spec.name) > 0;
      spec.booking = spec.name.rfind("book", 0) == 0;
      ds.slots.push_back(std::move(spec));
    }
    ds.validate();
    by_name[name] = std::move(ds);
  }
  for (const auto& d : known)
    if (by_name.count(d)) corpus.schemas.push_back(by_name[d]);
  std::vector<std::string> domains = corpus.domain_names();

  std::optional<Database> db;
  if (std::filesystem::is_directory(root / "db")) db = Database::load_directory(root / "db");

  nlohmann::json goals = nlohmann::json::object();
  if (std::filesystem::exists(root / "goals.json")) goals = detail::read_json_file(root / "goals.json");

  for (const std::string split : {"train", "dev", "test"}) {
    for (const auto& file : detail::dialogue_files(root / split)) {
      nlohmann::json arr = detail::read_json_file(file);
      if (!arr.is_array()) throw Error(file.string() + ": expected an array of dialogues");
      for (const auto& jd : arr) {
        std::string id = jd.value("dialogue_id", "");
        if (id.empty()) throw Error(file.string() + ": dialogue without dialogue_id");
        try {
          Dialogue dlg;
          dlg.id = id;
          dlg.split = split;
          for (const auto& s : jd.value("services", nlohmann::json::array())) {
            std::string d = text::lower(s.get<std::string>());
            if (contains_domain(domains, d)) dlg.domains.push_back(d);
          }
          const auto& turns = jd.at("turns");
          BeliefState prev_state;
          std::optional<std::string> prev_domain;
          for (size_t i = 0; i < turns.size(); ++i) {
            const auto& ut = turns[i];
            if (ut.at("speaker").get<std::string>() != "USER")
              throw Error("expected USER turn at index " + std::to_string(i));
            Turn t;
            t.user_utterance = ut.at("utterance").get<std::string>();
            BeliefState state;
            std::vector<std::string> active, changed;
            for (const auto& fr : ut.value("frames", nlohmann::json::array())) {
              std::string svc = text::lower(fr.at("service").get<std::string>());
              if (!contains_domain(domains, svc)) continue;
              const auto& st = fr.at("state");
              if (st.value("active_intent", "NONE") != "NONE") active.push_back(svc);
              for (auto it = st.at("slot_values").begin(); it != st.at("slot_values").end(); ++it) {
                auto [sd, slot] = detail::split_service_slot(it.key());
                const DomainSchema* ds = corpus.schema(svc);
                if (!ds->find(slot)) {
                  corpus.warnings.push_back("dialogue " + id + ": unknown slot " + it.key() + " skipped");
                  continue;
                }
                std::string v = normalize_value(detail::first_value(it.value()));
                if (!v.empty()) state.domains[svc][slot] = v;
              }
              for (const auto& r : st.value("requested_slots", nlohmann::json::array()))
                t.requested_slots.push_back(detail::split_service_slot(r.get<std::string>()).second);
              const SlotMap* now = state.find(svc);
              const SlotMap* before = prev_state.find(svc);
              if ((now ? *now : SlotMap{}) != (before ? *before : SlotMap{})) changed.push_back(svc);
            }
            std::string domain;
            if (active.size() == 1) {
              domain = active.front();
            } else if (active.size() > 1) {
              domain = active.front();
              for (const auto& a : active)
                if (contains_domain(changed, a)) {
                  domain = a;
                  break;
                }
            } else if (!changed.empty()) {
              domain = changed.front();
            } else if (prev_domain) {
              domain = *prev_domain;
            } else if (!dlg.domains.empty()) {
              domain = dlg.domains.front();
            }
            if (!domain.empty()) t.gold_domain = domain;
            prev_domain = t.gold_domain;
            t.gold_state = state;
            prev_state = state;

            if (i + 1 < turns.size()) {
              const auto& st = turns[++i];
              if (st.at("speaker").get<std::string>() != "SYSTEM")
                throw Error("expected SYSTEM turn at index " + std::to_string(i));
              std::string utt = st.at("utterance").get<std::string>();
              t.system_response = utt;
              std::vector<detail::Span> spans;
              for (const auto& fr : st.value("frames", nlohmann::json::array())) {
                std::string svc = text::lower(fr.at("service").get<std::string>());
                for (const auto& sl : fr.value("slots", nlohmann::json::array())) {
                  if (!sl.contains("start")) continue;
                  auto [sd, slot] = detail::split_service_slot(sl.at("slot").get<std::string>());
                  spans.push_back({sl["start"].get<size_t>(), sl.at("exclusive_end").get<size_t>(),
                                   detail::multiwoz_placeholder(sd.empty() ? svc : sd, slot)});
                }
              }
              if (!spans.empty()) {
                t.system_response_delex = detail::apply_spans(utt, spans, id);
              } else if (db && t.gold_domain && db->has_domain(*t.gold_domain)) {
                DbResult r = db->query(*t.gold_domain, state, corpus.schema(*t.gold_domain), 0.9, 1000);
                t.system_response_delex = delexicalize_with_entities(utt, *t.gold_domain, r.entities);
              } else {
                t.system_response_delex = utt;
              }
            }
            dlg.turns.push_back(std::move(t));
          }
          if (goals.contains(id)) {
            dlg.goal = parse_multiwoz_goal(goals[id], domains);
            if (dlg.goal->domains.empty()) {
              corpus.warnings.push_back("dialogue " + id + ": goal has no known domain");
              dlg.goal.reset();
            }
          }
          corpus.dialogues.push_back(std::move(dlg));
        } catch (const nlohmann::json::exception& e) {
          throw Error("dialogue " + id + ": " + e.what());
        } catch (const Error& e) {
          throw Error("dialogue " + id + ": " + e.what());
        }
      }
    }
  }
  std::sort(corpus.dialogues.begin(), corpus.dialogues.end(),
            [](const Dialogue& a, const Dialogue& b) { return a.id < b.id; });
  derive_gold_updates(corpus);
  return corpus;
}

inline std::string sgd_domain(const std::string& service_name) {
  return text::lower(service_name.substr(0, service_name.find('_')));
}

inline Corpus load_sgd(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) throw Error("SGD directory not found: " + root.string());
  Corpus corpus;
  corpus.name = "sgd";
  std::map<std::string, DomainSchema> by_name;
  std::vector<std::string> order;
  bool any_split = false;

  for (const std::string split : {"train", "dev", "test"}) {
    if (!std::filesystem::exists(root / split / "schema.json")) continue;
    any_split = true;
    nlohmann::json schema = detail::read_json_file(root / split / "schema.json");
    for (const auto& svc : schema) {
      std::string domain = sgd_domain(svc.at("service_name").get<std::string>());
      if (!by_name.count(domain)) {
        by_name[domain] = DomainSchema{domain, svc.value("description", ""), {}};
        order.push_back(domain);
      }
      DomainSchema& ds = by_name[domain];
      std::set<std::string> informable;
      for (const auto& intent : svc.value("intents", nlohmann::json::array())) {
        for (const auto& s : intent.value("required_slots", nlohmann::json::array())) informable.insert(s.get<std::string>());
        if (intent.contains("optional_slots"))
          for (auto it = intent["optional_slots"].begin(); it != intent["optional_slots"].end(); ++it)
            informable.insert(it.key());
      }
      for (const auto& sl : svc.at("slots")) {
        std::string name = text::lower(sl.at("name").get<std::string>());
        if (ds.find(name)) continue;
        SlotSpec spec;
        spec.name = name;
        spec.description = sl.value("description", "");
        if (sl.value("is_categorical", false))
          for (const auto& v : sl.value("possible_values", nlohmann::json::array())) spec.values.push_back(text::lower(v.get<std::string>()));
        spec.informable = informable.count(name) > 0;
        ds.slots.push_back(std::move(spec));
      }
    }
  }
  if (!any_split) throw Error("no SGD split with schema.json under " + root.string());
  std::sort(order.begin(), order.end());
  for (const auto& d : order) {
    by_name[d].validate();
    corpus.schemas.push_back(by_name[d]);
  }
  std::vector<std::string> domains = corpus.domain_names();

  for (const std::string split : {"train", "dev", "test"}) {
    for (const auto& file : detail::dialogue_files(root / split)) {
      nlohmann::json arr = detail::read_json_file(file);
      if (!arr.is_array()) throw Error(file.string() + ": expected an array of dialogues");
      for (const auto& jd : arr) {
        std::string id = jd.value("dialogue_id", "");
        if (id.empty()) throw Error(file.string() + ": dialogue without dialogue_id");
        try {
          Dialogue dlg;
          dlg.id = id;
          dlg.split = split;
          for (const auto& s : jd.value("services", nlohmann::json::array())) {
            std::string d = sgd_domain(s.get<std::string>());
            if (!contains_domain(dlg.domains, d)) dlg.domains.push_back(d);
          }
          const auto& turns = jd.at("turns");
          BeliefState state;
          std::optional<std::string> prev_domain;
          for (size_t i = 0; i < turns.size(); ++i) {
            const auto& ut = turns[i];
            if (ut.at("speaker").get<std::string>() != "USER")
              throw Error("expected USER turn at index " + std::to_string(i));
            Turn t;
            t.user_utterance = ut.at("utterance").get<std::string>();
            BeliefState prev = state;
            std::vector<std::string> frame_domains, changed;
            std::map<std::string, SlotMap> fresh;
            for (const auto& fr : ut.value("frames", nlohmann::json::array())) {
              std::string d = sgd_domain(fr.at("service").get<std::string>());
              if (!contains_domain(domains, d)) throw Error("frame for unknown service " + d);
              frame_domains.push_back(d);
              const auto& st = fr.at("state");
              SlotMap& m = fresh[d];
              for (auto it = st.at("slot_values").begin(); it != st.at("slot_values").end(); ++it) {
                std::string slot = text::lower(it.key());
                if (!corpus.schema(d)->find(slot)) {
                  corpus.warnings.push_back("dialogue " + id + ": unknown slot " + slot + " skipped");
                  continue;
                }
                std::string v = normalize_value(detail::first_value(it.value()));
                if (!v.empty()) m[slot] = v;
              }
              for (const auto& r : st.value("requested_slots", nlohmann::json::array()))
                t.requested_slots.push_back(text::lower(r.get<std::string>()));
            }
            for (auto& [d, m] : fresh) {
              if (m.empty()) state.domains.erase(d);
              else state.domains[d] = m;
              const SlotMap* before = prev.find(d);
              if (m != (before ? *before : SlotMap{})) changed.push_back(d);
            }
            std::string domain;
            for (const auto& d : frame_domains)
              if (contains_domain(changed, d)) {
                domain = d;
                break;
              }
            if (domain.empty() && !frame_domains.empty()) domain = frame_domains.front();
            if (domain.empty() && prev_domain) domain = *prev_domain;
            if (!domain.empty()) t.gold_domain = domain;
            prev_domain = t.gold_domain;
            t.gold_state = state;

            if (i + 1 < turns.size()) {
              const auto& st = turns[++i];
              if (st.at("speaker").get<std::string>() != "SYSTEM")
                throw Error("expected SYSTEM turn at index " + std::to_string(i));
              std::string utt = st.at("utterance").get<std::string>();
              t.system_response = utt;
              std::vector<detail::Span> spans;
              for (const auto& fr : st.value("frames", nlohmann::json::array())) {
                for (const auto& sl : fr.value("slots", nlohmann::json::array()))
                  spans.push_back({sl.at("start").get<size_t>(), sl.at("exclusive_end").get<size_t>(),
                                   text::lower(sl.at("slot").get<std::string>())});
                if (fr.contains("service_results")) {
                  std::vector<SlotMap> rows = t.service_results.value_or(std::vector<SlotMap>{});
                  for (const auto& row : fr["service_results"]) {
                    SlotMap m;
                    for (auto it = row.begin(); it != row.end(); ++it) m[text::lower(it.key())] = detail::first_value(it.value());
                    rows.push_back(std::move(m));
                  }
                  t.service_results = std::move(rows);
                }
              }
              // A system turn without a service call returned nothing.
              if (!t.service_results) t.service_results = std::vector<SlotMap>{};
              t.system_response_delex = detail::apply_spans(utt, spans, id);
            }
            dlg.turns.push_back(std::move(t));
          }
          corpus.dialogues.push_back(std::move(dlg));
        } catch (const nlohmann::json::exception& e) {
          throw Error("dialogue " + id + ": " + e.what());
        } catch (const Error& e) {
          throw Error("dialogue " + id + ": " + e.what());
        }
      }
    }
  }
  std::sort(corpus.dialogues.begin(), corpus.dialogues.end(),
            [](const Dialogue& a, const Dialogue& b) { return a.id < b.id; });
  derive_gold_updates(corpus);
  return corpus;
}

/// Context-store candidates: every turn of every single-domain dialogue in
/// the selected splits (all splits when `splits` is empty).
inline std::vector<Snippet> collect_snippets(const Corpus& corpus, int window, const std::set<std::string>& splits = {}) {
  std::vector<Snippet> out;
  for (const auto& d : corpus.dialogues) {
    if (!splits.empty() && !splits.count(d.split)) continue;
    bool single = d.domains.size() == 1;
    DialogueHistory history;
    for (size_t i = 0; i < d.turns.size(); ++i) {
      const Turn& t = d.turns[i];
      Snippet s;
      s.dialogue_id = d.id;
      s.turn_index = static_cast<int>(i);
      s.domain = single ? d.domains.front() : t.gold_domain.value_or("");
      s.single_domain = single && !s.domain.empty();
      s.context_key = make_context_key(history, t.user_utterance, window);
      s.gold_update.domain = s.domain;
      for (const auto& u : t.gold_updates)
        if (u.domain == s.domain) s.gold_update.pairs = u.pairs;
      if (t.gold_state) {
        if (const SlotMap* m = t.gold_state->find(s.domain)) s.gold_state.domains[s.domain] = *m;
      }
      s.gold_response_delex = t.system_response_delex.value_or(t.system_response.value_or(""));
      out.push_back(std::move(s));
      history.add_customer(t.user_utterance);
      history.add_assistant(t.system_response_delex.value_or(t.system_response.value_or("")));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Unified corpus files

inline nlohmann::json to_json(const GoalSpec& g) {
  nlohmann::json doms = nlohmann::json::object();
  for (const auto& [d, dg] : g.domains)
    doms[d] = {{"informable", to_json(dg.informable)}, {"requested", dg.requested}, {"booking", to_json(dg.booking)}};
  return {{"domains", doms}, {"message", g.message}};
}

inline GoalSpec goal_from_json(const nlohmann::json& j) {
  GoalSpec g;
  for (auto it = j.at("domains").begin(); it != j.at("domains").end(); ++it) {
    DomainGoal dg;
    dg.informable = slot_map_from_json(it.value().at("informable"));
    dg.requested = it.value().value("requested", std::vector<std::string>{});
    dg.booking = slot_map_from_json(it.value().value("booking", nlohmann::json::object()));
    g.domains[it.key()] = std::move(dg);
  }
  g.message = j.value("message", "");
  return g;
}

inline nlohmann::json to_json(const Dialogue& d) {
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& t : d.turns) turns.push_back(to_json(t));
  nlohmann::json j = {{"id", d.id}, {"split", d.split}, {"domains", d.domains}, {"turns", turns}};
  if (d.goal) j["goal"] = to_json(*d.goal);
  return j;
}

inline Dialogue dialogue_from_json(const nlohmann::json& j) {
  Dialogue d;
  d.id = j.at("id").get<std::string>();
  d.split = j.value("split", "");
  d.domains = j.value("domains", std::vector<std::string>{});
  for (const auto& t : j.at("turns")) d.turns.push_back(turn_from_json(t));
  if (j.contains("goal")) d.goal = goal_from_json(j["goal"]);
  return d;
}

inline void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "corpus.jsonl", std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / "corpus.jsonl").string());
    for (const auto& d : corpus.dialogues)
      out << to_json(d).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
  nlohmann::json schemas = nlohmann::json::array();
  for (const auto& s : corpus.schemas) schemas.push_back(to_json(s));
  std::ofstream out(dir / "schemas.json", std::ios::binary);
  if (!out) throw Error("cannot write " + (dir / "schemas.json").string());
  out << nlohmann::json{{"name", corpus.name}, {"schemas", schemas}}.dump(2) << '\n';
}

inline Corpus load_corpus(const std::filesystem::path& dir) {
  Corpus c;
  nlohmann::json meta = detail::read_json_file(dir / "schemas.json");
  c.name = meta.value("name", "");
  for (const auto& s : meta.at("schemas")) c.schemas.push_back(schema_from_json(s));
  std::ifstream in(dir / "corpus.jsonl");
  if (!in) throw Error("cannot open " + (dir / "corpus.jsonl").string());
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim_view(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error("corpus.jsonl:" + std::to_string(lineno) + ": malformed record");
    c.dialogues.push_back(dialogue_from_json(j));
  }
  return c;
}

}  // namespace todllm
