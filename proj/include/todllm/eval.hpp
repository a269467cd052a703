/**
 * @file eval.hpp
 * @brief Automatic metrics (domain accuracy, JGA, slot F1, BLEU, success) and
 * human-annotation aggregation.
 *
 * MultiWOZ success, per goal domain d (police and hospital skipped by default):
 *   inform   some turn detected as d produced a response with an offer
 *            placeholder ([d_name], [d_id], [d_trainid], [choice], or the bare
 *            forms in a d turn) while that turn's top database entity satisfies
 *            the goal's informable constraints. Domains without a database
 *            table (taxi) are satisfied automatically.
 *   request  every goal-requested slot s, plus `reference` when the goal books
 *            something, appears as [d_s] in any response or as [s] in a d turn.
 * A dialogue succeeds when every evaluated goal domain passes both checks.
 *
 * SGD success: the final prediction's belief jointly matches the final gold
 * state and every requested slot of the dialogue appears as [s] or [d_s].
 */
#pragma once

#include <json.hpp>

#include <array>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "todllm/core.hpp"
#include "todllm/database.hpp"
#include "todllm/ingest.hpp"
#include "todllm/parsing.hpp"
#include "todllm/pipeline.hpp"

namespace todllm {

// ---------------------------------------------------------------------------
// Turn-level state metrics

/// Every gold triple fuzzily present in `pred`; strict mode also forbids
/// predicted (domain, slot) keys absent from gold.
inline bool joint_match(const BeliefState& pred, const BeliefState& gold, double threshold, bool lenient = false) {
  for (const auto& [d, slots] : gold.domains)
    for (const auto& [s, v] : slots) {
      auto p = pred.get(d, s);
      if (!p || !fuzzy_equal(*p, v, threshold)) return false;
    }
  if (!lenient)
    for (const auto& [d, slots] : pred.domains)
      for (const auto& [s, v] : slots)
        if (!gold.get(d, s)) return false;
  return true;
}

inline double domain_accuracy(const std::vector<std::string>& predicted, const std::vector<std::string>& gold) {
  if (predicted.size() != gold.size()) throw Error("domain accuracy: unaligned turn lists");
  if (gold.empty()) throw Error("domain accuracy: no turns");
  size_t hits = 0;
  for (size_t i = 0; i < gold.size(); ++i) hits += predicted[i] == gold[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

inline double joint_goal_accuracy(const std::vector<BeliefState>& predicted, const std::vector<BeliefState>& gold,
                                  double threshold = 0.9, bool lenient = false) {
  if (predicted.size() != gold.size()) throw Error("JGA: unaligned turn lists");
  if (gold.empty()) throw Error("JGA: no turns");
  size_t hits = 0;
  for (size_t i = 0; i < gold.size(); ++i) hits += joint_match(predicted[i], gold[i], threshold, lenient) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

struct SlotScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  size_t tp = 0;
  size_t fp = 0;
  size_t fn = 0;
};

inline SlotScores scores_from_counts(size_t tp, size_t fp, size_t fn) {
  SlotScores s{0.0, 0.0, 0.0, tp, fp, fn};
  if (tp + fp == 0 && tp + fn == 0) {
    s.precision = s.recall = s.f1 = 1.0;
    return s;
  }
  if (tp + fp > 0) s.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) s.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (s.precision + s.recall > 0) s.f1 = 2 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

/// Micro-averaged triple matching; a (domain, slot) key matches at most once.
inline SlotScores slot_micro_f1(const std::vector<BeliefState>& predicted, const std::vector<BeliefState>& gold,
                                double threshold = 0.9) {
  if (predicted.size() != gold.size()) throw Error("slot F1: unaligned turn lists");
  size_t tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < gold.size(); ++i) {
    for (const auto& [d, slots] : predicted[i].domains)
      for (const auto& [s, v] : slots) {
        auto g = gold[i].get(d, s);
        if (g && fuzzy_equal(v, *g, threshold)) ++tp;
        else ++fp;
      }
    for (const auto& [d, slots] : gold[i].domains)
      for (const auto& [s, v] : slots) {
        auto p = predicted[i].get(d, s);
        if (!p || !fuzzy_equal(*p, v, threshold)) ++fn;
      }
  }
  return scores_from_counts(tp, fp, fn);
}

// ---------------------------------------------------------------------------
// BLEU

inline std::vector<std::string> bleu_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(text::lower(s));
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

/// Corpus BLEU-4 (uniform weights) over lowercased whitespace tokens, one
/// reference per candidate, add-one smoothing on orders 2-4, scaled to 0-100.
/// Per sentence the n-gram denominator is floored at 1.
inline double bleu(const std::vector<std::string>& candidates, const std::vector<std::string>& references) {
  if (candidates.size() != references.size()) throw Error("BLEU: candidate/reference count mismatch");
  if (candidates.empty()) throw Error("BLEU: empty corpus");
  std::array<long long, 5> num{}, den{};
  long long hyp_len = 0, ref_len = 0;
  for (size_t k = 0; k < candidates.size(); ++k) {
    auto hyp = bleu_tokens(candidates[k]);
    auto ref = bleu_tokens(references[k]);
    hyp_len += static_cast<long long>(hyp.size());
    ref_len += static_cast<long long>(ref.size());
    for (size_t n = 1; n <= 4; ++n) {
      std::map<std::vector<std::string>, long long> hc, rc;
      for (size_t i = 0; i + n <= hyp.size(); ++i) ++hc[{hyp.begin() + i, hyp.begin() + i + n}];
      for (size_t i = 0; i + n <= ref.size(); ++i) ++rc[{ref.begin() + i, ref.begin() + i + n}];
      long long matched = 0, total = 0;
      for (const auto& [g, c] : hc) {
        total += c;
        auto it = rc.find(g);
        if (it != rc.end()) matched += std::min(c, it->second);
      }
      num[n] += matched;
      den[n] += std::max<long long>(1, total);
    }
  }
  if (num[1] == 0) return 0.0;
  double log_sum = 0.0;
  for (size_t n = 1; n <= 4; ++n) {
    double p = n == 1 ? static_cast<double>(num[n]) / static_cast<double>(den[n])
                      : static_cast<double>(num[n] + 1) / static_cast<double>(den[n] + 1);
    log_sum += 0.25 * std::log(p);
  }
  double bp = 1.0;
  if (hyp_len == 0) bp = 0.0;
  else if (hyp_len < ref_len) bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return 100.0 * bp * std::exp(log_sum);
}

// ---------------------------------------------------------------------------
// Success

struct SuccessOptions {
  std::set<std::string> excluded_domains = {"police", "hospital"};
  double fuzzy_threshold = 0.9;
};

struct DomainSuccess {
  bool inform = false;
  bool request = false;
  bool success() const { return inform && request; }
};

struct SuccessResult {
  bool evaluated = false;
  bool success = false;
  std::map<std::string, DomainSuccess> domains;
};

namespace detail {

inline bool has_placeholder(const std::vector<std::string>& placeholders, const std::string& name) {
  return std::find(placeholders.begin(), placeholders.end(), name) != placeholders.end();
}

inline bool provides_slot(const std::vector<Prediction>& turns, const std::string& domain, const std::string& slot) {
  for (const auto& t : turns) {
    auto ph = extract_placeholders(t.response_delex);
    if (has_placeholder(ph, domain + "_" + slot)) return true;
    if (t.detected_domain == domain && has_placeholder(ph, slot)) return true;
  }
  return false;
}

}  // namespace detail

inline SuccessResult multiwoz_success(const std::vector<Prediction>& turns, const GoalSpec& goal, const Database* db,
                                      const SuccessOptions& opts = {}) {
  SuccessResult out;
  for (const auto& [d, g] : goal.domains) {
    if (opts.excluded_domains.count(d)) continue;
    DomainSuccess ds;
    if (!db || !db->has_domain(d)) {
      ds.inform = true;
    } else {
      const std::vector<std::string> offers = {d + "_name", d + "_id", d + "_trainid", d + "_choice", "choice"};
      const std::vector<std::string> bare = {"name", "id", "trainid"};
      for (const auto& t : turns) {
        if (t.detected_domain != d || !t.db_top) continue;
        auto ph = extract_placeholders(t.response_delex);
        bool offered = false;
        for (const auto& o : offers) offered = offered || detail::has_placeholder(ph, o);
        for (const auto& o : bare) offered = offered || detail::has_placeholder(ph, o);
        if (!offered) continue;
        if (entity_matches(Entity{d, *t.db_top}, g.informable, opts.fuzzy_threshold)) {
          ds.inform = true;
          break;
        }
      }
    }
    std::vector<std::string> wanted = g.requested;
    if (!g.booking.empty()) wanted.push_back("reference");
    ds.request = true;
    for (const auto& s : wanted) {
      bool ok = detail::provides_slot(turns, d, s);
      if (s == "reference" && !ok) {
        for (const auto& t : turns)
          if (detail::has_placeholder(extract_placeholders(t.response_delex), "reference")) ok = true;
      }
      ds.request = ds.request && ok;
    }
    out.domains[d] = ds;
  }
  out.evaluated = !out.domains.empty();
  out.success = out.evaluated;
  for (const auto& [d, ds] : out.domains) out.success = out.success && ds.success();
  return out;
}

inline bool sgd_success(const std::vector<Prediction>& turns, const Dialogue& gold, double threshold = 0.9) {
  const BeliefState* final_gold = nullptr;
  for (const auto& t : gold.turns)
    if (t.gold_state) final_gold = &*t.gold_state;
  BeliefState final_pred = turns.empty() ? BeliefState{} : turns.back().belief;
  if (final_gold && !joint_match(final_pred, *final_gold, threshold)) return false;
  if (!final_gold && !final_pred.empty()) return false;
  for (size_t i = 0; i < gold.turns.size(); ++i)
    for (const auto& s : gold.turns[i].requested_slots) {
      bool found = false;
      for (const auto& t : turns) {
        auto ph = extract_placeholders(t.response_delex);
        if (detail::has_placeholder(ph, s) || detail::has_placeholder(ph, t.detected_domain + "_" + s)) found = true;
      }
      if (!found) return false;
    }
  return true;
}

// ---------------------------------------------------------------------------
// Human annotations

struct AnnotationRecord {
  std::string session_id;
  int goal_domains = 0;
  int q1_successful_subdialogues = 0;
  std::map<std::string, bool> q1_domain_flags;
  int q2_clarifications = 0;
  bool q3_all_captured = false;
  std::string note;
};

inline nlohmann::json to_json(const AnnotationRecord& a) {
  return {{"session_id", a.session_id},
          {"goal_domains", a.goal_domains},
          {"q1_successful_subdialogues", a.q1_successful_subdialogues},
          {"q1_domain_flags", a.q1_domain_flags},
          {"q2_clarifications", a.q2_clarifications},
          {"q3_all_captured", a.q3_all_captured},
          {"note", a.note}};
}

inline AnnotationRecord annotation_from_json(const nlohmann::json& j) {
  AnnotationRecord a;
  a.session_id = j.value("session_id", "");
  a.goal_domains = j.value("goal_domains", 0);
  a.q1_domain_flags = j.value("q1_domain_flags", std::map<std::string, bool>{});
  if (j.contains("q1_successful_subdialogues")) {
    a.q1_successful_subdialogues = j["q1_successful_subdialogues"].get<int>();
  } else {
    for (const auto& [d, ok] : a.q1_domain_flags) a.q1_successful_subdialogues += ok ? 1 : 0;
  }
  a.q2_clarifications = j.value("q2_clarifications", 0);
  a.q3_all_captured = j.value("q3_all_captured", false);
  a.note = j.value("note", "");
  if (a.q1_successful_subdialogues < 0 || a.q2_clarifications < 0) throw Error("annotation counts must be >= 0");
  return a;
}

struct AnnotationTable {
  size_t dialogues = 0;
  size_t subdialogues = 0;
  size_t successful_subdialogues = 0;
  size_t clarifications = 0;
  double clarifications_per_dialogue = 0.0;
  double successful_subdialogues_ratio = 0.0;
  double successful_dialogues_ratio = 0.0;
  double correctly_captured_ratio = 0.0;
};

inline AnnotationTable aggregate_annotations(const std::vector<AnnotationRecord>& records) {
  AnnotationTable t;
  t.dialogues = records.size();
  size_t full = 0, captured = 0;
  for (const auto& r : records) {
    t.subdialogues += static_cast<size_t>(r.goal_domains);
    t.successful_subdialogues += static_cast<size_t>(r.q1_successful_subdialogues);
    t.clarifications += static_cast<size_t>(r.q2_clarifications);
    if (r.q1_successful_subdialogues == r.goal_domains) ++full;
    if (r.q3_all_captured) ++captured;
  }
  if (t.dialogues > 0) {
    double n = static_cast<double>(t.dialogues);
    t.clarifications_per_dialogue = static_cast<double>(t.clarifications) / n;
    t.successful_dialogues_ratio = static_cast<double>(full) / n;
    t.correctly_captured_ratio = static_cast<double>(captured) / n;
  }
  if (t.subdialogues > 0)
    t.successful_subdialogues_ratio = static_cast<double>(t.successful_subdialogues) / static_cast<double>(t.subdialogues);
  return t;
}

inline std::string percent(double ratio) {
  return std::to_string(static_cast<long>(std::lround(ratio * 100.0))) + "%";
}

inline std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline nlohmann::json to_json(const AnnotationTable& t) {
  return {{"dialogues", t.dialogues},
          {"subdialogues", t.subdialogues},
          {"successful_subdialogues", t.successful_subdialogues},
          {"clarifications", t.clarifications},
          {"clarifications_per_dialogue", t.clarifications_per_dialogue},
          {"successful_subdialogues_ratio", t.successful_subdialogues_ratio},
          {"successful_dialogues_ratio", t.successful_dialogues_ratio},
          {"correctly_captured_ratio", t.correctly_captured_ratio}};
}

inline std::string render_annotation_table(const AnnotationTable& t) {
  std::ostringstream os;
  os << std::left << std::setw(28) << "dialogues" << t.dialogues << '\n'
     << std::setw(28) << "subdialogues" << t.subdialogues << '\n'
     << std::setw(28) << "clarify / dial" << fixed(t.clarifications_per_dialogue, 2) << '\n'
     << std::setw(28) << "successful subdialogues" << percent(t.successful_subdialogues_ratio) << '\n'
     << std::setw(28) << "successful dialogues" << percent(t.successful_dialogues_ratio) << '\n'
     << std::setw(28) << "correctly captured" << percent(t.correctly_captured_ratio) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Corpus report

struct EvalOptions {
  double fuzzy_threshold = 0.9;
  bool lenient_jga = false;
  std::set<std::string> excluded_success_domains = {"police", "hospital"};
};

struct DomainBreakdown {
  size_t turns = 0;
  double jga = 0.0;
  double domain_accuracy = 0.0;
};

struct EvalReport {
  size_t dialogues = 0;
  size_t turns = 0;
  size_t missing_turns = 0;
  std::optional<double> domain_accuracy;
  std::optional<double> jga;
  SlotScores slots;
  std::optional<double> bleu;
  std::optional<double> success;
  size_t success_dialogues = 0;
  std::map<std::string, DomainBreakdown> per_domain;
  std::vector<std::string> warnings;
};

inline nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

inline std::optional<double> opt_from_json(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [d, b] : r.per_domain)
    per[d] = {{"turns", b.turns}, {"jga", b.jga}, {"domain_accuracy", b.domain_accuracy}};
  return {{"dialogues", r.dialogues},
          {"turns", r.turns},
          {"missing_turns", r.missing_turns},
          {"domain_accuracy", opt_json(r.domain_accuracy)},
          {"jga", opt_json(r.jga)},
          {"slot_precision", r.slots.precision},
          {"slot_recall", r.slots.recall},
          {"slot_f1", r.slots.f1},
          {"slot_counts", {{"tp", r.slots.tp}, {"fp", r.slots.fp}, {"fn", r.slots.fn}}},
          {"bleu", opt_json(r.bleu)},
          {"success", opt_json(r.success)},
          {"success_dialogues", r.success_dialogues},
          {"per_domain", per},
          {"warnings", r.warnings}};
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.dialogues = j.at("dialogues").get<size_t>();
  r.turns = j.at("turns").get<size_t>();
  r.missing_turns = j.value("missing_turns", size_t{0});
  r.domain_accuracy = opt_from_json(j, "domain_accuracy");
  r.jga = opt_from_json(j, "jga");
  r.slots.precision = j.at("slot_precision").get<double>();
  r.slots.recall = j.at("slot_recall").get<double>();
  r.slots.f1 = j.at("slot_f1").get<double>();
  r.slots.tp = j.at("slot_counts").at("tp").get<size_t>();
  r.slots.fp = j.at("slot_counts").at("fp").get<size_t>();
  r.slots.fn = j.at("slot_counts").at("fn").get<size_t>();
  r.bleu = opt_from_json(j, "bleu");
  r.success = opt_from_json(j, "success");
  r.success_dialogues = j.value("success_dialogues", size_t{0});
  for (auto it = j.at("per_domain").begin(); it != j.at("per_domain").end(); ++it)
    r.per_domain[it.key()] = {it.value().at("turns").get<size_t>(), it.value().at("jga").get<double>(),
                              it.value().at("domain_accuracy").get<double>()};
  r.warnings = j.value("warnings", std::vector<std::string>{});
  return r;
}

/// Columns in the order BLEU, JGA, Slot-F1, Success (plus domain accuracy).
inline std::string render_report_table(const EvalReport& r, bool per_domain = false) {
  auto cell = [](const std::optional<double>& v, double scale) { return v ? fixed(*v * scale, 2) : std::string("-"); };
  std::ostringstream os;
  os << std::left << std::setw(10) << "BLEU" << std::setw(10) << "JGA" << std::setw(10) << "Slot-F1" << std::setw(10)
     << "Success" << "Domain" << '\n';
  os << std::setw(10) << cell(r.bleu, 1.0) << std::setw(10) << cell(r.jga, 100.0) << std::setw(10)
     << fixed(r.slots.f1 * 100.0, 2) << std::setw(10) << cell(r.success, 100.0) << cell(r.domain_accuracy, 100.0)
     << '\n';
  if (per_domain && !r.per_domain.empty()) {
    os << '\n' << std::setw(14) << "domain" << std::setw(8) << "turns" << std::setw(10) << "JGA" << "Domain" << '\n';
    for (const auto& [d, b] : r.per_domain)
      os << std::setw(14) << d << std::setw(8) << b.turns << std::setw(10) << fixed(b.jga * 100.0, 2)
         << fixed(b.domain_accuracy * 100.0, 2) << '\n';
  }
  return os.str();
}

/// Scores the dialogues that appear in `predictions` against the corpus gold.
/// Turns absent from the predictions (or carrying an error) count as empty
/// predictions.
inline EvalReport evaluate(const Corpus& corpus, const std::vector<Prediction>& predictions, const Database* db,
                           const EvalOptions& opts = {}) {
  std::map<std::string, std::map<int, const Prediction*>> by_dialogue;
  for (const auto& p : predictions) by_dialogue[p.dialogue_id][p.turn_index] = &p;

  EvalReport r;
  std::vector<std::string> pred_domains, gold_domains;
  std::vector<BeliefState> pred_states, gold_states;
  std::vector<std::string> cands, refs;
  std::map<std::string, std::vector<std::pair<bool, bool>>> per;  // gold domain -> (joint, domain hit)
  size_t success_hits = 0;

  for (const auto& [id, turn_map] : by_dialogue) {
    const Dialogue* d = corpus.dialogue(id);
    if (!d) {
      r.warnings.push_back("prediction for unknown dialogue " + id);
      continue;
    }
    ++r.dialogues;
    std::vector<Prediction> turns;
    for (size_t i = 0; i < d->turns.size(); ++i) {
      const Turn& g = d->turns[i];
      auto it = turn_map.find(static_cast<int>(i));
      Prediction p;
      if (it != turn_map.end() && !it->second->error) {
        p = *it->second;
      } else {
        ++r.missing_turns;
        p.dialogue_id = id;
        p.turn_index = static_cast<int>(i);
      }
      ++r.turns;
      bool domain_hit = false, joint = false;
      if (g.gold_domain) {
        pred_domains.push_back(p.detected_domain);
        gold_domains.push_back(*g.gold_domain);
        domain_hit = p.detected_domain == *g.gold_domain;
      }
      if (g.gold_state) {
        pred_states.push_back(p.belief);
        gold_states.push_back(*g.gold_state);
        joint = joint_match(p.belief, *g.gold_state, opts.fuzzy_threshold, opts.lenient_jga);
      }
      if (g.system_response_delex) {
        cands.push_back(p.response_delex);
        refs.push_back(*g.system_response_delex);
      }
      if (g.gold_domain && g.gold_state) per[*g.gold_domain].emplace_back(joint, domain_hit);
      turns.push_back(std::move(p));
    }
    if (corpus.name == "sgd") {
      ++r.success_dialogues;
      success_hits += sgd_success(turns, *d, opts.fuzzy_threshold) ? 1 : 0;
    } else if (!d->goal) {
      r.warnings.push_back("dialogue " + id + " has no goal; excluded from success");
    } else {
      SuccessOptions so{opts.excluded_success_domains, opts.fuzzy_threshold};
      SuccessResult s = multiwoz_success(turns, *d->goal, db, so);
      if (!s.evaluated) {
        r.warnings.push_back("dialogue " + id + " has no evaluable goal domain; excluded from success");
      } else {
        ++r.success_dialogues;
        success_hits += s.success ? 1 : 0;
      }
    }
  }
  if (!gold_domains.empty()) r.domain_accuracy = domain_accuracy(pred_domains, gold_domains);
  if (!gold_states.empty()) {
    r.jga = joint_goal_accuracy(pred_states, gold_states, opts.fuzzy_threshold, opts.lenient_jga);
    r.slots = slot_micro_f1(pred_states, gold_states, opts.fuzzy_threshold);
  }
  if (!cands.empty()) r.bleu = bleu(cands, refs);
  if (r.success_dialogues > 0)
    r.success = static_cast<double>(success_hits) / static_cast<double>(r.success_dialogues);
  for (const auto& [d, v] : per) {
    DomainBreakdown b;
    b.turns = v.size();
    size_t j = 0, h = 0;
    for (const auto& [joint, hit] : v) {
      j += joint ? 1 : 0;
      h += hit ? 1 : 0;
    }
    b.jga = static_cast<double>(j) / static_cast<double>(v.size());
    b.domain_accuracy = static_cast<double>(h) / static_cast<double>(v.size());
    r.per_domain[d] = b;
  }
  return r;
}

}  // namespace todllm
