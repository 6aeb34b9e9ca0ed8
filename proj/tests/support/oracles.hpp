#pragma once

// Independent reference implementations used to check the engine. None of
// these share code with the library beyond plain data types.

#include <algorithm>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "overlay/ontology.hpp"
#include "overlay/relation_graph.hpp"
#include "overlay/xml.hpp"

namespace overlay::testing {

// ---------------------------------------------------------------------------
// Query evaluation by nested loops over the full triple dump.

inline std::vector<Row> brute_force_query(const std::vector<Triple>& triples, const QueryPattern& q) {
  using Binding = std::map<std::string, Value>;
  std::vector<Binding> partial{Binding{}};
  auto unify = [](Binding& b, const PatternTerm& term, const Value& v) {
    if (!term.is_variable()) {
      if (const auto* pid = std::get_if<ObjectId>(&term.term)) return v == Value{*pid};
      return v == Value{std::get<Predicate>(term.term)};
    }
    auto [it, inserted] = b.emplace(term.variable(), v);
    return inserted || it->second == v;
  };
  for (const auto& clause : q.clauses) {
    std::vector<Binding> next;
    for (const auto& b : partial)
      for (const auto& t : triples) {
        Binding nb = b;
        if (unify(nb, clause.subject, Value{t.subject}) && unify(nb, clause.predicate, Value{t.predicate}) &&
            unify(nb, clause.object, Value{t.object}))
          next.push_back(std::move(nb));
      }
    partial = std::move(next);
  }
  std::set<Row> rows;
  for (const auto& b : partial) {
    Row r;
    for (const auto& v : q.select) r.push_back(b.at(v));
    rows.insert(r);
  }
  return {rows.begin(), rows.end()};
}

// ---------------------------------------------------------------------------
// Random graphs and patterns.

inline const std::vector<Predicate>& predicate_pool() {
  static const std::vector<Predicate> pool{rel::annotates, rel::assertedBy,   rel::augments,  rel::hasRole,
                                           rel::metadataFor, rel::memberOf, rel::providedBy, rel::representedBy,
                                           Predicate{"http://example.org/ext#", "cites"}};
  return pool;
}

struct RandomGraph {
  std::map<ObjectId, std::vector<Behavior>> behaviors;
  std::vector<Triple> triples;  // unique, unsorted
};

inline RandomGraph random_graph(std::mt19937& rng, std::size_t max_triples, std::uint64_t nodes = 8) {
  RandomGraph g;
  std::uniform_int_distribution<std::uint64_t> node(1, nodes);
  std::uniform_int_distribution<std::size_t> pred(0, predicate_pool().size() - 1);
  std::uniform_int_distribution<std::size_t> count(0, max_triples);
  std::bernoulli_distribution coin(0.35);
  for (std::uint64_t i = 1; i <= nodes; ++i) {
    auto& bs = g.behaviors[ObjectId(i)];
    for (auto b : kAllBehaviors)
      if (coin(rng)) bs.push_back(b);
  }
  std::set<Triple> seen;
  std::size_t n = count(rng);
  for (std::size_t i = 0; i < n; ++i) {
    Triple t{ObjectId(node(rng)), predicate_pool()[pred(rng)], ObjectId(node(rng))};
    if (seen.insert(t).second) g.triples.push_back(t);
  }
  return g;
}

inline QueryPattern random_pattern(std::mt19937& rng, const RandomGraph& g, std::size_t max_clauses = 3) {
  static const std::vector<std::string> vars{"a", "b", "c", "d"};
  std::uniform_int_distribution<std::size_t> nclauses(1, max_clauses);
  std::uniform_int_distribution<std::size_t> var(0, vars.size() - 1);
  std::uniform_int_distribution<std::uint64_t> node(1, g.behaviors.size());
  std::uniform_int_distribution<std::size_t> pred(0, predicate_pool().size() - 1);
  std::bernoulli_distribution use_var(0.6);
  std::bernoulli_distribution pred_var(0.25);
  QueryPattern q;
  std::size_t n = nclauses(rng);
  for (std::size_t i = 0; i < n; ++i) {
    Clause c;
    c.subject = use_var(rng) ? PatternTerm{vars[var(rng)]} : PatternTerm{ObjectId(node(rng))};
    c.predicate = pred_var(rng) ? PatternTerm{"p" + std::to_string(i)} : PatternTerm{predicate_pool()[pred(rng)]};
    c.object = use_var(rng) ? PatternTerm{vars[var(rng)]} : PatternTerm{ObjectId(node(rng))};
    q.clauses.push_back(std::move(c));
  }
  std::set<std::string> used;
  for (const auto& c : q.clauses)
    for (const auto* t : {&c.subject, &c.predicate, &c.object})
      if (t->is_variable()) used.insert(t->variable());
  for (const auto& v : used)
    if (std::bernoulli_distribution(0.7)(rng) || q.select.empty()) q.select.push_back(v);
  if (q.select.empty()) {
    // Fully ground pattern: select a variable anyway by loosening one term.
    q.clauses.front().subject = PatternTerm{std::string("a")};
    q.select.push_back("a");
  }
  return q;
}

/// Text form accepted by QueryPattern::parse.
inline std::string pattern_text(const QueryPattern& q) {
  auto term = [](const PatternTerm& t) -> std::string {
    if (t.is_variable()) return "?" + t.variable();
    if (const auto* pid = std::get_if<ObjectId>(&t.term)) return "<info:nsdl/" + pid->str() + ">";
    const auto& p = std::get<Predicate>(t.term);
    return p.is_base() ? "<rel:" + p.name + ">" : "<" + p.iri() + ">";
  };
  std::string out = "SELECT";
  for (const auto& v : q.select) out += " ?" + v;
  out += " WHERE";
  for (const auto& c : q.clauses) out += " (" + term(c.subject) + " " + term(c.predicate) + " " + term(c.object) + ")";
  return out;
}

// ---------------------------------------------------------------------------
// Ontology table, restated from the content model.

inline bool oracle_has(const std::vector<Behavior>& bs, const std::string& type) {
  auto has = [&](Behavior b) { return std::find(bs.begin(), bs.end(), b) != bs.end(); };
  if (type == "Metadata") return has(Behavior::Metadata);
  if (type == "Agent") return has(Behavior::Agent);
  if (type == "Content") return has(Behavior::Content);
  if (type == "Resource") return has(Behavior::Agent) || has(Behavior::Content);
  if (type == "Aggregator") return has(Behavior::Aggregator);
  if (type == "MetadataProvider") return has(Behavior::MetadataProvider);
  if (type == "Role") return has(Behavior::Role) || has(Behavior::Aggregator) || has(Behavior::MetadataProvider);
  return false;
}

/// True when the triple satisfies the domain/range table (extensions always do).
inline bool oracle_allows(const std::string& predicate, const std::vector<Behavior>& subject,
                          const std::vector<Behavior>& object) {
  static const std::map<std::string, std::pair<std::string, std::string>> table{
      {"annotates", {"Content", "Resource"}},     {"assertedBy", {"Role", "Agent"}},
      {"augments", {"Metadata", "Metadata"}},     {"hasRole", {"Agent", "Role"}},
      {"metadataFor", {"Metadata", "Resource"}},  {"memberOf", {"Resource", "Aggregator"}},
      {"providedBy", {"Metadata", "MetadataProvider"}}, {"representedBy", {"Aggregator", "Content"}},
  };
  auto it = table.find(predicate);
  if (it == table.end()) return true;
  return oracle_has(subject, it->second.first) && oracle_has(object, it->second.second);
}

}  // namespace overlay::testing

// ---------------------------------------------------------------------------
// Gold record: selection-sort topological order plus a list-rebuilding fold.

namespace overlay::testing {

struct GoldInput {
  ObjectId pid;
  Timestamp datestamp;
  std::string nsdl_dc;              // record bytes
  std::vector<ObjectId> augments;   // records this one augments
};

struct GoldOracle {
  std::vector<ObjectId> order;
  std::string xml;
  bool cycle = false;
};

inline GoldOracle gold_oracle(const std::vector<GoldInput>& inputs) {
  GoldOracle out;
  std::map<ObjectId, const GoldInput*> by_pid;
  for (const auto& in : inputs) by_pid[in.pid] = &in;
  std::set<ObjectId> placed;
  while (placed.size() < inputs.size()) {
    const GoldInput* best = nullptr;
    for (const auto& in : inputs) {
      if (placed.count(in.pid)) continue;
      bool ready = std::all_of(in.augments.begin(), in.augments.end(),
                               [&](ObjectId b) { return !by_pid.count(b) || placed.count(b); });
      if (!ready) continue;
      if (!best || std::tie(in.datestamp, in.pid) < std::tie(best->datestamp, best->pid)) best = &in;
    }
    if (!best) {
      out.cycle = true;
      return out;
    }
    placed.insert(best->pid);
    out.order.push_back(best->pid);
  }

  auto key = [](const xml::Element& e) { return e.ns + "|" + e.name; };
  auto single = [](const xml::Element& e) {
    return e.ns == "http://purl.org/dc/elements/1.1/" && (e.name == "title" || e.name == "identifier" || e.name == "date");
  };
  xml::Element root = xml::parse(by_pid.at(out.order.front())->nsdl_dc);
  for (std::size_t i = 1; i < out.order.size(); ++i) {
    auto rec = xml::parse(by_pid.at(out.order[i])->nsdl_dc);
    // Single-valued keys this record overrides, each with all of its values.
    std::map<std::string, std::vector<xml::Element>> overrides;
    for (const auto& c : rec.children)
      if (single(c)) overrides[key(c)].push_back(c);
    std::vector<xml::Element> rebuilt = root.children;
    std::set<std::string> handled;
    for (const auto& c : rec.children) {
      if (single(c)) {
        if (!handled.insert(key(c)).second) continue;
        std::vector<xml::Element> next;
        bool placed = false;
        for (const auto& r : rebuilt) {
          if (key(r) != key(c)) {
            next.push_back(r);
          } else if (!placed) {
            placed = true;
            for (const auto& e : overrides[key(c)]) next.push_back(e);
          }
        }
        if (!placed)
          for (const auto& e : overrides[key(c)]) next.push_back(e);
        rebuilt = std::move(next);
        continue;
      }
      // Repeatable: union with exact-text dedup, after the last same-key element.
      bool dup = false;
      std::size_t last = rebuilt.size();
      for (std::size_t j = 0; j < rebuilt.size(); ++j)
        if (key(rebuilt[j]) == key(c)) {
          if (rebuilt[j].text == c.text) dup = true;
          last = j;
        }
      if (dup) continue;
      if (last == rebuilt.size()) rebuilt.push_back(c);
      else rebuilt.insert(rebuilt.begin() + static_cast<std::ptrdiff_t>(last + 1), c);
    }
    root.children = std::move(rebuilt);
  }
  out.xml = xml::canonical(root);
  return out;
}

}  // namespace overlay::testing
