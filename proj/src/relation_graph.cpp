#include "overlay/relation_graph.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "overlay/errors.hpp"
#include "overlay/xml.hpp"

namespace overlay {

std::string to_string(const Triple& t) {
  return "(" + t.subject.str() + ", " + (t.predicate.is_base() ? t.predicate.name : t.predicate.iri()) + ", " +
         t.object.str() + ")";
}

std::string to_string(const Value& v) {
  if (const auto* pid = std::get_if<ObjectId>(&v)) return pid->str();
  const auto& p = std::get<Predicate>(v);
  return p.is_base() ? "rel:" + p.name : p.iri();
}

// ---------------------------------------------------------------------------
// RELS

std::vector<Triple> parse_rels(std::string_view rdf_xml, ObjectId subject) {
  std::vector<Triple> out;
  if (rdf_xml.find_first_not_of(" \t\r\n") == std::string_view::npos) return out;
  auto root = xml::parse(rdf_xml);
  if (!root.is(kRdfNs, "RDF")) throw Error(ErrorCode::validation, "RELS root must be rdf:RDF");
  std::vector<std::string> problems;
  for (const auto& desc : root.children) {
    if (!desc.is(kRdfNs, "Description")) {
      problems.push_back("unexpected element " + desc.name + " in RELS");
      continue;
    }
    const auto* about = desc.find_attribute(kRdfNs, "about");
    auto about_pid = about ? parse_info_uri(about->value) : std::nullopt;
    if (!about_pid || *about_pid != subject) {
      problems.push_back("RELS subject " + (about ? about->value : std::string("<none>")) + " is not " +
                         info_uri(subject));
      continue;
    }
    for (const auto& prop : desc.children) {
      Predicate p{prop.ns, prop.name};
      if (p.ns.empty()) {
        problems.push_back("relationship " + prop.name + " has no namespace");
        continue;
      }
      if (p.is_base() && !is_known_base_term(p.name)) {
        problems.push_back("unknown base relationship " + p.name);
        continue;
      }
      const auto* res = prop.find_attribute(kRdfNs, "resource");
      auto object = res ? parse_info_uri(res->value) : std::nullopt;
      if (!object) {
        problems.push_back("relationship " + p.name + " must reference an info:nsdl object");
        continue;
      }
      out.push_back(Triple{subject, std::move(p), *object});
    }
  }
  if (!problems.empty()) throw Error(ErrorCode::validation, "invalid RELS fragment for " + subject.str(), problems);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string serialize_rels(ObjectId subject, std::vector<Triple> triples) {
  std::sort(triples.begin(), triples.end());
  triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
  xml::Element root(std::string(kRdfNs), "RDF", "rdf");
  if (!triples.empty()) {
    std::map<std::string, std::string> prefixes;
    for (const auto& t : triples)
      if (!t.predicate.is_base() && !prefixes.count(t.predicate.ns))
        prefixes.emplace(t.predicate.ns, "x" + std::to_string(prefixes.size() + 1));
    xml::Element desc(std::string(kRdfNs), "Description", "rdf");
    desc.set_attribute(std::string(kRdfNs), "rdf", "about", info_uri(subject));
    for (const auto& t : triples) {
      if (t.subject != subject) throw Error(ErrorCode::validation, "triple subject is not " + subject.str());
      std::string prefix = t.predicate.is_base() ? "rel" : prefixes[t.predicate.ns];
      xml::Element prop(t.predicate.ns, t.predicate.name, prefix);
      prop.set_attribute(std::string(kRdfNs), "rdf", "resource", info_uri(t.object));
      desc.add(std::move(prop));
    }
    root.add(std::move(desc));
  }
  return xml::canonical(root);
}

std::vector<std::string> ontology_violations(std::span<const Triple> triples, const TypeLookup& types) {
  std::vector<std::string> out;
  for (const auto& t : triples) {
    auto dr = constraint_for(t.predicate);
    if (!dr) continue;
    auto s = types(t.subject);
    auto o = types(t.object);
    if (!s || !has_type(*s, dr->domain))
      out.push_back(to_string(t) + ": subject is not " + std::string(to_string(dr->domain)));
    if (!o || !has_type(*o, dr->range))
      out.push_back(to_string(t) + ": object is not " + std::string(to_string(dr->range)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Query text form

namespace {

class QueryLexer {
 public:
  explicit QueryLexer(std::string_view text) : s_(text) {}

  void skip() {
    while (pos_ < s_.size() && (std::isspace(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == ','))
      ++pos_;
  }
  bool done() {
    skip();
    return pos_ >= s_.size();
  }
  char peek() {
    skip();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::parse_error, "query: " + what + " at offset " + std::to_string(pos_));
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  std::string word() {
    skip();
    std::size_t start = pos_;
    while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_])) && s_[pos_] != '(' &&
           s_[pos_] != ')' && s_[pos_] != ',')
      ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }
  std::string bracketed() {
    expect('<');
    auto close = s_.find('>', pos_);
    if (close == std::string_view::npos) fail("unterminated <...>");
    std::string inner(s_.substr(pos_, close - pos_));
    pos_ = close + 1;
    return inner;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

std::string variable_name(QueryLexer& lx, const std::string& w) {
  if (w.size() < 2 || w[0] != '?') lx.fail("expected variable, got '" + w + "'");
  for (char c : w.substr(1))
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') lx.fail("bad variable name '" + w + "'");
  return w.substr(1);
}

PatternTerm node_term(QueryLexer& lx) {
  if (lx.peek() == '?') return {variable_name(lx, lx.word())};
  auto iri = lx.bracketed();
  if (auto pid = parse_info_uri(iri)) return {*pid};
  if (auto pid = ObjectId::parse(iri)) return {*pid};
  lx.fail("expected object id, got <" + iri + ">");
}

PatternTerm predicate_term(QueryLexer& lx) {
  if (lx.peek() == '?') return {variable_name(lx, lx.word())};
  auto iri = lx.bracketed();
  if (iri.starts_with("rel:")) {
    auto name = iri.substr(4);
    if (!is_known_base_term(name)) lx.fail("unknown relationship rel:" + name);
    return {Predicate::base(name)};
  }
  auto cut = iri.find_last_of("#/");
  if (cut == std::string::npos || cut + 1 == iri.size() || iri.find(':') == std::string::npos)
    lx.fail("expected predicate IRI, got <" + iri + ">");
  Predicate p{iri.substr(0, cut + 1), iri.substr(cut + 1)};
  if (p.is_base() && !is_known_base_term(p.name)) lx.fail("unknown relationship " + iri);
  return {std::move(p)};
}

}  // namespace

QueryPattern QueryPattern::parse(std::string_view text) {
  QueryLexer lx(text);
  QueryPattern q;
  if (!iequals(lx.word(), "select")) lx.fail("expected 'select'");
  while (lx.peek() == '?') q.select.push_back(variable_name(lx, lx.word()));
  if (q.select.empty()) lx.fail("no variables selected");
  if (!iequals(lx.word(), "where")) lx.fail("expected 'where'");
  while (lx.peek() == '(') {
    lx.expect('(');
    Clause c;
    c.subject = node_term(lx);
    c.predicate = predicate_term(lx);
    c.object = node_term(lx);
    lx.expect(')');
    q.clauses.push_back(std::move(c));
  }
  if (q.clauses.empty()) lx.fail("no clauses");
  if (!lx.done()) lx.fail("trailing input");
  q.check();
  return q;
}

void QueryPattern::check() const {
  for (const auto& v : select) {
    bool found = false;
    for (const auto& c : clauses)
      for (const auto* t : {&c.subject, &c.predicate, &c.object})
        if (t->is_variable() && t->variable() == v) found = true;
    if (!found) throw Error(ErrorCode::parse_error, "query: selected variable ?" + v + " is unbound");
  }
}

// ---------------------------------------------------------------------------
// Graph

void RelationGraph::insert(const Triple& t) {
  if (spo_.insert(t).second) {
    pos_.emplace(t.predicate, t.object, t.subject);
    osp_.emplace(t.object, t.subject, t.predicate);
  }
}

void RelationGraph::retract(ObjectId pid) {
  auto it = spo_.lower_bound(Triple{pid, Predicate{}, ObjectId(0)});
  while (it != spo_.end() && it->subject == pid) {
    pos_.erase({it->predicate, it->object, it->subject});
    osp_.erase({it->object, it->subject, it->predicate});
    it = spo_.erase(it);
  }
}

std::size_t RelationGraph::replace(ObjectId pid, const std::vector<Triple>& triples) {
  retract(pid);
  for (const auto& t : triples) insert(t);
  return asserted_by(pid).size();
}

std::size_t RelationGraph::merge_object_triples(ObjectId pid, std::string_view fragment, const TypeLookup& types,
                                                Strictness strictness, std::vector<std::string>* warnings) {
  auto triples = parse_rels(fragment, pid);
  auto violations = ontology_violations(triples, types);
  if (!violations.empty()) {
    if (strictness == Strictness::strict)
      throw Error(ErrorCode::validation, "ontology violation in RELS of " + pid.str(), violations);
    if (warnings) warnings->insert(warnings->end(), violations.begin(), violations.end());
  }
  return replace(pid, triples);
}

void RelationGraph::rebuild(const std::vector<std::pair<ObjectId, std::string>>& rels) {
  std::vector<Triple> all;
  for (const auto& [pid, fragment] : rels) {
    try {
      auto ts = parse_rels(fragment, pid);
      all.insert(all.end(), ts.begin(), ts.end());
    } catch (const Error& e) {
      throw Error(ErrorCode::storage, "rebuild aborted: stored RELS of " + pid.str() + " is unreadable: " + e.what());
    }
  }
  clear();
  for (const auto& t : all) insert(t);
}

void RelationGraph::clear() {
  spo_.clear();
  pos_.clear();
  osp_.clear();
}

std::vector<Triple> RelationGraph::dump() const { return {spo_.begin(), spo_.end()}; }

std::vector<Triple> RelationGraph::asserted_by(ObjectId subject) const {
  std::vector<Triple> out;
  for (auto it = spo_.lower_bound(Triple{subject, Predicate{}, ObjectId(0)}); it != spo_.end() && it->subject == subject;
       ++it)
    out.push_back(*it);
  return out;
}

std::vector<ObjectId> RelationGraph::objects_of(ObjectId subject, const Predicate& p) const {
  std::vector<ObjectId> out;
  for (auto it = spo_.lower_bound(Triple{subject, p, ObjectId(0)});
       it != spo_.end() && it->subject == subject && it->predicate == p; ++it)
    out.push_back(it->object);
  return out;
}

std::vector<ObjectId> RelationGraph::subjects_of(const Predicate& p, ObjectId object, std::size_t offset,
                                                 std::size_t limit) const {
  std::vector<ObjectId> out;
  auto it = pos_.lower_bound({p, object, ObjectId(0)});
  for (; it != pos_.end() && std::get<0>(*it) == p && std::get<1>(*it) == object && out.size() < limit; ++it) {
    if (offset > 0) {
      --offset;
      continue;
    }
    out.push_back(std::get<2>(*it));
  }
  return out;
}

std::size_t RelationGraph::count_subjects_of(const Predicate& p, ObjectId object) const {
  std::size_t n = 0;
  for (auto it = pos_.lower_bound({p, object, ObjectId(0)});
       it != pos_.end() && std::get<0>(*it) == p && std::get<1>(*it) == object; ++it)
    ++n;
  return n;
}

std::vector<Triple> RelationGraph::inbound(ObjectId object) const {
  std::vector<Triple> out;
  for (auto it = osp_.lower_bound({object, ObjectId(0), Predicate{}}); it != osp_.end() && std::get<0>(*it) == object;
       ++it)
    out.push_back(Triple{std::get<1>(*it), std::get<2>(*it), object});
  return out;
}

namespace {

using Bindings = std::map<std::string, Value>;

template <typename T>
std::optional<T> resolved(const PatternTerm& t, const Bindings& b) {
  if (!t.is_variable()) {
    if (const auto* v = std::get_if<T>(&t.term)) return *v;
    return std::nullopt;
  }
  auto it = b.find(t.variable());
  if (it == b.end()) return std::nullopt;
  if (const auto* v = std::get_if<T>(&it->second)) return *v;
  return std::nullopt;
}

bool bound(const PatternTerm& t, const Bindings& b) { return !t.is_variable() || b.count(t.variable()); }

int boundness(const Clause& c, const Bindings& b) {
  return (bound(c.subject, b) ? 4 : 0) + (bound(c.object, b) ? 2 : 0) + (bound(c.predicate, b) ? 1 : 0);
}

// Binds `term` to `value`; false when it conflicts with a constant or an
// existing binding (including a type mismatch between pid and predicate).
bool unify(const PatternTerm& term, const Value& value, Bindings& b) {
  if (!term.is_variable()) {
    if (const auto* pid = std::get_if<ObjectId>(&term.term)) return Value(*pid) == value;
    return Value(std::get<Predicate>(term.term)) == value;
  }
  auto [it, inserted] = b.emplace(term.variable(), value);
  return inserted || it->second == value;
}

}  // namespace

std::vector<Row> RelationGraph::query(const QueryPattern& q) const {
  q.check();
  std::set<Row> rows;
  std::vector<bool> used(q.clauses.size(), false);

  std::function<void(Bindings&, std::size_t)> solve = [&](Bindings& b, std::size_t depth) {
    if (depth == q.clauses.size()) {
      Row r;
      for (const auto& v : q.select) r.push_back(b.at(v));
      rows.insert(std::move(r));
      return;
    }
    // Most-bound clause first.
    std::size_t pick = q.clauses.size();
    int best = -1;
    for (std::size_t i = 0; i < q.clauses.size(); ++i) {
      if (used[i]) continue;
      int score = boundness(q.clauses[i], b);
      if (score > best) {
        best = score;
        pick = i;
      }
    }
    const Clause& c = q.clauses[pick];
    used[pick] = true;

    auto try_triple = [&](const ObjectId& s, const Predicate& p, const ObjectId& o) {
      Bindings next = b;
      if (unify(c.subject, s, next) && unify(c.predicate, p, next) && unify(c.object, o, next))
        solve(next, depth + 1);
    };

    // A bound term of the wrong kind (e.g. a predicate in subject position)
    // cannot match anything.
    bool s_bound = bound(c.subject, b), p_bound = bound(c.predicate, b), o_bound = bound(c.object, b);
    auto s = resolved<ObjectId>(c.subject, b);
    auto p = resolved<Predicate>(c.predicate, b);
    auto o = resolved<ObjectId>(c.object, b);
    if ((s_bound && !s) || (p_bound && !p) || (o_bound && !o)) {
      used[pick] = false;
      return;
    }
    if (s) {
      for (auto it = spo_.lower_bound(Triple{*s, p.value_or(Predicate{}), ObjectId(0)});
           it != spo_.end() && it->subject == *s && (!p || it->predicate == *p); ++it)
        try_triple(it->subject, it->predicate, it->object);
    } else if (o && p) {
      for (auto it = pos_.lower_bound({*p, *o, ObjectId(0)});
           it != pos_.end() && std::get<0>(*it) == *p && std::get<1>(*it) == *o; ++it)
        try_triple(std::get<2>(*it), *p, *o);
    } else if (o) {
      for (auto it = osp_.lower_bound({*o, ObjectId(0), Predicate{}}); it != osp_.end() && std::get<0>(*it) == *o;
           ++it)
        try_triple(std::get<1>(*it), std::get<2>(*it), *o);
    } else if (p) {
      for (auto it = pos_.lower_bound({*p, ObjectId(0), ObjectId(0)}); it != pos_.end() && std::get<0>(*it) == *p;
           ++it)
        try_triple(std::get<2>(*it), *p, std::get<1>(*it));
    } else {
      for (const auto& t : spo_) try_triple(t.subject, t.predicate, t.object);
    }
    used[pick] = false;
  };

  Bindings b;
  solve(b, 0);
  return {rows.begin(), rows.end()};
}

}  // namespace overlay
