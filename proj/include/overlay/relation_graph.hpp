#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "overlay/ids.hpp"
#include "overlay/ontology.hpp"

namespace overlay {

/// One edge of the overlay. Relationships are asserted only in the subject's
/// own RELS datastream, so the provenance of a triple is always its subject.
struct Triple {
  ObjectId subject;
  Predicate predicate;
  ObjectId object;

  ObjectId provenance() const { return subject; }
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

std::string to_string(const Triple& t);

// ---------------------------------------------------------------------------
// RELS wire format: RDF/XML with a single rdf:Description about info:nsdl/<pid>.

/// Throws Error(parse_error) on malformed XML and Error(validation) when the
/// fragment is structurally wrong (foreign subject, literal objects, unknown
/// base-namespace term).
std::vector<Triple> parse_rels(std::string_view rdf_xml, ObjectId subject);
/// Canonical RDF/XML for the given triples (all must have `subject`).
std::string serialize_rels(ObjectId subject, std::vector<Triple> triples);

/// Bound behaviors of an active object; nullopt when the pid is unknown or
/// tombstoned.
using TypeLookup = std::function<std::optional<BehaviorSet>(ObjectId)>;

/// One message per base-ontology triple whose subject or object lacks the
/// type its predicate requires. Extension predicates are never reported.
std::vector<std::string> ontology_violations(std::span<const Triple> triples, const TypeLookup& types);

enum class Strictness { strict, warn };

// ---------------------------------------------------------------------------
// Conjunctive triple-pattern queries.

using Value = std::variant<ObjectId, Predicate>;
using Row = std::vector<Value>;
std::string to_string(const Value& v);

struct PatternTerm {
  std::variant<std::string, ObjectId, Predicate> term;  // string = variable name (without '?')

  bool is_variable() const { return term.index() == 0; }
  const std::string& variable() const { return std::get<std::string>(term); }
};

struct Clause {
  PatternTerm subject;
  PatternTerm predicate;
  PatternTerm object;
};

struct QueryPattern {
  std::vector<Clause> clauses;
  std::vector<std::string> select;

  /// Text form: `select ?v where (?v <rel:memberOf> <info:nsdl/nsdl:2>)`.
  /// Throws Error(parse_error).
  static QueryPattern parse(std::string_view text);
  /// Throws Error(parse_error) when a selected variable occurs in no clause.
  void check() const;
};

/// Joined graph of every active object's RELS assertions.
class RelationGraph {
 public:
  /// Validates `fragment` as `pid`'s RELS and replaces the triples previously
  /// asserted by `pid`. In strict mode any ontology violation rejects the
  /// whole fragment (Error(validation) listing all of them) and leaves the
  /// graph untouched; in warn mode violations go to `warnings`.
  std::size_t merge_object_triples(ObjectId pid, std::string_view fragment, const TypeLookup& types,
                                   Strictness strictness = Strictness::strict,
                                   std::vector<std::string>* warnings = nullptr);

  /// Unchecked replacement of `pid`'s assertions.
  std::size_t replace(ObjectId pid, const std::vector<Triple>& triples);
  void retract(ObjectId pid);

  /// Drops the index and re-merges every (pid, RELS) pair. Nothing changes if
  /// any fragment fails to parse; the error names the object.
  void rebuild(const std::vector<std::pair<ObjectId, std::string>>& rels);

  std::vector<Row> query(const QueryPattern& q) const;
  std::vector<Triple> dump() const;
  std::size_t size() const { return spo_.size(); }
  void clear();

  std::vector<Triple> asserted_by(ObjectId subject) const;
  /// Objects o with (subject, p, o), ascending.
  std::vector<ObjectId> objects_of(ObjectId subject, const Predicate& p) const;
  /// Subjects s with (s, p, object), ascending, optionally paged.
  std::vector<ObjectId> subjects_of(const Predicate& p, ObjectId object, std::size_t offset = 0,
                                    std::size_t limit = SIZE_MAX) const;
  std::size_t count_subjects_of(const Predicate& p, ObjectId object) const;
  /// Whether anything points at `object`.
  std::vector<Triple> inbound(ObjectId object) const;

 private:
  void insert(const Triple& t);

  std::set<Triple> spo_;
  std::set<std::tuple<Predicate, ObjectId, ObjectId>> pos_;  // (p, o, s)
  std::set<std::tuple<ObjectId, ObjectId, Predicate>> osp_;  // (o, s, p)
};

}  // namespace overlay
