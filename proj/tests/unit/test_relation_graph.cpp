#include <doctest.h>

#include <random>

#include "builders.hpp"
#include "oracles.hpp"
#include "overlay/errors.hpp"
#include "overlay/relation_graph.hpp"

using namespace overlay;
using namespace overlay::testing;

namespace {

TypeLookup lookup(const std::map<ObjectId, BehaviorSet>& types) {
  return [types](ObjectId id) -> std::optional<BehaviorSet> {
    auto it = types.find(id);
    if (it == types.end()) return std::nullopt;
    return it->second;
  };
}

}  // namespace

TEST_CASE("RELS round-trip through RDF/XML") {
  std::vector<Triple> ts{{pid(4), rel::metadataFor, pid(1)},
                         {pid(4), rel::providedBy, pid(22)},
                         {pid(4), Predicate{"http://example.org/ext#", "cites"}, pid(9)}};
  auto doc = serialize_rels(pid(4), ts);
  auto back = parse_rels(doc, pid(4));
  std::sort(ts.begin(), ts.end());
  CHECK(back == ts);
  CHECK(doc.find("rel:metadataFor") != std::string::npos);
  CHECK(doc.find("info:nsdl/nsdl:1") != std::string::npos);
}

TEST_CASE("RELS rejects foreign subjects, literals and unknown base terms") {
  const std::string head =
      R"(<rdf:RDF xmlns:rdf="http://www.w3.org/1999/02/22-rdf-syntax-ns#" xmlns:rel="http://ns.nsdl.org/ontologies/relationships#">)";
  auto check_code = [](const std::string& doc, ErrorCode code) {
    try {
      parse_rels(doc, pid(4));
      FAIL("accepted " << doc);
    } catch (const Error& e) {
      CHECK(e.code() == code);
    }
  };
  check_code(head + R"(<rdf:Description rdf:about="info:nsdl/nsdl:5"><rel:metadataFor rdf:resource="info:nsdl/nsdl:1"/></rdf:Description></rdf:RDF>)",
             ErrorCode::validation);
  check_code(head + R"(<rdf:Description rdf:about="info:nsdl/nsdl:4"><rel:metadataFor>literal</rel:metadataFor></rdf:Description></rdf:RDF>)",
             ErrorCode::validation);
  check_code(head + R"(<rdf:Description rdf:about="info:nsdl/nsdl:4"><rel:likes rdf:resource="info:nsdl/nsdl:1"/></rdf:Description></rdf:RDF>)",
             ErrorCode::validation);
  check_code("<rdf:RDF", ErrorCode::parse_error);
  CHECK(parse_rels("", pid(4)).empty());
}

TEST_CASE("merge validates domain and range and replaces prior assertions") {
  RelationGraph g;
  std::map<ObjectId, BehaviorSet> types{{pid(1), {Behavior::Content}}, {pid(4), {Behavior::Metadata}}};
  auto frag = serialize_rels(pid(4), {{pid(4), rel::metadataFor, pid(1)}});
  CHECK(g.merge_object_triples(pid(4), frag, lookup(types)) == 1);
  CHECK(g.subjects_of(rel::metadataFor, pid(1)) == std::vector<ObjectId>{pid(4)});

  // memberOf a non-aggregator is rejected and leaves the graph alone.
  auto bad = serialize_rels(pid(4), {{pid(4), rel::memberOf, pid(1)}});
  try {
    g.merge_object_triples(pid(4), bad, lookup(types));
    FAIL("accepted memberOf to a non-aggregator");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::validation);
    CHECK(e.details().size() == 2);
  }
  CHECK(g.size() == 1);

  std::vector<std::string> warnings;
  CHECK(g.merge_object_triples(pid(4), bad, lookup(types), Strictness::warn, &warnings) == 1);
  CHECK(warnings.size() == 2);
  CHECK(g.merge_object_triples(pid(4), "", lookup(types)) == 0);
  CHECK(g.size() == 0);
}

TEST_CASE("query parser") {
  auto q = QueryPattern::parse("select ?v where (?v <rel:memberOf> <info:nsdl/nsdl:2>)");
  REQUIRE(q.clauses.size() == 1);
  CHECK(q.select == std::vector<std::string>{"v"});
  CHECK(std::get<ObjectId>(q.clauses[0].object.term) == pid(2));
  auto q2 = QueryPattern::parse(
      "SELECT ?m ?r WHERE (?m, <http://ns.nsdl.org/ontologies/relationships#metadataFor>, ?r) (?m <rel:providedBy> <nsdl:22>)");
  CHECK(q2.clauses.size() == 2);
  CHECK_THROWS_AS(QueryPattern::parse("select ?x where (?v <rel:memberOf> ?w)"), Error);
  CHECK_THROWS_AS(QueryPattern::parse("select ?v where (?v <rel:likes> ?w)"), Error);
  CHECK_THROWS_AS(QueryPattern::parse("select ?v where"), Error);
  CHECK_THROWS_AS(QueryPattern::parse("select ?v where (?v <rel:memberOf> ?w) junk"), Error);
}

TEST_CASE("query equals the brute-force evaluator on random graphs") {
  std::mt19937 rng(20260101);
  for (int round = 0; round < 60; ++round) {
    auto rg = random_graph(rng, 50);
    RelationGraph g;
    std::map<ObjectId, std::vector<Triple>> by_subject;
    for (const auto& t : rg.triples) by_subject[t.subject].push_back(t);
    for (const auto& [s, ts] : by_subject) g.replace(s, ts);
    auto dump = g.dump();
    for (int k = 0; k < 25; ++k) {
      auto q = random_pattern(rng, rg);
      auto expected = brute_force_query(dump, q);
      CHECK(g.query(q) == expected);
      CHECK(g.query(QueryPattern::parse(pattern_text(q))) == expected);
    }
  }
}

TEST_CASE("query over an empty graph is empty") {
  RelationGraph g;
  CHECK(g.query(QueryPattern::parse("select ?v where (?v ?p ?o)")).empty());
}

TEST_CASE("rebuild reproduces the dump and names unreadable objects") {
  RelationGraph g;
  std::vector<std::pair<ObjectId, std::string>> rels{
      {pid(4), serialize_rels(pid(4), {{pid(4), rel::metadataFor, pid(1)}})},
      {pid(5), serialize_rels(pid(5), {{pid(5), rel::augments, pid(4)}})}};
  g.rebuild(rels);
  auto before = g.dump();
  g.rebuild(rels);
  CHECK(g.dump() == before);
  rels.emplace_back(pid(6), "<broken");
  try {
    g.rebuild(rels);
    FAIL("rebuild accepted broken RELS");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("nsdl:6") != std::string::npos);
  }
  CHECK(g.dump() == before);
}
