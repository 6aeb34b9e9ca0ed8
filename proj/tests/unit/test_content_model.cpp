#include <doctest.h>

#include <httplib.h>

#include <random>
#include <thread>

#include "builders.hpp"
#include "oracles.hpp"
#include "overlay/content_model.hpp"
#include "overlay/errors.hpp"
#include "overlay/fixture_loader.hpp"

using namespace overlay;
using namespace overlay::testing;

namespace {

struct World {
  ManualClock clock;
  ObjectStore store{StoreOptions{"", "2200", clock.clock()}};
  ContentModel model{store};

  World() {
    auto report = load_fixture_directory(store, OVERLAY_FIXTURE_DIR);
    REQUIRE(report.violations.empty());
  }
};

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::storage;
}

std::vector<ObjectId> ids(std::initializer_list<std::uint64_t> ns) {
  std::vector<ObjectId> out;
  for (auto n : ns) out.push_back(ObjectId(n));
  return out;
}

class StaticFetcher : public RemoteFetcher {
 public:
  Representation fetch(const std::string& url, std::chrono::milliseconds) override {
    if (url == "http://example.org/fig2/lab") return {"text/html", "<html>lab</html>"};
    throw std::runtime_error("unreachable host");
  }
};

}  // namespace

TEST_CASE("figure 1: resource and metadata disseminations") {
  World w;
  CHECK(w.store.query(QueryPattern::parse("select ?r where (<nsdl:4> <rel:metadataFor> ?r)")) ==
        std::vector<Row>{{Value{pid(1)}}});
  auto dc = w.store.resolve("info:nsdl/nsdl:4/getRecord?format=oai_dc");
  CHECK(dc.bytes == w.store.get_object(pid(4)).datastream("REC.oai_dc")->payload);
  auto marc = w.store.resolve("info:nsdl/nsdl:4/getRecord?format=marcxml");
  CHECK(marc.bytes.find("MARC21") != std::string::npos);
  CHECK(w.store.resolve("info:nsdl/nsdl:4/getResource").bytes == "nsdl:1\n");
  CHECK(w.store.resolve("info:nsdl/nsdl:1/getMetadata").bytes == "nsdl:4\n");
  auto content = w.store.resolve("info:nsdl/nsdl:1/showContent");
  CHECK(content.media_type == "text/html");
  CHECK(content.bytes.find("Pythagorean") != std::string::npos);
  CHECK(w.store.resolve("info:nsdl/nsdl:1/displayContent") == content);
  CHECK(w.store.resolve("info:nsdl/nsdl:1/showBrand").bytes.find("Digital Math Collection") != std::string::npos);
  CHECK(code_of([&] { w.store.resolve("info:nsdl/nsdl:4/showContent"); }) == ErrorCode::operation_not_supported);
  CHECK(code_of([&] { w.store.resolve("info:nsdl/nsdl:4/getRecord?format=mods"); }) == ErrorCode::format_unavailable);

  auto profile = w.store.resolve("info:nsdl/nsdl:1");
  CHECK(profile.bytes.find("getMetadata") != std::string::npos);
}

TEST_CASE("resolve is byte-equal to the registry") {
  World w;
  for (auto [n, op] : std::vector<std::pair<int, std::string>>{{1, "getMetadata"}, {4, "getResource"}, {16, "getGold"},
                                                                 {12, "listMembers"}, {22, "getBrand"}}) {
    CHECK(w.store.resolve(RepresentationUri{pid(n), op, {}}) == w.model.disseminate(pid(n), op, {}));
  }
}

TEST_CASE("figure 2: brands project from roles") {
  World w;
  auto meta = w.model.show_brand(pid(25));
  REQUIRE(meta.size() == 1);
  CHECK(meta[0].holder == pid(22));
  CHECK(meta[0].label == "Physics Metadata Co-op");
  auto res = w.model.show_brand(pid(26));
  REQUIRE(res.size() == 1);
  CHECK(res[0].holder == pid(24));
  CHECK(w.model.get_provider(pid(25)) == pid(22));
  CHECK(w.model.list_provided(pid(22)) == ids({4, 25}));

  // Moving the resource to another aggregation leaves the metadata brand alone.
  auto moved = w.store.get_object(pid(26));
  set_rels(moved, {{rel::memberOf, pid(13)}});
  w.store.put_object(moved);
  CHECK(w.model.show_brand(pid(25)) == meta);
  CHECK(w.model.show_brand(pid(26))[0].holder == pid(13));

  auto bare = w.store.get_object(pid(24));
  bare.datastreams.erase("BRAND");
  w.store.put_object(bare);
  CHECK(code_of([&] { w.model.show_brand(pid(1)); }) == ErrorCode::brand_missing);
}

TEST_CASE("figure 3: gold record folds pid 8 over pid 5") {
  World w;
  auto gold = w.model.get_gold(pid(16));
  CHECK(gold.contributors == ids({5, 8}));
  auto e = xml::parse(gold.xml);
  CHECK(e.child(dc::kDcNs, "title")->text == "Stellar Evolution: An Interactive Tutorial");
  CHECK(e.children_named(dc::kDcNs, "subject").size() == 2);
  CHECK(e.child(dc::kDcNs, "creator")->text == "A. Observer");
  CHECK(w.model.get_metadata(pid(16)) == ids({5, 8}));

  auto doc = w.store.resolve("info:nsdl/nsdl:16/getGold").bytes;
  CHECK(doc.find("<contributors><pid>nsdl:5</pid><pid>nsdl:8</pid></contributors>") != std::string::npos);

  std::vector<GoldInput> inputs{
      {pid(5), *parse_timestamp("2004-02-01T00:00:00Z"), w.model.get_record(pid(5), "nsdl_dc").xml, {}},
      {pid(8), *parse_timestamp("2003-06-01T00:00:00Z"), w.model.get_record(pid(8), "nsdl_dc").xml, {pid(5)}}};
  auto oracle = gold_oracle(inputs);
  CHECK(oracle.order == gold.contributors);
  CHECK(oracle.xml == gold.xml);
}

TEST_CASE("figure 4: aggregation membership and representation") {
  World w;
  CHECK(w.model.list_members(pid(12)) == ids({16, 18}));
  CHECK(w.model.memberships(pid(16)) == ids({12}));
  CHECK(w.model.get_representation(pid(12)) == pid(11));
  CHECK_FALSE(w.model.memberships(pid(11)).empty());
  CHECK(w.store.get_object(pid(12)).handle->str() == "hdl:2200/2");
  CHECK(code_of([&] { w.model.get_representation(pid(24)); }) == ErrorCode::not_represented);
  CHECK(w.model.list_members(pid(12), 1, 5) == ids({18}));
  CHECK(w.store.resolve("info:nsdl/nsdl:12/listMembers?offset=0&limit=1").bytes == "nsdl:16\n");
}

TEST_CASE("figure 5: annotations are one hop") {
  World w;
  CHECK(w.model.annotations_for(pid(51)) == ids({52}));
  CHECK(w.model.annotations_for(pid(52)).empty());
  auto chain = w.store.mint_pid();
  w.store.put_object(make_object(chain, {Behavior::Content}, {{rel::annotates, pid(52)}}));
  CHECK(w.model.annotations_for(pid(51)) == ids({52}));
  CHECK(w.model.annotations_for(pid(52)) == std::vector<ObjectId>{chain});
}

TEST_CASE("polymorphic objects answer the union, independent of binding order") {
  World w;
  for (auto order : {std::vector<Behavior>{Behavior::Metadata, Behavior::Content},
                     std::vector<Behavior>{Behavior::Content, Behavior::Metadata}}) {
    auto id = w.store.mint_pid();
    auto obj = make_object(id, order, {{rel::metadataFor, pid(1)}, {rel::providedBy, pid(22)}, {rel::memberOf, pid(24)}});
    obj.put_datastream(Datastream::local("CONTENT", "text/plain", "both"));
    obj.put_datastream(Datastream::local("REC.oai_dc", "text/xml", oai_dc({{"identifier", "http://p/"}})));
    w.store.put_object(obj);
    CHECK(w.store.resolve(RepresentationUri{id, "showContent", {}}).bytes == "both");
    CHECK(w.store.resolve(RepresentationUri{id, "getResource", {}}).bytes == "nsdl:1\n");
    // Metadata precedence: the provider brand, not the aggregator brand.
    CHECK(w.store.resolve(RepresentationUri{id, "showBrand", {}}).bytes.find("Physics Metadata Co-op") !=
          std::string::npos);
  }
}

TEST_CASE("handles via getHandle") {
  World w;
  auto id = w.store.mint_pid();
  w.store.put_object(make_object(id, {Behavior::Content}));
  auto h = w.model.get_handle(id);
  CHECK(h.str().starts_with("hdl:2200/"));
  CHECK(w.model.get_handle(id) == h);
  CHECK(w.model.get_handle(pid(16)).str() == "hdl:2200/6");
  CHECK(code_of([&] { w.store.resolve("info:nsdl/nsdl:4/getHandle"); }) == ErrorCode::operation_not_supported);
}

TEST_CASE("integrity errors") {
  World w;
  auto m = w.store.mint_pid();
  w.store.put_object(make_object(m, {Behavior::Metadata}));
  CHECK(code_of([&] { w.model.get_provider(m); }) == ErrorCode::model_integrity);
  CHECK(code_of([&] { w.model.get_resource(m); }) == ErrorCode::model_integrity);
  auto two = make_object(m, {Behavior::Metadata}, {{rel::metadataFor, pid(1)}, {rel::metadataFor, pid(16)}});
  w.store.put_object(two);
  CHECK(code_of([&] { w.model.get_resource(m); }) == ErrorCode::model_integrity);

  auto orphan = w.store.mint_pid();
  w.store.put_object(make_object(orphan, {Behavior::Content}));
  CHECK(code_of([&] { w.model.get_gold(orphan); }) == ErrorCode::no_metadata);
  CHECK(w.model.get_metadata(orphan).empty());
  CHECK(w.model.memberships(orphan).empty());
  CHECK(w.model.show_brand(orphan).empty());
  CHECK(code_of([&] { w.model.show_content(orphan); }) == ErrorCode::not_available);
}

TEST_CASE("gold: identity, cycles and the diamond oracle") {
  ManualClock clock;
  ObjectStore store{StoreOptions{"", "2200", clock.clock()}};
  ContentModel model{store};
  auto r = store.mint_pid();
  store.put_object(make_object(r, {Behavior::Content}));

  auto add_md = [&](const std::string& xml, Timestamp created,
                    std::vector<std::pair<Predicate, ObjectId>> extra) {
    auto id = store.mint_pid();
    extra.emplace_back(rel::metadataFor, r);
    auto obj = make_object(id, {Behavior::Metadata}, extra);
    obj.put_datastream(Datastream::local("REC.oai_dc", "text/xml", xml, created));
    store.put_object(obj);
    return id;
  };
  auto t0 = clock.now();
  auto base = add_md(oai_dc({{"title", "Base"}, {"identifier", "http://r/"}, {"subject", "A"}}), t0, {});

  // Identity.
  auto gold = model.get_gold(r);
  CHECK(gold.contributors == std::vector<ObjectId>{base});
  CHECK(gold.xml == xml::canonicalize(model.get_record(base, "nsdl_dc").xml));

  // Diamond: left and right both augment base; top augments both.
  auto left = add_md(oai_dc({{"subject", "B"}, {"date", "2001"}}), t0 + std::chrono::seconds(5), {{rel::augments, base}});
  auto right = add_md(oai_dc({{"subject", "A"}, {"title", "Right"}, {"creator", "C"}}), t0 + std::chrono::seconds(2),
                      {{rel::augments, base}});
  auto top = add_md(oai_dc({{"title", "Top"}, {"subject", "D"}}), t0, {{rel::augments, left}, {rel::augments, right}});
  gold = model.get_gold(r);
  CHECK(gold.contributors == std::vector<ObjectId>{base, right, left, top});

  std::vector<GoldInput> inputs;
  for (auto id : {base, left, right, top}) {
    auto rec = model.get_record(id, "nsdl_dc");
    auto v = store.view();
    inputs.push_back({id, rec.source_datestamp, rec.xml, v.graph().objects_of(id, rel::augments)});
  }
  auto oracle = gold_oracle(inputs);
  CHECK(oracle.order == gold.contributors);
  CHECK(oracle.xml == gold.xml);

  // Cycle: base augments top closes base -> top -> left -> base.
  auto cyc = store.get_object(base);
  set_rels(cyc, {{rel::metadataFor, r}, {rel::augments, top}});
  store.put_object(cyc);
  try {
    model.get_gold(r);
    FAIL("cycle not detected");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::model_integrity);
    CHECK(e.details().size() >= 3);
    CHECK(e.details().front() == e.details().back());
  }
}

TEST_CASE("remote content through a fetcher and over HTTP") {
  ManualClock clock;
  ObjectStore store{StoreOptions{"", "2200", clock.clock()}};
  ContentModel model{store, ContentModelOptions{std::make_shared<StaticFetcher>()}};
  load_fixture_directory(store, OVERLAY_FIXTURE_DIR);
  CHECK(model.show_content(pid(26)).bytes == "<html>lab</html>");
  CHECK(code_of([&] { model.show_content(pid(16)); }) == ErrorCode::dissemination);

  httplib::Server server;
  server.Get("/page", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("remote bytes", "text/plain");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  HttpFetcher fetcher;
  auto rep = fetcher.fetch("http://127.0.0.1:" + std::to_string(port) + "/page", std::chrono::milliseconds(2000));
  CHECK(rep.bytes == "remote bytes");
  CHECK_THROWS_AS(fetcher.fetch("http://127.0.0.1:" + std::to_string(port) + "/missing", std::chrono::milliseconds(2000)),
                  Error);
  server.stop();
  t.join();
}

TEST_CASE("listMembers and memberships agree on random graphs") {
  std::mt19937 rng(7);
  for (int round = 0; round < 5; ++round) {
    ManualClock clock;
    ObjectStore store{StoreOptions{"", "2200", clock.clock()}};
    ContentModel model{store};
    std::vector<ObjectId> aggs, resources;
    for (int i = 0; i < 10; ++i) {
      auto id = store.mint_pid();
      store.put_object(make_object(id, {Behavior::Aggregator}));
      aggs.push_back(id);
    }
    std::uniform_int_distribution<std::size_t> pick(0, aggs.size() - 1);
    std::size_t edges = 0;
    while (edges < 1000) {
      auto id = store.mint_pid();
      std::set<ObjectId> targets;
      for (int k = 0; k < 4; ++k) targets.insert(aggs[pick(rng)]);
      std::vector<std::pair<Predicate, ObjectId>> rels;
      for (auto a : targets) rels.emplace_back(rel::memberOf, a);
      edges += rels.size();
      store.put_object(make_object(id, {Behavior::Content}, rels));
      resources.push_back(id);
    }
    std::set<std::pair<ObjectId, ObjectId>> from_members, from_memberships;
    for (auto a : aggs)
      for (auto r : model.list_members(a)) from_members.emplace(r, a);
    for (auto r : resources)
      for (auto a : model.memberships(r)) from_memberships.emplace(r, a);
    CHECK(from_members == from_memberships);
    CHECK(from_members.size() == edges);
  }
}

TEST_CASE("paging 10,000 members by 100") {
  ManualClock clock;
  ObjectStore store{StoreOptions{"", "2200", clock.clock()}};
  ContentModel model{store};
  auto agg = store.mint_pid();
  store.put_object(make_object(agg, {Behavior::Aggregator}));
  for (int i = 0; i < 10000; ++i) {
    auto id = store.mint_pid();
    store.put_object(make_object(id, {Behavior::Content}, {{rel::memberOf, agg}}));
  }
  std::vector<ObjectId> all;
  for (std::size_t off = 0;; off += 100) {
    auto page = model.list_members(agg, off, 100);
    if (page.empty()) break;
    all.insert(all.end(), page.begin(), page.end());
  }
  CHECK(all.size() == 10000);
  CHECK(std::adjacent_find(all.begin(), all.end(), std::greater_equal<>()) == all.end());
}
