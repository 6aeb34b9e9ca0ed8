#pragma once

// Synthetic repositories for provider, gateway and acceptance tests.

#include <string>
#include <vector>

#include "builders.hpp"
#include "oai_stub.hpp"
#include "overlay/content_model.hpp"
#include "overlay/object_store.hpp"
#include "overlay/provider.hpp"

namespace overlay::testing {

struct SeededRepository {
  ObjectId agent;
  ObjectId provider_role;
  std::vector<ObjectId> aggregators;
  std::vector<ObjectId> resources;
  std::vector<ObjectId> metadata;
};

inline std::string seed_url(std::size_t i) { return "http://seed.example.org/item/" + std::to_string(i); }

inline std::string seed_record(std::size_t i) {
  return oai_dc({{"title", "Item " + std::to_string(i)},
                 {"creator", "Author " + std::to_string(i % 17)},
                 {"date", "March " + std::to_string(1 + i % 28) + ", 2004"},
                 {"language", "English"},
                 {"type", "Text"},
                 {"identifier", seed_url(i)}});
}

/// `records` metadata objects, each describing its own Content object that is
/// a member of aggregation i % aggregations. The clock advances one second
/// every `per_second` records so datestamps spread out.
inline SeededRepository seed_repository(ObjectStore& store, ManualClock& clock, std::size_t records,
                                        std::size_t aggregations, std::size_t per_second = 10) {
  SeededRepository out;
  out.agent = store.mint_pid();
  store.put_object(make_object(out.agent, {Behavior::Agent}));
  auto role = [&](std::vector<Behavior> bs, const std::string& label) {
    auto id = store.mint_pid();
    auto obj = make_object(id, std::move(bs), {{rel::assertedBy, out.agent}});
    obj.put_datastream(Datastream::local(std::string(kBrandId), "application/xml", brand_xml(label)));
    store.put_object(obj);
    return id;
  };
  out.provider_role = role({Behavior::MetadataProvider, Behavior::Role}, "Seed Provider");
  for (std::size_t a = 0; a < aggregations; ++a)
    out.aggregators.push_back(role({Behavior::Aggregator, Behavior::Role}, "Seed Collection " + std::to_string(a)));
  std::vector<std::pair<Predicate, ObjectId>> has_roles{{rel::hasRole, out.provider_role}};
  for (auto a : out.aggregators) has_roles.emplace_back(rel::hasRole, a);
  store.put_object(make_object(out.agent, {Behavior::Agent}, has_roles));

  for (std::size_t i = 0; i < records; ++i) {
    if (i > 0 && i % per_second == 0) clock.advance();
    auto r = store.mint_pid();
    auto content = make_object(r, {Behavior::Content},
                               aggregations ? std::vector<std::pair<Predicate, ObjectId>>{{rel::memberOf, out.aggregators[i % aggregations]}}
                                            : std::vector<std::pair<Predicate, ObjectId>>{});
    content.put_datastream(Datastream::remote(std::string(kContentId), "text/html", seed_url(i)));
    store.put_object(content);
    auto m = store.mint_pid();
    auto md = make_object(m, {Behavior::Metadata}, {{rel::metadataFor, r}, {rel::providedBy, out.provider_role}});
    md.put_datastream(Datastream::local("REC.oai_dc", "application/xml", seed_record(i)));
    store.put_object(md);
    out.resources.push_back(r);
    out.metadata.push_back(m);
  }
  return out;
}

/// Follows a list verb's resumption chain to the end.
inline std::vector<oai::Record> collect(Provider& provider, OaiArgs args, std::size_t* pages = nullptr,
                                        const std::function<void()>& between_pages = {}) {
  std::vector<oai::Record> out;
  const std::string verb = args.front().second;
  auto page = oai::parse_response(provider.handle(args));
  std::size_t n = 1;
  while (!page.error) {
    out.insert(out.end(), page.records.begin(), page.records.end());
    if (!page.resumption_token) break;
    if (between_pages) between_pages();
    page = oai::parse_response(provider.handle({{"verb", verb}, {"resumptionToken", *page.resumption_token}}));
    ++n;
  }
  if (pages) *pages = n;
  return out;
}

inline std::string error_code(const std::string& response) {
  auto page = oai::parse_response(response);
  return page.error ? page.error->code : std::string();
}

}  // namespace overlay::testing
