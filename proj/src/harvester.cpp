#include "overlay/harvester.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include "overlay/content_model.hpp"
#include "overlay/dublin_core.hpp"
#include "overlay/errors.hpp"

namespace overlay {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config and state serialization

namespace {

json pid_json(ObjectId pid) { return pid.number() == 0 ? json(nullptr) : json(pid.str()); }

ObjectId pid_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return ObjectId{};
  return ObjectId::from_string(j.at(key).get<std::string>());
}

json time_json(const std::optional<Timestamp>& t) { return t ? json(format_timestamp(*t)) : json(nullptr); }

std::optional<Timestamp> time_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  auto text = j.at(key).get<std::string>();
  auto t = parse_timestamp(text);
  if (!t) throw Error(ErrorCode::invalid_argument, std::string(key) + ": bad timestamp " + text);
  return t;
}

std::optional<std::string> string_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

}  // namespace

void to_json(json& j, const ProviderConfig& c) {
  j = json{{"id", c.id},
           {"base_url", c.base_url},
           {"set_spec", c.set_spec ? json(*c.set_spec) : json(nullptr)},
           {"format", c.format},
           {"schedule_hint", c.schedule_hint.count()},
           {"agent_pid", pid_json(c.agent_pid)},
           {"provider_role_pid", pid_json(c.provider_role_pid)},
           {"aggregator_role_pid", pid_json(c.aggregator_role_pid)},
           {"label", c.label},
           {"logo_url", c.logo_url},
           {"resource_key_pattern", c.resource_key_pattern ? json(*c.resource_key_pattern) : json(nullptr)}};
}

void from_json(const json& j, ProviderConfig& c) {
  c.id = j.at("id").get<std::string>();
  c.base_url = j.at("base_url").get<std::string>();
  c.set_spec = string_from(j, "set_spec");
  c.format = j.value("format", std::string("oai_dc"));
  c.schedule_hint = std::chrono::seconds(j.value("schedule_hint", std::int64_t{86400}));
  c.agent_pid = pid_from(j, "agent_pid");
  c.provider_role_pid = pid_from(j, "provider_role_pid");
  c.aggregator_role_pid = pid_from(j, "aggregator_role_pid");
  c.label = j.value("label", std::string());
  c.logo_url = j.value("logo_url", std::string());
  c.resource_key_pattern = string_from(j, "resource_key_pattern");
}

void to_json(json& j, const HarvestState& s) {
  j = json{{"last_success_until", time_json(s.last_success_until)},
           {"pending_resumption", s.pending_resumption ? json(*s.pending_resumption) : json(nullptr)},
           {"pending_until", time_json(s.pending_until)},
           {"consecutive_failures", s.consecutive_failures},
           {"next_attempt", time_json(s.next_attempt)}};
}

void from_json(const json& j, HarvestState& s) {
  s.last_success_until = time_from(j, "last_success_until");
  s.pending_resumption = string_from(j, "pending_resumption");
  s.pending_until = time_from(j, "pending_until");
  s.consecutive_failures = j.value("consecutive_failures", 0u);
  s.next_attempt = time_from(j, "next_attempt");
}

std::vector<ProviderConfig> load_providers(const std::string& path) {
  std::ifstream in(path);
  if (!in) return {};
  try {
    auto j = json::parse(in);
    return j.value("providers", json::array()).get<std::vector<ProviderConfig>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, path + ": " + e.what());
  }
}

void save_providers(const std::string& path, const std::vector<ProviderConfig>& providers) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorCode::storage, "cannot write " + tmp);
    out << json{{"providers", providers}}.dump(2) << "\n";
    if (!out) throw Error(ErrorCode::storage, "cannot write " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error(ErrorCode::storage, "cannot replace " + path);
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kStatePrefix = "harvest/";

std::vector<Triple> rels_of(const DigitalObject& obj) {
  auto rels = obj.rels();
  return rels.empty() ? std::vector<Triple>{} : parse_rels(rels, obj.pid);
}

void set_rels(DigitalObject& obj, const std::vector<Triple>& triples) {
  if (triples.empty()) {
    obj.datastreams.erase(std::string(kRelsId));
    return;
  }
  auto created = obj.datastream(kRelsId) ? obj.datastream(kRelsId)->created : Timestamp{};
  obj.put_datastream(Datastream::local(std::string(kRelsId), std::string(kRelsMediaType),
                                       serialize_rels(obj.pid, triples), created));
}

bool contains(const std::vector<Triple>& ts, const Triple& t) { return std::find(ts.begin(), ts.end(), t) != ts.end(); }

}  // namespace

Harvester::Harvester(ObjectStore& store, HarvesterOptions options) : store_(store), options_(std::move(options)) {
  if (!options_.transport) options_.transport = std::make_shared<oai::HttpTransport>();
}

std::mutex& Harvester::provider_lock(const std::string& id) {
  std::lock_guard g(locks_mutex_);
  auto& slot = locks_[id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::string Harvester::metadata_key(const ProviderConfig& cfg, std::string_view oai_identifier) {
  return cfg.id + "|" + std::string(oai_identifier);
}

std::optional<ObjectId> Harvester::metadata_for(const ProviderConfig& cfg, std::string_view oai_identifier) const {
  return store_.view().index("md", metadata_key(cfg, oai_identifier));
}

HarvestState Harvester::state(std::string_view provider_id) const {
  auto raw = store_.get_meta(std::string(kStatePrefix) + std::string(provider_id));
  if (!raw) return {};
  return json::parse(*raw).get<HarvestState>();
}

void Harvester::save_state(std::string_view provider_id, const HarvestState& s) {
  store_.set_meta(std::string(kStatePrefix) + std::string(provider_id), json(s).dump());
}

std::chrono::seconds Harvester::backoff(const ProviderConfig& cfg, std::uint32_t failures) const {
  auto delay = std::max(cfg.schedule_hint, std::chrono::seconds(1));
  for (std::uint32_t i = 0; i < failures && delay < options_.backoff_cap; ++i) delay *= 2;
  return std::min(delay, options_.backoff_cap);
}

// ---------------------------------------------------------------------------
// Provisioning

ProviderConfig Harvester::provision(ProviderConfig cfg) {
  if (cfg.id.empty() || cfg.id.find('|') != std::string::npos)
    throw Error(ErrorCode::invalid_argument, "provider id must be non-empty and free of '|'");
  if (!dc::is_absolute_url(cfg.base_url)) throw Error(ErrorCode::invalid_argument, "base_url must be an absolute URL");
  if (cfg.format.empty()) throw Error(ErrorCode::invalid_argument, "format must not be empty");
  if (cfg.resource_key_pattern) {
    try {
      std::regex check(*cfg.resource_key_pattern);
    } catch (const std::regex_error& e) {
      throw Error(ErrorCode::invalid_argument, "resource_key_pattern: " + std::string(e.what()));
    }
  }
  if (cfg.label.empty()) cfg.label = cfg.id;

  if (cfg.agent_pid.number() == 0) {
    cfg.agent_pid = store_.mint_pid();
    DigitalObject agent;
    agent.pid = cfg.agent_pid;
    agent.bind(Behavior::Agent);
    store_.put_object(std::move(agent));
  }
  auto make_role = [&](Behavior kind) {
    auto pid = store_.mint_pid();
    DigitalObject role;
    role.pid = pid;
    role.bind(kind);
    role.bind(Behavior::Role);
    role.put_datastream(Datastream::local(std::string(kBrandId), "application/xml",
                                          brand_document(Brand{cfg.label, cfg.logo_url, ObjectId{}})));
    set_rels(role, {{pid, rel::assertedBy, cfg.agent_pid}});
    store_.put_object(std::move(role));
    return pid;
  };
  if (cfg.provider_role_pid.number() == 0) cfg.provider_role_pid = make_role(Behavior::MetadataProvider);
  if (cfg.aggregator_role_pid.number() == 0) cfg.aggregator_role_pid = make_role(Behavior::Aggregator);

  auto agent = store_.get_object(cfg.agent_pid);
  if (!agent.active() || !agent.binds(Behavior::Agent))
    throw Error(ErrorCode::invalid_argument, cfg.agent_pid.str() + " is not an active Agent");
  auto triples = rels_of(agent);
  bool changed = false;
  for (auto role : {cfg.provider_role_pid, cfg.aggregator_role_pid}) {
    Triple t{cfg.agent_pid, rel::hasRole, role};
    if (!contains(triples, t)) {
      triples.push_back(t);
      changed = true;
    }
  }
  if (changed) {
    set_rels(agent, triples);
    store_.put_object(std::move(agent));
  }
  store_.assign_handle(cfg.agent_pid);
  return cfg;
}

// ---------------------------------------------------------------------------
// Record pipeline

std::optional<std::string> Harvester::validate_record(std::string_view document, std::string_view format) {
  return dc::validate_record(document, format);
}

std::string Harvester::apply_safe_transforms(std::string_view document) { return dc::apply_safe_transforms(document); }

std::optional<std::string> Harvester::resource_key(const xml::Element& record, const ProviderConfig& cfg) const {
  if (!cfg.resource_key_pattern) {
    auto urls = dc::url_identifiers(record);
    if (urls.empty()) return std::nullopt;
    return urls.front();
  }
  std::regex pattern(*cfg.resource_key_pattern);
  for (const auto* id : record.children_named(dc::kDcNs, "identifier")) {
    auto v = dc::collapse_whitespace(id->text);
    if (std::regex_match(v, pattern)) return v;
  }
  return std::nullopt;
}

ObjectId Harvester::resolve_resource(const std::string& key, const std::optional<std::string>& url,
                                     const ProviderConfig& cfg) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (auto existing = store_.view().index("resource", key)) {
      auto r = store_.get_object(*existing);
      if (r.active()) {
        auto triples = rels_of(r);
        Triple member{r.pid, rel::memberOf, cfg.aggregator_role_pid};
        if (!contains(triples, member)) {
          triples.push_back(member);
          set_rels(r, triples);
          store_.put_object(std::move(r));
        }
        return *existing;
      }
    }
    DigitalObject r;
    r.pid = store_.mint_pid();
    r.bind(Behavior::Content);
    if (url) r.put_datastream(Datastream::remote(std::string(kContentId), "text/html", *url));
    set_rels(r, {{r.pid, rel::memberOf, cfg.aggregator_role_pid}});
    const auto pid = r.pid;
    try {
      store_.put_object(std::move(r), PutOptions{Strictness::strict, {{"resource", key}}, nullptr});
    } catch (const Error& e) {
      // Another harvest claimed the key between lookup and write.
      if (e.code() == ErrorCode::conflict && attempt == 0) continue;
      throw;
    }
    store_.assign_handle(pid);
    return pid;
  }
  throw Error(ErrorCode::conflict, "resource key " + key + " is contended");
}

void Harvester::release_resource(ObjectId resource, const ProviderConfig& cfg) {
  {
    auto v = store_.view();
    const auto& g = v.graph();
    for (auto m : g.subjects_of(rel::metadataFor, resource)) {
      auto providers = g.objects_of(m, rel::providedBy);
      if (std::find(providers.begin(), providers.end(), cfg.provider_role_pid) != providers.end()) return;
    }
  }
  auto r = store_.get_object(resource);
  if (!r.active()) return;
  auto triples = rels_of(r);
  Triple member{resource, rel::memberOf, cfg.aggregator_role_pid};
  auto it = std::find(triples.begin(), triples.end(), member);
  if (it == triples.end()) return;
  triples.erase(it);
  set_rels(r, triples);
  store_.put_object(std::move(r));
}

IngestOutcome Harvester::ingest_record(const oai::Record& record, const ProviderConfig& cfg) {
  if (cfg.provider_role_pid.number() == 0 || cfg.aggregator_role_pid.number() == 0)
    throw Error(ErrorCode::invalid_argument, "provider " + cfg.id + " is not provisioned");
  const auto parsed = xml::parse(record.metadata);
  auto key = resource_key(parsed, cfg);
  if (!key) throw Error(ErrorCode::validation, "no resource key");

  const std::string md_key = metadata_key(cfg, record.identifier);
  std::optional<ObjectId> previous_resource;
  std::optional<DigitalObject> existing;
  if (auto pid = store_.view().index("md", md_key)) {
    existing = store_.get_object(*pid);
    if (existing->active()) {
      auto targets = rels_of(*existing);
      for (const auto& t : targets)
        if (t.predicate == rel::metadataFor) previous_resource = t.object;
    }
  }

  std::optional<std::string> url;
  if (dc::is_absolute_url(*key)) url = *key;
  else if (auto urls = dc::url_identifiers(parsed); !urls.empty()) url = urls.front();
  const ObjectId resource = resolve_resource(*key, url, cfg);

  DigitalObject m;
  m.pid = existing ? existing->pid : store_.mint_pid();
  m.bind(Behavior::Metadata);
  const std::string verbatim = xml::canonical(parsed);
  m.put_datastream(Datastream::local(std::string(kRecordPrefix) + cfg.format, "application/xml", verbatim,
                                     record.datestamp));
  if (cfg.format == dc::kOaiDc) {
    auto normalized = dc::crosswalk(dc::MetadataRecord{cfg.format, verbatim, record.datestamp}, dc::kNsdlDc);
    m.put_datastream(Datastream::local(std::string(kRecordPrefix) + std::string(dc::kNsdlDc), "application/xml",
                                       normalized.xml, record.datestamp));
  }
  set_rels(m, {{m.pid, rel::metadataFor, resource}, {m.pid, rel::providedBy, cfg.provider_role_pid}});
  const bool was_active = existing && existing->active();
  store_.put_object(std::move(m), PutOptions{Strictness::strict, {{"md", md_key}}, nullptr});

  if (previous_resource && *previous_resource != resource) release_resource(*previous_resource, cfg);
  return was_active ? IngestOutcome::updated : IngestOutcome::created;
}

bool Harvester::handle_deleted(std::string_view oai_identifier, const ProviderConfig& cfg) {
  auto pid = metadata_for(cfg, oai_identifier);
  if (!pid) return false;
  auto m = store_.get_object(*pid);
  if (!m.active()) return false;
  std::vector<ObjectId> resources;
  for (const auto& t : rels_of(m))
    if (t.predicate == rel::metadataFor) resources.push_back(t.object);
  store_.delete_object(*pid);
  for (auto r : resources) release_resource(r, cfg);
  return true;
}

// ---------------------------------------------------------------------------
// Harvest run

IngestReport Harvester::harvest(const ProviderConfig& cfg) {
  std::unique_lock run(provider_lock(cfg.id), std::try_to_lock);
  if (!run.owns_lock()) throw Error(ErrorCode::conflict, "a harvest of " + cfg.id + " is already running");

  IngestReport report;
  HarvestState st = state(cfg.id);
  const Timestamp started = store_.now();
  const Timestamp until = st.pending_resumption && st.pending_until ? *st.pending_until : started;
  oai::Client client(options_.transport, cfg.base_url);

  auto reject = [&](const std::string& id, std::string reason) {
    ++report.rejected;
    report.rejects.emplace_back(id, std::move(reason));
  };
  auto process = [&](const oai::Record& rec) {
    ++report.harvested;
    if (rec.identifier.empty()) return reject("", "record header has no identifier");
    if (rec.deleted) {
      handle_deleted(rec.identifier, cfg);
      ++report.deleted;
      return;
    }
    if (rec.metadata.empty()) return reject(rec.identifier, "malformed XML: no single metadata element");
    if (auto why = validate_record(rec.metadata, cfg.format)) return reject(rec.identifier, *why);
    try {
      auto outcome = ingest_record(rec, cfg);
      ++(outcome == IngestOutcome::created ? report.created : report.updated);
    } catch (const Error& e) {
      reject(rec.identifier, e.what());
    }
  };

  try {
    oai::Page page = st.pending_resumption ? client.resume("ListRecords", *st.pending_resumption)
                                           : client.list_records(cfg.format, st.last_success_until, until, cfg.set_spec);
    for (;;) {
      if (page.error) {
        if (page.error->code == "noRecordsMatch") break;
        if (page.error->code == "badResumptionToken") {
          st.pending_resumption.reset();
          st.pending_until.reset();
        }
        throw Error(ErrorCode::dissemination, "OAI error " + page.error->code + ": " + page.error->message);
      }
      for (const auto& rec : page.records) process(rec);
      if (!page.resumption_token) break;
      st.pending_resumption = page.resumption_token;
      st.pending_until = until;
      save_state(cfg.id, st);
      page = client.resume("ListRecords", *page.resumption_token);
    }
  } catch (const std::exception& e) {
    report.complete = false;
    report.error = e.what();
    ++st.consecutive_failures;
    st.next_attempt = started + backoff(cfg, st.consecutive_failures);
    save_state(cfg.id, st);
    return report;
  }

  if (!st.last_success_until || *st.last_success_until < until) st.last_success_until = until;
  st.pending_resumption.reset();
  st.pending_until.reset();
  st.consecutive_failures = 0;
  st.next_attempt = started + cfg.schedule_hint;
  save_state(cfg.id, st);
  return report;
}

}  // namespace overlay
