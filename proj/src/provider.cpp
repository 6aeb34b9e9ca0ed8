#include "overlay/provider.hpp"

#include <algorithm>
#include <set>

#include "overlay/errors.hpp"

namespace overlay {

namespace {

const std::string kOai(oai::kOaiNs);

struct FormatInfo {
  std::string schema;
  std::string ns;
};

FormatInfo format_info(std::string_view prefix) {
  if (prefix == dc::kOaiDc) return {"http://www.openarchives.org/OAI/2.0/oai_dc.xsd", std::string(dc::kOaiDcNs)};
  if (prefix == dc::kNsdlDc) return {"http://ns.nsdl.org/schemas/nsdl_dc/nsdl_dc_v1.02.xsd", std::string(dc::kNsdlDcNs)};
  if (prefix == kNsdlAgg) return {std::string(kNsdlAggNs) + ".xsd", std::string(kNsdlAggNs)};
  if (prefix == "marcxml") return {"http://www.loc.gov/standards/marcxml/schema/MARC21slim.xsd", "http://www.loc.gov/MARC21/slim"};
  return {"", ""};
}

/// Stored record formats of a metadata object plus their crosswalk targets.
std::set<std::string> formats_of(const DigitalObject& obj) {
  std::set<std::string> out;
  const std::string prefix(kRecordPrefix);
  for (const auto& [id, ds] : obj.datastreams) {
    if (id.rfind(prefix, 0) != 0) continue;
    auto from = id.substr(prefix.size());
    out.insert(from);
    if (dc::can_crosswalk(from, dc::kNsdlDc)) out.insert(std::string(dc::kNsdlDc));
  }
  return out;
}

/// Parses an OAI from/until argument. Day granularity covers the whole day.
std::optional<Timestamp> window_bound(const std::string& text, bool upper) {
  auto t = oai::parse_datestamp(text);
  if (t && upper && text.size() == 10) *t += std::chrono::days(1);
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------

class Provider::Reply {
 public:
  Reply(const ProviderOptions& options, Timestamp now) : root_(kOai, "OAI-PMH") {
    root_.set_attribute(std::string(xml::kXsiNs), "xsi", "schemaLocation",
                        kOai + " http://www.openarchives.org/OAI/2.0/OAI-PMH.xsd");
    root_.add_text_child(kOai, "", "responseDate", format_timestamp(now));
    root_.add_text_child(kOai, "", "request", options.base_url);
    request_ = root_.children.size() - 1;
  }

  void echo(const OaiArgs& args) {
    for (const auto& [k, v] : args) root_.children[request_].set_attribute(k, v);
  }

  void error(std::string code, std::string message) {
    auto& e = root_.add_text_child(kOai, "", "error", std::move(message));
    e.set_attribute("code", std::move(code));
  }

  xml::Element& body(const std::string& verb) {
    if (body_ == 0) {
      root_.add(xml::Element(kOai, verb));
      body_ = root_.children.size() - 1;
    }
    return root_.children[body_];
  }

  std::string str() const { return xml::write(root_); }

 private:
  xml::Element root_;
  std::size_t request_ = 0;
  std::size_t body_ = 0;
};

// ---------------------------------------------------------------------------

xml::Element aggregation_element(const AggregationRecord& record) {
  const std::string ns(kNsdlAggNs);
  xml::Element root(ns, "nsdl_agg");
  xml::Element res(ns, "resource");
  res.set_attribute("pid", record.resource.str());
  if (record.resource_handle) res.set_attribute("handle", record.resource_handle->str());
  if (!record.resource_url.empty()) res.set_attribute("url", record.resource_url);
  root.add(std::move(res));
  for (const auto& src : record.records) {
    xml::Element s(ns, "sourceRecord");
    s.set_attribute("metadata", src.metadata.str());
    s.set_attribute("brand", src.brand);
    s.set_attribute("format", src.format);
    s.add(xml::parse(src.xml));
    root.add(std::move(s));
  }
  if (!record.gold.empty()) {
    xml::Element g(ns, "gold");
    g.add(xml::parse(record.gold));
    root.add(std::move(g));
  }
  return root;
}

Provider::Provider(ContentModel& model, ProviderOptions options)
    : model_(model), options_(std::move(options)), rng_(std::random_device{}()) {
  if (options_.page_size == 0) options_.page_size = 1;
}

std::string Provider::oai_identifier(ObjectId pid) const { return "oai:" + options_.repo_id + ":" + pid.str(); }

std::optional<ObjectId> Provider::parse_identifier(std::string_view identifier) const {
  const std::string prefix = "oai:" + options_.repo_id + ":";
  if (identifier.substr(0, prefix.size()) != prefix) return std::nullopt;
  return ObjectId::parse(identifier.substr(prefix.size()));
}

std::vector<std::string> Provider::global_formats() const {
  std::set<std::string> out{std::string(dc::kOaiDc), std::string(dc::kNsdlDc), std::string(kNsdlAgg)};
  auto v = model_.store().view();
  for (const auto& [pid, obj] : v.objects())
    if (obj->active() && obj->binds(Behavior::Metadata)) out.merge(formats_of(*obj));
  return {out.begin(), out.end()};
}

AggregationRecord Provider::aggregation_record(ObjectId resource) const {
  AggregationRecord out;
  out.resource = resource;
  {
    auto v = model_.store().view();
    const auto& obj = v.get(resource);
    if (!obj.active()) throw Error(ErrorCode::gone, resource.str() + " is deleted");
    if (!obj.binds(Behavior::Content)) throw Error(ErrorCode::invalid_argument, resource.str() + " is not Content");
    out.resource_handle = obj.handle;
    if (const auto* c = obj.datastream(kContentId); c && c->kind == DatastreamKind::remote) out.resource_url = c->url;
  }
  for (auto m : model_.get_metadata(resource)) {
    std::string brand;
    try {
      auto brands = model_.show_brand(m);
      if (!brands.empty()) brand = brands.front().label;
    } catch (const Error&) {
    }
    auto obj = model_.store().get_object(m);
    const std::string prefix(kRecordPrefix);
    for (const auto& [id, ds] : obj.datastreams)
      if (id.rfind(prefix, 0) == 0) out.records.push_back({m, brand, id.substr(prefix.size()), ds.payload});
  }
  if (out.records.empty()) throw Error(ErrorCode::no_metadata, resource.str() + " has no metadata");
  try {
    out.gold = model_.get_gold(resource).xml;
  } catch (const Error&) {
    // Cyclic augments: the sources are still served, without a gold record.
  }
  return out;
}

std::string Provider::new_token(Token t) {
  std::lock_guard g(tokens_mutex_);
  const auto now = model_.store().now();
  std::erase_if(tokens_, [&](const auto& kv) { return kv.second.expiry <= now; });
  t.expiry = now + options_.token_lifetime;
  static constexpr char hex[] = "0123456789abcdef";
  std::string id;
  do {
    id.clear();
    for (int i = 0; i < 2; ++i) {
      auto x = rng_();
      for (int j = 0; j < 16; ++j, x >>= 4) id += hex[x & 0xf];
    }
  } while (tokens_.count(id));
  tokens_.emplace(id, std::move(t));
  return id;
}

// ---------------------------------------------------------------------------
// Dispatch

std::string Provider::handle(const OaiArgs& args) {
  Reply r(options_, model_.store().now());
  std::map<std::string, std::string> m;
  for (const auto& [k, v] : args)
    if (!m.emplace(k, v).second) {
      r.error("badArgument", "repeated argument " + k);
      return r.str();
    }
  auto verb_it = m.find("verb");
  if (verb_it == m.end()) {
    r.error("badVerb", "missing verb");
    return r.str();
  }
  const std::string verb = verb_it->second;
  static const std::map<std::string, std::pair<std::set<std::string>, std::set<std::string>>> grammar{
      // verb -> (required, optional)
      {"Identify", {{}, {}}},
      {"ListMetadataFormats", {{}, {"identifier"}}},
      {"ListSets", {{}, {"resumptionToken"}}},
      {"GetRecord", {{"identifier", "metadataPrefix"}, {}}},
      {"ListRecords", {{"metadataPrefix"}, {"from", "until", "set", "resumptionToken"}}},
      {"ListIdentifiers", {{"metadataPrefix"}, {"from", "until", "set", "resumptionToken"}}},
  };
  auto g = grammar.find(verb);
  if (g == grammar.end()) {
    r.error("badVerb", "unknown verb " + verb);
    return r.str();
  }
  m.erase("verb");
  const auto& [required, optional] = g->second;
  const bool resuming = m.count("resumptionToken") > 0;
  for (const auto& [k, v] : m)
    if (!required.count(k) && !optional.count(k)) {
      r.error("badArgument", "illegal argument " + k);
      return r.str();
    }
  if (resuming && m.size() > 1) {
    r.error("badArgument", "resumptionToken is exclusive");
    return r.str();
  }
  if (!resuming)
    for (const auto& k : required)
      if (!m.count(k)) {
        r.error("badArgument", "missing argument " + k);
        return r.str();
      }
  r.echo(args);

  if (verb == "Identify") identify(r);
  else if (verb == "ListMetadataFormats") list_metadata_formats(r, m);
  else if (verb == "ListSets") m.count("resumptionToken") ? r.error("badResumptionToken", "ListSets is never split") : list_sets(r);
  else if (verb == "GetRecord") get_record(r, m);
  else list(r, verb, m);
  return r.str();
}

void Provider::identify(Reply& r) {
  Timestamp earliest{};
  {
    auto v = model_.store().view();
    bool any = false;
    for (const auto& [pid, obj] : v.objects())
      if (!any || obj->last_modified < earliest) {
        earliest = obj->last_modified;
        any = true;
      }
  }
  auto& b = r.body("Identify");
  b.add_text_child(kOai, "", "repositoryName", options_.repository_name);
  b.add_text_child(kOai, "", "baseURL", options_.base_url);
  b.add_text_child(kOai, "", "protocolVersion", "2.0");
  b.add_text_child(kOai, "", "adminEmail", options_.admin_email);
  b.add_text_child(kOai, "", "earliestDatestamp", format_timestamp(earliest));
  b.add_text_child(kOai, "", "deletedRecord", "persistent");
  b.add_text_child(kOai, "", "granularity", "YYYY-MM-DDThh:mm:ssZ");
  const std::string id_ns = "http://www.openarchives.org/OAI/2.0/oai-identifier";
  xml::Element desc(kOai, "description");
  xml::Element oid(id_ns, "oai-identifier");
  oid.add_text_child(id_ns, "", "scheme", "oai");
  oid.add_text_child(id_ns, "", "repositoryIdentifier", options_.repo_id);
  oid.add_text_child(id_ns, "", "delimiter", ":");
  oid.add_text_child(id_ns, "", "sampleIdentifier", oai_identifier(ObjectId(1)));
  desc.add(std::move(oid));
  b.add(std::move(desc));
}

void Provider::list_metadata_formats(Reply& r, const std::map<std::string, std::string>& args) {
  std::vector<std::string> formats;
  if (auto it = args.find("identifier"); it != args.end()) {
    auto pid = parse_identifier(it->second);
    auto v = model_.store().view();
    auto obj = pid ? v.find(*pid) : nullptr;
    if (!obj) return r.error("idDoesNotExist", it->second);
    if (obj->active() && obj->binds(Behavior::Metadata)) {
      auto fs = formats_of(*obj);
      formats.assign(fs.begin(), fs.end());
    }
    if (obj->active() && obj->binds(Behavior::Content) && !v.graph().subjects_of(rel::metadataFor, *pid).empty())
      formats.push_back(std::string(kNsdlAgg));
    if (formats.empty()) return r.error("noMetadataFormats", "no formats for " + it->second);
  } else {
    formats = global_formats();
  }
  auto& b = r.body("ListMetadataFormats");
  for (const auto& f : formats) {
    auto info = format_info(f);
    xml::Element e(kOai, "metadataFormat");
    e.add_text_child(kOai, "", "metadataPrefix", f);
    e.add_text_child(kOai, "", "schema", info.schema);
    e.add_text_child(kOai, "", "metadataNamespace", info.ns);
    b.add(std::move(e));
  }
}

void Provider::list_sets(Reply& r) {
  std::vector<ObjectId> aggregators;
  {
    auto v = model_.store().view();
    for (const auto& [pid, obj] : v.objects())
      if (obj->active() && obj->binds(Behavior::Aggregator)) aggregators.push_back(pid);
  }
  if (aggregators.empty()) return r.error("noSetHierarchy", "this repository has no aggregations");
  auto& b = r.body("ListSets");
  for (auto pid : aggregators) {
    std::string name = pid.str();
    try {
      name = model_.get_brand(pid).label;
    } catch (const Error&) {
    }
    xml::Element s(kOai, "set");
    s.add_text_child(kOai, "", "setSpec", std::to_string(pid.number()));
    s.add_text_child(kOai, "", "setName", name);
    b.add(std::move(s));
  }
}

xml::Element Provider::header(const Item& item) const {
  xml::Element h(kOai, "header");
  if (item.deleted) h.set_attribute("status", "deleted");
  h.add_text_child(kOai, "", "identifier", oai_identifier(item.pid));
  h.add_text_child(kOai, "", "datestamp", format_timestamp(item.datestamp));
  for (const auto& s : item.sets) h.add_text_child(kOai, "", "setSpec", s);
  return h;
}

std::optional<xml::Element> Provider::payload(ObjectId pid, const std::string& format) const {
  try {
    if (format == kNsdlAgg) return aggregation_element(aggregation_record(pid));
    return xml::parse(model_.get_record(pid, format).xml);
  } catch (const Error&) {
    return std::nullopt;
  }
}

void Provider::get_record(Reply& r, const std::map<std::string, std::string>& args) {
  const auto& identifier = args.at("identifier");
  const auto& format = args.at("metadataPrefix");
  auto pid = parse_identifier(identifier);
  Item item;
  {
    auto v = model_.store().view();
    auto obj = pid ? v.find(*pid) : nullptr;
    if (!obj) return r.error("idDoesNotExist", identifier);
    item.pid = *pid;
    item.datestamp = obj->last_modified;
    item.deleted = !obj->active();
    if (!item.deleted) {
      const auto& g = v.graph();
      if (format == kNsdlAgg) {
        if (!obj->binds(Behavior::Content)) return r.error("cannotDisseminateFormat", "nsdl_agg describes Content objects only");
        auto ms = g.subjects_of(rel::metadataFor, *pid);
        if (ms.empty()) return r.error("idDoesNotExist", identifier + " has no metadata");
        for (auto m : ms)
          if (auto mo = v.find(m)) item.datestamp = std::max(item.datestamp, mo->last_modified);
        for (auto a : g.objects_of(*pid, rel::memberOf)) item.sets.push_back(std::to_string(a.number()));
      } else {
        if (!obj->binds(Behavior::Metadata) || !formats_of(*obj).count(format))
          return r.error("cannotDisseminateFormat", format + " is not available for " + identifier);
        for (auto res : g.objects_of(*pid, rel::metadataFor))
          for (auto a : g.objects_of(res, rel::memberOf)) item.sets.push_back(std::to_string(a.number()));
      }
    }
  }
  xml::Element rec(kOai, "record");
  std::optional<xml::Element> body;
  if (!item.deleted) {
    body = payload(item.pid, format);
    if (!body) return r.error("cannotDisseminateFormat", format + " is not available for " + identifier);
  }
  rec.add(header(item));
  if (body) {
    xml::Element md(kOai, "metadata");
    md.add(std::move(*body));
    rec.add(std::move(md));
  }
  r.body("GetRecord").add(std::move(rec));
}

std::vector<Provider::Item> Provider::select(const Token& t, std::size_t limit) const {
  std::vector<Item> out;
  const std::string set_aggregator = t.set ? "nsdl:" + *t.set : std::string();
  auto v = model_.store().view();
  const auto& g = v.graph();
  const auto& objects = v.objects();
  const bool agg = t.format == kNsdlAgg;
  auto in_window = [&](Timestamp ts) { return (!t.from || *t.from <= ts) && ts < t.until; };
  for (auto it = objects.upper_bound(t.cursor); it != objects.end() && out.size() < limit; ++it) {
    const auto& [pid, obj] = *it;
    Item item{pid, obj->last_modified, !obj->active(), {}};
    if (item.deleted) {
      if (in_window(item.datestamp)) out.push_back(std::move(item));
      continue;
    }
    std::vector<ObjectId> memberships;
    if (agg) {
      if (!obj->binds(Behavior::Content)) continue;
      auto ms = g.subjects_of(rel::metadataFor, pid);
      if (ms.empty()) continue;
      for (auto m : ms)
        if (auto mo = v.find(m)) item.datestamp = std::max(item.datestamp, mo->last_modified);
      memberships = g.objects_of(pid, rel::memberOf);
    } else {
      if (!obj->binds(Behavior::Metadata) || !formats_of(*obj).count(t.format)) continue;
      for (auto res : g.objects_of(pid, rel::metadataFor))
        for (auto a : g.objects_of(res, rel::memberOf)) memberships.push_back(a);
    }
    if (!in_window(item.datestamp)) continue;
    std::sort(memberships.begin(), memberships.end());
    memberships.erase(std::unique(memberships.begin(), memberships.end()), memberships.end());
    if (t.set && !std::any_of(memberships.begin(), memberships.end(),
                              [&](ObjectId a) { return a.str() == set_aggregator; }))
      continue;
    for (auto a : memberships) item.sets.push_back(std::to_string(a.number()));
    out.push_back(std::move(item));
  }
  return out;
}

void Provider::list(Reply& r, const std::string& verb, const std::map<std::string, std::string>& args) {
  Token t;
  const auto now = model_.store().now();
  if (auto tok = args.find("resumptionToken"); tok != args.end()) {
    std::lock_guard g(tokens_mutex_);
    auto it = tokens_.find(tok->second);
    if (it == tokens_.end() || it->second.expiry <= now || it->second.verb != verb)
      return r.error("badResumptionToken", "unknown or expired token");
    t = it->second;
  } else {
    t.verb = verb;
    t.format = args.at("metadataPrefix");
    if (auto s = args.find("set"); s != args.end()) t.set = s->second;
    auto from = args.find("from");
    auto until = args.find("until");
    if (from != args.end()) {
      t.from = window_bound(from->second, false);
      if (!t.from) return r.error("badArgument", "bad from " + from->second);
    }
    t.until = now;
    if (until != args.end()) {
      auto u = window_bound(until->second, true);
      if (!u) return r.error("badArgument", "bad until " + until->second);
      t.until = *u;
    }
    if (from != args.end() && until != args.end() && from->second.size() != until->second.size())
      return r.error("badArgument", "from and until differ in granularity");
    auto formats = global_formats();
    if (!std::binary_search(formats.begin(), formats.end(), t.format))
      return r.error("cannotDisseminateFormat", t.format + " is not served");
    if (t.set) {
      auto set_pid = ObjectId::parse("nsdl:" + *t.set);
      auto v = model_.store().view();
      auto types = set_pid ? v.types(*set_pid) : std::nullopt;
      if (!types || !has_type(*types, EntityType::Aggregator)) return r.error("badArgument", "unknown set " + *t.set);
    }
    if (t.from && *t.from >= t.until) return r.error("noRecordsMatch", "empty window");
  }

  const bool resumed = t.cursor.number() != 0;
  auto items = select(t, options_.page_size + 1);
  const bool more = items.size() > options_.page_size;
  if (more) items.pop_back();
  if (items.empty() && !resumed) return r.error("noRecordsMatch", "no records in the requested window");

  auto& body = r.body(verb);
  for (auto& item : items) {
    if (verb == "ListIdentifiers") {
      body.add(header(item));
      continue;
    }
    xml::Element rec(kOai, "record");
    std::optional<xml::Element> md_body;
    if (!item.deleted) {
      md_body = payload(item.pid, t.format);
      // Deleted or changed between selection and rendering.
      if (!md_body) item.deleted = true;
    }
    rec.add(header(item));
    if (md_body) {
      xml::Element md(kOai, "metadata");
      md.add(std::move(*md_body));
      rec.add(std::move(md));
    }
    body.add(std::move(rec));
  }

  const std::size_t cursor_before = t.emitted;
  if (more || resumed) {
    xml::Element token(kOai, "resumptionToken");
    token.set_attribute("cursor", std::to_string(cursor_before));
    if (more) {
      Token next = t;
      next.cursor = items.back().pid;
      next.emitted = t.emitted + items.size();
      token.text = new_token(next);
      token.set_attribute("expirationDate", format_timestamp(now + options_.token_lifetime));
    }
    body.add(std::move(token));
  }
}

}  // namespace overlay
