#include "overlay/content_model.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <queue>
#include <regex>
#include <set>
#include <tuple>

#include "overlay/errors.hpp"
#include "overlay/xml.hpp"

namespace overlay {

// ---------------------------------------------------------------------------
// Brands

Brand parse_brand(std::string_view document, ObjectId holder) {
  xml::Element root;
  try {
    root = xml::parse(document);
  } catch (const Error& e) {
    throw Error(ErrorCode::brand_missing, "BRAND of " + holder.str() + " is not well-formed: " + e.what());
  }
  const auto* label = root.child_local("label");
  if (root.name != "brand" || !label)
    throw Error(ErrorCode::brand_missing, "BRAND of " + holder.str() + " has no label");
  Brand b{label->text, {}, holder};
  if (const auto* logo = root.child_local("logo")) b.logo_url = logo->text;
  return b;
}

namespace {

xml::Element brand_element(const Brand& brand) {
  xml::Element e("", "brand");
  if (brand.holder.number() != 0) e.set_attribute("holder", brand.holder.str());
  e.add_text_child("", "", "label", brand.label);
  if (!brand.logo_url.empty()) e.add_text_child("", "", "logo", brand.logo_url);
  return e;
}

std::string id_list(const std::vector<ObjectId>& ids) {
  std::string out;
  for (auto id : ids) out += id.str() + "\n";
  return out;
}

Representation text(std::string body) { return {"text/plain; charset=utf-8", std::move(body)}; }

std::size_t size_param(const ContentModel::Params& params, const std::string& name, std::size_t fallback) {
  auto it = params.find(name);
  if (it == params.end()) return fallback;
  std::size_t v = 0;
  const auto& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw Error(ErrorCode::invalid_argument, name + " must be a non-negative integer");
  return v;
}

// Resolution order when several bound behaviors define the same operation.
// Fixed, so output never depends on the order behaviors were bound in.
constexpr std::array kPrecedence{Behavior::Metadata,   Behavior::Content,          Behavior::Agent,
                                 Behavior::Aggregator, Behavior::MetadataProvider, Behavior::Role};

}  // namespace

std::string brand_document(const Brand& brand) { return xml::write(brand_element(brand)); }

// ---------------------------------------------------------------------------
// Remote content

Representation HttpFetcher::fetch(const std::string& url, std::chrono::milliseconds timeout) {
  static const std::regex url_re(R"(^(https?://[^/?#]+)([^#]*))");
  std::smatch m;
  if (!std::regex_search(url, m, url_re)) throw Error(ErrorCode::dissemination, "unsupported URL " + url);
  httplib::Client client(m[1].str());
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_follow_location(true);
  std::string path = m[2].length() ? m[2].str() : "/";
  auto res = client.Get(path);
  if (!res) throw Error(ErrorCode::dissemination, "fetch " + url + ": " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw Error(ErrorCode::dissemination, "fetch " + url + ": HTTP " + std::to_string(res->status));
  return {res->get_header_value("Content-Type"), res->body};
}

// ---------------------------------------------------------------------------

ContentModel::ContentModel(ObjectStore& store, ContentModelOptions options)
    : store_(store), options_(std::move(options)) {
  if (!options_.fetcher) options_.fetcher = std::make_shared<HttpFetcher>();
  register_defaults();
  store_.set_disseminator(this);
}

ContentModel::~ContentModel() { store_.set_disseminator(nullptr); }

void ContentModel::register_operation(Behavior behavior, std::string op, Handler handler) {
  registry_[{behavior, std::move(op)}] = std::move(handler);
}

std::string ContentModel::canonical_operation(std::string_view op) {
  if (op == "displayContent") return "showContent";
  return std::string(op);
}

void ContentModel::register_defaults() {
  auto single = [](auto value) { return text(value.str() + "\n"); };

  // Metadata
  register_operation(Behavior::Metadata, "getRecord", [this](ObjectId pid, const Params& p) {
    auto it = p.find("format");
    if (it == p.end() || it->second.empty())
      throw Error(ErrorCode::invalid_argument, "getRecord requires a format parameter");
    return Representation{"application/xml", get_record(pid, it->second).xml};
  });
  register_operation(Behavior::Metadata, "getProvider",
                     [this, single](ObjectId pid, const Params&) { return single(get_provider(pid)); });
  register_operation(Behavior::Metadata, "getResource",
                     [this, single](ObjectId pid, const Params&) { return single(get_resource(pid)); });

  auto brands = [this](ObjectId pid, const Params&) {
    xml::Element root("", "brands");
    for (const auto& b : show_brand(pid)) root.add(brand_element(b));
    return Representation{"application/xml", xml::write(root)};
  };
  register_operation(Behavior::Metadata, "showBrand", brands);

  // Resource operations, available through either Agent or Content.
  for (Behavior b : {Behavior::Agent, Behavior::Content}) {
    register_operation(b, "getHandle", [this, single](ObjectId pid, const Params&) { return single(get_handle(pid)); });
    register_operation(b, "getMetadata", [this](ObjectId pid, const Params&) { return text(id_list(get_metadata(pid))); });
    register_operation(b, "getMemberships",
                       [this](ObjectId pid, const Params&) { return text(id_list(memberships(pid))); });
    register_operation(b, "getAnnotations",
                       [this](ObjectId pid, const Params&) { return text(id_list(annotations_for(pid))); });
    register_operation(b, "showBrand", brands);
  }

  // Content
  register_operation(Behavior::Content, "showContent",
                     [this](ObjectId pid, const Params&) { return show_content(pid); });
  register_operation(Behavior::Content, "getGold", [this](ObjectId pid, const Params&) {
    return Representation{"application/xml", gold_document(get_gold(pid))};
  });

  // Roles
  auto brand = [this](ObjectId pid, const Params&) {
    return Representation{"application/xml", brand_document(get_brand(pid))};
  };
  for (Behavior b : {Behavior::Role, Behavior::Aggregator, Behavior::MetadataProvider})
    register_operation(b, "getBrand", brand);
  register_operation(Behavior::Aggregator, "listMembers", [this](ObjectId pid, const Params& p) {
    return text(id_list(list_members(pid, size_param(p, "offset", 0), size_param(p, "limit", options_.default_page_size))));
  });
  register_operation(Behavior::Aggregator, "getRepresentation",
                     [this, single](ObjectId pid, const Params&) { return single(get_representation(pid)); });
  register_operation(Behavior::MetadataProvider, "listProvided", [this](ObjectId pid, const Params& p) {
    return text(
        id_list(list_provided(pid, size_param(p, "offset", 0), size_param(p, "limit", options_.default_page_size))));
  });
}

Representation ContentModel::disseminate(ObjectId pid, std::string_view op, const Params& params) {
  const std::string name = canonical_operation(op);
  BehaviorSet types;
  {
    auto v = store_.view();
    const auto& obj = v.get(pid);
    if (!obj.active()) throw Error(ErrorCode::gone, pid.str() + " has been deleted");
    types = obj.behavior_set();
  }
  for (Behavior b : kPrecedence) {
    if (!types.contains(b)) continue;
    if (auto it = registry_.find({b, name}); it != registry_.end()) return it->second(pid, params);
  }
  throw Error(ErrorCode::operation_not_supported, "operation " + name + " is not bound on " + pid.str());
}

std::vector<std::string> ContentModel::operations(BehaviorSet behaviors) const {
  std::set<std::string> names;
  for (const auto& [key, handler] : registry_)
    if (behaviors.contains(key.first)) names.insert(key.second);
  return {names.begin(), names.end()};
}

const DigitalObject& ContentModel::require(const View& v, ObjectId pid, EntityType type) const {
  const auto& obj = v.get(pid);
  if (!obj.active()) throw Error(ErrorCode::gone, pid.str() + " has been deleted");
  if (!has_type(obj.behavior_set(), type))
    throw Error(ErrorCode::operation_not_supported, pid.str() + " is not " + std::string(to_string(type)));
  return obj;
}

ObjectId ContentModel::unique_target(const View& v, ObjectId pid, const Predicate& p) const {
  auto targets = v.graph().objects_of(pid, p);
  if (targets.size() != 1)
    throw Error(ErrorCode::model_integrity,
                pid.str() + " has " + std::to_string(targets.size()) + " " + p.name + " edges, expected exactly one");
  return targets.front();
}

// ---------------------------------------------------------------------------
// Metadata

std::optional<dc::MetadataRecord> ContentModel::record_in(const DigitalObject& obj, std::string_view format) const {
  const std::string prefix(kRecordPrefix);
  if (const auto* ds = obj.datastream(prefix + std::string(format)))
    return dc::MetadataRecord{std::string(format), ds->payload, ds->created};
  for (const auto& [id, ds] : obj.datastreams) {
    if (id.rfind(prefix, 0) != 0) continue;
    std::string from = id.substr(prefix.size());
    if (from != format && dc::can_crosswalk(from, format))
      return dc::crosswalk(dc::MetadataRecord{from, ds.payload, ds.created}, format);
  }
  return std::nullopt;
}

dc::MetadataRecord ContentModel::get_record(ObjectId pid, std::string_view format) const {
  auto v = store_.view();
  const auto& obj = require(v, pid, EntityType::Metadata);
  if (auto rec = record_in(obj, format)) return *rec;
  throw Error(ErrorCode::format_unavailable, pid.str() + " cannot disseminate format " + std::string(format));
}

std::vector<std::string> ContentModel::formats(ObjectId pid) const {
  auto v = store_.view();
  const auto& obj = require(v, pid, EntityType::Metadata);
  std::set<std::string> out;
  const std::string prefix(kRecordPrefix);
  for (const auto& [id, ds] : obj.datastreams) {
    if (id.rfind(prefix, 0) != 0) continue;
    std::string from = id.substr(prefix.size());
    out.insert(from);
    if (dc::can_crosswalk(from, dc::kNsdlDc)) out.insert(std::string(dc::kNsdlDc));
  }
  return {out.begin(), out.end()};
}

ObjectId ContentModel::get_provider(ObjectId pid) const {
  auto v = store_.view();
  require(v, pid, EntityType::Metadata);
  return unique_target(v, pid, rel::providedBy);
}

ObjectId ContentModel::get_resource(ObjectId pid) const {
  auto v = store_.view();
  require(v, pid, EntityType::Metadata);
  return unique_target(v, pid, rel::metadataFor);
}

// ---------------------------------------------------------------------------
// Resources

HandleId ContentModel::get_handle(ObjectId pid) {
  {
    auto v = store_.view();
    const auto& obj = require(v, pid, EntityType::Resource);
    if (obj.handle) return *obj.handle;
  }
  return store_.assign_handle(pid);
}

std::vector<ObjectId> ContentModel::get_metadata(ObjectId pid) const {
  auto v = store_.view();
  require(v, pid, EntityType::Resource);
  return v.graph().subjects_of(rel::metadataFor, pid);
}

std::vector<ObjectId> ContentModel::memberships(ObjectId pid) const {
  auto v = store_.view();
  require(v, pid, EntityType::Resource);
  return v.graph().objects_of(pid, rel::memberOf);
}

std::vector<ObjectId> ContentModel::annotations_for(ObjectId pid) const {
  auto v = store_.view();
  require(v, pid, EntityType::Resource);
  return v.graph().subjects_of(rel::annotates, pid);
}

Brand ContentModel::brand_in(const View& v, ObjectId role) const {
  const auto& obj = v.get(role);
  const auto* ds = obj.active() ? obj.datastream(kBrandId) : nullptr;
  if (!ds || ds->kind != DatastreamKind::local)
    throw Error(ErrorCode::brand_missing, role.str() + " has no BRAND datastream");
  return parse_brand(ds->payload, role);
}

std::vector<Brand> ContentModel::brands_in(const View& v, ObjectId pid) const {
  const auto& obj = v.get(pid);
  if (!obj.active()) throw Error(ErrorCode::gone, pid.str() + " has been deleted");
  auto types = obj.behavior_set();
  std::vector<ObjectId> holders;
  if (types.contains(Behavior::Metadata)) holders = v.graph().objects_of(pid, rel::providedBy);
  else if (has_type(types, EntityType::Resource)) holders = v.graph().objects_of(pid, rel::memberOf);
  else throw Error(ErrorCode::operation_not_supported, pid.str() + " is neither Metadata nor a Resource");
  std::vector<Brand> out;
  for (auto h : holders) out.push_back(brand_in(v, h));
  return out;
}

std::vector<Brand> ContentModel::show_brand(ObjectId pid) const {
  auto v = store_.view();
  return brands_in(v, pid);
}

// ---------------------------------------------------------------------------
// Content

Representation ContentModel::show_content(ObjectId pid) const {
  Datastream ds;
  {
    auto v = store_.view();
    const auto& obj = require(v, pid, EntityType::Content);
    const auto* found = obj.datastream(kContentId);
    if (!found) throw Error(ErrorCode::not_available, pid.str() + " has no CONTENT datastream");
    ds = *found;
  }
  if (ds.kind == DatastreamKind::local) return {ds.media_type, ds.payload};
  try {
    auto rep = options_.fetcher->fetch(ds.url, options_.fetch_timeout);
    if (rep.media_type.empty()) rep.media_type = ds.media_type;
    return rep;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::dissemination) throw;
    throw Error(ErrorCode::dissemination, "fetch " + ds.url + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::dissemination, "fetch " + ds.url + ": " + e.what());
  }
}

namespace {

struct Contributor {
  ObjectId pid;
  Timestamp datestamp;
  xml::Element record;
};

bool single_valued(const xml::Element& e) {
  return e.ns == dc::kDcNs && (e.name == "title" || e.name == "identifier" || e.name == "date");
}

bool same_key(const xml::Element& a, const xml::Element& b) { return a.ns == b.ns && a.name == b.name; }

// Folds `later` into `out` element-wise.
void fold_into(std::vector<xml::Element>& out, const std::vector<xml::Element>& later) {
  std::vector<bool> done(later.size(), false);
  for (std::size_t i = 0; i < later.size(); ++i) {
    const auto& e = later[i];
    if (done[i]) continue;
    if (single_valued(e)) {
      std::vector<xml::Element> group;
      for (std::size_t j = i; j < later.size(); ++j)
        if (same_key(later[j], e)) {
          group.push_back(later[j]);
          done[j] = true;
        }
      auto first = std::find_if(out.begin(), out.end(), [&](const xml::Element& x) { return same_key(x, e); });
      std::size_t pos = static_cast<std::size_t>(first - out.begin());
      std::erase_if(out, [&](const xml::Element& x) { return same_key(x, e); });
      out.insert(out.begin() + static_cast<std::ptrdiff_t>(std::min(pos, out.size())), group.begin(), group.end());
      continue;
    }
    done[i] = true;
    bool seen = std::any_of(out.begin(), out.end(), [&](const xml::Element& x) { return same_key(x, e) && x.text == e.text; });
    if (seen) continue;
    auto last = std::find_if(out.rbegin(), out.rend(), [&](const xml::Element& x) { return same_key(x, e); });
    if (last == out.rend()) out.push_back(e);
    else out.insert(last.base(), e);
  }
}

}  // namespace

GoldRecord ContentModel::get_gold(ObjectId pid) const {
  auto v = store_.view();
  require(v, pid, EntityType::Content);
  std::map<ObjectId, Contributor> records;
  for (auto m : v.graph().subjects_of(rel::metadataFor, pid)) {
    const auto& obj = v.get(m);
    if (!obj.active() || !obj.binds(Behavior::Metadata)) continue;
    auto rec = record_in(obj, dc::kNsdlDc);
    if (!rec) continue;
    records.emplace(m, Contributor{m, rec->source_datestamp, xml::parse(rec->xml)});
  }
  if (records.empty()) throw Error(ErrorCode::no_metadata, pid.str() + " has no nsdl_dc-capable metadata");

  // (a augments b) orders b before a.
  std::map<ObjectId, std::vector<ObjectId>> augmenters;
  std::map<ObjectId, std::size_t> pending;
  for (const auto& [a, c] : records) {
    pending[a];
    for (auto b : v.graph().objects_of(a, rel::augments)) {
      if (!records.count(b)) continue;
      augmenters[b].push_back(a);
      ++pending[a];
    }
  }
  using Key = std::tuple<Timestamp, ObjectId>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> ready;
  for (const auto& [m, n] : pending)
    if (n == 0) ready.emplace(records.at(m).datestamp, m);
  std::vector<ObjectId> order;
  while (!ready.empty()) {
    auto [ts, m] = ready.top();
    ready.pop();
    order.push_back(m);
    for (auto a : augmenters[m])
      if (--pending[a] == 0) ready.emplace(records.at(a).datestamp, a);
  }
  if (order.size() != records.size()) {
    // Every leftover node augments another leftover node; walking those edges
    // must revisit a node.
    ObjectId start;
    for (const auto& [m, n] : pending)
      if (n > 0) {
        start = m;
        break;
      }
    std::vector<ObjectId> path;
    std::map<ObjectId, std::size_t> at;
    ObjectId cur = start;
    while (!at.count(cur)) {
      at[cur] = path.size();
      path.push_back(cur);
      for (auto b : v.graph().objects_of(cur, rel::augments))
        if (records.count(b) && pending[b] > 0) {
          cur = b;
          break;
        }
    }
    std::vector<std::string> cycle;
    for (std::size_t i = at[cur]; i < path.size(); ++i) cycle.push_back(path[i].str());
    cycle.push_back(cur.str());
    std::string joined;
    for (const auto& s : cycle) joined += (joined.empty() ? "" : " augments ") + s;
    throw Error(ErrorCode::model_integrity, "augments cycle: " + joined, cycle);
  }

  xml::Element root = records.at(order.front()).record;
  for (std::size_t i = 1; i < order.size(); ++i) fold_into(root.children, records.at(order[i]).record.children);
  return GoldRecord{xml::canonical(root), order};
}

std::string ContentModel::gold_document(const GoldRecord& gold) {
  xml::Element root = xml::parse(gold.xml);
  xml::Element trailer("", "contributors");
  for (auto pid : gold.contributors) trailer.add_text_child("", "", "pid", pid.str());
  root.add(std::move(trailer));
  return xml::canonical(root);
}

// ---------------------------------------------------------------------------
// Roles

Brand ContentModel::get_brand(ObjectId pid) const {
  auto v = store_.view();
  require(v, pid, EntityType::Role);
  return brand_in(v, pid);
}

std::vector<ObjectId> ContentModel::list_members(ObjectId pid, std::size_t offset, std::size_t limit) const {
  auto v = store_.view();
  require(v, pid, EntityType::Aggregator);
  return v.graph().subjects_of(rel::memberOf, pid, offset, limit);
}

ObjectId ContentModel::get_representation(ObjectId pid) const {
  auto v = store_.view();
  require(v, pid, EntityType::Aggregator);
  auto targets = v.graph().objects_of(pid, rel::representedBy);
  if (targets.empty()) throw Error(ErrorCode::not_represented, pid.str() + " has no representedBy edge");
  if (targets.size() > 1)
    throw Error(ErrorCode::model_integrity, pid.str() + " has " + std::to_string(targets.size()) + " representedBy edges");
  return targets.front();
}

std::vector<ObjectId> ContentModel::list_provided(ObjectId pid, std::size_t offset, std::size_t limit) const {
  auto v = store_.view();
  require(v, pid, EntityType::MetadataProvider);
  return v.graph().subjects_of(rel::providedBy, pid, offset, limit);
}

}  // namespace overlay
