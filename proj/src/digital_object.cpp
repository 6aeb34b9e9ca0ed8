#include "overlay/digital_object.hpp"

#include <boost/beast/core/detail/base64.hpp>

#include <cctype>
#include <charconv>

#include "overlay/errors.hpp"
#include "overlay/xml.hpp"

namespace overlay {

Datastream Datastream::local(std::string id, std::string media_type, std::string payload, Timestamp created) {
  return Datastream{std::move(id), DatastreamKind::local, std::move(media_type), std::move(payload), {}, created};
}

Datastream Datastream::remote(std::string id, std::string media_type, std::string url, Timestamp created) {
  return Datastream{std::move(id), DatastreamKind::remote, std::move(media_type), {}, std::move(url), created};
}

const Datastream* DigitalObject::datastream(std::string_view id) const {
  auto it = datastreams.find(std::string(id));
  return it == datastreams.end() ? nullptr : &it->second;
}

void DigitalObject::put_datastream(Datastream ds) {
  auto id = ds.id;
  datastreams.insert_or_assign(std::move(id), std::move(ds));
}

std::string DigitalObject::rels() const {
  const auto* ds = datastream(kRelsId);
  return ds ? ds->payload : std::string();
}

DigitalObject DigitalObject::tombstone() const {
  DigitalObject t;
  t.pid = pid;
  t.handle = handle;
  t.state = ObjectState::deleted;
  t.last_modified = last_modified;
  t.version = version;
  return t;
}

namespace {

bool absolute_url(std::string_view url) {
  auto colon = url.find("://");
  if (colon == std::string_view::npos || colon == 0) return false;
  for (char c : url.substr(0, colon))
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '.' && c != '-') return false;
  return colon + 3 < url.size();
}

}  // namespace

std::vector<std::string> structural_problems(const DigitalObject& obj) {
  std::vector<std::string> out;
  if (!obj.active()) {
    if (!obj.datastreams.empty() || !obj.behaviors.empty())
      out.push_back(obj.pid.str() + ": deleted objects carry no datastreams or behaviors");
    return out;
  }
  for (const auto& [id, ds] : obj.datastreams) {
    if (id != ds.id) out.push_back("datastream key " + id + " does not match its id " + ds.id);
    if (id.empty()) out.push_back("datastream with empty id");
    if (ds.media_type.empty()) out.push_back("datastream " + id + " has no media type");
    if (ds.kind == DatastreamKind::local && !ds.url.empty())
      out.push_back("local datastream " + id + " must not carry a url");
    if (ds.kind == DatastreamKind::remote) {
      if (!ds.payload.empty()) out.push_back("remote datastream " + id + " must not carry a payload");
      if (!absolute_url(ds.url)) out.push_back("remote datastream " + id + " needs an absolute url");
    }
    if (id == kRelsId && (ds.kind != DatastreamKind::local || ds.media_type != kRelsMediaType))
      out.push_back("RELS must be a local application/rdf+xml datastream");
  }
  for (const auto& b : obj.behaviors)
    if (!parse_behavior(b)) out.push_back("unknown behavior definition " + b);
  if (obj.handle && !has_type(obj.behavior_set(), EntityType::Resource))
    out.push_back(obj.pid.str() + ": only Agent or Content objects carry handles");
  return out;
}

std::string base64_encode(std::string_view bytes) {
  namespace b64 = boost::beast::detail::base64;
  std::string out(b64::encoded_size(bytes.size()), '\0');
  out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
  return out;
}

std::string base64_decode(std::string_view text) {
  namespace b64 = boost::beast::detail::base64;
  std::string compact;
  compact.reserve(text.size());
  for (char c : text)
    if (c != ' ' && c != '\n' && c != '\r' && c != '\t') compact += c;
  std::string out(b64::decoded_size(compact.size()) + 3, '\0');
  auto [written, read] = b64::decode(out.data(), compact.data(), compact.size());
  for (std::size_t i = read; i < compact.size(); ++i)
    if (compact[i] != '=') throw Error(ErrorCode::parse_error, "invalid base64 payload");
  out.resize(written);
  return out;
}

std::string export_xml(const DigitalObject& obj) {
  xml::Element root("", "digitalObject");
  root.set_attribute("pid", obj.pid.str());
  root.set_attribute("state", obj.active() ? "active" : "deleted");
  root.set_attribute("version", std::to_string(obj.version));
  root.set_attribute("lastModified", format_timestamp(obj.last_modified));
  if (obj.handle) root.set_attribute("handle", obj.handle->str());
  if (obj.active()) {
    for (const auto& [id, ds] : obj.datastreams) {
      if (id == kRelsId) continue;
      xml::Element e("", "datastream");
      e.set_attribute("dsId", id);
      e.set_attribute("kind", ds.kind == DatastreamKind::local ? "local" : "remote");
      e.set_attribute("mediaType", ds.media_type);
      if (ds.kind == DatastreamKind::remote) e.set_attribute("url", ds.url);
      e.set_attribute("created", format_timestamp(ds.created));
      if (ds.kind == DatastreamKind::local) e.text = base64_encode(ds.payload);
      root.add(std::move(e));
    }
    for (const auto& b : obj.behaviors) {
      xml::Element e("", "behavior");
      e.set_attribute("name", b);
      root.add(std::move(e));
    }
    if (const auto* rels = obj.datastream(kRelsId)) {
      xml::Element e("", "rels");
      e.set_attribute("created", format_timestamp(rels->created));
      if (!rels->payload.empty()) e.add(xml::parse(rels->payload));
      root.add(std::move(e));
    }
  }
  xml::WriteOptions opt;
  opt.indent = true;
  return xml::write(root, opt);
}

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::parse_error, where + ": " + what);
}

std::string required(const xml::Element& e, const std::string& where, std::string_view name) {
  auto v = e.attribute(name);
  if (!v) bad(where, "missing attribute " + std::string(name));
  return *v;
}

Timestamp required_time(const xml::Element& e, const std::string& where, std::string_view name) {
  auto t = parse_timestamp(required(e, where, name));
  if (!t) bad(where, "bad timestamp in " + std::string(name));
  return *t;
}

}  // namespace

DigitalObject import_xml(std::string_view document) {
  auto root = xml::parse(document);
  const std::string where = "digitalObject";
  if (!root.is("", "digitalObject")) bad("/", "root element must be digitalObject");
  DigitalObject obj;
  auto pid = ObjectId::parse(required(root, where, "pid"));
  if (!pid) bad(where, "malformed pid");
  obj.pid = *pid;
  auto state = required(root, where, "state");
  if (state != "active" && state != "deleted") bad(where, "state must be active or deleted");
  obj.state = state == "active" ? ObjectState::active : ObjectState::deleted;
  auto version = required(root, where, "version");
  auto [p, ec] = std::from_chars(version.data(), version.data() + version.size(), obj.version);
  if (ec != std::errc{} || p != version.data() + version.size()) bad(where, "bad version");
  obj.last_modified = required_time(root, where, "lastModified");
  if (auto h = root.attribute("handle")) {
    obj.handle = HandleId::parse(*h);
    if (!obj.handle) bad(where, "malformed handle");
  }
  int n = 0;
  for (const auto& child : root.children) {
    std::string at = where + "/" + child.name + "[" + std::to_string(++n) + "]";
    if (!obj.active()) bad(at, "deleted objects have no children");
    if (child.is("", "datastream")) {
      Datastream ds;
      ds.id = required(child, at, "dsId");
      auto kind = required(child, at, "kind");
      if (kind != "local" && kind != "remote") bad(at, "kind must be local or remote");
      ds.kind = kind == "local" ? DatastreamKind::local : DatastreamKind::remote;
      ds.media_type = required(child, at, "mediaType");
      ds.created = required_time(child, at, "created");
      if (ds.kind == DatastreamKind::remote) {
        ds.url = required(child, at, "url");
        if (!child.text.empty()) bad(at, "remote datastream has a payload");
      } else {
        if (child.attribute("url")) bad(at, "local datastream has a url");
        try {
          ds.payload = base64_decode(child.text);
        } catch (const Error&) {
          bad(at, "payload is not base64");
        }
      }
      if (ds.id == kRelsId) bad(at, "RELS belongs in the rels element");
      if (obj.datastreams.count(ds.id)) bad(at, "duplicate datastream " + ds.id);
      obj.put_datastream(std::move(ds));
    } else if (child.is("", "behavior")) {
      obj.behaviors.insert(required(child, at, "name"));
    } else if (child.is("", "rels")) {
      if (obj.datastream(kRelsId)) bad(at, "duplicate rels");
      if (child.children.size() > 1) bad(at, "rels holds a single rdf:RDF element");
      std::string payload = child.children.empty() ? std::string() : xml::canonical(child.children.front());
      obj.put_datastream(Datastream::local(std::string(kRelsId), std::string(kRelsMediaType), std::move(payload),
                                           required_time(child, at, "created")));
    } else {
      bad(at, "unexpected element");
    }
  }
  return obj;
}

}  // namespace overlay
