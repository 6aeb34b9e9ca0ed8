#include "overlay/oai.hpp"

#include <httplib.h>

#include <regex>

#include "overlay/errors.hpp"

namespace overlay::oai {

std::optional<Timestamp> parse_datestamp(std::string_view text) {
  if (text.size() == 10) return parse_timestamp(std::string(text) + "T00:00:00Z");
  return parse_timestamp(text);
}

namespace {

Record parse_header(const xml::Element& header) {
  Record r;
  if (const auto* id = header.child_local("identifier")) r.identifier = id->text;
  if (const auto* ds = header.child_local("datestamp"))
    if (auto t = parse_datestamp(ds->text)) r.datestamp = *t;
  r.deleted = header.attribute("status") == "deleted";
  for (const auto& c : header.children)
    if (c.name == "setSpec") r.sets.push_back(c.text);
  return r;
}

Record parse_record(const xml::Element& record) {
  Record r;
  if (const auto* header = record.child_local("header")) r = parse_header(*header);
  if (const auto* md = record.child_local("metadata"); md && md->children.size() == 1)
    r.metadata = xml::canonical(md->children.front());
  return r;
}

}  // namespace

Page parse_response(std::string_view body) {
  Page page;
  page.root = xml::parse(body);
  if (page.root.name != "OAI-PMH") throw Error(ErrorCode::parse_error, "not an OAI-PMH response: <" + page.root.name + ">");
  if (const auto* err = page.root.child_local("error")) {
    page.error = ProtocolError{err->attribute("code").value_or(""), err->text};
    return page;
  }
  for (const auto& verb : page.root.children) {
    if (verb.name == "ListRecords" || verb.name == "GetRecord") {
      for (const auto& c : verb.children)
        if (c.name == "record") page.records.push_back(parse_record(c));
    } else if (verb.name == "ListIdentifiers") {
      for (const auto& c : verb.children)
        if (c.name == "header") page.records.push_back(parse_header(c));
    } else {
      continue;
    }
    if (const auto* token = verb.child_local("resumptionToken"); token && !token->text.empty())
      page.resumption_token = token->text;
  }
  return page;
}

std::string HttpTransport::get(const std::string& base_url, const Params& params) {
  static const std::regex url_re(R"(^(https?://[^/?#]+)([^?#]*))");
  std::smatch m;
  if (!std::regex_search(base_url, m, url_re)) throw Error(ErrorCode::invalid_argument, "unsupported base URL " + base_url);
  httplib::Client client(m[1].str());
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_follow_location(true);
  std::string path = m[2].length() ? m[2].str() : "/";
  httplib::Params query(params.begin(), params.end());
  auto res = client.Get(path, query, httplib::Headers{});
  if (!res) throw Error(ErrorCode::dissemination, "GET " + base_url + ": " + httplib::to_string(res.error()));
  if (res->status != 200) throw Error(ErrorCode::dissemination, "GET " + base_url + ": HTTP " + std::to_string(res->status));
  return res->body;
}

Page Client::call(const Params& params) { return parse_response(transport_->get(base_url_, params)); }

xml::Element Client::identify() {
  auto page = call({{"verb", "Identify"}});
  if (page.error) throw Error(ErrorCode::dissemination, "Identify: " + page.error->code);
  const auto* id = page.root.child_local("Identify");
  if (!id) throw Error(ErrorCode::parse_error, "Identify response has no <Identify>");
  return *id;
}

std::vector<std::string> Client::list_metadata_formats(const std::optional<std::string>& identifier) {
  Params p{{"verb", "ListMetadataFormats"}};
  if (identifier) p["identifier"] = *identifier;
  auto page = call(p);
  if (page.error) throw Error(ErrorCode::dissemination, "ListMetadataFormats: " + page.error->code);
  std::vector<std::string> out;
  if (const auto* list = page.root.child_local("ListMetadataFormats"))
    for (const auto& f : list->children)
      if (const auto* prefix = f.child_local("metadataPrefix")) out.push_back(prefix->text);
  return out;
}

Page Client::list_records(std::string_view prefix, std::optional<Timestamp> from, std::optional<Timestamp> until,
                          const std::optional<std::string>& set) {
  Params p{{"verb", "ListRecords"}, {"metadataPrefix", std::string(prefix)}};
  if (from) p["from"] = format_timestamp(*from);
  if (until) p["until"] = format_timestamp(*until);
  if (set) p["set"] = *set;
  return call(p);
}

Page Client::resume(std::string_view verb, std::string_view token) {
  return call({{"verb", std::string(verb)}, {"resumptionToken", std::string(token)}});
}

Page Client::get_record(std::string_view identifier, std::string_view prefix) {
  return call({{"verb", "GetRecord"}, {"identifier", std::string(identifier)}, {"metadataPrefix", std::string(prefix)}});
}

}  // namespace overlay::oai
