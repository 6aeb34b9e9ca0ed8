#include "overlay/dublin_core.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <map>
#include <mutex>
#include <regex>

#include "overlay/errors.hpp"

namespace overlay::dc {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool valid_ymd(int y, unsigned m, unsigned d) {
  using namespace std::chrono;
  return year_month_day{year{y}, month{m}, day{d}}.ok();
}

std::string pad(int v, int width) {
  std::string s = std::to_string(v);
  return std::string(width > static_cast<int>(s.size()) ? width - s.size() : 0, '0') + s;
}

std::string ymd(int y, unsigned m, unsigned d) { return pad(y, 4) + "-" + pad(int(m), 2) + "-" + pad(int(d), 2); }

unsigned month_number(std::string_view name) {
  static const std::array<std::string_view, 12> names{"january", "february", "march",     "april",   "may",      "june",
                                                      "july",    "august",   "september", "october", "november", "december"};
  std::string n = lower(name);
  if (!n.empty() && n.back() == '.') n.pop_back();
  if (n == "sept") n = "sep";
  for (unsigned i = 0; i < names.size(); ++i) {
    if (n == names[i]) return i + 1;
    if (n.size() == 3 && names[i].substr(0, 3) == n) return i + 1;
  }
  return 0;
}

const std::regex& re(const char* pattern) {
  // Patterns are string literals; one compiled instance per literal.
  static std::map<const char*, std::regex> cache;
  static std::mutex mutex;
  std::lock_guard lock(mutex);
  auto it = cache.find(pattern);
  if (it == cache.end()) it = cache.emplace(pattern, std::regex(pattern, std::regex::ECMAScript)).first;
  return it->second;
}

bool is_date_element(const xml::Element& e) {
  if (e.is(kDcNs, "date")) return true;
  static const std::array<std::string_view, 9> refinements{"created",       "issued",          "modified",
                                                           "available",     "dateAccepted",    "dateCopyrighted",
                                                           "dateSubmitted", "valid",           "date"};
  if (e.ns != kDctNs) return false;
  return std::find(refinements.begin(), refinements.end(), e.name) != refinements.end();
}

bool has_xsi_type(const xml::Element& e) { return e.find_attribute(xml::kXsiNs, "type") != nullptr; }

void add_xsi_type(xml::Element& e, std::string_view term) {
  e.attributes.push_back(xml::Attribute{std::string(xml::kXsiNs), "type", "xsi", "dct:" + std::string(term),
                                        std::string(kDctNs)});
}

}  // namespace

std::optional<std::string_view> root_namespace(std::string_view format) {
  if (format == kOaiDc) return kOaiDcNs;
  if (format == kNsdlDc) return kNsdlDcNs;
  return std::nullopt;
}

std::optional<std::string> validate_record(std::string_view document, std::string_view format) {
  xml::Element root;
  try {
    root = xml::parse(document);
  } catch (const Error& e) {
    return std::string("malformed XML: ") + e.what();
  }
  auto expected = root_namespace(format);
  if (!expected) return std::nullopt;
  if (root.ns != *expected) return "wrong root namespace \"" + root.ns + "\" for " + std::string(format);
  for (const auto* id : root.children_named(kDcNs, "identifier"))
    if (!trim(id->text).empty()) return std::nullopt;
  return "no identifier";
}

std::string collapse_whitespace(std::string_view value) {
  std::string out;
  bool space = false;
  for (char c : value) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += c;
  }
  return out;
}

bool is_w3cdtf(std::string_view value) {
  std::string v(value);
  std::smatch m;
  if (std::regex_match(v, m, re(R"(^(\d{4})$)"))) return true;
  if (std::regex_match(v, m, re(R"(^(\d{4})-(\d{2})$)"))) {
    int mo = std::stoi(m[2]);
    return mo >= 1 && mo <= 12;
  }
  if (std::regex_match(v, m,
                       re(R"(^(\d{4})-(\d{2})-(\d{2})(T([01]\d|2[0-3]):[0-5]\d(:[0-5]\d(\.\d+)?)?(Z|[+-]([01]\d|2[0-3]):[0-5]\d))?$)")))
    return valid_ymd(std::stoi(m[1]), unsigned(std::stoi(m[2])), unsigned(std::stoi(m[3])));
  return false;
}

std::string normalize_date(std::string_view value) {
  std::string v = trim(value);
  if (is_w3cdtf(v)) return v;
  std::smatch m;
  // March 5, 2004 / Mar. 5 2004
  if (std::regex_match(v, m, re(R"(^([A-Za-z]+\.?)\s+(\d{1,2})(st|nd|rd|th)?,?\s+(\d{4})$)"))) {
    unsigned mo = month_number(m[1].str());
    int y = std::stoi(m[4]);
    unsigned d = unsigned(std::stoi(m[2]));
    if (mo && valid_ymd(y, mo, d)) return ymd(y, mo, d);
  }
  // 5 March 2004 / 5 Mar, 2004
  if (std::regex_match(v, m, re(R"(^(\d{1,2})(st|nd|rd|th)?\s+([A-Za-z]+\.?),?\s+(\d{4})$)"))) {
    unsigned mo = month_number(m[3].str());
    int y = std::stoi(m[4]);
    unsigned d = unsigned(std::stoi(m[1]));
    if (mo && valid_ymd(y, mo, d)) return ymd(y, mo, d);
  }
  // March 2004
  if (std::regex_match(v, m, re(R"(^([A-Za-z]+\.?),?\s+(\d{4})$)"))) {
    if (unsigned mo = month_number(m[1].str())) return pad(std::stoi(m[2]), 4) + "-" + pad(int(mo), 2);
  }
  // 2004/03/05, 2004.3.5, 2004-3-5
  if (std::regex_match(v, m, re(R"(^(\d{4})[-/.](\d{1,2})[-/.](\d{1,2})$)"))) {
    int y = std::stoi(m[1]);
    unsigned mo = unsigned(std::stoi(m[2]));
    unsigned d = unsigned(std::stoi(m[3]));
    if (valid_ymd(y, mo, d)) return ymd(y, mo, d);
  }
  // 20040305
  if (std::regex_match(v, m, re(R"(^(\d{4})(\d{2})(\d{2})$)"))) {
    int y = std::stoi(m[1]);
    unsigned mo = unsigned(std::stoi(m[2]));
    unsigned d = unsigned(std::stoi(m[3]));
    if (valid_ymd(y, mo, d)) return ymd(y, mo, d);
  }
  return std::string(value);
}

std::string normalize_language(std::string_view value) {
  static const std::map<std::string, std::string> table{
      {"english", "en"},   {"eng", "en"},     {"french", "fr"},    {"fre", "fr"},    {"fra", "fr"},
      {"german", "de"},    {"ger", "de"},     {"deu", "de"},       {"spanish", "es"}, {"spa", "es"},
      {"italian", "it"},   {"ita", "it"},     {"portuguese", "pt"}, {"por", "pt"},    {"russian", "ru"},
      {"rus", "ru"},       {"japanese", "ja"}, {"jpn", "ja"},      {"chinese", "zh"}, {"chi", "zh"},
      {"zho", "zh"},       {"arabic", "ar"},  {"ara", "ar"},       {"korean", "ko"}, {"kor", "ko"},
      {"dutch", "nl"},     {"dut", "nl"},     {"nld", "nl"},       {"latin", "la"},  {"lat", "la"},
      {"greek", "el"},     {"gre", "el"},     {"ell", "el"},       {"hindi", "hi"},  {"hin", "hi"},
      {"swedish", "sv"},   {"swe", "sv"},     {"polish", "pl"},    {"pol", "pl"},
  };
  std::string v = lower(trim(value));
  if (auto it = table.find(v); it != table.end()) return it->second;
  std::smatch m;
  if (std::regex_match(v, m, re(R"(^([a-z]{2})([-_][a-z0-9]{1,8})*$)"))) return m[1].str();
  return std::string(value);
}

namespace {

const std::array<std::string_view, 12> kDcmiTypes{"Collection",  "Dataset",       "Event",          "Image",
                                                  "InteractiveResource", "MovingImage", "PhysicalObject", "Service",
                                                  "Software",    "Sound",         "StillImage",     "Text"};

}  // namespace

bool is_dcmi_type(std::string_view value) {
  return std::find(kDcmiTypes.begin(), kDcmiTypes.end(), value) != kDcmiTypes.end();
}

std::string map_type_vocabulary(std::string_view value) {
  static const std::map<std::string, std::string> table{
      {"movie", "MovingImage"},       {"video", "MovingImage"},
      {"film", "MovingImage"},        {"animation", "MovingImage"},
      {"photograph", "StillImage"},   {"photo", "StillImage"},
      {"picture", "StillImage"},      {"illustration", "StillImage"},
      {"audio", "Sound"},             {"data", "Dataset"},
      {"data set", "Dataset"},        {"program", "Software"},
      {"simulation", "InteractiveResource"}, {"interactive resource", "InteractiveResource"},
      {"applet", "InteractiveResource"},     {"article", "Text"},
      {"document", "Text"},           {"physical object", "PhysicalObject"},
      {"moving image", "MovingImage"}, {"still image", "StillImage"},
  };
  std::string key = lower(trim(value));
  for (auto term : kDcmiTypes)
    if (lower(term) == key) return std::string(term);
  if (auto it = table.find(key); it != table.end()) return it->second;
  return std::string(value);
}

bool is_absolute_url(std::string_view value) {
  std::string v(value);
  return std::regex_match(v, re(R"(^[A-Za-z][A-Za-z0-9+.-]*://[^\s/?#]+[^\s]*$)"));
}

bool is_rfc1766(std::string_view value) {
  std::string v(value);
  return std::regex_match(v, re(R"(^[A-Za-z]{1,8}(-[A-Za-z0-9]{1,8})*$)"));
}

xml::Element apply_safe_transforms(const xml::Element& record) {
  xml::Element out = record;
  for (auto& e : out.children) {
    if (e.ns != kDcNs && e.ns != kDctNs) continue;
    if (!e.children.empty()) continue;
    e.text = collapse_whitespace(e.text);
    if (is_date_element(e)) e.text = normalize_date(e.text);
    if (e.is(kDcNs, "language")) e.text = normalize_language(e.text);
    if (e.is(kDcNs, "type")) e.text = map_type_vocabulary(e.text);
    if (has_xsi_type(e) || e.text.empty()) continue;
    if (is_date_element(e) && is_w3cdtf(e.text)) add_xsi_type(e, "W3CDTF");
    else if (e.is(kDcNs, "identifier") && is_absolute_url(e.text)) add_xsi_type(e, "URI");
    else if (e.is(kDcNs, "type") && is_dcmi_type(e.text)) add_xsi_type(e, "DCMIType");
    else if (e.is(kDcNs, "language") && is_rfc1766(e.text)) add_xsi_type(e, "RFC1766");
  }
  return out;
}

std::string apply_safe_transforms(std::string_view document) {
  return xml::canonical(apply_safe_transforms(xml::parse(document)));
}

bool can_crosswalk(std::string_view from, std::string_view to) {
  return from == to || (from == kOaiDc && to == kNsdlDc);
}

MetadataRecord crosswalk(const MetadataRecord& record, std::string_view to_format) {
  if (record.format == to_format) return record;
  if (!can_crosswalk(record.format, to_format))
    throw Error(ErrorCode::format_unavailable,
                "no crosswalk from " + record.format + " to " + std::string(to_format));
  xml::Element source = xml::parse(record.xml);
  if (!source.is(kOaiDcNs, "dc"))
    throw Error(ErrorCode::format_unavailable, "record tagged oai_dc has root {" + source.ns + "}" + source.name);
  xml::Element transformed = apply_safe_transforms(source);
  xml::Element root(std::string(kNsdlDcNs), "nsdl_dc", "nsdl_dc");
  root.children = std::move(transformed.children);
  return MetadataRecord{std::string(to_format), xml::canonical(root), record.source_datestamp};
}

std::vector<std::string> url_identifiers(const xml::Element& record) {
  std::vector<std::string> out;
  for (const auto* id : record.children_named(kDcNs, "identifier")) {
    auto v = trim(id->text);
    if (is_absolute_url(v)) out.push_back(v);
  }
  return out;
}

}  // namespace overlay::dc
