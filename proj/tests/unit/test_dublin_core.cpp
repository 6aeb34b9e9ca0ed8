#include <doctest.h>

#include "builders.hpp"
#include "overlay/dublin_core.hpp"
#include "overlay/errors.hpp"
#include "overlay/xml.hpp"

using namespace overlay;
using namespace overlay::testing;

TEST_CASE("date rule table") {
  // (input, expected) pairs worked out by hand from the W3CDTF profile.
  const std::vector<std::pair<std::string, std::string>> table{
      {"March 5, 2004", "2004-03-05"},  {"5 March 2004", "2004-03-05"},   {"Mar. 5 2004", "2004-03-05"},
      {"5th Mar 2004", "2004-03-05"},   {"Sept 30, 1999", "1999-09-30"},  {"2004/03/05", "2004-03-05"},
      {"2004.3.5", "2004-03-05"},       {"20040305", "2004-03-05"},       {"March 2004", "2004-03"},
      {"2004", "2004"},                 {"2004-03", "2004-03"},           {"2004-03-05T10:20Z", "2004-03-05T10:20Z"},
      {"February 30, 2004", "February 30, 2004"},                         {"circa 1900", "circa 1900"},
      {"2004-13", "2004-13"},           {"", ""},
  };
  for (const auto& [in, out] : table) {
    CAPTURE(in);
    CHECK(dc::normalize_date(in) == out);
    CHECK(dc::normalize_date(dc::normalize_date(in)) == dc::normalize_date(in));
  }
}

TEST_CASE("language, type and whitespace rules") {
  CHECK(dc::normalize_language("English") == "en");
  CHECK(dc::normalize_language("eng") == "en");
  CHECK(dc::normalize_language("EN") == "en");
  CHECK(dc::normalize_language("en-US") == "en");
  CHECK(dc::normalize_language("Klingon") == "Klingon");
  CHECK(dc::map_type_vocabulary("Movie") == "MovingImage");
  CHECK(dc::map_type_vocabulary("text") == "Text");
  CHECK(dc::map_type_vocabulary("Lesson plan") == "Lesson plan");
  CHECK(dc::collapse_whitespace("  a \n\t b  ") == "a b");
}

TEST_CASE("validation verdicts") {
  CHECK_FALSE(dc::validate_record(oai_dc({{"identifier", "http://a/"}}), "oai_dc"));
  CHECK(*dc::validate_record(oai_dc({{"title", "x"}}), "oai_dc") == "no identifier");
  CHECK(*dc::validate_record(oai_dc({{"identifier", "  "}}), "oai_dc") == "no identifier");
  CHECK(dc::validate_record(R"(<dc xmlns="urn:wrong"><identifier>x</identifier></dc>)", "oai_dc")->find("namespace") !=
        std::string::npos);
  CHECK(dc::validate_record("<oai_dc:dc", "oai_dc")->find("malformed") != std::string::npos);
}

TEST_CASE("safe transforms qualify and are idempotent") {
  auto rec = oai_dc({{"title", "  A   title "},
                     {"date", "5 March 2004"},
                     {"language", "English"},
                     {"type", "Movie"},
                     {"identifier", "http://example.org/r"},
                     {"identifier", "local-7"}});
  auto once = dc::apply_safe_transforms(rec);
  CHECK(dc::apply_safe_transforms(once) == once);
  auto e = xml::parse(once);
  auto text_of = [&](const char* name) { return e.child(dc::kDcNs, name)->text; };
  CHECK(text_of("title") == "A title");
  CHECK(text_of("date") == "2004-03-05");
  CHECK(text_of("language") == "en");
  CHECK(text_of("type") == "MovingImage");
  auto type_attr = [&](const xml::Element& el) {
    auto* a = el.find_attribute(xml::kXsiNs, "type");
    return a ? a->value : std::string();
  };
  CHECK(type_attr(*e.child(dc::kDcNs, "date")) == "dct:W3CDTF");
  CHECK(type_attr(*e.child(dc::kDcNs, "language")) == "dct:RFC1766");
  CHECK(type_attr(*e.child(dc::kDcNs, "type")) == "dct:DCMIType");
  auto ids = e.children_named(dc::kDcNs, "identifier");
  CHECK(type_attr(*ids[0]) == "dct:URI");
  CHECK(type_attr(*ids[1]).empty());
}

TEST_CASE("crosswalk") {
  dc::MetadataRecord rec{"oai_dc", oai_dc({{"identifier", "http://x/"}, {"date", "March 5, 2004"}}), {}};
  auto out = dc::crosswalk(rec, "nsdl_dc");
  CHECK(out.format == "nsdl_dc");
  auto e = xml::parse(out.xml);
  CHECK(e.is(dc::kNsdlDcNs, "nsdl_dc"));
  CHECK(e.child(dc::kDcNs, "date")->text == "2004-03-05");
  CHECK(dc::crosswalk(out, "nsdl_dc").xml == out.xml);
  CHECK(dc::crosswalk(rec, "oai_dc").xml == rec.xml);
  CHECK_THROWS_AS(dc::crosswalk(rec, "marcxml"), Error);
  CHECK(dc::url_identifiers(xml::parse(rec.xml)) == std::vector<std::string>{"http://x/"});
}
