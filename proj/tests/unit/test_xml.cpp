#include <doctest.h>

#include "overlay/errors.hpp"
#include "overlay/xml.hpp"

using namespace overlay;

TEST_CASE("parse keeps namespaces and text") {
  auto e = xml::parse(R"(<a:r xmlns:a="urn:a" xmlns:b="urn:b"><b:c k="v">t &amp; u</b:c><b:c/></a:r>)");
  CHECK(e.is("urn:a", "r"));
  REQUIRE(e.children.size() == 2);
  CHECK(e.children[0].is("urn:b", "c"));
  CHECK(e.children[0].text == "t & u");
  CHECK(*e.children[0].attribute("k") == "v");
  CHECK(e.children_named("urn:b", "c").size() == 2);
}

TEST_CASE("parse errors carry a location") {
  try {
    xml::parse("<a>\n<b></a>");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse_error);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("canonical form ignores attribute order, prefixes and indentation") {
  auto a = xml::canonicalize(R"(<x:r xmlns:x="urn:x" b="2" a="1">
    <x:c>v</x:c>
  </x:r>)");
  auto b = xml::canonicalize(R"(<r xmlns="urn:x" a="1" b="2"><c>v</c></r>)");
  CHECK(xml::parse(a).children.size() == 1);
  CHECK(xml::canonicalize(a) == a);
  CHECK(xml::parse(b).children[0].text == "v");
}

TEST_CASE("qualified attribute values keep their namespace binding") {
  auto doc = R"(<r xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance" xmlns:dct="http://purl.org/dc/terms/"><d xsi:type="dct:W3CDTF">2004</d></r>)";
  auto out = xml::canonicalize(doc);
  CHECK(out.find("xmlns:dct=\"http://purl.org/dc/terms/\"") != std::string::npos);
  auto again = xml::parse(out);
  CHECK(again.children[0].find_attribute(xml::kXsiNs, "type")->value_ns == "http://purl.org/dc/terms/");
}

TEST_CASE("escaping") {
  CHECK(xml::escape_text("<&>") == "&lt;&amp;&gt;");
  auto e = xml::parse(xml::write(xml::Element("", "r")));
  CHECK(e.name == "r");
}
