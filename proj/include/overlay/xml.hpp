#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Minimal namespace-aware XML tree used for every document the repository
// handles: canonical object XML, RDF fragments, Dublin Core records and
// OAI-PMH messages. Mixed content is flattened: an element's character data is
// kept in `text`, and whitespace-only text inside elements that have element
// children is dropped at parse time.
namespace overlay::xml {

inline constexpr std::string_view kXsiNs = "http://www.w3.org/2001/XMLSchema-instance";
inline constexpr std::string_view kXmlNs = "http://www.w3.org/XML/1998/namespace";

struct Attribute {
  std::string ns;
  std::string name;
  std::string prefix;
  std::string value;
  // Namespace of the prefix inside a QName-valued attribute (xsi:type="dct:W3CDTF"),
  // resolved at parse time so the binding survives re-serialization.
  std::string value_ns;
};

struct Element {
  std::string ns;
  std::string name;
  std::string prefix;
  std::vector<Attribute> attributes;
  std::vector<Element> children;
  std::string text;

  Element() = default;
  Element(std::string ns_uri, std::string local, std::string pfx = {})
      : ns(std::move(ns_uri)), name(std::move(local)), prefix(std::move(pfx)) {}

  bool is(std::string_view ns_uri, std::string_view local) const { return ns == ns_uri && name == local; }

  const Attribute* find_attribute(std::string_view ns_uri, std::string_view local) const;
  /// Unqualified attribute lookup.
  std::optional<std::string> attribute(std::string_view local) const;
  void set_attribute(std::string local, std::string value);
  void set_attribute(std::string ns_uri, std::string prefix, std::string local, std::string value);

  const Element* child(std::string_view ns_uri, std::string_view local) const;
  /// First child with this local name in any namespace.
  const Element* child_local(std::string_view local) const;
  std::vector<const Element*> children_named(std::string_view ns_uri, std::string_view local) const;

  Element& add(Element child);
  Element& add_text_child(std::string ns_uri, std::string prefix, std::string local, std::string value);
};

/// Throws Error(parse_error) with "line L, column C: reason".
Element parse(std::string_view document);

struct WriteOptions {
  bool declaration = true;
  bool indent = false;
  bool sort_attributes = false;
};

std::string write(const Element& root, const WriteOptions& options = {});

/// Deterministic form used for byte comparisons: declaration, no indentation,
/// attributes sorted by (namespace, name), namespaces declared where first used.
std::string canonical(const Element& root);
std::string canonicalize(std::string_view document);

std::string escape_text(std::string_view s);

}  // namespace overlay::xml
