#include "overlay/xml.hpp"

#include <expat.h>

#include <algorithm>
#include <map>
#include <memory>

#include "overlay/errors.hpp"

namespace overlay::xml {

const Attribute* Element::find_attribute(std::string_view ns_uri, std::string_view local) const {
  for (const auto& a : attributes)
    if (a.ns == ns_uri && a.name == local) return &a;
  return nullptr;
}

std::optional<std::string> Element::attribute(std::string_view local) const {
  if (const auto* a = find_attribute("", local)) return a->value;
  return std::nullopt;
}

void Element::set_attribute(std::string local, std::string value) {
  set_attribute({}, {}, std::move(local), std::move(value));
}

void Element::set_attribute(std::string ns_uri, std::string pfx, std::string local, std::string value) {
  for (auto& a : attributes) {
    if (a.ns == ns_uri && a.name == local) {
      a.value = std::move(value);
      return;
    }
  }
  attributes.push_back(Attribute{std::move(ns_uri), std::move(local), std::move(pfx), std::move(value), {}});
}

const Element* Element::child(std::string_view ns_uri, std::string_view local) const {
  for (const auto& c : children)
    if (c.is(ns_uri, local)) return &c;
  return nullptr;
}

const Element* Element::child_local(std::string_view local) const {
  for (const auto& c : children)
    if (c.name == local) return &c;
  return nullptr;
}

std::vector<const Element*> Element::children_named(std::string_view ns_uri, std::string_view local) const {
  std::vector<const Element*> out;
  for (const auto& c : children)
    if (c.is(ns_uri, local)) out.push_back(&c);
  return out;
}

Element& Element::add(Element child) {
  children.push_back(std::move(child));
  return children.back();
}

Element& Element::add_text_child(std::string ns_uri, std::string pfx, std::string local, std::string value) {
  Element e(std::move(ns_uri), std::move(local), std::move(pfx));
  e.text = std::move(value);
  return add(std::move(e));
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

constexpr char kSep = '\x1f';

struct SplitName {
  std::string ns, local, prefix;
};

SplitName split_name(const XML_Char* raw) {
  std::string_view s(raw);
  SplitName out;
  auto first = s.find(kSep);
  if (first == std::string_view::npos) {
    out.local = std::string(s);
    return out;
  }
  out.ns = std::string(s.substr(0, first));
  auto rest = s.substr(first + 1);
  auto second = rest.find(kSep);
  if (second == std::string_view::npos) {
    out.local = std::string(rest);
  } else {
    out.local = std::string(rest.substr(0, second));
    out.prefix = std::string(rest.substr(second + 1));
  }
  return out;
}

bool only_whitespace(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; });
}

struct ParseState {
  Element root;
  bool have_root = false;
  std::vector<Element*> stack;
  std::map<std::string, std::vector<std::string>> scopes;  // prefix -> uri stack

  std::string lookup(const std::string& prefix) const {
    auto it = scopes.find(prefix);
    if (it == scopes.end() || it->second.empty()) return {};
    return it->second.back();
  }
};

void XMLCALL on_start(void* user, const XML_Char* name, const XML_Char** atts) {
  auto* st = static_cast<ParseState*>(user);
  auto n = split_name(name);
  Element e(std::move(n.ns), std::move(n.local), std::move(n.prefix));
  for (int i = 0; atts[i]; i += 2) {
    auto an = split_name(atts[i]);
    Attribute a{std::move(an.ns), std::move(an.local), std::move(an.prefix), atts[i + 1], {}};
    if (a.ns == kXsiNs && a.name == "type") {
      auto colon = a.value.find(':');
      a.value_ns = st->lookup(colon == std::string::npos ? std::string() : a.value.substr(0, colon));
    }
    e.attributes.push_back(std::move(a));
  }
  if (st->stack.empty()) {
    st->root = std::move(e);
    st->have_root = true;
    st->stack.push_back(&st->root);
  } else {
    st->stack.push_back(&st->stack.back()->add(std::move(e)));
  }
}

void XMLCALL on_end(void* user, const XML_Char*) {
  auto* st = static_cast<ParseState*>(user);
  Element* e = st->stack.back();
  if (!e->children.empty() && only_whitespace(e->text)) e->text.clear();
  st->stack.pop_back();
}

void XMLCALL on_text(void* user, const XML_Char* s, int len) {
  auto* st = static_cast<ParseState*>(user);
  if (!st->stack.empty()) st->stack.back()->text.append(s, static_cast<std::size_t>(len));
}

void XMLCALL on_ns_start(void* user, const XML_Char* prefix, const XML_Char* uri) {
  auto* st = static_cast<ParseState*>(user);
  st->scopes[prefix ? prefix : ""].push_back(uri ? uri : "");
}

void XMLCALL on_ns_end(void* user, const XML_Char* prefix) {
  auto* st = static_cast<ParseState*>(user);
  auto& v = st->scopes[prefix ? prefix : ""];
  if (!v.empty()) v.pop_back();
}

struct ParserDeleter {
  void operator()(XML_Parser p) const { XML_ParserFree(p); }
};

}  // namespace

Element parse(std::string_view document) {
  std::unique_ptr<std::remove_pointer_t<XML_Parser>, ParserDeleter> parser(XML_ParserCreateNS("UTF-8", kSep));
  if (!parser) throw Error(ErrorCode::storage, "cannot allocate XML parser");
  ParseState state;
  XML_SetUserData(parser.get(), &state);
  XML_SetReturnNSTriplet(parser.get(), 1);
  XML_SetElementHandler(parser.get(), on_start, on_end);
  XML_SetCharacterDataHandler(parser.get(), on_text);
  XML_SetNamespaceDeclHandler(parser.get(), on_ns_start, on_ns_end);
  if (XML_Parse(parser.get(), document.data(), static_cast<int>(document.size()), XML_TRUE) == XML_STATUS_ERROR) {
    throw Error(ErrorCode::parse_error,
                "line " + std::to_string(XML_GetCurrentLineNumber(parser.get())) + ", column " +
                    std::to_string(XML_GetCurrentColumnNumber(parser.get())) + ": " +
                    XML_ErrorString(XML_GetErrorCode(parser.get())));
  }
  if (!state.have_root) throw Error(ErrorCode::parse_error, "line 1, column 0: no root element");
  return std::move(state.root);
}

// ---------------------------------------------------------------------------
// Writing

std::string escape_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '\r': out += "&#13;"; break;
      default: out += c;
    }
  }
  return out;
}

namespace {

std::string escape_attr(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\n': out += "&#10;"; break;
      case '\r': out += "&#13;"; break;
      case '\t': out += "&#9;"; break;
      default: out += c;
    }
  }
  return out;
}

class Writer {
 public:
  explicit Writer(const WriteOptions& opt) : opt_(opt) {}

  std::string run(const Element& root) {
    if (opt_.declaration) out_ += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    std::map<std::string, std::string> scope;
    emit(root, scope, 0);
    out_ += '\n';
    return std::move(out_);
  }

 private:
  void newline(int depth) {
    if (!opt_.indent) return;
    out_ += '\n';
    out_.append(static_cast<std::size_t>(depth) * 2, ' ');
  }

  void emit(const Element& e, std::map<std::string, std::string> scope, int depth) {
    // Namespace declarations needed at this element, in prefix order.
    std::map<std::string, std::string> decls;
    auto need = [&](const std::string& prefix, const std::string& uri) -> bool {
      if (prefix == "xml") return true;
      if (auto d = decls.find(prefix); d != decls.end()) return d->second == uri;
      auto s = scope.find(prefix);
      std::string current = s == scope.end() ? std::string() : s->second;
      if (current != uri) decls[prefix] = uri;
      return true;
    };

    std::string elem_prefix = e.ns.empty() ? std::string() : e.prefix;
    need(elem_prefix, e.ns);

    std::vector<std::pair<std::string, const Attribute*>> attrs;  // qualified name, attr
    int generated = 0;
    for (const auto& a : e.attributes) {
      std::string prefix = a.ns.empty() ? std::string() : a.prefix;
      if (!a.ns.empty() && a.ns == kXmlNs) prefix = "xml";
      if (!a.ns.empty() && (prefix.empty() || !need(prefix, a.ns))) {
        do {
          prefix = "ns" + std::to_string(generated++);
        } while (decls.count(prefix) || scope.count(prefix));
        need(prefix, a.ns);
      }
      attrs.emplace_back(prefix.empty() ? a.name : prefix + ":" + a.name, &a);
    }
    for (const auto& a : e.attributes) {
      if (a.value_ns.empty()) continue;
      auto colon = a.value.find(':');
      need(colon == std::string::npos ? std::string() : a.value.substr(0, colon), a.value_ns);
    }
    if (opt_.sort_attributes) {
      std::sort(attrs.begin(), attrs.end(), [](const auto& x, const auto& y) {
        if (x.second->ns != y.second->ns) return x.second->ns < y.second->ns;
        return x.second->name < y.second->name;
      });
    }

    out_ += '<';
    std::string qname = elem_prefix.empty() ? e.name : elem_prefix + ":" + e.name;
    out_ += qname;
    for (const auto& [prefix, uri] : decls) {
      out_ += prefix.empty() ? " xmlns=\"" : " xmlns:" + prefix + "=\"";
      out_ += escape_attr(uri);
      out_ += '"';
      scope[prefix] = uri;
    }
    for (const auto& [name, a] : attrs) {
      out_ += ' ';
      out_ += name;
      out_ += "=\"";
      out_ += escape_attr(a->value);
      out_ += '"';
    }
    if (e.children.empty() && e.text.empty()) {
      out_ += "/>";
      return;
    }
    out_ += '>';
    out_ += escape_text(e.text);
    for (const auto& c : e.children) {
      newline(depth + 1);
      emit(c, scope, depth + 1);
    }
    if (!e.children.empty()) newline(depth);
    out_ += "</";
    out_ += qname;
    out_ += '>';
  }

  const WriteOptions& opt_;
  std::string out_;
};

}  // namespace

std::string write(const Element& root, const WriteOptions& options) { return Writer(options).run(root); }

std::string canonical(const Element& root) {
  WriteOptions o;
  o.sort_attributes = true;
  return write(root, o);
}

std::string canonicalize(std::string_view document) { return canonical(parse(document)); }

}  // namespace overlay::xml
