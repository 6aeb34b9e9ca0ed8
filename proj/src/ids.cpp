#include "overlay/ids.hpp"

#include <charconv>
#include <cstdio>
#include <ctime>

#include "overlay/errors.hpp"

namespace overlay {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found: return "not-found";
    case ErrorCode::gone: return "gone";
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::parse_error: return "parse-error";
    case ErrorCode::validation: return "validation";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::operation_not_supported: return "operation-not-supported";
    case ErrorCode::format_unavailable: return "format-unavailable";
    case ErrorCode::model_integrity: return "model-integrity";
    case ErrorCode::dissemination: return "dissemination";
    case ErrorCode::not_available: return "not-available";
    case ErrorCode::brand_missing: return "brand-missing";
    case ErrorCode::not_represented: return "not-represented";
    case ErrorCode::no_metadata: return "no-metadata";
    case ErrorCode::storage: return "storage";
  }
  return "unknown";
}

namespace {

constexpr std::string_view kPidPrefix = "nsdl:";

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

std::string percent_decode(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    char c = in[i];
    if (c == '+') {
      out += ' ';
    } else if (c == '%' && i + 2 < in.size()) {
      unsigned value = 0;
      auto [p, ec] = std::from_chars(in.data() + i + 1, in.data() + i + 3, value, 16);
      if (ec != std::errc{} || p != in.data() + i + 3)
        throw Error(ErrorCode::invalid_argument, "bad percent escape in URI");
      out += static_cast<char>(value);
      i += 2;
    } else if (c == '%') {
      throw Error(ErrorCode::invalid_argument, "truncated percent escape in URI");
    } else {
      out += c;
    }
  }
  return out;
}

}  // namespace

std::optional<ObjectId> ObjectId::parse(std::string_view text) {
  if (!text.starts_with(kPidPrefix)) return std::nullopt;
  auto digits = text.substr(kPidPrefix.size());
  if (!all_digits(digits)) return std::nullopt;
  if (digits.size() > 1 && digits.front() == '0') return std::nullopt;
  std::uint64_t n = 0;
  auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
  if (ec != std::errc{} || p != digits.data() + digits.size()) return std::nullopt;
  return ObjectId(n);
}

ObjectId ObjectId::from_string(std::string_view text) {
  if (auto id = parse(text)) return *id;
  throw Error(ErrorCode::invalid_argument, "malformed pid: " + std::string(text));
}

std::string ObjectId::str() const { return std::string(kPidPrefix) + std::to_string(number_); }

std::optional<HandleId> HandleId::parse(std::string_view text) {
  if (!text.starts_with("hdl:")) return std::nullopt;
  auto rest = text.substr(4);
  auto slash = rest.find('/');
  if (slash == std::string_view::npos || slash == 0 || slash + 1 == rest.size()) return std::nullopt;
  for (char c : rest)
    if (c <= ' ' || c == '<' || c == '>' || c == '"') return std::nullopt;
  return HandleId(std::string(text));
}

HandleId HandleId::make(std::string_view prefix, std::string_view suffix) {
  auto h = parse("hdl:" + std::string(prefix) + "/" + std::string(suffix));
  if (!h) throw Error(ErrorCode::invalid_argument, "malformed handle parts");
  return *h;
}

std::string info_uri(ObjectId pid) { return std::string(kInfoPrefix) + pid.str(); }

std::optional<ObjectId> parse_info_uri(std::string_view uri) {
  if (!uri.starts_with(kInfoPrefix)) return std::nullopt;
  return ObjectId::parse(uri.substr(kInfoPrefix.size()));
}

RepresentationUri RepresentationUri::parse(std::string_view text) {
  if (!text.starts_with(kInfoPrefix))
    throw Error(ErrorCode::invalid_argument, "not an info:nsdl URI: " + std::string(text));
  auto rest = text.substr(kInfoPrefix.size());
  std::string_view query;
  if (auto q = rest.find('?'); q != std::string_view::npos) {
    query = rest.substr(q + 1);
    rest = rest.substr(0, q);
  }
  RepresentationUri uri;
  auto slash = rest.find('/');
  uri.pid = ObjectId::from_string(rest.substr(0, slash));
  if (slash != std::string_view::npos) {
    auto op = rest.substr(slash + 1);
    if (op.empty() || op.find('/') != std::string_view::npos)
      throw Error(ErrorCode::invalid_argument, "malformed operation in URI: " + std::string(text));
    uri.op = std::string(op);
  } else if (!query.empty()) {
    throw Error(ErrorCode::invalid_argument, "parameters require an operation: " + std::string(text));
  }
  while (!query.empty()) {
    auto amp = query.find('&');
    auto pair = query.substr(0, amp);
    if (!pair.empty()) {
      auto eq = pair.find('=');
      std::string key = percent_decode(pair.substr(0, eq));
      std::string value = eq == std::string_view::npos ? std::string() : percent_decode(pair.substr(eq + 1));
      uri.params[key] = value;
    }
    if (amp == std::string_view::npos) break;
    query = query.substr(amp + 1);
  }
  return uri;
}

std::string RepresentationUri::str() const {
  std::string out = info_uri(pid);
  if (op) {
    out += '/';
    out += *op;
  }
  char sep = '?';
  for (const auto& [k, v] : params) {
    out += sep;
    out += k;
    out += '=';
    out += v;
    sep = '&';
  }
  return out;
}

Clock system_clock() {
  return [] { return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()); };
}

std::string format_timestamp(Timestamp t) {
  std::time_t tt = t.time_since_epoch().count();
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  if (text.size() != 20 || text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' ||
      text[16] != ':' || text[19] != 'Z')
    return std::nullopt;
  auto num = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
    int v = 0;
    auto [p, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
    if (ec != std::errc{} || p != text.data() + pos + len) return std::nullopt;
    return v;
  };
  auto y = num(0, 4), mo = num(5, 2), d = num(8, 2), h = num(11, 2), mi = num(14, 2), s = num(17, 2);
  if (!y || !mo || !d || !h || !mi || !s) return std::nullopt;
  using namespace std::chrono;
  year_month_day ymd{year{*y}, month{static_cast<unsigned>(*mo)}, day{static_cast<unsigned>(*d)}};
  if (!ymd.ok() || *h > 23 || *mi > 59 || *s > 59) return std::nullopt;
  return sys_days{ymd} + hours{*h} + minutes{*mi} + seconds{*s};
}

}  // namespace overlay
