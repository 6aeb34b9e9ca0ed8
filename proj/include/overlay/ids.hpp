#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace overlay {

/// Internal repository identifier, `nsdl:<decimal>`. Ordering is numeric so
/// that "pid ascending" means nsdl:9 < nsdl:10.
class ObjectId {
 public:
  constexpr ObjectId() = default;
  constexpr explicit ObjectId(std::uint64_t number) : number_(number) {}

  /// Accepts exactly `nsdl:[0-9]+` without leading zeros; nullopt otherwise.
  static std::optional<ObjectId> parse(std::string_view text);
  /// Like parse() but throws Error(invalid_argument).
  static ObjectId from_string(std::string_view text);

  constexpr std::uint64_t number() const { return number_; }
  std::string str() const;

  friend constexpr auto operator<=>(ObjectId, ObjectId) = default;

 private:
  std::uint64_t number_ = 0;
};

/// Externally citable handle, `hdl:<prefix>/<suffix>`.
class HandleId {
 public:
  HandleId() = default;

  static std::optional<HandleId> parse(std::string_view text);
  static HandleId make(std::string_view prefix, std::string_view suffix);

  const std::string& str() const { return value_; }
  friend auto operator<=>(const HandleId&, const HandleId&) = default;

 private:
  explicit HandleId(std::string value) : value_(std::move(value)) {}
  std::string value_;
};

inline constexpr std::string_view kInfoPrefix = "info:nsdl/";

/// `info:nsdl/<pid>` or `info:nsdl/<pid>/<op>[?k=v&...]`.
struct RepresentationUri {
  ObjectId pid;
  std::optional<std::string> op;
  std::map<std::string, std::string> params;

  static RepresentationUri parse(std::string_view text);
  std::string str() const;
};

/// `info:nsdl/<pid>` for a pid, used as the RDF subject/object form.
std::string info_uri(ObjectId pid);
std::optional<ObjectId> parse_info_uri(std::string_view uri);

using Timestamp = std::chrono::sys_seconds;
using Clock = std::function<Timestamp()>;

Clock system_clock();
/// `YYYY-MM-DDThh:mm:ssZ`
std::string format_timestamp(Timestamp t);
/// Accepts `YYYY-MM-DDThh:mm:ssZ`; nullopt on anything else.
std::optional<Timestamp> parse_timestamp(std::string_view text);

}  // namespace overlay

template <>
struct std::hash<overlay::ObjectId> {
  std::size_t operator()(overlay::ObjectId id) const noexcept {
    return std::hash<std::uint64_t>{}(id.number());
  }
};
