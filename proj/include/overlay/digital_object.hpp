#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "overlay/ids.hpp"
#include "overlay/ontology.hpp"

namespace overlay {

inline constexpr std::string_view kRelsId = "RELS";
inline constexpr std::string_view kRelsMediaType = "application/rdf+xml";
inline constexpr std::string_view kContentId = "CONTENT";
inline constexpr std::string_view kBrandId = "BRAND";
inline constexpr std::string_view kRecordPrefix = "REC.";

enum class DatastreamKind { local, remote };

struct Datastream {
  std::string id;
  DatastreamKind kind = DatastreamKind::local;
  std::string media_type;
  std::string payload;  // local only
  std::string url;      // remote only
  Timestamp created{};

  static Datastream local(std::string id, std::string media_type, std::string payload, Timestamp created = {});
  static Datastream remote(std::string id, std::string media_type, std::string url, Timestamp created = {});

  friend bool operator==(const Datastream&, const Datastream&) = default;
};

enum class ObjectState { active, deleted };

struct DigitalObject {
  ObjectId pid;
  std::optional<HandleId> handle;
  ObjectState state = ObjectState::active;
  std::map<std::string, Datastream> datastreams;  // keyed by ds_id
  std::set<std::string> behaviors;
  Timestamp last_modified{};
  std::uint64_t version = 0;

  bool active() const { return state == ObjectState::active; }
  const Datastream* datastream(std::string_view id) const;
  void put_datastream(Datastream ds);
  BehaviorSet behavior_set() const { return BehaviorSet::from_names(behaviors); }
  bool binds(Behavior b) const { return behaviors.count(std::string(to_string(b))) > 0; }
  void bind(Behavior b) { behaviors.insert(std::string(to_string(b))); }
  /// RELS payload, empty when the object asserts nothing.
  std::string rels() const;

  /// Deleted view: pid, handle, version and datestamp survive; nothing else.
  DigitalObject tombstone() const;

  friend bool operator==(const DigitalObject&, const DigitalObject&) = default;
};

/// Datastream and behavior invariants that hold independent of the rest of
/// the repository. Empty when the object is well-formed.
std::vector<std::string> structural_problems(const DigitalObject& obj);

/// Canonical object XML. Element order is fixed (datastreams by id, behaviors
/// by name, RELS last) so the bytes are a function of the object alone.
std::string export_xml(const DigitalObject& obj);
/// Inverse of export_xml. Throws Error(parse_error) naming the location.
DigitalObject import_xml(std::string_view document);

std::string base64_encode(std::string_view bytes);
/// Throws Error(parse_error) on characters outside the base64 alphabet.
std::string base64_decode(std::string_view text);

}  // namespace overlay
