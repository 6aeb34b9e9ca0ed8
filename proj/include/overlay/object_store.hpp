#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "overlay/digital_object.hpp"
#include "overlay/ids.hpp"
#include "overlay/relation_graph.hpp"

namespace overlay {

struct StoreOptions {
  /// SQLite database file; empty means a private in-memory database.
  std::string path;
  std::string handle_prefix = "2200";
  Clock clock = system_clock();
};

struct Representation {
  std::string media_type;
  std::string bytes;
  friend bool operator==(const Representation&, const Representation&) = default;
};

/// A unique secondary key bound to the written object in the same atomic unit
/// (e.g. the harvester's resource-URL dedup table). A claim fails with
/// Error(conflict) if the key already belongs to another active object.
struct IndexClaim {
  std::string ns;
  std::string key;
};

struct PutOptions {
  Strictness strictness = Strictness::strict;
  std::vector<IndexClaim> claims;
  /// Receives ontology violations accepted under Strictness::warn.
  std::vector<std::string>* warnings = nullptr;
};

struct MutationRecord {
  std::uint64_t seq = 0;
  std::string op;  // mint | put | import | delete
  ObjectId pid;
  std::uint64_t version = 0;
};

/// Behavior dispatch seam. content_model registers the implementation; the
/// registry key is (behavior, operation) so a remote binding can replace an
/// in-process one without touching callers.
class Disseminator {
 public:
  virtual ~Disseminator() = default;
  virtual Representation disseminate(ObjectId pid, std::string_view op,
                                     const std::map<std::string, std::string>& params) = 0;
  /// Canonical operation names available on an object with these behaviors.
  virtual std::vector<std::string> operations(BehaviorSet behaviors) const = 0;
};

using ObjectSnapshot = std::shared_ptr<const DigitalObject>;

class ObjectStore {
 public:
  explicit ObjectStore(StoreOptions options = {});
  ~ObjectStore();
  ObjectStore(const ObjectStore&) = delete;
  ObjectStore& operator=(const ObjectStore&) = delete;

  /// Consistent read snapshot; holds a shared lock for its lifetime. Do not
  /// call write operations or open a second view on the same thread while
  /// one is alive.
  class View {
   public:
    ObjectSnapshot find(ObjectId pid) const;
    /// Throws not_found for unknown pids.
    const DigitalObject& get(ObjectId pid) const;
    /// Bound behaviors of an active object.
    std::optional<BehaviorSet> types(ObjectId pid) const;
    const RelationGraph& graph() const;
    const std::map<ObjectId, ObjectSnapshot>& objects() const;
    std::optional<ObjectId> index(std::string_view ns, std::string_view key) const;
    std::optional<ObjectId> handle_owner(const HandleId& handle) const;

   private:
    friend class ObjectStore;
    explicit View(const ObjectStore& store);
    const ObjectStore* store_;
    std::shared_lock<std::shared_mutex> lock_;
  };

  View view() const { return View(*this); }

  ObjectId mint_pid();
  /// Atomic create/replace of an object together with its RELS triples.
  /// Returns the new version.
  std::uint64_t put_object(DigitalObject obj, const PutOptions& options = {});
  /// Current version, or the tombstone view of a deleted object.
  DigitalObject get_object(ObjectId pid) const;
  void delete_object(ObjectId pid);
  Representation resolve(const RepresentationUri& uri) const;
  Representation resolve(std::string_view uri) const { return resolve(RepresentationUri::parse(uri)); }
  std::string export_object(ObjectId pid) const;
  ObjectId import_object(std::string_view document, const PutOptions& options = {});

  /// Mints and records a handle on first call for Agent/Content objects.
  HandleId assign_handle(ObjectId pid);
  std::optional<ObjectId> resolve_handle(const HandleId& handle) const;

  std::vector<Triple> dump() const;
  std::vector<Row> query(const QueryPattern& q) const;
  /// Re-derives the triple index from stored RELS of every active object.
  void rebuild();
  /// Ontology violations among the currently stored triples.
  std::vector<std::string> validate_graph() const;

  void set_disseminator(Disseminator* d) { disseminator_ = d; }
  std::vector<MutationRecord> mutation_log() const;

  std::optional<std::string> get_meta(std::string_view key) const;
  void set_meta(std::string_view key, std::string_view value);

  Timestamp now() const { return options_.clock(); }

 private:
  struct Db;

  void load();
  std::uint64_t commit(DigitalObject obj, const PutOptions& options, bool preserve_stamp, std::string_view op);
  std::string profile(const DigitalObject& obj) const;

  StoreOptions options_;
  std::unique_ptr<Db> db_;
  mutable std::shared_mutex mutex_;
  std::map<ObjectId, ObjectSnapshot> objects_;
  RelationGraph graph_;
  std::map<std::string, ObjectId> handles_;
  std::map<std::pair<std::string, std::string>, ObjectId> index_;
  std::uint64_t next_pid_ = 1;
  std::uint64_t next_handle_ = 1;
  Disseminator* disseminator_ = nullptr;
};

}  // namespace overlay
