#include "overlay/object_store.hpp"

#include <sqlite3.h>

#include <cstdio>

#include "overlay/errors.hpp"
#include "overlay/xml.hpp"

namespace overlay {

// ---------------------------------------------------------------------------
// SQLite plumbing. Every object version is appended as a canonical XML row;
// the newest row per pid is the current state. The triple index is never
// persisted: it is rebuilt from RELS on open.

namespace {

class Statement {
 public:
  Statement(sqlite3* db, const char* sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK)
      throw Error(ErrorCode::storage, std::string("sqlite prepare: ") + sqlite3_errmsg(db));
  }
  ~Statement() { sqlite3_finalize(stmt_); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  Statement& bind(int i, std::string_view v) {
    sqlite3_bind_text(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
    return *this;
  }
  Statement& bind(int i, std::int64_t v) {
    sqlite3_bind_int64(stmt_, i, v);
    return *this;
  }
  /// True while rows remain.
  bool step() {
    int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    throw Error(ErrorCode::storage, std::string("sqlite step: ") + sqlite3_errmsg(db_));
  }
  void run() {
    while (step()) {
    }
  }
  std::int64_t integer(int col) const { return sqlite3_column_int64(stmt_, col); }
  std::string text(int col) const {
    const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, col));
    return p ? std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col))) : std::string();
  }

 private:
  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

}  // namespace

struct ObjectStore::Db {
  sqlite3* handle = nullptr;
  std::mutex mutex;

  explicit Db(const std::string& path) {
    std::string target = path.empty() ? ":memory:" : path;
    if (sqlite3_open(target.c_str(), &handle) != SQLITE_OK) {
      std::string msg = handle ? sqlite3_errmsg(handle) : "out of memory";
      sqlite3_close(handle);
      throw Error(ErrorCode::storage, "cannot open repository database " + target + ": " + msg);
    }
    exec("PRAGMA journal_mode=WAL");
    exec("PRAGMA synchronous=NORMAL");
    exec("CREATE TABLE IF NOT EXISTS meta (key TEXT PRIMARY KEY, value TEXT NOT NULL)");
    exec("CREATE TABLE IF NOT EXISTS objects (pid INTEGER NOT NULL, version INTEGER NOT NULL, xml TEXT NOT NULL,"
         " PRIMARY KEY (pid, version))");
    exec("CREATE TABLE IF NOT EXISTS handles (handle TEXT PRIMARY KEY, pid INTEGER NOT NULL)");
    exec("CREATE TABLE IF NOT EXISTS idx (ns TEXT NOT NULL, key TEXT NOT NULL, pid INTEGER NOT NULL,"
         " PRIMARY KEY (ns, key))");
    exec("CREATE TABLE IF NOT EXISTS log (seq INTEGER PRIMARY KEY AUTOINCREMENT, op TEXT NOT NULL,"
         " pid INTEGER NOT NULL, version INTEGER NOT NULL)");
  }
  ~Db() { sqlite3_close(handle); }

  void exec(const char* sql) {
    char* err = nullptr;
    if (sqlite3_exec(handle, sql, nullptr, nullptr, &err) != SQLITE_OK) {
      std::string msg = err ? err : "unknown";
      sqlite3_free(err);
      throw Error(ErrorCode::storage, "sqlite: " + msg);
    }
  }

  // Runs `body` inside a transaction; rolls back and rethrows on failure.
  template <typename F>
  void transaction(F&& body) {
    std::lock_guard lock(mutex);
    exec("BEGIN IMMEDIATE");
    try {
      body();
      exec("COMMIT");
    } catch (...) {
      sqlite3_exec(handle, "ROLLBACK", nullptr, nullptr, nullptr);
      throw;
    }
  }

  void set_meta(std::string_view key, std::string_view value) {
    Statement(handle, "INSERT INTO meta(key, value) VALUES(?1, ?2) ON CONFLICT(key) DO UPDATE SET value = ?2")
        .bind(1, key)
        .bind(2, value)
        .run();
  }

  void log(std::string_view op, ObjectId pid, std::uint64_t version) {
    Statement(handle, "INSERT INTO log(op, pid, version) VALUES(?1, ?2, ?3)")
        .bind(1, op)
        .bind(2, static_cast<std::int64_t>(pid.number()))
        .bind(3, static_cast<std::int64_t>(version))
        .run();
  }

  void append_version(const DigitalObject& obj) {
    Statement(handle, "INSERT INTO objects(pid, version, xml) VALUES(?1, ?2, ?3)")
        .bind(1, static_cast<std::int64_t>(obj.pid.number()))
        .bind(2, static_cast<std::int64_t>(obj.version))
        .bind(3, export_xml(obj))
        .run();
  }
};

// ---------------------------------------------------------------------------

ObjectStore::View::View(const ObjectStore& store) : store_(&store), lock_(store.mutex_) {}

ObjectSnapshot ObjectStore::View::find(ObjectId pid) const {
  auto it = store_->objects_.find(pid);
  return it == store_->objects_.end() ? nullptr : it->second;
}

const DigitalObject& ObjectStore::View::get(ObjectId pid) const {
  auto it = store_->objects_.find(pid);
  if (it == store_->objects_.end()) throw Error(ErrorCode::not_found, "no such object " + pid.str());
  return *it->second;
}

std::optional<BehaviorSet> ObjectStore::View::types(ObjectId pid) const {
  auto it = store_->objects_.find(pid);
  if (it == store_->objects_.end() || !it->second->active()) return std::nullopt;
  return it->second->behavior_set();
}

const RelationGraph& ObjectStore::View::graph() const { return store_->graph_; }

const std::map<ObjectId, ObjectSnapshot>& ObjectStore::View::objects() const { return store_->objects_; }

std::optional<ObjectId> ObjectStore::View::index(std::string_view ns, std::string_view key) const {
  auto it = store_->index_.find({std::string(ns), std::string(key)});
  if (it == store_->index_.end()) return std::nullopt;
  return it->second;
}

std::optional<ObjectId> ObjectStore::View::handle_owner(const HandleId& handle) const {
  auto it = store_->handles_.find(handle.str());
  if (it == store_->handles_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------

ObjectStore::ObjectStore(StoreOptions options) : options_(std::move(options)), db_(std::make_unique<Db>(options_.path)) {
  load();
}

ObjectStore::~ObjectStore() = default;

void ObjectStore::load() {
  std::unique_lock lock(mutex_);
  std::lock_guard db_lock(db_->mutex);
  {
    Statement s(db_->handle, "SELECT key, value FROM meta WHERE key IN ('next_pid', 'next_handle')");
    while (s.step()) {
      auto value = static_cast<std::uint64_t>(std::stoull(s.text(1)));
      if (s.text(0) == "next_pid") next_pid_ = value;
      else next_handle_ = value;
    }
  }
  {
    Statement s(db_->handle, "SELECT pid, xml FROM objects ORDER BY pid, version");
    while (s.step()) {
      auto obj = std::make_shared<DigitalObject>(import_xml(s.text(1)));
      objects_[obj->pid] = std::move(obj);
    }
  }
  {
    Statement s(db_->handle, "SELECT handle, pid FROM handles");
    while (s.step()) handles_[s.text(0)] = ObjectId(static_cast<std::uint64_t>(s.integer(1)));
  }
  {
    Statement s(db_->handle, "SELECT ns, key, pid FROM idx");
    while (s.step()) index_[{s.text(0), s.text(1)}] = ObjectId(static_cast<std::uint64_t>(s.integer(2)));
  }
  std::vector<std::pair<ObjectId, std::string>> rels;
  for (const auto& [pid, obj] : objects_)
    if (obj->active()) rels.emplace_back(pid, obj->rels());
  graph_.rebuild(rels);
}

ObjectId ObjectStore::mint_pid() {
  std::unique_lock lock(mutex_);
  ObjectId pid(next_pid_);
  db_->transaction([&] {
    db_->set_meta("next_pid", std::to_string(next_pid_ + 1));
    db_->log("mint", pid, 0);
  });
  ++next_pid_;
  return pid;
}

std::uint64_t ObjectStore::put_object(DigitalObject obj, const PutOptions& options) {
  std::unique_lock lock(mutex_);
  if (obj.pid.number() == 0 || (obj.pid.number() >= next_pid_ && !objects_.count(obj.pid)))
    throw Error(ErrorCode::invalid_argument, obj.pid.str() + " has not been minted");
  return commit(std::move(obj), options, false, "put");
}

std::uint64_t ObjectStore::commit(DigitalObject obj, const PutOptions& options, bool preserve_stamp,
                                  std::string_view op) {
  if (!obj.active()) throw Error(ErrorCode::invalid_argument, "use delete_object to tombstone " + obj.pid.str());
  const auto existing_it = objects_.find(obj.pid);
  const DigitalObject* existing = existing_it == objects_.end() ? nullptr : existing_it->second.get();

  if (existing && existing->handle) {
    if (!obj.handle) obj.handle = existing->handle;
    else if (*obj.handle != *existing->handle)
      throw Error(ErrorCode::conflict, obj.pid.str() + " already carries handle " + existing->handle->str());
  }
  if (auto problems = structural_problems(obj); !problems.empty())
    throw Error(ErrorCode::validation, "malformed object " + obj.pid.str(), problems);
  if (obj.handle) {
    auto owner = handles_.find(obj.handle->str());
    if (owner != handles_.end() && owner->second != obj.pid)
      throw Error(ErrorCode::conflict, obj.handle->str() + " belongs to " + owner->second.str());
  }

  const Timestamp now = options_.clock();

  // RELS: canonical bytes, parsed triples, ontology check against the types
  // the write would produce.
  std::vector<Triple> triples;
  if (auto it = obj.datastreams.find(std::string(kRelsId)); it != obj.datastreams.end()) {
    auto& rels = it->second;
    if (!rels.payload.empty() && rels.payload.find_first_not_of(" \t\r\n") != std::string::npos) {
      rels.payload = xml::canonicalize(rels.payload);
      triples = parse_rels(rels.payload, obj.pid);
    } else {
      rels.payload.clear();
    }
  }
  const BehaviorSet own_types = obj.behavior_set();
  TypeLookup types = [&](ObjectId pid) -> std::optional<BehaviorSet> {
    if (pid == obj.pid) return own_types;
    auto o = objects_.find(pid);
    if (o == objects_.end() || !o->second->active()) return std::nullopt;
    return o->second->behavior_set();
  };
  auto violations = ontology_violations(triples, types);
  if (options.strictness == Strictness::strict) {
    // Edges other objects already point at this one must stay valid under the
    // new behavior set.
    for (const auto& t : graph_.inbound(obj.pid)) {
      if (t.subject == obj.pid) continue;
      auto dr = constraint_for(t.predicate);
      if (dr && !has_type(own_types, dr->range))
        violations.push_back(to_string(t) + ": object would no longer be " + std::string(to_string(dr->range)));
    }
    if (!violations.empty())
      throw Error(ErrorCode::validation, "ontology violation in " + obj.pid.str(), violations);
  } else if (options.warnings) {
    options.warnings->insert(options.warnings->end(), violations.begin(), violations.end());
  }

  for (const auto& claim : options.claims) {
    auto it = index_.find({claim.ns, claim.key});
    if (it == index_.end() || it->second == obj.pid) continue;
    auto holder = objects_.find(it->second);
    if (holder != objects_.end() && holder->second->active())
      throw Error(ErrorCode::conflict, claim.ns + " key " + claim.key + " belongs to " + it->second.str());
  }

  if (!preserve_stamp || obj.version == 0) {
    obj.version = existing ? existing->version + 1 : 1;
    obj.last_modified = now;
  }
  if (existing && obj.version <= existing->version) obj.version = existing->version + 1;
  for (auto& [id, ds] : obj.datastreams)
    if (ds.created == Timestamp{}) ds.created = now;

  db_->transaction([&] {
    db_->append_version(obj);
    if (obj.handle)
      Statement(db_->handle, "INSERT OR REPLACE INTO handles(handle, pid) VALUES(?1, ?2)")
          .bind(1, obj.handle->str())
          .bind(2, static_cast<std::int64_t>(obj.pid.number()))
          .run();
    for (const auto& claim : options.claims)
      Statement(db_->handle, "INSERT OR REPLACE INTO idx(ns, key, pid) VALUES(?1, ?2, ?3)")
          .bind(1, claim.ns)
          .bind(2, claim.key)
          .bind(3, static_cast<std::int64_t>(obj.pid.number()))
          .run();
    if (obj.pid.number() >= next_pid_) db_->set_meta("next_pid", std::to_string(obj.pid.number() + 1));
    db_->log(op, obj.pid, obj.version);
  });

  // Past this point nothing throws except allocation.
  if (obj.pid.number() >= next_pid_) next_pid_ = obj.pid.number() + 1;
  if (obj.handle) handles_[obj.handle->str()] = obj.pid;
  for (const auto& claim : options.claims) index_[{claim.ns, claim.key}] = obj.pid;
  graph_.replace(obj.pid, triples);
  const auto version = obj.version;
  objects_[obj.pid] = std::make_shared<const DigitalObject>(std::move(obj));
  return version;
}

DigitalObject ObjectStore::get_object(ObjectId pid) const {
  auto v = view();
  return v.get(pid);
}

void ObjectStore::delete_object(ObjectId pid) {
  std::unique_lock lock(mutex_);
  auto it = objects_.find(pid);
  if (it == objects_.end()) throw Error(ErrorCode::not_found, "no such object " + pid.str());
  if (!it->second->active()) return;
  DigitalObject t = it->second->tombstone();
  t.version += 1;
  t.last_modified = options_.clock();
  db_->transaction([&] {
    db_->append_version(t);
    db_->log("delete", pid, t.version);
  });
  graph_.retract(pid);
  it->second = std::make_shared<const DigitalObject>(std::move(t));
}

std::string ObjectStore::profile(const DigitalObject& obj) const {
  xml::Element root("", "objectProfile");
  root.set_attribute("pid", obj.pid.str());
  root.set_attribute("uri", info_uri(obj.pid));
  root.set_attribute("state", obj.active() ? "active" : "deleted");
  root.set_attribute("version", std::to_string(obj.version));
  root.set_attribute("lastModified", format_timestamp(obj.last_modified));
  if (obj.handle) root.set_attribute("handle", obj.handle->str());
  for (const auto& b : obj.behaviors) {
    xml::Element e("", "behavior");
    e.set_attribute("name", b);
    root.add(std::move(e));
  }
  for (const auto& [id, ds] : obj.datastreams) {
    xml::Element e("", "datastream");
    e.set_attribute("dsId", id);
    e.set_attribute("kind", ds.kind == DatastreamKind::local ? "local" : "remote");
    e.set_attribute("mediaType", ds.media_type);
    root.add(std::move(e));
  }
  if (disseminator_) {
    for (const auto& op : disseminator_->operations(obj.behavior_set())) {
      xml::Element e("", "operation");
      e.set_attribute("name", op);
      e.set_attribute("uri", info_uri(obj.pid) + "/" + op);
      root.add(std::move(e));
    }
  }
  xml::WriteOptions opt;
  opt.indent = true;
  return xml::write(root, opt);
}

Representation ObjectStore::resolve(const RepresentationUri& uri) const {
  ObjectSnapshot obj;
  {
    auto v = view();
    obj = v.find(uri.pid);
  }
  if (!obj) throw Error(ErrorCode::not_found, "no such object " + uri.pid.str());
  if (!obj->active()) throw Error(ErrorCode::gone, uri.pid.str() + " has been deleted");
  if (!uri.op) return {"application/xml", profile(*obj)};
  if (!disseminator_) throw Error(ErrorCode::operation_not_supported, "no behaviors registered");
  try {
    return disseminator_->disseminate(uri.pid, *uri.op, uri.params);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::dissemination, uri.str() + ": " + e.what());
  }
}

std::string ObjectStore::export_object(ObjectId pid) const { return export_xml(get_object(pid)); }

ObjectId ObjectStore::import_object(std::string_view document, const PutOptions& options) {
  DigitalObject obj = import_xml(document);
  if (obj.pid.number() == 0) throw Error(ErrorCode::invalid_argument, "nsdl:0 is not a valid object id");
  std::unique_lock lock(mutex_);
  auto existing = objects_.find(obj.pid);
  if (!obj.active()) {
    if (existing != objects_.end()) {
      lock.unlock();
      delete_object(obj.pid);
      return obj.pid;
    }
    if (obj.handle && handles_.count(obj.handle->str()))
      throw Error(ErrorCode::conflict, obj.handle->str() + " is already registered");
    if (obj.version == 0) obj.version = 1;
    const ObjectId pid_copy = obj.pid;
    db_->transaction([&] {
      db_->append_version(obj);
      if (obj.handle)
        Statement(db_->handle, "INSERT OR REPLACE INTO handles(handle, pid) VALUES(?1, ?2)")
            .bind(1, obj.handle->str())
            .bind(2, static_cast<std::int64_t>(obj.pid.number()))
            .run();
      if (obj.pid.number() >= next_pid_) db_->set_meta("next_pid", std::to_string(obj.pid.number() + 1));
      db_->log("import", obj.pid, obj.version);
    });
    if (obj.pid.number() >= next_pid_) next_pid_ = obj.pid.number() + 1;
    if (obj.handle) handles_[obj.handle->str()] = obj.pid;
    objects_[obj.pid] = std::make_shared<const DigitalObject>(std::move(obj));
    return pid_copy;
  }
  // Into an empty slot the document's version and datestamp are kept, so
  // export -> import reproduces the object; over an existing object the
  // version continues monotonically.
  const bool preserve = existing == objects_.end();
  ObjectId pid = obj.pid;
  commit(std::move(obj), options, preserve, "import");
  return pid;
}

HandleId ObjectStore::assign_handle(ObjectId pid) {
  std::unique_lock lock(mutex_);
  auto it = objects_.find(pid);
  if (it == objects_.end()) throw Error(ErrorCode::not_found, "no such object " + pid.str());
  if (!it->second->active()) throw Error(ErrorCode::gone, pid.str() + " has been deleted");
  if (!has_type(it->second->behavior_set(), EntityType::Resource))
    throw Error(ErrorCode::operation_not_supported, pid.str() + " is not a Resource");
  if (it->second->handle) return *it->second->handle;

  std::uint64_t counter = next_handle_;
  HandleId handle;
  for (;; ++counter) {
    char suffix[32];
    std::snprintf(suffix, sizeof suffix, "%05llu", static_cast<unsigned long long>(counter));
    handle = HandleId::make(options_.handle_prefix, suffix);
    if (!handles_.count(handle.str())) break;
  }
  DigitalObject next = *it->second;
  next.handle = handle;
  db_->transaction([&] { db_->set_meta("next_handle", std::to_string(counter + 1)); });
  next_handle_ = counter + 1;
  commit(std::move(next), PutOptions{Strictness::warn, {}, nullptr}, false, "put");
  return handle;
}

std::optional<ObjectId> ObjectStore::resolve_handle(const HandleId& handle) const { return view().handle_owner(handle); }

std::vector<Triple> ObjectStore::dump() const {
  auto v = view();
  return v.graph().dump();
}

std::vector<Row> ObjectStore::query(const QueryPattern& q) const {
  auto v = view();
  return v.graph().query(q);
}

void ObjectStore::rebuild() {
  std::unique_lock lock(mutex_);
  std::vector<std::pair<ObjectId, std::string>> rels;
  for (const auto& [pid, obj] : objects_)
    if (obj->active()) rels.emplace_back(pid, obj->rels());
  graph_.rebuild(rels);
}

std::vector<std::string> ObjectStore::validate_graph() const {
  auto v = view();
  auto triples = v.graph().dump();
  return ontology_violations(triples, [&](ObjectId pid) { return v.types(pid); });
}

std::vector<MutationRecord> ObjectStore::mutation_log() const {
  std::lock_guard lock(db_->mutex);
  std::vector<MutationRecord> out;
  Statement s(db_->handle, "SELECT seq, op, pid, version FROM log ORDER BY seq");
  while (s.step())
    out.push_back(MutationRecord{static_cast<std::uint64_t>(s.integer(0)), s.text(1),
                                 ObjectId(static_cast<std::uint64_t>(s.integer(2))),
                                 static_cast<std::uint64_t>(s.integer(3))});
  return out;
}

std::optional<std::string> ObjectStore::get_meta(std::string_view key) const {
  std::lock_guard lock(db_->mutex);
  Statement s(db_->handle, "SELECT value FROM meta WHERE key = ?1");
  s.bind(1, key);
  if (s.step()) return s.text(0);
  return std::nullopt;
}

void ObjectStore::set_meta(std::string_view key, std::string_view value) {
  db_->transaction([&] { db_->set_meta(key, value); });
}

}  // namespace overlay
