#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "overlay/dublin_core.hpp"
#include "overlay/object_store.hpp"

namespace overlay {

/// Display identity of a role object, stored as its BRAND datastream:
/// `<brand><label>..</label><logo>url</logo></brand>`.
struct Brand {
  std::string label;
  std::string logo_url;
  ObjectId holder;
  friend bool operator==(const Brand&, const Brand&) = default;
};

Brand parse_brand(std::string_view document, ObjectId holder);
std::string brand_document(const Brand& brand);

struct GoldRecord {
  std::string xml;  // canonical nsdl_dc, without the contributors trailer
  std::vector<ObjectId> contributors;
};

/// Fetches remote datastream content. Failures throw; the content model maps
/// them to dissemination errors.
class RemoteFetcher {
 public:
  virtual ~RemoteFetcher() = default;
  virtual Representation fetch(const std::string& url, std::chrono::milliseconds timeout) = 0;
};

/// Plain HTTP GET via cpp-httplib.
class HttpFetcher : public RemoteFetcher {
 public:
  Representation fetch(const std::string& url, std::chrono::milliseconds timeout) override;
};

struct ContentModelOptions {
  std::shared_ptr<RemoteFetcher> fetcher;  // defaults to HttpFetcher
  std::chrono::milliseconds fetch_timeout{10000};
  std::size_t default_page_size = 1000;
};

/// Behavior definitions of the content model, dispatched from
/// ObjectStore::resolve. Registers itself with the store on construction.
class ContentModel : public Disseminator {
 public:
  using Params = std::map<std::string, std::string>;
  using Handler = std::function<Representation(ObjectId, const Params&)>;

  explicit ContentModel(ObjectStore& store, ContentModelOptions options = {});
  ~ContentModel() override;
  ContentModel(const ContentModel&) = delete;
  ContentModel& operator=(const ContentModel&) = delete;

  /// Binds (behavior, operation) to a handler, replacing any previous one.
  void register_operation(Behavior behavior, std::string op, Handler handler);

  Representation disseminate(ObjectId pid, std::string_view op, const Params& params) override;
  std::vector<std::string> operations(BehaviorSet behaviors) const override;
  /// Canonical name for an operation alias (displayContent -> showContent).
  static std::string canonical_operation(std::string_view op);

  // Metadata
  dc::MetadataRecord get_record(ObjectId pid, std::string_view format) const;
  ObjectId get_provider(ObjectId pid) const;
  ObjectId get_resource(ObjectId pid) const;
  /// Formats a metadata object can disseminate: stored ones plus crosswalk targets.
  std::vector<std::string> formats(ObjectId pid) const;

  // Resource (Agent or Content)
  HandleId get_handle(ObjectId pid);
  std::vector<ObjectId> get_metadata(ObjectId pid) const;
  std::vector<ObjectId> memberships(ObjectId pid) const;
  /// Aggregator brands for resources; provider brands for Metadata objects.
  std::vector<Brand> show_brand(ObjectId pid) const;
  std::vector<ObjectId> annotations_for(ObjectId pid) const;

  // Content
  Representation show_content(ObjectId pid) const;
  GoldRecord get_gold(ObjectId pid) const;

  // Roles
  Brand get_brand(ObjectId pid) const;
  std::vector<ObjectId> list_members(ObjectId pid, std::size_t offset = 0, std::size_t limit = SIZE_MAX) const;
  ObjectId get_representation(ObjectId pid) const;
  std::vector<ObjectId> list_provided(ObjectId pid, std::size_t offset = 0, std::size_t limit = SIZE_MAX) const;

  /// getGold representation: the gold record with a trailing
  /// `<contributors><pid>..</pid></contributors>` element.
  static std::string gold_document(const GoldRecord& gold);

  ObjectStore& store() const { return store_; }

 private:
  using View = ObjectStore::View;

  void register_defaults();
  const DigitalObject& require(const View& v, ObjectId pid, EntityType type) const;
  std::optional<dc::MetadataRecord> record_in(const DigitalObject& obj, std::string_view format) const;
  Brand brand_in(const View& v, ObjectId role) const;
  std::vector<Brand> brands_in(const View& v, ObjectId pid) const;
  ObjectId unique_target(const View& v, ObjectId pid, const Predicate& p) const;

  ObjectStore& store_;
  ContentModelOptions options_;
  std::map<std::pair<Behavior, std::string>, Handler> registry_;
};

}  // namespace overlay
