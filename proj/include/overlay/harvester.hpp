#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "overlay/ids.hpp"
#include "overlay/oai.hpp"
#include "overlay/object_store.hpp"

namespace overlay {

/// One registered OAI-PMH source. The three pids are filled in by
/// Harvester::provision; zero means "not provisioned yet".
struct ProviderConfig {
  std::string id;  // stable key, unique among providers
  std::string base_url;
  std::optional<std::string> set_spec;
  std::string format = "oai_dc";
  std::chrono::seconds schedule_hint{std::chrono::hours(24)};
  ObjectId agent_pid;
  ObjectId provider_role_pid;
  ObjectId aggregator_role_pid;
  /// Brand label of both roles; defaults to `id`.
  std::string label;
  std::string logo_url;
  /// ECMAScript regex; when set, the first dc:identifier fully matching it is
  /// the resource key instead of the first absolute URL.
  std::optional<std::string> resource_key_pattern;
};

void to_json(nlohmann::json& j, const ProviderConfig& c);
void from_json(const nlohmann::json& j, ProviderConfig& c);

struct HarvestState {
  std::optional<Timestamp> last_success_until;
  std::optional<std::string> pending_resumption;
  /// Window end of the chain `pending_resumption` belongs to.
  std::optional<Timestamp> pending_until;
  std::uint32_t consecutive_failures = 0;
  std::optional<Timestamp> next_attempt;
};

void to_json(nlohmann::json& j, const HarvestState& s);
void from_json(const nlohmann::json& j, HarvestState& s);

struct IngestReport {
  std::size_t harvested = 0;
  std::size_t created = 0;
  std::size_t updated = 0;
  std::size_t deleted = 0;
  std::size_t rejected = 0;
  std::vector<std::pair<std::string, std::string>> rejects;  // (identifier, reason)
  /// False when the run stopped before the end of the list; `error` says why.
  bool complete = true;
  std::string error;
};

enum class IngestOutcome { created, updated };

struct HarvesterOptions {
  std::shared_ptr<oai::Transport> transport;  // defaults to HttpTransport
  std::chrono::seconds backoff_cap{std::chrono::hours(24)};
};

class Harvester {
 public:
  explicit Harvester(ObjectStore& store, HarvesterOptions options = {});

  /// Creates whichever of the agent and its two roles are missing, brands the
  /// roles and makes the agent hold both. Returns the config with pids set.
  ProviderConfig provision(ProviderConfig cfg);

  /// Incremental ListRecords run over [last_success_until, now). Never throws
  /// for provider-side trouble: the failure is recorded in the state and the
  /// report. Throws Error(conflict) if a run for the same provider is active.
  IngestReport harvest(const ProviderConfig& cfg);

  static std::optional<std::string> validate_record(std::string_view document, std::string_view format);
  static std::string apply_safe_transforms(std::string_view document);

  /// Materializes one validated record. Throws Error(validation) with reason
  /// "no resource key" when no identifier qualifies.
  IngestOutcome ingest_record(const oai::Record& record, const ProviderConfig& cfg);
  /// Tombstones the matching metadata object. Returns false for unknown or
  /// already deleted identifiers.
  bool handle_deleted(std::string_view oai_identifier, const ProviderConfig& cfg);

  HarvestState state(std::string_view provider_id) const;
  /// Pid of the metadata object holding this provider record, if any.
  std::optional<ObjectId> metadata_for(const ProviderConfig& cfg, std::string_view oai_identifier) const;
  static std::string metadata_key(const ProviderConfig& cfg, std::string_view oai_identifier);
  std::chrono::seconds backoff(const ProviderConfig& cfg, std::uint32_t failures) const;

 private:
  void save_state(std::string_view provider_id, const HarvestState& s);
  std::mutex& provider_lock(const std::string& id);
  std::optional<std::string> resource_key(const xml::Element& record, const ProviderConfig& cfg) const;
  /// Content object for `key`, created with a CONTENT link to `url` if new.
  ObjectId resolve_resource(const std::string& key, const std::optional<std::string>& url, const ProviderConfig& cfg);
  /// Drops the resource from this provider's aggregation once none of the
  /// provider's active metadata describes it.
  void release_resource(ObjectId resource, const ProviderConfig& cfg);

  ObjectStore& store_;
  HarvesterOptions options_;
  std::mutex locks_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

/// providers.json: `{"providers": [ProviderConfig...]}`.
std::vector<ProviderConfig> load_providers(const std::string& path);
void save_providers(const std::string& path, const std::vector<ProviderConfig>& providers);

}  // namespace overlay
