#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "overlay/content_model.hpp"
#include "overlay/errors.hpp"
#include "overlay/harvester.hpp"
#include "overlay/provider.hpp"

namespace overlay {

/// Service configuration: a JSON file whose keys match the field names, then
/// OVERLAY_<FIELD> environment variables (upper case) on top.
struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir = "overlay-data";
  std::string handle_prefix = "2200";
  std::string repository_name = "NSDL overlay repository";
  std::string admin_email = "admin@localhost";
  /// Advertised OAI-PMH base URL; derived from host and port when empty.
  std::string base_url;
  std::size_t oai_page_size = 250;
  std::size_t member_page_size = 1000;
  std::size_t query_row_cap = 10000;
  /// Providers declared inline. Registered providers live in providers.json.
  std::vector<ProviderConfig> providers;

  std::string database_path() const;
  std::string providers_path() const;
  std::string oai_base_url() const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

/// Empty `path` starts from the defaults. Throws Error(invalid_argument) for
/// unreadable files, malformed JSON and unparseable override values.
ServiceConfig load_config(const std::string& path, const EnvLookup& env = process_env());

int http_status(ErrorCode code);

struct GatewayOptions {
  std::size_t query_row_cap = 10000;
};

/// HTTP front end: /objects, /objects/{pid}, /objects/{pid}/methods/{op},
/// /query and /oai. `provider` is used as is, so the OAI endpoint behaves
/// exactly like the standalone module.
class Gateway {
 public:
  Gateway(ContentModel& model, Provider& provider, GatewayOptions options = {});
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Port 0 picks a free port. Returns the bound port; throws
  /// Error(storage) if binding fails.
  int bind(const std::string& host, int port);
  /// Serves a bound socket on a background thread.
  void start();
  int start(const std::string& host, int port) {
    int bound = bind(host, port);
    start();
    return bound;
  }
  void stop();
  /// Blocks until stop() is called from another thread.
  void wait();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace overlay
