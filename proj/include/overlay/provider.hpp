#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "overlay/content_model.hpp"
#include "overlay/oai.hpp"

namespace overlay {

inline constexpr std::string_view kNsdlAgg = "nsdl_agg";
inline constexpr std::string_view kNsdlAggNs = "urn:nsdl:overlay:nsdl_agg";

struct ProviderOptions {
  std::string repository_name = "NSDL overlay repository";
  std::string base_url = "http://localhost:8080/oai";
  std::string repo_id = "nsdl.overlay";
  std::string admin_email = "admin@localhost";
  std::size_t page_size = 250;
  std::chrono::seconds token_lifetime{std::chrono::hours(1)};
};

/// Everything the repository holds about one resource.
struct AggregationRecord {
  ObjectId resource;
  std::optional<HandleId> resource_handle;
  std::string resource_url;
  struct Source {
    ObjectId metadata;
    std::string brand;  // provider brand label, empty if unbranded
    std::string format;
    std::string xml;
  };
  std::vector<Source> records;
  std::string gold;  // canonical nsdl_dc; empty when it cannot be computed
};

/// `<nsdl_agg><resource handle url/><sourceRecord brand format>..</sourceRecord>..<gold>..</gold></nsdl_agg>`
xml::Element aggregation_element(const AggregationRecord& record);

using OaiArgs = std::vector<std::pair<std::string, std::string>>;

/// OAI-PMH v2.0 data provider. Thread-safe; resumption state lives in a
/// server-side table keyed by an unguessable token id.
class Provider {
 public:
  Provider(ContentModel& model, ProviderOptions options = {});

  /// Answers one request. Protocol errors are part of the returned document.
  std::string handle(const OaiArgs& args);

  AggregationRecord aggregation_record(ObjectId resource) const;

  std::string oai_identifier(ObjectId pid) const;
  std::optional<ObjectId> parse_identifier(std::string_view identifier) const;
  /// All formats the repository can serve, including nsdl_agg.
  std::vector<std::string> global_formats() const;

  const ProviderOptions& options() const { return options_; }
  void set_page_size(std::size_t n) { options_.page_size = n == 0 ? 1 : n; }
  /// For servers that learn their port only after binding; call before serving.
  void set_base_url(std::string url) { options_.base_url = std::move(url); }

 private:
  struct Token {
    std::string verb;
    std::string format;
    std::optional<Timestamp> from;
    Timestamp until;  // exclusive, frozen at the first request
    std::optional<std::string> set;
    ObjectId cursor;  // last pid emitted
    std::size_t emitted = 0;
    Timestamp expiry;
  };
  struct Item {
    ObjectId pid;
    Timestamp datestamp;
    bool deleted = false;
    std::vector<std::string> sets;
  };
  class Reply;

  void identify(Reply& r);
  void list_metadata_formats(Reply& r, const std::map<std::string, std::string>& args);
  void list_sets(Reply& r);
  void get_record(Reply& r, const std::map<std::string, std::string>& args);
  void list(Reply& r, const std::string& verb, const std::map<std::string, std::string>& args);

  /// Up to `limit` items after `t.cursor`, selected under one snapshot.
  std::vector<Item> select(const Token& t, std::size_t limit) const;
  xml::Element header(const Item& item) const;
  /// nullopt when the object vanished or cannot serve the format any more.
  std::optional<xml::Element> payload(ObjectId pid, const std::string& format) const;
  std::string new_token(Token t);

  ContentModel& model_;
  ProviderOptions options_;
  std::mutex tokens_mutex_;
  std::map<std::string, Token> tokens_;
  std::mt19937_64 rng_;
};

}  // namespace overlay
