#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "overlay/ids.hpp"
#include "overlay/xml.hpp"

// OAI-PMH v2.0 wire types shared by the harvester (client side) and the
// provider (server side).
namespace overlay::oai {

inline constexpr std::string_view kOaiNs = "http://www.openarchives.org/OAI/2.0/";

struct Record {
  std::string identifier;
  Timestamp datestamp{};
  bool deleted = false;
  std::vector<std::string> sets;
  /// Canonical bytes of the single element inside <metadata>; empty for
  /// deleted records and header-only responses.
  std::string metadata;
};

struct ProtocolError {
  std::string code;
  std::string message;
};

struct Page {
  std::vector<Record> records;
  /// Present and non-empty while the list continues.
  std::optional<std::string> resumption_token;
  std::optional<ProtocolError> error;
  /// The parsed response, for verbs without a record list.
  xml::Element root;
};

/// Parses any OAI-PMH response. Records whose header or metadata is unusable
/// are returned with an empty identifier or metadata so callers can reject
/// them individually. Throws Error(parse_error) when the envelope itself is
/// not an OAI-PMH document.
Page parse_response(std::string_view body);

/// `YYYY-MM-DD` (start of day) or `YYYY-MM-DDThh:mm:ssZ`.
std::optional<Timestamp> parse_datestamp(std::string_view text);

using Params = std::map<std::string, std::string>;

class Transport {
 public:
  virtual ~Transport() = default;
  /// Issues one request and returns the response body. Throws on transport
  /// failure or non-200 status.
  virtual std::string get(const std::string& base_url, const Params& params) = 0;
};

/// HTTP GET via cpp-httplib.
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(std::chrono::milliseconds timeout = std::chrono::seconds(30)) : timeout_(timeout) {}
  std::string get(const std::string& base_url, const Params& params) override;

 private:
  std::chrono::milliseconds timeout_;
};

class Client {
 public:
  Client(std::shared_ptr<Transport> transport, std::string base_url)
      : transport_(std::move(transport)), base_url_(std::move(base_url)) {}

  xml::Element identify();
  /// metadataPrefix values, optionally for one item.
  std::vector<std::string> list_metadata_formats(const std::optional<std::string>& identifier = std::nullopt);
  Page list_records(std::string_view prefix, std::optional<Timestamp> from, std::optional<Timestamp> until,
                    const std::optional<std::string>& set);
  Page resume(std::string_view verb, std::string_view token);
  Page get_record(std::string_view identifier, std::string_view prefix);

 private:
  Page call(const Params& params);

  std::shared_ptr<Transport> transport_;
  std::string base_url_;
};

}  // namespace overlay::oai
