#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "overlay/ids.hpp"
#include "overlay/xml.hpp"

// Dublin Core record handling shared by the harvester (validation, safe
// transforms) and the content model (crosswalk, gold fold).
namespace overlay::dc {

inline constexpr std::string_view kDcNs = "http://purl.org/dc/elements/1.1/";
inline constexpr std::string_view kDctNs = "http://purl.org/dc/terms/";
inline constexpr std::string_view kOaiDcNs = "http://www.openarchives.org/OAI/2.0/oai_dc/";
inline constexpr std::string_view kNsdlDcNs = "http://ns.nsdl.org/nsdl_dc_v1.02/";

inline constexpr std::string_view kOaiDc = "oai_dc";
inline constexpr std::string_view kNsdlDc = "nsdl_dc";

/// Format-tagged XML payload.
struct MetadataRecord {
  std::string format;
  std::string xml;
  Timestamp source_datestamp{};
};

/// Root namespace a record in `format` must use; nullopt for formats this
/// module does not know (those are never validated or transformed).
std::optional<std::string_view> root_namespace(std::string_view format);

/// Structural check: well-formed, root namespace matching `format`, and at
/// least one non-empty dc:identifier. Returns the rejection reason, or
/// nullopt when the record is acceptable.
std::optional<std::string> validate_record(std::string_view document, std::string_view format);

// Individual rules. Each maps one value and returns it unchanged when it
// does not recognize the input.
std::string collapse_whitespace(std::string_view value);
std::string normalize_date(std::string_view value);
std::string normalize_language(std::string_view value);
std::string map_type_vocabulary(std::string_view value);
bool is_w3cdtf(std::string_view value);
bool is_absolute_url(std::string_view value);
bool is_dcmi_type(std::string_view value);
bool is_rfc1766(std::string_view value);

/// Applies whitespace_collapse, date_normalize, language_normalize,
/// type_vocab_map and qualify, in that order, to every dc/dct child of the
/// record root. Idempotent; the input is not modified.
xml::Element apply_safe_transforms(const xml::Element& record);
/// Canonical bytes of the transformed record.
std::string apply_safe_transforms(std::string_view document);

/// Registered pairs: identity for any format onto itself, and oai_dc ->
/// nsdl_dc. Anything else throws Error(format_unavailable).
MetadataRecord crosswalk(const MetadataRecord& record, std::string_view to_format);
bool can_crosswalk(std::string_view from, std::string_view to);

/// Absolute-URL dc:identifier values of a record, in document order.
std::vector<std::string> url_identifiers(const xml::Element& record);

}  // namespace overlay::dc
