#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace overlay {

inline constexpr std::string_view kRelNs = "http://ns.nsdl.org/ontologies/relationships#";
inline constexpr std::string_view kRdfNs = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";

/// Behavior definitions an object can bind. Binding is what gives an object
/// its type; an object may bind any subset at once.
enum class Behavior : std::uint8_t { Metadata, Agent, Content, Aggregator, MetadataProvider, Role };

inline constexpr std::array kAllBehaviors{Behavior::Metadata, Behavior::Agent,      Behavior::Content,
                                          Behavior::Aggregator, Behavior::MetadataProvider, Behavior::Role};

std::string_view to_string(Behavior b);
std::optional<Behavior> parse_behavior(std::string_view name);

/// Set of bound behaviors, as a bitmask.
class BehaviorSet {
 public:
  BehaviorSet() = default;
  BehaviorSet(std::initializer_list<Behavior> list) {
    for (auto b : list) insert(b);
  }
  /// Unknown names are ignored; object_store rejects them before this point.
  static BehaviorSet from_names(const std::set<std::string>& names);

  void insert(Behavior b) { bits_ |= bit(b); }
  bool contains(Behavior b) const { return bits_ & bit(b); }
  bool empty() const { return bits_ == 0; }
  std::uint8_t bits() const { return bits_; }
  static BehaviorSet from_bits(std::uint8_t bits) {
    BehaviorSet s;
    s.bits_ = bits & 0x3f;
    return s;
  }
  friend bool operator==(BehaviorSet, BehaviorSet) = default;

 private:
  static std::uint8_t bit(Behavior b) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(b)); }
  std::uint8_t bits_ = 0;
};

/// Content-model types. Resource and Role are supertypes satisfied by any of
/// their subtypes' behaviors.
enum class EntityType : std::uint8_t { Metadata, Resource, Agent, Content, Role, Aggregator, MetadataProvider };

std::string_view to_string(EntityType t);
bool has_type(BehaviorSet behaviors, EntityType type);

/// A relationship term: base ontology term or a foreign-namespace extension.
struct Predicate {
  std::string ns;
  std::string name;

  static Predicate base(std::string_view name) { return {std::string(kRelNs), std::string(name)}; }
  bool is_base() const { return ns == kRelNs; }
  std::string iri() const { return ns + name; }
  friend auto operator<=>(const Predicate&, const Predicate&) = default;
};

namespace rel {
inline const Predicate annotates = Predicate::base("annotates");
inline const Predicate assertedBy = Predicate::base("assertedBy");
inline const Predicate augments = Predicate::base("augments");
inline const Predicate hasRole = Predicate::base("hasRole");
inline const Predicate metadataFor = Predicate::base("metadataFor");
inline const Predicate memberOf = Predicate::base("memberOf");
inline const Predicate providedBy = Predicate::base("providedBy");
inline const Predicate representedBy = Predicate::base("representedBy");
}  // namespace rel

struct DomainRange {
  std::string_view predicate;
  EntityType domain;
  EntityType range;
};

inline constexpr std::array<DomainRange, 8> kBaseOntology{{
    {"annotates", EntityType::Content, EntityType::Resource},
    {"assertedBy", EntityType::Role, EntityType::Agent},
    {"augments", EntityType::Metadata, EntityType::Metadata},
    {"hasRole", EntityType::Agent, EntityType::Role},
    {"metadataFor", EntityType::Metadata, EntityType::Resource},
    {"memberOf", EntityType::Resource, EntityType::Aggregator},
    {"providedBy", EntityType::Metadata, EntityType::MetadataProvider},
    {"representedBy", EntityType::Aggregator, EntityType::Content},
}};

/// Domain/range constraint for a base predicate; nullopt for unknown base terms
/// and for extension predicates.
std::optional<DomainRange> constraint_for(const Predicate& p);
bool is_known_base_term(std::string_view name);

}  // namespace overlay
