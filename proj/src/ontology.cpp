#include "overlay/ontology.hpp"

namespace overlay {

std::string_view to_string(Behavior b) {
  switch (b) {
    case Behavior::Metadata: return "Metadata";
    case Behavior::Agent: return "Agent";
    case Behavior::Content: return "Content";
    case Behavior::Aggregator: return "Aggregator";
    case Behavior::MetadataProvider: return "MetadataProvider";
    case Behavior::Role: return "Role";
  }
  return "?";
}

std::optional<Behavior> parse_behavior(std::string_view name) {
  for (auto b : kAllBehaviors)
    if (to_string(b) == name) return b;
  return std::nullopt;
}

BehaviorSet BehaviorSet::from_names(const std::set<std::string>& names) {
  BehaviorSet s;
  for (const auto& n : names)
    if (auto b = parse_behavior(n)) s.insert(*b);
  return s;
}

std::string_view to_string(EntityType t) {
  switch (t) {
    case EntityType::Metadata: return "Metadata";
    case EntityType::Resource: return "Resource";
    case EntityType::Agent: return "Agent";
    case EntityType::Content: return "Content";
    case EntityType::Role: return "Role";
    case EntityType::Aggregator: return "Aggregator";
    case EntityType::MetadataProvider: return "MetadataProvider";
  }
  return "?";
}

bool has_type(BehaviorSet b, EntityType type) {
  switch (type) {
    case EntityType::Metadata: return b.contains(Behavior::Metadata);
    case EntityType::Resource: return b.contains(Behavior::Agent) || b.contains(Behavior::Content);
    case EntityType::Agent: return b.contains(Behavior::Agent);
    case EntityType::Content: return b.contains(Behavior::Content);
    case EntityType::Role:
      return b.contains(Behavior::Role) || b.contains(Behavior::Aggregator) ||
             b.contains(Behavior::MetadataProvider);
    case EntityType::Aggregator: return b.contains(Behavior::Aggregator);
    case EntityType::MetadataProvider: return b.contains(Behavior::MetadataProvider);
  }
  return false;
}

std::optional<DomainRange> constraint_for(const Predicate& p) {
  if (!p.is_base()) return std::nullopt;
  for (const auto& dr : kBaseOntology)
    if (dr.predicate == p.name) return dr;
  return std::nullopt;
}

bool is_known_base_term(std::string_view name) {
  for (const auto& dr : kBaseOntology)
    if (dr.predicate == name) return true;
  return false;
}

}  // namespace overlay
