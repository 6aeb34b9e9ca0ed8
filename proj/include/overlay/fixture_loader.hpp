#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "overlay/object_store.hpp"

namespace overlay {

struct FixtureReport {
  std::vector<ObjectId> imported;
  /// Ontology problems remaining after every file was imported.
  std::vector<std::string> violations;
};

/// Imports every *.xml file under `dir` (recursively, in path order) as
/// canonical object XML. Files are imported in warn mode so objects may
/// reference ones that come later; the graph is validated once at the end.
FixtureReport load_fixture_directory(ObjectStore& store, const std::filesystem::path& dir);

}  // namespace overlay
