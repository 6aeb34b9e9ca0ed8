#include "overlay/fixture_loader.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "overlay/errors.hpp"

namespace overlay {

FixtureReport load_fixture_directory(ObjectStore& store, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::invalid_argument, dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".xml") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  FixtureReport report;
  std::vector<std::string> ignored;
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorCode::invalid_argument, "cannot read " + file.string());
    std::ostringstream bytes;
    bytes << in.rdbuf();
    try {
      report.imported.push_back(store.import_object(bytes.str(), PutOptions{Strictness::warn, {}, &ignored}));
    } catch (const Error& e) {
      throw Error(e.code(), file.string() + ": " + e.what(), e.details());
    }
  }
  report.violations = store.validate_graph();
  return report;
}

}  // namespace overlay
