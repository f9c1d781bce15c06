#pragma once

#include <string>
#include <vector>

#include "effrace/explore.hpp"
#include "effrace/model.hpp"

namespace effrace {

/// A shipped model: its source, default client and the instruction tags
/// expected to label critical steps under that client.
struct CatalogEntry {
  std::string name;
  std::string source;

  ObjectModel model() const;
  ClientConfig default_client() const;
  /// Tag patterns; a bare tag ("D4") matches every outcome variant.
  std::vector<std::string> expected() const;
};

const std::vector<CatalogEntry>& catalog();
/// Throws std::invalid_argument for unknown names.
const CatalogEntry& catalog_entry(const std::string& name);

/// "D4" matches "D4", "D4:T" and "D4:F"; "D4:T" matches only itself.
bool tag_matches(const std::string& pattern, const std::string& tag);

/// True if every tag matches some pattern and every pattern matches some tag.
bool tags_match_exactly(const std::vector<std::string>& patterns, const std::vector<std::string>& tags);

}  // namespace effrace
