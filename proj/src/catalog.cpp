#include "effrace/catalog.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <map>
#include <stdexcept>

namespace effrace {

namespace detail {
const std::map<std::string, std::string>& model_sources();
}

ObjectModel CatalogEntry::model() const { return parse_model(source, name); }

ClientConfig CatalogEntry::default_client() const {
  auto m = model();
  return parse_client(m.client, m);
}

std::vector<std::string> CatalogEntry::expected() const { return model().critical; }

const std::vector<CatalogEntry>& catalog() {
  static const std::vector<CatalogEntry> entries = [] {
    std::vector<CatalogEntry> out;
    for (const auto& [name, src] : detail::model_sources()) out.push_back({name, src});
    return out;
  }();
  return entries;
}

const CatalogEntry& catalog_entry(const std::string& name) {
  for (const auto& e : catalog())
    if (e.name == name) return e;
  std::string known;
  for (const auto& e : catalog()) known += (known.empty() ? "" : ", ") + e.name;
  throw std::invalid_argument(fmt::format("unknown model '{}' (known: {})", name, known));
}

bool tag_matches(const std::string& pattern, const std::string& tag) {
  if (pattern == tag) return true;
  return pattern.find(':') == std::string::npos && tag.size() > pattern.size() && tag.compare(0, pattern.size(), pattern) == 0 &&
         tag[pattern.size()] == ':';
}

bool tags_match_exactly(const std::vector<std::string>& patterns, const std::vector<std::string>& tags) {
  auto hit = [](const std::string& p, const std::string& t) { return tag_matches(p, t); };
  for (const auto& t : tags)
    if (std::none_of(patterns.begin(), patterns.end(), [&](const std::string& p) { return hit(p, t); })) return false;
  for (const auto& p : patterns)
    if (std::none_of(tags.begin(), tags.end(), [&](const std::string& t) { return hit(p, t); })) return false;
  return true;
}

}  // namespace effrace
