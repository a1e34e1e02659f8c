#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "launderscope/image.hpp"

namespace launderscope {

struct ManifestEntry {
  std::string path;
  ClassLabel label = ClassLabel::Real;
  std::string group;
};

/// Labelled image list read from a `path,label,group` CSV.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  /// Entry path resolved against the manifest's directory when relative.
  std::filesystem::path resolve(const ManifestEntry& entry) const;

  std::filesystem::path base_dir;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(std::istream& in,
                               const std::filesystem::path& base_dir = {});
void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);

}  // namespace launderscope
