#include "launderscope/manifest.hpp"

#include <fstream>
#include <istream>
#include <set>
#include <string_view>

#include "launderscope/error.hpp"

namespace launderscope {

namespace {

// Splits one CSV record. Double-quoted fields may contain commas; a doubled
// quote inside a quoted field is a literal quote.
std::vector<std::string> split_record(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        fields.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else {
      fields.back() += ch;
    }
  }
  if (quoted) throw DataError("manifest: unterminated quoted field");
  return fields;
}

std::string quote_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

}  // namespace

std::filesystem::path DatasetManifest::resolve(const ManifestEntry& entry) const {
  std::filesystem::path p(entry.path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

DatasetManifest parse_manifest(std::istream& in,
                               const std::filesystem::path& base_dir) {
  DatasetManifest manifest;
  manifest.base_dir = base_dir;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!saw_header) {
      if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        line.erase(0, 3);
      }
      if (line != "path,label,group") {
        throw DataError("manifest: missing header \"path,label,group\"");
      }
      saw_header = true;
      continue;
    }
    if (line.empty()) continue;
    auto fields = split_record(line);
    if (fields.size() != 3) {
      throw DataError("manifest line " + std::to_string(line_no) +
                      ": expected 3 fields");
    }
    ManifestEntry entry;
    entry.path = std::move(fields[0]);
    try {
      entry.label = parse_label(fields[1]);
    } catch (const DataError& e) {
      throw DataError("manifest line " + std::to_string(line_no) + ": " +
                      e.what());
    }
    entry.group = std::move(fields[2]);
    if (entry.path.empty()) {
      throw DataError("manifest line " + std::to_string(line_no) +
                      ": empty path");
    }
    if (!seen.insert(entry.path).second) {
      throw DataError("manifest line " + std::to_string(line_no) +
                      ": duplicate path " + entry.path);
    }
    manifest.entries.push_back(std::move(entry));
  }
  if (!saw_header) throw DataError("manifest: missing header \"path,label,group\"");
  if (manifest.entries.empty()) throw DataError("manifest: no entries");
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("file not found: " + path.string());
  return parse_manifest(in, path.parent_path());
}

void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << "path,label,group\n";
  for (const auto& e : manifest.entries) {
    out << quote_field(e.path) << ',' << to_string(e.label) << ','
        << quote_field(e.group) << '\n';
  }
}

}  // namespace launderscope
