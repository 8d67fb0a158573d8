#include <fstream>

#include <nlohmann/json.hpp>

#include "ce/dataio.hpp"

namespace ce {

using nlohmann::json;

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw DatasetError("unknown split '" + s + "' (expected train, val or test)");
}

std::string to_json_line(const ManifestEntry& entry) {
  json j;
  j["id"] = entry.id;
  j["split"] = to_string(entry.split);
  json experts = json::object();
  for (const auto& [name, path] : entry.experts) experts[name] = path ? json(*path) : json(nullptr);
  j["experts"] = std::move(experts);
  j["captions"] = entry.captions;
  return j.dump();
}

ManifestEntry parse_manifest_line(const std::string& line, std::size_t line_number) {
  const std::string where = "manifest line " + std::to_string(line_number);
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DatasetError(where + ": " + e.what());
  }
  if (!j.is_object()) throw DatasetError(where + ": expected a JSON object");
  ManifestEntry entry;
  try {
    entry.id = j.at("id").get<std::string>();
    entry.split = parse_split(j.at("split").get<std::string>());
    for (const auto& [name, path] : j.at("experts").items()) {
      if (path.is_null()) {
        entry.experts[name] = std::nullopt;
      } else {
        entry.experts[name] = path.get<std::string>();
      }
    }
    entry.captions = j.at("captions").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DatasetError(where + ": " + e.what());
  }
  return entry;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open manifest '" + path.string() + "'");
  Manifest m;
  m.root = path.parent_path();
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    m.entries.push_back(parse_manifest_line(line, n));
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DatasetError("cannot write manifest '" + path.string() + "'");
  for (const auto& e : manifest.entries) out << to_json_line(e) << '\n';
}

}  // namespace ce
