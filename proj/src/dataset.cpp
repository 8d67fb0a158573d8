#include <set>
#include <sstream>

#include "ce/dataio.hpp"

namespace ce {

std::vector<std::string> Dataset::expert_names() const {
  std::set<std::string> names;
  for (const auto& v : videos) {
    for (const auto& [name, _] : v.experts) names.insert(name);
  }
  return {names.begin(), names.end()};
}

void Dataset::add_video(VideoRecord record, Split split, std::vector<Matrix> caps) {
  const int vi = static_cast<int>(videos.size());
  record.caption_ids.clear();
  std::vector<int> indices;
  for (std::size_t k = 0; k < caps.size(); ++k) {
    const std::string cid = record.id + "#" + std::to_string(k);
    record.caption_ids.push_back(cid);
    indices.push_back(static_cast<int>(captions.size()));
    caption_ids.push_back(cid);
    caption_video.push_back(vi);
    captions.push_back(std::move(caps[k]));
  }
  video_captions.push_back(std::move(indices));
  splits.push_back(split);
  videos.push_back(std::move(record));
}

Dataset Dataset::subset(Split split) const {
  Dataset out;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    if (splits[v] != split) continue;
    std::vector<Matrix> caps;
    for (int c : video_captions[v]) caps.push_back(captions[c]);
    out.add_video(videos[v], splits[v], std::move(caps));
  }
  return out;
}

Dataset Dataset::restrict_experts(const std::vector<std::string>& names, std::size_t* dropped) const {
  Dataset out;
  std::size_t lost = 0;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    VideoRecord r;
    r.id = videos[v].id;
    bool any = false;
    for (const auto& name : names) {
      auto it = videos[v].experts.find(name);
      r.experts[name] = it == videos[v].experts.end() ? std::nullopt : it->second;
      any = any || r.has_expert(name);
    }
    if (!any) {
      ++lost;
      continue;
    }
    std::vector<Matrix> caps;
    for (int c : video_captions[v]) caps.push_back(captions[c]);
    out.add_video(std::move(r), splits[v], std::move(caps));
  }
  if (dropped) *dropped = lost;
  return out;
}

namespace {

std::filesystem::path resolve(const Manifest& m, const std::string& rel) {
  std::filesystem::path p(rel);
  return p.is_absolute() ? p : m.root / p;
}

struct Loaded {
  Dataset data;
  std::vector<std::string> problems;
};

Loaded load_checked(const Manifest& manifest, const DatasetSchema& schema, bool keep_data) {
  Loaded out;
  auto& problems = out.problems;
  std::set<std::string> ids;
  for (const auto& e : manifest.entries) {
    const std::string who = "video '" + e.id + "'";
    if (e.id.empty()) problems.push_back("entry with empty id");
    if (!ids.insert(e.id).second) problems.push_back("duplicate id '" + e.id + "'");
    if (e.captions.empty()) problems.push_back(who + ": has no captions");

    VideoRecord record;
    record.id = e.id;
    for (const auto& [name, path] : e.experts) {
      if (!schema.expert_dims.empty() && !schema.expert_dims.count(name)) continue;
      if (!path) {
        record.experts[name] = std::nullopt;
        continue;
      }
      const auto full = resolve(manifest, *path);
      if (!std::filesystem::exists(full)) {
        problems.push_back(who + ": dangling path '" + full.string() + "' for expert '" + name + "'");
        continue;
      }
      try {
        Matrix m = cef1::read_matrix(full);
        auto dim = schema.expert_dims.find(name);
        if (m.rows() > 0 && dim != schema.expert_dims.end() && dim->second > 0 && m.cols() != dim->second) {
          problems.push_back(who + ": expert '" + name + "' has " + std::to_string(m.cols()) + " dims, expected " +
                             std::to_string(dim->second));
        }
        // Zero-row files mean the expert is missing, same as null.
        if (m.rows() == 0) {
          record.experts[name] = std::nullopt;
        } else {
          record.experts[name] = keep_data ? std::optional<Matrix>(std::move(m)) : std::optional<Matrix>(Matrix(1, 1));
        }
      } catch (const Error& ex) {
        problems.push_back(who + ": " + ex.what());
      }
    }
    for (const auto& [name, dim] : schema.expert_dims) {
      if (!e.experts.count(name)) record.experts[name] = std::nullopt;
    }
    bool listed = false;
    for (const auto& [name, path] : e.experts) listed = listed || path.has_value();
    if (!listed) problems.push_back(who + ": no expert features available");

    std::vector<Matrix> caps;
    for (const auto& c : e.captions) {
      const auto full = resolve(manifest, c);
      if (!std::filesystem::exists(full)) {
        problems.push_back(who + ": dangling caption path '" + full.string() + "'");
        continue;
      }
      try {
        Matrix m = cef1::read_matrix(full);
        if (m.rows() == 0) problems.push_back(who + ": empty caption '" + c + "'");
        if (schema.word_dim > 0 && m.cols() != schema.word_dim) {
          problems.push_back(who + ": caption '" + c + "' has " + std::to_string(m.cols()) + " dims, expected " +
                             std::to_string(schema.word_dim));
        }
        caps.push_back(keep_data ? std::move(m) : Matrix());
      } catch (const Error& ex) {
        problems.push_back(who + ": " + ex.what());
      }
    }
    out.data.add_video(std::move(record), e.split, std::move(caps));
  }
  return out;
}

[[noreturn]] void report(const std::vector<std::string>& problems) {
  std::ostringstream os;
  os << "manifest validation failed (" << problems.size() << " problem" << (problems.size() == 1 ? "" : "s") << "):";
  for (const auto& p : problems) os << "\n  - " << p;
  throw DatasetError(os.str());
}

}  // namespace

void validate_manifest(const Manifest& manifest, const DatasetSchema& schema) {
  Loaded l = load_checked(manifest, schema, false);
  if (!l.problems.empty()) report(l.problems);
}

Dataset load_dataset(const Manifest& manifest, const DatasetSchema& schema) {
  Loaded l = load_checked(manifest, schema, true);
  if (!l.problems.empty()) report(l.problems);
  return std::move(l.data);
}

Dataset load_dataset(const std::filesystem::path& manifest_path, const DatasetSchema& schema) {
  return load_dataset(read_manifest(manifest_path), schema);
}

}  // namespace ce
