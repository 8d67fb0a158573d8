#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ce/cef1.hpp"
#include "ce/embedding.hpp"

namespace ce {

class DatasetError : public Error {
 public:
  using Error::Error;
};

enum class Split { train, val, test };
std::string to_string(Split s);
Split parse_split(const std::string& s);

// ---------------------------------------------------------------------------
// Manifest: line-delimited JSON, one video per line, paths relative to the
// manifest's directory. A null expert path marks the expert as missing.
//   {"id":"v0001","split":"train","experts":{"audio":null,"scene":"features/v0001.scene.cef1"},
//    "captions":["captions/v0001.0.cef1"]}

struct ManifestEntry {
  std::string id;
  Split split = Split::train;
  std::map<std::string, std::optional<std::string>> experts;
  std::vector<std::string> captions;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path root;  // directory relative paths resolve against
};

std::string to_json_line(const ManifestEntry& entry);
ManifestEntry parse_manifest_line(const std::string& line, std::size_t line_number);
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

// ---------------------------------------------------------------------------

/// Expected dimensionality of every expert and of caption word vectors.
/// Zero means "do not check".
struct DatasetSchema {
  std::map<std::string, int> expert_dims;
  int word_dim = 0;
};

/// Videos plus their captions, held in memory. Captions are stored grouped
/// by video, in manifest order.
struct Dataset {
  std::vector<VideoRecord> videos;
  std::vector<Matrix> captions;
  std::vector<std::string> caption_ids;
  std::vector<int> caption_video;               // caption -> video index
  std::vector<std::vector<int>> video_captions;  // video -> caption indices
  std::vector<Split> splits;                     // per video

  std::size_t num_videos() const { return videos.size(); }
  std::size_t num_captions() const { return captions.size(); }
  std::vector<std::string> expert_names() const;

  void add_video(VideoRecord record, Split split, std::vector<Matrix> captions);
  Dataset subset(Split split) const;
  /// Keeps only the named experts; videos left with none of them are dropped
  /// together with their captions.
  Dataset restrict_experts(const std::vector<std::string>& names, std::size_t* dropped = nullptr) const;
};

/// Checks ids, paths, dimensions and caption counts; throws DatasetError
/// listing every problem found.
void validate_manifest(const Manifest& manifest, const DatasetSchema& schema);
Dataset load_dataset(const Manifest& manifest, const DatasetSchema& schema);
Dataset load_dataset(const std::filesystem::path& manifest_path, const DatasetSchema& schema);

// ---------------------------------------------------------------------------
// Synthetic planted-correspondence data. Each video draws a latent z; every
// expert sequence row is A_e z + noise and every caption token is B z + noise.

struct SyntheticExpert {
  std::string name;
  int dim = 0;
  double availability = 1.0;
};

struct SyntheticSpec {
  std::uint64_t seed = 0;
  int latent_dim = 16;
  int word_dim = 32;
  int captions_per_video = 1;
  double noise = 0.1;
  int min_length = 4;
  int max_length = 16;
  std::map<Split, int> videos{{Split::train, 64}, {Split::val, 0}, {Split::test, 0}};
  std::vector<SyntheticExpert> experts = default_experts();

  /// Feature sizes of the original object, face, audio and scene extractors.
  static std::vector<SyntheticExpert> default_experts();
  void validate() const;
};

SyntheticSpec parse_synthetic_spec(const std::string& json_text);
std::string synthetic_spec_json(const SyntheticSpec& spec);

/// In-memory generation; feature values are rounded to binary32 so the result
/// is identical to what write_dataset/load_dataset round-trip.
Dataset synthesize(const SyntheticSpec& spec);

/// Writes manifest.jsonl, features/ and captions/ under `dir`.
Manifest write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Generates into a temporary sibling and renames it into place, so a failed
/// run leaves nothing behind. `out_dir` must not exist or be empty.
Manifest generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

}  // namespace ce
