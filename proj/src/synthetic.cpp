#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ce/dataio.hpp"

namespace ce {

using nlohmann::json;

std::vector<SyntheticExpert> SyntheticSpec::default_experts() {
  return {
      {"scene", 2208, 1.0},
      {"object", 2048, 1.0},
      {"audio", 128, 0.9},
      {"face", 512, 0.5},
  };
}

void SyntheticSpec::validate() const {
  std::vector<std::string> problems;
  if (latent_dim < 1) problems.push_back("latent_dim must be positive");
  if (word_dim < 1) problems.push_back("word_dim must be positive");
  if (captions_per_video < 1) problems.push_back("captions_per_video must be positive");
  if (!(noise >= 0.0) || !std::isfinite(noise)) problems.push_back("noise must be a finite value >= 0");
  if (min_length < 1 || max_length < min_length) problems.push_back("need 1 <= min_length <= max_length");
  for (const auto& [split, n] : videos) {
    if (n < 0) problems.push_back("video count for split '" + to_string(split) + "' is negative");
  }
  if (experts.empty()) problems.push_back("at least one expert is required");
  std::set<std::string> names;
  bool reachable = false;
  for (const auto& e : experts) {
    if (e.name.empty()) problems.push_back("expert with empty name");
    if (!names.insert(e.name).second) problems.push_back("duplicate expert '" + e.name + "'");
    if (e.dim < 1) problems.push_back("expert '" + e.name + "': dim must be positive");
    if (!(e.availability >= 0.0 && e.availability <= 1.0)) {
      std::ostringstream os;
      os << "expert '" << e.name << "': availability " << e.availability << " outside [0, 1]";
      problems.push_back(os.str());
    }
    reachable = reachable || e.availability > 0.0;
  }
  if (!experts.empty() && !reachable) problems.push_back("every expert has availability 0; no video could be kept");
  if (!problems.empty()) {
    std::ostringstream os;
    os << "invalid synthetic spec:";
    for (const auto& p : problems) os << "\n  - " << p;
    throw ConfigError(os.str());
  }
}

SyntheticSpec parse_synthetic_spec(const std::string& text) {
  SyntheticSpec spec;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("synthetic spec is not valid JSON: ") + e.what());
  }
  try {
    spec.seed = j.value("seed", spec.seed);
    spec.latent_dim = j.value("latent_dim", spec.latent_dim);
    spec.word_dim = j.value("word_dim", spec.word_dim);
    spec.captions_per_video = j.value("captions_per_video", spec.captions_per_video);
    spec.noise = j.value("noise", spec.noise);
    spec.min_length = j.value("min_length", spec.min_length);
    spec.max_length = j.value("max_length", spec.max_length);
    if (j.contains("videos")) {
      spec.videos.clear();
      for (const auto& [split, n] : j.at("videos").items()) spec.videos[parse_split(split)] = n.get<int>();
    }
    if (j.contains("experts")) {
      spec.experts.clear();
      for (const auto& e : j.at("experts")) {
        spec.experts.push_back({e.at("name").get<std::string>(), e.at("dim").get<int>(), e.value("availability", 1.0)});
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  } catch (const DatasetError& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string synthetic_spec_json(const SyntheticSpec& spec) {
  json j;
  j["seed"] = spec.seed;
  j["latent_dim"] = spec.latent_dim;
  j["word_dim"] = spec.word_dim;
  j["captions_per_video"] = spec.captions_per_video;
  j["noise"] = spec.noise;
  j["min_length"] = spec.min_length;
  j["max_length"] = spec.max_length;
  json videos = json::object();
  for (const auto& [split, n] : spec.videos) videos[to_string(split)] = n;
  j["videos"] = videos;
  json experts = json::array();
  for (const auto& e : spec.experts) experts.push_back({{"name", e.name}, {"dim", e.dim}, {"availability", e.availability}});
  j["experts"] = experts;
  return j.dump(2);
}

namespace {

Matrix gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

Matrix to_binary32(Matrix m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
  return m;
}

// rows of `mixing * z + noise`; mixing is dim x latent.
Matrix planted_sequence(std::mt19937_64& rng, const Matrix& mixing, const Vector& z, int length, double noise) {
  Matrix rows(length, mixing.rows());
  const RowVector clean = (mixing * z).transpose();
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int t = 0; t < length; ++t) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) rows(t, c) = clean(c) + noise * normal(rng);
  }
  return to_binary32(std::move(rows));
}

}  // namespace

Dataset synthesize(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const double mix_scale = 1.0 / std::sqrt(static_cast<double>(spec.latent_dim));

  std::vector<Matrix> mixing;
  for (const auto& e : spec.experts) mixing.push_back(gaussian(rng, e.dim, spec.latent_dim, mix_scale));
  const Matrix word_mixing = gaussian(rng, spec.word_dim, spec.latent_dim, mix_scale);

  std::uniform_int_distribution<int> length(spec.min_length, spec.max_length);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Dataset out;
  int counter = 0;
  for (Split split : {Split::train, Split::val, Split::test}) {
    auto it = spec.videos.find(split);
    const int n = it == spec.videos.end() ? 0 : it->second;
    for (int v = 0; v < n; ++v) {
      Vector z(spec.latent_dim);
      for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);

      std::vector<bool> present(spec.experts.size());
      bool any = false;
      while (!any) {
        for (std::size_t e = 0; e < spec.experts.size(); ++e) {
          present[e] = coin(rng) < spec.experts[e].availability;
          any = any || present[e];
        }
      }

      VideoRecord record;
      std::ostringstream id;
      id << "v" << std::setw(5) << std::setfill('0') << counter++;
      record.id = id.str();
      for (std::size_t e = 0; e < spec.experts.size(); ++e) {
        if (!present[e]) {
          record.experts[spec.experts[e].name] = std::nullopt;
          continue;
        }
        record.experts[spec.experts[e].name] = planted_sequence(rng, mixing[e], z, length(rng), spec.noise);
      }
      std::vector<Matrix> captions;
      for (int c = 0; c < spec.captions_per_video; ++c) {
        captions.push_back(planted_sequence(rng, word_mixing, z, length(rng), spec.noise));
      }
      out.add_video(std::move(record), split, std::move(captions));
    }
  }
  return out;
}

Manifest write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "features");
  fs::create_directories(dir / "captions");
  Manifest manifest;
  manifest.root = dir;
  for (std::size_t v = 0; v < dataset.videos.size(); ++v) {
    const VideoRecord& r = dataset.videos[v];
    ManifestEntry e;
    e.id = r.id;
    e.split = dataset.splits[v];
    for (const auto& [name, feats] : r.experts) {
      if (!feats || feats->rows() == 0) {
        e.experts[name] = std::nullopt;
        continue;
      }
      const std::string rel = "features/" + r.id + "." + name + ".cef1";
      cef1::write_matrix(dir / rel, *feats);
      e.experts[name] = rel;
    }
    for (std::size_t k = 0; k < dataset.video_captions[v].size(); ++k) {
      const std::string rel = "captions/" + r.id + "." + std::to_string(k) + ".cef1";
      cef1::write_matrix(dir / rel, dataset.captions[dataset.video_captions[v][k]]);
      e.captions.push_back(rel);
    }
    manifest.entries.push_back(std::move(e));
  }
  write_manifest(dir / "manifest.jsonl", manifest);
  return manifest;
}

Manifest generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  spec.validate();
  if (fs::exists(out_dir) && !(fs::is_directory(out_dir) && fs::is_empty(out_dir))) {
    throw ConfigError("output directory '" + out_dir.string() + "' exists and is not empty");
  }
  const Dataset data = synthesize(spec);

  fs::path target = fs::absolute(out_dir);
  if (target.filename().empty()) target = target.parent_path();
  const fs::path staging = target.parent_path() / (target.filename().string() + ".tmp-gen");
  fs::remove_all(staging);
  try {
    fs::create_directories(staging);
    write_dataset(data, staging);
    std::ofstream(staging / "spec.json") << synthetic_spec_json(spec) << '\n';
    if (fs::exists(target)) fs::remove(target);
    fs::rename(staging, target);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
  Manifest m = read_manifest(target / "manifest.jsonl");
  validate_manifest(m, {});
  return m;
}

}  // namespace ce
