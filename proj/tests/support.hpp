#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "ce/dataio.hpp"
#include "ce/model.hpp"

namespace ce::testing {

inline Matrix randn(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double stddev = 1.0) {
  std::normal_distribution<double> n(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("ce-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  std::filesystem::path path_;
};

// Three experts (mean, mean, netvlad) over small dims.
inline ModelConfig small_model(Variant variant = Variant::ce, int common_dim = 8) {
  ModelConfig cfg;
  cfg.experts = {{"scene", 6, Aggregator::mean, 1, 0},
                 {"object", 5, Aggregator::mean, 1, 0},
                 {"audio", 4, Aggregator::netvlad, 3, 1}};
  cfg.text = {7, 3, 1};
  cfg.variant = variant;
  cfg.common_dim = common_dim;
  cfg.gating_hidden = 6;
  return cfg;
}

inline SyntheticSpec small_spec(std::uint64_t seed = 0, int train = 16) {
  SyntheticSpec spec;
  spec.seed = seed;
  spec.latent_dim = 6;
  spec.word_dim = 7;
  spec.min_length = 2;
  spec.max_length = 5;
  spec.videos = {{Split::train, train}, {Split::val, 0}, {Split::test, 0}};
  spec.experts = {{"scene", 6, 1.0}, {"object", 5, 0.7}, {"audio", 4, 0.6}};
  return spec;
}

inline VideoRecord random_record(std::mt19937_64& rng, const ModelConfig& cfg, const std::vector<bool>& available) {
  VideoRecord r;
  r.id = "rec";
  for (std::size_t i = 0; i < cfg.experts.size(); ++i) {
    const auto& e = cfg.experts[i];
    if (available[i]) {
      r.experts[e.name] = randn(rng, uniform_int(rng, 1, 5), e.input_dim);
    } else {
      r.experts[e.name] = std::nullopt;
    }
  }
  return r;
}

}  // namespace ce::testing
