#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ce/dataio.hpp"
#include "ce/loss.hpp"
#include "ce/model.hpp"
#include "ce/optim.hpp"

namespace ce {

/// Everything a train/eval/ablate run depends on. Parsed from a single JSON
/// document; the resolved form (all defaults filled in) is written next to
/// the outputs.
struct RunConfig {
  static constexpr int kVersion = 1;

  std::filesystem::path manifest;
  Split train_split = Split::train;
  Split eval_split = Split::test;
  ModelConfig model;
  LossConfig loss;
  OptimConfig optim;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output_dir = "runs/default";
  int checkpoint_every = 0;

  std::string to_json() const;
  /// FNV-1a over the resolved JSON, hex encoded.
  std::string hash() const;
  DatasetSchema schema() const;
};

/// Parses and validates. Relative paths resolve against `base_dir`. Every
/// schema violation is collected and reported in one ConfigError.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace ce
