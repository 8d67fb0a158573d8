#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ce/model.hpp"
#include "ce/optim.hpp"

namespace ce {

/// On-disk layout of a checkpoint directory:
///   header.json   format version, config hash, step, parameter manifest
///   params/NNNN.cef1, state/NNNN.cef1   one blob per named matrix
/// Blobs use the CEF1 container with each double stored as its raw 64-bit
/// pattern (two payload words), so save/load is bit-exact.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  std::string config_hash;
  std::int64_t step = 0;
  ModelParams params;
  OptimState optim;
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace ce
