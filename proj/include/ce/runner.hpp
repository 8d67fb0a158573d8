#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ce/report.hpp"
#include "ce/run_config.hpp"
#include "ce/train.hpp"

namespace ce {

/// Loads the manifest, keeps `split` and drops experts the config does not
/// name. Videos left without any configured expert are dropped too.
Dataset load_run_data(const RunConfig& config, Split split, std::size_t* dropped = nullptr);

RetrievalResult evaluate_model(const Dataset& data, const ModelConfig& model, const ModelParams& params);

struct SeedRun {
  std::uint64_t seed = 0;
  ModelParams params;
  std::vector<double> losses;
  std::filesystem::path dir;  // empty when nothing was written
};

/// Trains one seed. With a non-empty `dir`, writes resolved-config.json,
/// loss_log.csv and checkpoints/ under it.
SeedRun train_seed(const RunConfig& config, std::uint64_t seed, const Dataset& train_data,
                   const std::filesystem::path& dir = {});

/// Trains every configured seed into <output_dir>/seed-<s>/.
std::vector<SeedRun> run_train(const RunConfig& config);

struct EvalOutput {
  std::vector<std::uint64_t> seeds;
  std::vector<RetrievalResult> runs;
  std::vector<MetricSummary> summary;
  std::string text;  // printable report
};

/// Evaluates each seed on the eval split. `checkpoint` may be empty (fresh
/// seeded parameters), a training output directory holding seed-<s>/
/// subdirectories, a path containing "{seed}", or one checkpoint directory
/// used for every seed.
EvalOutput run_eval(const RunConfig& config, const std::filesystem::path& checkpoint);

/// Expands an --experts argument into rows of expert lists:
///   "cumulative"   one row per prefix of the configured order
///   "<base>+X"     base plus each other expert, one row each
///   "a,b" / "a+b"  a single row
/// Unknown names raise ConfigError listing the valid ones.
std::vector<std::vector<std::string>> ablation_rows(const std::string& spec, const std::vector<std::string>& experts);

/// Restricts the model to `experts`, keeping the configured order.
RunConfig with_experts(const RunConfig& config, const std::vector<std::string>& experts);

std::vector<AblationRow> run_ablation(const RunConfig& config, const std::string& spec);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ce
