#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ce/checkpoint.hpp"
#include "ce/dataio.hpp"
#include "ce/loss.hpp"
#include "ce/model.hpp"
#include "ce/optim.hpp"
#include "ce/similarity.hpp"

namespace ce {

/// One sampled minibatch: video indices and, for each, the caption used.
struct Batch {
  std::vector<int> videos;
  std::vector<int> captions;
};

/// Epoch-wise permutations without replacement. Stateless: the batch for a
/// step depends only on (seed, step), which makes resuming trivial.
class BatchSampler {
 public:
  BatchSampler(const Dataset& data, int batch_size, std::uint64_t seed);
  int steps_per_epoch() const { return steps_per_epoch_; }
  Batch batch(std::int64_t step) const;

 private:
  const Dataset* data_;
  int batch_size_;
  std::uint64_t seed_;
  int steps_per_epoch_;
};

struct TrainOptions {
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  int checkpoint_every = 0;              // 0: final checkpoint only
  std::string config_hash;
  std::function<void(std::int64_t step, double loss)> on_step;
};

/// Minibatch training of the ranking loss. Owns the parameters and optimizer
/// state; steps can be taken one at a time or run to the configured limit.
class Trainer {
 public:
  Trainer(const Dataset& data, ModelConfig model, OptimConfig optim, LossConfig loss);
  Trainer(const Dataset& data, ModelConfig model, OptimConfig optim, LossConfig loss, const Checkpoint& resume);

  /// Loss and gradients of one batch at the current parameters.
  double loss_and_gradients(const Batch& batch, NamedGradients* grads) const;
  double step();
  /// Runs until max_steps; returns the losses of the steps it took.
  std::vector<double> run(const TrainOptions& options = {});

  std::int64_t current_step() const { return step_; }
  const ModelParams& params() const { return params_; }
  const OptimState& optimizer_state() const { return optimizer_.state(); }
  const BatchSampler& sampler() const { return sampler_; }
  Checkpoint checkpoint(const std::string& config_hash) const;

 private:
  const Dataset* data_;
  ModelConfig model_;
  OptimConfig optim_config_;
  LossConfig loss_;
  ModelParams params_;
  Optimizer optimizer_;
  BatchSampler sampler_;
  std::int64_t step_ = 0;
};

struct TrainResult {
  ModelParams params;
  std::vector<double> losses;
};

TrainResult train(const Dataset& data, const ModelConfig& model, const OptimConfig& optim, const LossConfig& loss,
                  const TrainOptions& options = {});

/// Encodes every video and caption of `data` and returns the videos x
/// captions similarity matrix.
SimilarityMatrix score_dataset(const Dataset& data, const ModelConfig& model, const ModelParams& params);

}  // namespace ce
