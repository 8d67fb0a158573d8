#include "ce/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "ce/similarity.hpp"

namespace ce {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

BatchSampler::BatchSampler(const Dataset& data, int batch_size, std::uint64_t seed)
    : data_(&data), batch_size_(batch_size), seed_(seed) {
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  const int n = static_cast<int>(data.num_videos());
  if (n < batch_size) {
    throw ConfigError("training split has " + std::to_string(n) + " videos, fewer than batch_size " +
                      std::to_string(batch_size));
  }
  steps_per_epoch_ = (n + batch_size - 1) / batch_size;
}

Batch BatchSampler::batch(std::int64_t step) const {
  const std::int64_t epoch = step / steps_per_epoch_;
  const int index = static_cast<int>(step % steps_per_epoch_);
  const int n = static_cast<int>(data_->num_videos());

  std::mt19937_64 rng(mix_seed(seed_, static_cast<std::uint64_t>(epoch)));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> caption_pick(n);
  for (int v = 0; v < n; ++v) {
    const auto& caps = data_->video_captions[v];
    if (caps.empty()) throw DatasetError("video '" + data_->videos[v].id + "' has no captions");
    caption_pick[v] = caps[std::uniform_int_distribution<std::size_t>(0, caps.size() - 1)(rng)];
  }

  Batch b;
  const int begin = index * batch_size_;
  const int end = std::min(n, begin + batch_size_);
  for (int i = begin; i < end; ++i) {
    b.videos.push_back(order[i]);
    b.captions.push_back(caption_pick[order[i]]);
  }
  return b;
}

Trainer::Trainer(const Dataset& data, ModelConfig model, OptimConfig optim, LossConfig loss)
    : data_(&data),
      model_(std::move(model)),
      optim_config_(optim),
      loss_(loss),
      params_(init_params(model_, optim.seed)),
      optimizer_(optim, params_),
      sampler_(data, optim.batch_size, optim.seed) {}

Trainer::Trainer(const Dataset& data, ModelConfig model, OptimConfig optim, LossConfig loss, const Checkpoint& resume)
    : data_(&data),
      model_(std::move(model)),
      optim_config_(optim),
      loss_(loss),
      params_(resume.params),
      optimizer_(optim, resume.optim),
      sampler_(data, optim.batch_size, optim.seed),
      step_(resume.step) {
  const ModelParams expected = init_params(model_, optim.seed);
  for (const auto& [name, m] : expected) {
    auto it = params_.find(name);
    if (it == params_.end() || it->second.rows() != m.rows() || it->second.cols() != m.cols()) {
      throw ConfigError("checkpoint does not match the model: parameter '" + name + "' missing or misshapen");
    }
  }
  if (params_.size() != expected.size()) {
    throw ConfigError("checkpoint does not match the model: it has " + std::to_string(params_.size()) +
                      " parameters, the model expects " + std::to_string(expected.size()));
  }
}

double Trainer::loss_and_gradients(const Batch& batch, NamedGradients* grads) const {
  std::vector<const VideoRecord*> videos;
  std::vector<const Matrix*> captions;
  for (std::size_t i = 0; i < batch.videos.size(); ++i) {
    videos.push_back(&data_->videos[batch.videos[i]]);
    captions.push_back(&data_->captions[batch.captions[i]]);
  }
  const VideoBatch vb = make_video_batch(model_, std::move(videos));

  Tape tape;
  ParamVars vars = grads ? tape.parameters(params_) : constant_params(tape, params_);
  EncodedVideos ev = encode_videos(tape, vars, model_, vb);
  EncodedTexts et = encode_texts(tape, vars, model_, captions);
  Var loss = ranking_loss(similarity_matrix(ev, et), loss_.margin);
  if (grads) {
    tape.backward(loss);
    *grads = tape.parameter_gradients();
  }
  return loss.scalar();
}

double Trainer::step() {
  const Batch batch = sampler_.batch(step_);
  NamedGradients grads;
  const double loss = loss_and_gradients(batch, &grads);
  if (!std::isfinite(loss)) {
    std::ostringstream os;
    os << "non-finite loss at step " << step_ << "; batch videos:";
    for (int v : batch.videos) os << ' ' << data_->videos[v].id;
    throw NumericError(os.str());
  }
  optimizer_.step(params_, grads);
  ++step_;
  return loss;
}

Checkpoint Trainer::checkpoint(const std::string& config_hash) const {
  Checkpoint c;
  c.config_hash = config_hash;
  c.step = step_;
  c.params = params_;
  c.optim = optimizer_.state();
  return c;
}

std::vector<double> Trainer::run(const TrainOptions& options) {
  std::vector<double> losses;
  while (step_ < optim_config_.max_steps) {
    const double loss = step();
    losses.push_back(loss);
    if (options.on_step) options.on_step(step_, loss);
    if (!options.checkpoint_dir.empty() && options.checkpoint_every > 0 && step_ % options.checkpoint_every == 0) {
      save_checkpoint(options.checkpoint_dir / ("step-" + std::to_string(step_)), checkpoint(options.config_hash));
    }
  }
  if (!options.checkpoint_dir.empty()) save_checkpoint(options.checkpoint_dir / "final", checkpoint(options.config_hash));
  return losses;
}

TrainResult train(const Dataset& data, const ModelConfig& model, const OptimConfig& optim, const LossConfig& loss,
                  const TrainOptions& options) {
  Trainer trainer(data, model, optim, loss);
  TrainResult r;
  r.losses = trainer.run(options);
  r.params = trainer.params();
  return r;
}

SimilarityMatrix score_dataset(const Dataset& data, const ModelConfig& model, const ModelParams& params) {
  if (data.num_videos() == 0 || data.num_captions() == 0) throw DatasetError("cannot score an empty dataset");
  std::vector<const VideoRecord*> videos;
  for (const auto& v : data.videos) videos.push_back(&v);
  std::vector<const Matrix*> captions;
  for (const auto& c : data.captions) captions.push_back(&c);

  Tape tape;
  ParamVars vars = constant_params(tape, params);
  const VideoBatch vb = make_video_batch(model, std::move(videos));
  EncodedVideos ev = encode_videos(tape, vars, model, vb);
  EncodedTexts et = encode_texts(tape, vars, model, captions);

  SimilarityMatrix out;
  out.s = similarity_matrix(ev, et).value();
  for (const auto& v : data.videos) out.video_ids.push_back(v.id);
  out.caption_ids = data.caption_ids;
  return out;
}

}  // namespace ce
