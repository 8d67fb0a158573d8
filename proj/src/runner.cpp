#include "ce/runner.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace ce {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> config_expert_names(const ModelConfig& model) {
  std::vector<std::string> out;
  for (const auto& e : model.experts) out.push_back(e.name);
  return out;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, sep);) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

void check_shapes(const ModelParams& got, const ModelParams& expected, const fs::path& where) {
  for (const auto& [name, m] : expected) {
    auto it = got.find(name);
    if (it == got.end()) throw ConfigError("checkpoint '" + where.string() + "' lacks parameter '" + name + "'");
    if (it->second.rows() != m.rows() || it->second.cols() != m.cols()) {
      throw ConfigError("checkpoint '" + where.string() + "': parameter '" + name + "' is " + shape_string(it->second) +
                        ", config expects " + shape_string(m));
    }
  }
  if (got.size() != expected.size()) {
    throw ConfigError("checkpoint '" + where.string() + "' does not match the configured model");
  }
}

fs::path checkpoint_for(const fs::path& checkpoint, std::uint64_t seed) {
  std::string s = checkpoint.string();
  if (auto pos = s.find("{seed}"); pos != std::string::npos) {
    s.replace(pos, 6, std::to_string(seed));
    return s;
  }
  const fs::path per_seed = checkpoint / ("seed-" + std::to_string(seed)) / "checkpoints" / "final";
  if (fs::exists(per_seed / "header.json")) return per_seed;
  if (fs::exists(checkpoint / "header.json")) return checkpoint;
  throw ConfigError("no checkpoint for seed " + std::to_string(seed) + " under '" + checkpoint.string() + "'");
}

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write '" + path.string() + "'");
}

Dataset load_run_data(const RunConfig& config, Split split, std::size_t* dropped) {
  const Dataset all = load_dataset(config.manifest, config.schema());
  return all.subset(split).restrict_experts(config_expert_names(config.model), dropped);
}

RetrievalResult evaluate_model(const Dataset& data, const ModelConfig& model, const ModelParams& params) {
  const SimilarityMatrix s = score_dataset(data, model, params);
  return evaluate(s.s, data.caption_video);
}

SeedRun train_seed(const RunConfig& config, std::uint64_t seed, const Dataset& train_data, const fs::path& dir) {
  OptimConfig optim = config.optim;
  optim.seed = seed;
  SeedRun run;
  run.seed = seed;
  run.dir = dir;

  TrainOptions options;
  options.config_hash = config.hash();
  std::ofstream log;
  if (!dir.empty()) {
    fs::create_directories(dir);
    RunConfig resolved = config;
    resolved.seeds = {seed};
    write_text(dir / "resolved-config.json", resolved.to_json() + "\n");
    options.checkpoint_dir = dir / "checkpoints";
    options.checkpoint_every = config.checkpoint_every;
    log.open(dir / "loss_log.csv");
    log << "step,loss\n";
    options.on_step = [&log](std::int64_t step, double loss) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%lld,%.17g\n", static_cast<long long>(step), loss);
      log << buf;
    };
  }
  TrainResult r = train(train_data, config.model, optim, config.loss, options);
  run.params = std::move(r.params);
  run.losses = std::move(r.losses);
  return run;
}

std::vector<SeedRun> run_train(const RunConfig& config) {
  config.model.validate();
  const Dataset data = load_run_data(config, config.train_split);
  std::vector<SeedRun> out;
  for (auto seed : config.seeds) {
    out.push_back(train_seed(config, seed, data, config.output_dir / ("seed-" + std::to_string(seed))));
  }
  return out;
}

EvalOutput run_eval(const RunConfig& config, const fs::path& checkpoint) {
  config.model.validate();
  const Dataset data = load_run_data(config, config.eval_split);
  EvalOutput out;
  std::ostringstream text;
  for (auto seed : config.seeds) {
    const ModelParams fresh = init_params(config.model, seed);
    ModelParams params = fresh;
    if (!checkpoint.empty()) {
      const fs::path dir = checkpoint_for(checkpoint, seed);
      Checkpoint ckpt = load_checkpoint(dir);
      check_shapes(ckpt.params, fresh, dir);
      params = std::move(ckpt.params);
    }
    out.seeds.push_back(seed);
    out.runs.push_back(evaluate_model(data, config.model, params));
    text << "seed " << seed << " (" << data.num_videos() << " videos, " << data.num_captions() << " captions)\n"
         << format_table(out.runs.back()) << '\n';
  }
  out.summary = aggregate(out.runs);
  text << "mean and std over " << out.seeds.size() << " seed" << (out.seeds.size() == 1 ? "" : "s") << '\n'
       << format_summary(out.summary, out.seeds);
  out.text = text.str();
  return out;
}

std::vector<std::vector<std::string>> ablation_rows(const std::string& spec, const std::vector<std::string>& experts) {
  const std::set<std::string> known(experts.begin(), experts.end());
  auto check = [&](const std::string& name) {
    if (!known.count(name)) {
      throw ConfigError("unknown expert '" + name + "'; valid experts: " + join(experts, ", "));
    }
  };

  std::vector<std::vector<std::string>> rows;
  if (spec == "cumulative") {
    for (std::size_t k = 1; k <= experts.size(); ++k) rows.emplace_back(experts.begin(), experts.begin() + k);
    return rows;
  }
  if (spec.size() > 2 && spec.compare(spec.size() - 2, 2, "+X") == 0) {
    const std::string base = spec.substr(0, spec.size() - 2);
    check(base);
    for (const auto& e : experts) {
      if (e != base) rows.push_back({base, e});
    }
    if (rows.empty()) throw ConfigError("'" + spec + "' needs at least one expert besides '" + base + "'");
    return rows;
  }
  const auto names = split_on(spec, spec.find('+') != std::string::npos ? '+' : ',');
  if (names.empty()) throw ConfigError("empty expert selection");
  std::set<std::string> seen;
  for (const auto& n : names) {
    check(n);
    if (!seen.insert(n).second) throw ConfigError("expert '" + n + "' selected twice");
  }
  rows.push_back(names);
  return rows;
}

RunConfig with_experts(const RunConfig& config, const std::vector<std::string>& experts) {
  const std::set<std::string> keep(experts.begin(), experts.end());
  RunConfig out = config;
  out.model.experts.clear();
  for (const auto& e : config.model.experts) {
    if (keep.count(e.name)) out.model.experts.push_back(e);
  }
  return out;
}

std::vector<AblationRow> run_ablation(const RunConfig& config, const std::string& spec) {
  const auto experts = config_expert_names(config.model);
  const auto rows = ablation_rows(spec, experts);
  const bool cumulative = spec == "cumulative";
  std::vector<AblationRow> out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const RunConfig cfg = with_experts(config, rows[r]);
    cfg.model.validate();
    const Dataset train_data = load_run_data(cfg, cfg.train_split);
    const Dataset eval_data = load_run_data(cfg, cfg.eval_split);
    std::vector<RetrievalResult> runs;
    for (auto seed : cfg.seeds) {
      const fs::path dir = cfg.output_dir / "ablation" / (join(rows[r], "+")) / ("seed-" + std::to_string(seed));
      SeedRun run = train_seed(cfg, seed, train_data, dir);
      runs.push_back(evaluate_model(eval_data, cfg.model, run.params));
    }
    AblationRow row;
    row.experts = rows[r];
    row.label = cumulative && r > 0 ? "prev+" + rows[r].back() : join(rows[r], "+");
    row.metrics = aggregate(runs);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace ce
