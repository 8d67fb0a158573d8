#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ce/dataio.hpp"
#include "ce/gradcheck.hpp"
#include "ce/runner.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ce::ConfigError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int gen_synth(const fs::path& spec_path, const fs::path& out) {
  const ce::SyntheticSpec spec = ce::parse_synthetic_spec(read_text(spec_path));
  const ce::Manifest manifest = ce::generate_synthetic(spec, out);
  std::printf("wrote %zu videos to %s\n", manifest.entries.size(), (out / "manifest.jsonl").c_str());
  return 0;
}

int train(const fs::path& config_path) {
  const ce::RunConfig cfg = ce::load_run_config(config_path);
  for (const auto& run : ce::run_train(cfg)) {
    std::printf("seed %llu: %zu steps, final loss %.6f -> %s\n", static_cast<unsigned long long>(run.seed),
                run.losses.size(), run.losses.empty() ? 0.0 : run.losses.back(), run.dir.c_str());
  }
  return 0;
}

int eval(const fs::path& config_path, const fs::path& checkpoint) {
  const ce::RunConfig cfg = ce::load_run_config(config_path);
  const ce::EvalOutput out = ce::run_eval(cfg, checkpoint);
  std::cout << out.text;

  nlohmann::json j;
  j["seeds"] = out.seeds;
  j["runs"] = nlohmann::json::array();
  for (std::size_t i = 0; i < out.runs.size(); ++i) {
    j["runs"].push_back({{"seed", out.seeds[i]}, {"report", ce::to_json(out.runs[i])}});
  }
  j["summary"] = ce::to_json(out.summary);
  ce::write_text(cfg.output_dir / "eval.json", j.dump(2) + "\n");
  ce::write_text(cfg.output_dir / "eval.txt", out.text);
  return 0;
}

int ablate(const std::string& experts, const fs::path& config_path) {
  const ce::RunConfig cfg = ce::load_run_config(config_path);
  const auto rows = ce::run_ablation(cfg, experts);
  const std::string table = ce::format_ablation(rows);
  std::cout << table;
  ce::write_text(cfg.output_dir / "ablation.json", ce::to_json(rows).dump(2) + "\n");
  ce::write_text(cfg.output_dir / "ablation.txt", table);
  return 0;
}

int grad_check(int seeds, const std::string& corrupt_op) {
  const auto results = ce::run_gradient_suite(seeds, corrupt_op);
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%-14s worst rel err %.3e (seed %llu)  %s\n", r.op.c_str(), r.worst_error,
                static_cast<unsigned long long>(r.worst_seed), r.passed ? "ok" : "FAIL");
    ok = ok && r.passed;
  }
  for (const auto& r : results) {
    if (!r.passed) {
      std::fprintf(stderr, "gradient check failed: op %s, seed %llu, rel err %.3e\n", r.op.c_str(),
                   static_cast<unsigned long long>(r.worst_seed), r.worst_error);
    }
  }
  return ok ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-expert video-text retrieval toolkit"};
  app.require_subcommand(1);

  fs::path spec, out, config, checkpoint;
  std::string experts, corrupt_op;
  int seeds = 20;

  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic dataset");
  gen->add_option("--spec", spec, "Synthetic data spec (JSON)")->required();
  gen->add_option("--out", out, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train every configured seed");
  tr->add_option("--config", config, "Run config (JSON)")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate retrieval on the eval split");
  ev->add_option("--config", config, "Run config (JSON)")->required();
  ev->add_option("--checkpoint", checkpoint,
                 "Training output dir, checkpoint dir, or path with {seed}; omit to evaluate fresh parameters");

  auto* ab = app.add_subcommand("ablate", "Train and evaluate expert subsets");
  ab->add_option("--experts", experts, "cumulative, <base>+X, or a list like a,b")->required();
  ab->add_option("--config", config, "Run config (JSON)")->required();

  auto* gc = app.add_subcommand("grad-check", "Finite-difference check of every differentiable op");
  gc->add_option("--seeds", seeds, "Random cases per op")->check(CLI::PositiveNumber);
  gc->add_option("--corrupt-op", corrupt_op, "Scale one op's analytic gradient by 1.01 (negative control)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*gen) return gen_synth(spec, out);
    if (*tr) return train(config);
    if (*ev) return eval(config, checkpoint);
    if (*ab) return ablate(experts, config);
    if (*gc) {
      if (!corrupt_op.empty()) {
        const auto ops = ce::gradient_suite_ops();
        if (std::find(ops.begin(), ops.end(), corrupt_op) == ops.end()) {
          std::fprintf(stderr, "error: unknown op '%s'\n", corrupt_op.c_str());
          return kExitValidation;
        }
      }
      return grad_check(seeds, corrupt_op);
    }
  } catch (const ce::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const ce::DatasetError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const ce::cef1::FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitRuntime;
}
