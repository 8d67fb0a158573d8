#include "ce/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ce {

using nlohmann::json;

namespace {

// Walks one JSON object, recording every problem instead of stopping at the
// first one.
class Reader {
 public:
  Reader(const json& obj, std::string where, std::vector<std::string>& errors)
      : obj_(obj), where_(std::move(where)), errors_(errors) {
    if (!obj_.is_object()) error("", "expected an object");
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!obj_.is_object() || !obj_.contains(key)) return fallback;
    try {
      return obj_.at(key).get<T>();
    } catch (const json::exception&) {
      error(key, "has the wrong type");
      return fallback;
    }
  }

  template <typename T>
  T require(const std::string& key) {
    seen_.insert(key);
    if (!obj_.is_object() || !obj_.contains(key)) {
      error(key, "is required");
      return T{};
    }
    return get<T>(key, T{});
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    if (!obj_.is_object() || !obj_.contains(key)) return nullptr;
    return &obj_.at(key);
  }

  void error(const std::string& key, const std::string& what) {
    errors_.push_back(where_ + (key.empty() ? "" : (where_.empty() ? "" : ".") + key) + ": " + what);
  }

  void check(bool ok, const std::string& key, const std::string& what) {
    if (!ok) error(key, what);
  }

  void finish() {
    if (!obj_.is_object()) return;
    for (const auto& [key, _] : obj_.items()) {
      if (!seen_.count(key)) error(key, "unknown field");
    }
  }

  const std::string& where() const { return where_; }

 private:
  const json& obj_;
  std::string where_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

template <typename Parse>
auto parse_enum(Reader& r, const std::string& key, const std::string& value, Parse parse, decltype(parse(value)) fallback) {
  try {
    return parse(value);
  } catch (const Error& e) {
    r.error(key, e.what());
    return fallback;
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.empty() || path.is_absolute() || base.empty()) return path;
  return base / path;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  std::vector<std::string> errors;
  RunConfig cfg;
  Reader top(root, "", errors);

  const int version = top.get<int>("config_version", RunConfig::kVersion);
  top.check(version == RunConfig::kVersion, "config_version", "unsupported version " + std::to_string(version));

  if (const json* data = top.child("data")) {
    Reader r(*data, "data", errors);
    cfg.manifest = resolve(base_dir, r.require<std::string>("manifest"));
    cfg.train_split = parse_enum(r, "train_split", r.get<std::string>("train_split", "train"), parse_split, Split::train);
    cfg.eval_split = parse_enum(r, "eval_split", r.get<std::string>("eval_split", "test"), parse_split, Split::test);
    r.finish();
  } else {
    top.error("data", "is required");
  }

  if (const json* experts = top.child("experts"); experts && experts->is_array()) {
    for (std::size_t i = 0; i < experts->size(); ++i) {
      Reader r((*experts)[i], "experts[" + std::to_string(i) + "]", errors);
      ExpertConfig e;
      e.name = r.require<std::string>("name");
      e.input_dim = r.require<int>("dim");
      e.aggregator = parse_enum(r, "aggregator", r.get<std::string>("aggregator", "mean"), parse_aggregator, Aggregator::mean);
      e.vlad_clusters = r.get<int>("vlad_clusters", 8);
      e.ghost_clusters = r.get<int>("ghost_clusters", 1);
      r.check(e.input_dim >= 1, "dim", "must be positive");
      r.check(e.vlad_clusters >= 1, "vlad_clusters", "must be >= 1");
      r.check(e.ghost_clusters >= 0, "ghost_clusters", "must be >= 0");
      r.finish();
      cfg.model.experts.push_back(e);
    }
    if (experts->empty()) top.error("experts", "must list at least one expert");
    std::set<std::string> names;
    for (const auto& e : cfg.model.experts) {
      if (!e.name.empty() && !names.insert(e.name).second) top.error("experts", "duplicate expert '" + e.name + "'");
    }
  } else {
    top.error("experts", "is required and must be an array");
  }

  if (const json* text_cfg = top.child("text")) {
    Reader r(*text_cfg, "text", errors);
    cfg.model.text.word_dim = r.require<int>("word_dim");
    cfg.model.text.vlad_clusters = r.get<int>("vlad_clusters", 28);
    cfg.model.text.ghost_clusters = r.get<int>("ghost_clusters", 1);
    r.check(cfg.model.text.word_dim >= 1, "word_dim", "must be positive");
    r.check(cfg.model.text.vlad_clusters >= 1, "vlad_clusters", "must be >= 1");
    r.check(cfg.model.text.ghost_clusters >= 0, "ghost_clusters", "must be >= 0");
    r.finish();
  } else {
    top.error("text", "is required");
  }

  {
    static const json empty = json::object();
    const json* model = top.child("model");
    Reader r(model ? *model : empty, "model", errors);
    cfg.model.variant = parse_enum(r, "variant", r.get<std::string>("variant", "ce"), parse_variant, Variant::ce);
    cfg.model.common_dim = r.get<int>("common_dim", 768);
    cfg.model.gating_hidden = r.get<int>("gating_hidden", 0);
    r.check(cfg.model.common_dim >= 1, "common_dim", "must be positive");
    r.check(cfg.model.gating_hidden >= 0, "gating_hidden", "must be >= 0 (0 means common_dim)");
    if (cfg.model.variant != Variant::ce && model && model->contains("gating_hidden") && cfg.model.gating_hidden > 0) {
      r.error("gating_hidden", "only applies to the ce variant");
    }
    r.finish();

    const json* loss = top.child("loss");
    Reader l(loss ? *loss : empty, "loss", errors);
    cfg.loss.margin = l.get<double>("margin", 0.2);
    l.check(cfg.loss.margin >= 0.0, "margin", "must be >= 0");
    l.finish();

    const json* optim = top.child("optim");
    Reader o(optim ? *optim : empty, "optim", errors);
    OptimConfig& oc = cfg.optim;
    oc.optimizer = parse_enum(o, "optimizer", o.get<std::string>("optimizer", "radam+lookahead"), parse_optimizer,
                              OptimizerKind::radam_lookahead);
    oc.learning_rate = o.get<double>("learning_rate", oc.learning_rate);
    oc.weight_decay = o.get<double>("weight_decay", oc.weight_decay);
    oc.batch_size = o.get<int>("batch_size", oc.batch_size);
    oc.max_steps = o.get<int>("max_steps", oc.max_steps);
    oc.beta1 = o.get<double>("beta1", oc.beta1);
    oc.beta2 = o.get<double>("beta2", oc.beta2);
    oc.eps = o.get<double>("eps", oc.eps);
    oc.rectify_threshold = o.get<double>("rectify_threshold", oc.rectify_threshold);
    oc.lookahead_k = o.get<int>("lookahead_k", oc.lookahead_k);
    oc.lookahead_alpha = o.get<double>("lookahead_alpha", oc.lookahead_alpha);
    o.check(oc.learning_rate >= 0.0, "learning_rate", "must be >= 0");
    o.check(oc.weight_decay >= 0.0, "weight_decay", "must be >= 0");
    o.check(oc.batch_size >= 1, "batch_size", "must be positive");
    o.check(oc.max_steps >= 1, "max_steps", "must be positive");
    o.check(oc.beta1 >= 0.0 && oc.beta1 < 1.0, "beta1", "must lie in [0, 1)");
    o.check(oc.beta2 >= 0.0 && oc.beta2 < 1.0, "beta2", "must lie in [0, 1)");
    o.check(oc.eps > 0.0, "eps", "must be positive");
    o.check(oc.lookahead_k >= 1, "lookahead_k", "must be >= 1");
    o.check(oc.lookahead_alpha > 0.0 && oc.lookahead_alpha <= 1.0, "lookahead_alpha", "must lie in (0, 1]");
    o.finish();
  }

  cfg.seeds = top.get<std::vector<std::uint64_t>>("seeds", cfg.seeds);
  top.check(!cfg.seeds.empty(), "seeds", "must list at least one seed");
  cfg.output_dir = resolve(base_dir, top.get<std::string>("output_dir", cfg.output_dir.string()));
  cfg.checkpoint_every = top.get<int>("checkpoint_every", 0);
  top.check(cfg.checkpoint_every >= 0, "checkpoint_every", "must be >= 0");
  top.finish();

  if (!errors.empty()) {
    std::ostringstream os;
    os << "config has " << errors.size() << " error" << (errors.size() == 1 ? "" : "s") << ":";
    for (const auto& e : errors) os << "\n  - " << e;
    throw ConfigError(os.str());
  }
  cfg.optim.seed = cfg.seeds.front();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

std::string RunConfig::to_json() const {
  json j;
  j["config_version"] = kVersion;
  j["data"] = {{"manifest", manifest.string()}, {"train_split", to_string(train_split)}, {"eval_split", to_string(eval_split)}};
  json experts = json::array();
  for (const auto& e : model.experts) {
    experts.push_back({{"name", e.name},
                       {"dim", e.input_dim},
                       {"aggregator", to_string(e.aggregator)},
                       {"vlad_clusters", e.vlad_clusters},
                       {"ghost_clusters", e.ghost_clusters}});
  }
  j["experts"] = experts;
  j["text"] = {{"word_dim", model.text.word_dim},
               {"vlad_clusters", model.text.vlad_clusters},
               {"ghost_clusters", model.text.ghost_clusters}};
  j["model"] = {{"variant", to_string(model.variant)}, {"common_dim", model.common_dim}, {"gating_hidden", model.gating_hidden}};
  j["loss"] = {{"margin", loss.margin}};
  j["optim"] = {{"optimizer", to_string(optim.optimizer)},
                {"learning_rate", optim.learning_rate},
                {"weight_decay", optim.weight_decay},
                {"batch_size", optim.batch_size},
                {"max_steps", optim.max_steps},
                {"beta1", optim.beta1},
                {"beta2", optim.beta2},
                {"eps", optim.eps},
                {"rectify_threshold", optim.rectify_threshold},
                {"lookahead_k", optim.lookahead_k},
                {"lookahead_alpha", optim.lookahead_alpha}};
  j["seeds"] = seeds;
  j["output_dir"] = output_dir.string();
  j["checkpoint_every"] = checkpoint_every;
  return j.dump(2);
}

std::string RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_json()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

DatasetSchema RunConfig::schema() const {
  DatasetSchema s;
  for (const auto& e : model.experts) s.expert_dims[e.name] = e.input_dim;
  s.word_dim = model.text.word_dim;
  return s;
}

}  // namespace ce
