#include "ce/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ce/cef1.hpp"

namespace ce {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string blob_name(const std::string& dir, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu.cef1", index);
  return dir + "/" + buf;
}

json write_group(const fs::path& root, const std::string& dir, const NamedMatrices& group) {
  json entries = json::array();
  std::size_t i = 0;
  for (const auto& [name, m] : group) {
    const std::string rel = blob_name(dir, i++);
    cef1::write_matrix_f64(root / rel, m);
    entries.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"file", rel}, {"encoding", "f64-bits"}});
  }
  return entries;
}

NamedMatrices read_group(const fs::path& root, const json& entries) {
  NamedMatrices out;
  for (const auto& e : entries) {
    const std::string name = e.at("name").get<std::string>();
    Matrix m = cef1::read_matrix_f64(root / e.at("file").get<std::string>());
    if (m.rows() != e.at("rows").get<Eigen::Index>() || m.cols() != e.at("cols").get<Eigen::Index>()) {
      throw Error("checkpoint: blob for '" + name + "' does not match its declared shape");
    }
    out.emplace(name, std::move(m));
  }
  return out;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const Checkpoint& ckpt) {
  const fs::path staging = dir.string() + ".partial";
  fs::remove_all(staging);
  fs::create_directories(staging / "params");
  fs::create_directories(staging / "state");

  json header;
  header["format_version"] = Checkpoint::kFormatVersion;
  header["config_hash"] = ckpt.config_hash;
  header["step"] = ckpt.step;
  header["parameters"] = write_group(staging, "params", ckpt.params);

  NamedMatrices state;
  for (const auto& [name, m] : ckpt.optim.first_moment) state["m/" + name] = m;
  for (const auto& [name, m] : ckpt.optim.second_moment) state["v/" + name] = m;
  for (const auto& [name, m] : ckpt.optim.slow_weights) state["slow/" + name] = m;
  header["optimizer"] = {{"inner_step", ckpt.optim.step}, {"state", write_group(staging, "state", state)}};

  std::ofstream(staging / "header.json") << header.dump(2) << '\n';
  fs::remove_all(dir);
  fs::rename(staging, dir);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / "header.json");
  if (!in) throw Error("checkpoint: cannot open '" + (dir / "header.json").string() + "'");
  json header;
  try {
    header = json::parse(in);
    const int version = header.at("format_version").get<int>();
    if (version != Checkpoint::kFormatVersion) {
      throw Error("checkpoint: unsupported format version " + std::to_string(version));
    }
    Checkpoint ckpt;
    ckpt.config_hash = header.at("config_hash").get<std::string>();
    ckpt.step = header.at("step").get<std::int64_t>();
    ckpt.params = read_group(dir, header.at("parameters"));
    const json& opt = header.at("optimizer");
    ckpt.optim.step = opt.at("inner_step").get<std::int64_t>();
    for (auto& [name, m] : read_group(dir, opt.at("state"))) {
      const auto slash = name.find('/');
      const std::string kind = name.substr(0, slash);
      const std::string param = name.substr(slash + 1);
      if (kind == "m") {
        ckpt.optim.first_moment[param] = std::move(m);
      } else if (kind == "v") {
        ckpt.optim.second_moment[param] = std::move(m);
      } else if (kind == "slow") {
        ckpt.optim.slow_weights[param] = std::move(m);
      } else {
        throw Error("checkpoint: unknown optimizer state entry '" + name + "'");
      }
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw Error(std::string("checkpoint: malformed header: ") + e.what());
  }
}

}  // namespace ce
