#include "ce/report.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace ce {

using nlohmann::json;

namespace {

std::string short_name(Direction d) { return d == Direction::text_to_video ? "t2v" : "v2t"; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

void append(std::vector<std::pair<std::string, double>>& out, const RetrievalReport& r) {
  const std::string p = short_name(r.direction) + "_";
  for (const auto& [k, v] : r.recall_at) out.emplace_back(p + "R@" + std::to_string(k), v);
  out.emplace_back(p + "MdR", r.median_rank);
  out.emplace_back(p + "MnR", r.mean_rank);
}

}  // namespace

std::vector<std::pair<std::string, double>> flatten_metrics(const RetrievalResult& r) {
  std::vector<std::pair<std::string, double>> out;
  append(out, r.text_to_video);
  append(out, r.video_to_text);
  return out;
}

std::vector<MetricSummary> aggregate(const std::vector<RetrievalResult>& runs) {
  if (runs.empty()) throw ContractError("aggregate over zero runs");
  std::vector<MetricSummary> out;
  for (const auto& [name, _] : flatten_metrics(runs.front())) out.push_back({name, 0.0, 0.0, {}});
  for (const auto& run : runs) {
    const auto flat = flatten_metrics(run);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].values.push_back(flat.at(i).second);
  }
  for (auto& m : out) {
    const double n = static_cast<double>(m.values.size());
    double mean = 0.0;
    for (double v : m.values) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : m.values) ss += (v - mean) * (v - mean);
    m.mean = mean;
    m.std = m.values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  return out;
}

json to_json(const RetrievalReport& r) {
  json recall = json::object();
  for (const auto& [k, v] : r.recall_at) recall["R@" + std::to_string(k)] = v;
  return {{"direction", to_string(r.direction)},
          {"recall", recall},
          {"median_rank", r.median_rank},
          {"mean_rank", r.mean_rank},
          {"queries", r.queries}};
}

json to_json(const RetrievalResult& r) {
  return {{"text_to_video", to_json(r.text_to_video)}, {"video_to_text", to_json(r.video_to_text)}};
}

json to_json(const std::vector<MetricSummary>& summary) {
  json out = json::array();
  for (const auto& m : summary) out.push_back({{"metric", m.name}, {"mean", m.mean}, {"std", m.std}, {"values", m.values}});
  return out;
}

std::string format_table(const RetrievalResult& r) {
  std::ostringstream os;
  std::vector<std::string> header{"direction"};
  for (const auto& [k, _] : r.text_to_video.recall_at) header.push_back("R@" + std::to_string(k));
  header.push_back("MdR");
  header.push_back("MnR");
  header.push_back("queries");
  os << pad(header[0], 14);
  for (std::size_t i = 1; i < header.size(); ++i) os << pad(header[i], 10);
  os << '\n';
  for (const RetrievalReport* rep : {&r.text_to_video, &r.video_to_text}) {
    os << pad(to_string(rep->direction), 14);
    for (const auto& [k, v] : rep->recall_at) os << pad(fmt("%.1f", 100.0 * v), 10);
    os << pad(fmt("%.1f", rep->median_rank), 10) << pad(fmt("%.1f", rep->mean_rank), 10)
       << pad(std::to_string(rep->queries), 10) << '\n';
  }
  return os.str();
}

std::string format_summary(const std::vector<MetricSummary>& summary, const std::vector<std::uint64_t>& seeds) {
  std::ostringstream os;
  os << pad("metric", 12) << pad("mean", 10) << pad("std", 10);
  for (auto s : seeds) os << pad("seed " + std::to_string(s), 10);
  os << '\n';
  for (const auto& m : summary) {
    const bool recall = m.name.find("R@") != std::string::npos;
    const double k = recall ? 100.0 : 1.0;
    os << pad(m.name, 12) << pad(fmt("%.2f", k * m.mean), 10) << pad(fmt("%.2f", k * m.std), 10);
    for (double v : m.values) os << pad(fmt("%.2f", k * v), 10);
    os << '\n';
  }
  return os.str();
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  if (rows.empty()) return {};
  std::size_t label_width = 8;
  for (const auto& r : rows) label_width = std::max(label_width, r.label.size() + 2);
  os << pad("experts", label_width);
  for (const auto& m : rows.front().metrics) {
    if (m.name.rfind("t2v_", 0) == 0) os << pad(m.name.substr(4), 16);
  }
  os << '\n';
  for (const auto& r : rows) {
    os << pad(r.label, label_width);
    for (const auto& m : r.metrics) {
      if (m.name.rfind("t2v_", 0) != 0) continue;
      const double k = m.name.find("R@") != std::string::npos ? 100.0 : 1.0;
      os << pad(fmt("%.1f", k * m.mean) + fmt(" +-%.1f", k * m.std), 16);
    }
    os << '\n';
  }
  return os.str();
}

json to_json(const std::vector<AblationRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) out.push_back({{"label", r.label}, {"experts", r.experts}, {"metrics", to_json(r.metrics)}});
  return out;
}

}  // namespace ce
