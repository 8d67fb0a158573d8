#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ce/metrics.hpp"

namespace ce {

/// Named scalar metrics of one evaluation, in display order
/// (t2v_R@1 ... t2v_MnR, v2t_R@1 ... v2t_MnR).
std::vector<std::pair<std::string, double>> flatten_metrics(const RetrievalResult& r);

struct MetricSummary {
  std::string name;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single run
  std::vector<double> values;
};

/// Per-metric mean and std across seeds; seed order does not matter.
std::vector<MetricSummary> aggregate(const std::vector<RetrievalResult>& runs);

nlohmann::json to_json(const RetrievalReport& r);
nlohmann::json to_json(const RetrievalResult& r);
nlohmann::json to_json(const std::vector<MetricSummary>& summary);

/// Aligned text table: one row per direction with R@K, MdR, MnR columns.
std::string format_table(const RetrievalResult& r);
/// One row per metric with mean, std and per-seed values.
std::string format_summary(const std::vector<MetricSummary>& summary, const std::vector<std::uint64_t>& seeds);

struct AblationRow {
  std::string label;
  std::vector<std::string> experts;
  std::vector<MetricSummary> metrics;
};
std::string format_ablation(const std::vector<AblationRow>& rows);
nlohmann::json to_json(const std::vector<AblationRow>& rows);

}  // namespace ce
