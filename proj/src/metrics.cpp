#include "ce/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ce/dataio.hpp"

namespace ce {

std::string to_string(Direction d) { return d == Direction::text_to_video ? "text_to_video" : "video_to_text"; }

double median(std::vector<int> values) {
  if (values.empty()) throw ContractError("median of nothing");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (static_cast<double>(values[n / 2 - 1]) + static_cast<double>(values[n / 2]));
}

RetrievalReport summarize(Direction direction, std::vector<int> ranks, const std::vector<int>& ks) {
  RetrievalReport r;
  r.direction = direction;
  r.queries = ranks.size();
  if (ranks.empty()) throw ContractError("no queries to summarize");
  for (int k : ks) {
    const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](int rank) { return rank <= k; });
    r.recall_at[k] = static_cast<double>(hits) / static_cast<double>(ranks.size());
  }
  r.median_rank = median(ranks);
  r.mean_rank = std::accumulate(ranks.begin(), ranks.end(), 0.0) / static_cast<double>(ranks.size());
  r.ranks = std::move(ranks);
  return r;
}

RetrievalResult evaluate(const Matrix& s, const std::vector<int>& caption_video, const std::vector<int>& ks) {
  const Eigen::Index videos = s.rows();
  const Eigen::Index captions = s.cols();
  if (static_cast<Eigen::Index>(caption_video.size()) != captions) {
    throw DatasetError("evaluate: " + std::to_string(caption_video.size()) + " caption labels for " +
                       std::to_string(captions) + " captions");
  }
  std::vector<std::vector<int>> owned(videos);
  for (Eigen::Index c = 0; c < captions; ++c) {
    const int v = caption_video[c];
    if (v < 0 || v >= videos) throw DatasetError("evaluate: caption " + std::to_string(c) + " maps to no video");
    owned[v].push_back(static_cast<int>(c));
  }
  for (Eigen::Index v = 0; v < videos; ++v) {
    if (owned[v].empty()) throw DatasetError("evaluate: video " + std::to_string(v) + " has no captions");
  }

  std::vector<int> t2v(captions);
  for (Eigen::Index c = 0; c < captions; ++c) t2v[c] = rank_of(s.col(c), caption_video[c]);

  std::vector<int> v2t(videos);
  for (Eigen::Index v = 0; v < videos; ++v) {
    int best = std::numeric_limits<int>::max();
    for (int c : owned[v]) best = std::min(best, rank_of(s.row(v), c));
    v2t[v] = best;
  }
  return {summarize(Direction::text_to_video, std::move(t2v), ks), summarize(Direction::video_to_text, std::move(v2t), ks)};
}

double recall_geometric_mean(const RetrievalReport& r) {
  return std::cbrt(r.recall_at.at(1) * r.recall_at.at(5) * r.recall_at.at(10));
}

}  // namespace ce
