#pragma once

#include <map>
#include <string>
#include <vector>

#include "ce/tensor.hpp"

namespace ce {

enum class Direction { text_to_video, video_to_text };
std::string to_string(Direction d);

struct RetrievalReport {
  Direction direction = Direction::text_to_video;
  std::map<int, double> recall_at;  // K -> fraction of queries with rank <= K
  double median_rank = 0.0;
  double mean_rank = 0.0;
  std::size_t queries = 0;
  std::vector<int> ranks;
};

inline const std::vector<int> kDefaultRecallKs = {1, 5, 10, 50};

/// 1 + #{candidates scoring strictly higher} + #{ties at a lower index}.
template <typename Derived>
int rank_of(const Eigen::DenseBase<Derived>& scores, Eigen::Index truth) {
  if (truth < 0 || truth >= scores.size()) throw DimensionError("rank_of: truth index out of range");
  const auto target = scores(truth);
  int rank = 1;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (scores(i) > target || (scores(i) == target && i < truth)) ++rank;
  }
  return rank;
}

/// Median with the mean-of-middles convention for even counts.
double median(std::vector<int> values);

RetrievalReport summarize(Direction direction, std::vector<int> ranks, const std::vector<int>& ks = kDefaultRecallKs);

/// `s` is videos x captions; caption_video[c] names the video caption c
/// describes. Text->video ranks each caption's video among all videos;
/// video->text takes, per video, the best rank any of its captions reaches
/// among all captions.
struct RetrievalResult {
  RetrievalReport text_to_video;
  RetrievalReport video_to_text;
};
RetrievalResult evaluate(const Matrix& s, const std::vector<int>& caption_video,
                         const std::vector<int>& ks = kDefaultRecallKs);

/// Geometric mean of R@1, R@5, R@10.
double recall_geometric_mean(const RetrievalReport& r);

}  // namespace ce
