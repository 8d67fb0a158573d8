#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "ce/dataio.hpp"
#include "ce/metrics.hpp"
#include "oracles.hpp"

using namespace ce;
using ce::testing::oracle_ranks;
using ce::testing::random_retrieval_case;

TEST(RankOf, Examples) {
  EXPECT_EQ(rank_of(RowVector((RowVector(2) << 0.9, 0.1).finished()), 0), 1);
  EXPECT_EQ(rank_of(RowVector((RowVector(2) << 0.5, 0.5).finished()), 1), 2);
  EXPECT_EQ(rank_of(RowVector((RowVector(2) << 0.5, 0.5).finished()), 0), 1);
  EXPECT_THROW(rank_of(RowVector::Zero(3), 3), DimensionError);
}

TEST(RankOf, MatchesSortOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    auto [s, owner] = random_retrieval_case(rng, 40, trial % 2 == 0);
    const RowVector row = s.row(0);
    for (Eigen::Index t = 0; t < row.size(); ++t) EXPECT_EQ(rank_of(row, t), ce::testing::sorted_rank(row, t));
  }
}

TEST(Evaluate, PerfectRetrieval) {
  Matrix s(2, 2);
  s << 0.9, 0.1, 0.2, 0.8;
  const auto r = evaluate(s, {0, 1});
  for (const auto* rep : {&r.text_to_video, &r.video_to_text}) {
    EXPECT_EQ(rep->recall_at.at(1), 1.0);
    EXPECT_EQ(rep->median_rank, 1.0);
    EXPECT_EQ(rep->mean_rank, 1.0);
  }
}

TEST(Evaluate, HandRankedExample) {
  // Rows of the literal are the caption queries, so the video x caption
  // matrix is its transpose.
  Matrix q(2, 2);
  q << 0.1, 0.9, 0.2, 0.8;
  const auto r = evaluate(q.transpose(), {0, 1});
  EXPECT_EQ(r.text_to_video.ranks, (std::vector<int>{2, 1}));
  EXPECT_EQ(r.text_to_video.recall_at.at(1), 0.5);
  EXPECT_EQ(r.text_to_video.median_rank, 1.5);
  EXPECT_EQ(r.text_to_video.mean_rank, 1.5);
}

TEST(Evaluate, MinRankOverCaptions) {
  // Video 0 owns captions 0, 1, 2; in its row they rank 4, 1, 7 among 8.
  Matrix s = Matrix::Zero(2, 8);
  s.row(0) << 0.5, 0.9, 0.1, 0.8, 0.7, 0.6, 0.05, 0.3;
  // rank of caption 0 (0.5): ahead are 0.9, 0.8, 0.7, 0.6 -> 5; shift one value to get 4
  s(0, 5) = 0.4;
  ASSERT_EQ(rank_of(s.row(0), 0), 4);
  ASSERT_EQ(rank_of(s.row(0), 1), 1);
  ASSERT_EQ(rank_of(s.row(0), 2), 7);
  const auto r = evaluate(s, {0, 0, 0, 1, 1, 1, 1, 1});
  EXPECT_EQ(r.video_to_text.ranks[0], 1);
  EXPECT_EQ(r.text_to_video.queries, 8u);
  EXPECT_EQ(r.video_to_text.queries, 2u);
}

TEST(Evaluate, MatchesBruteForceOracle) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    auto [s, owner] = random_retrieval_case(rng, 50, trial % 3 != 0);
    const auto got = evaluate(s, owner);
    const auto want = oracle_ranks(s, owner);
    ASSERT_EQ(got.text_to_video.ranks, want.t2v) << trial;
    ASSERT_EQ(got.video_to_text.ranks, want.v2t) << trial;
  }
}

TEST(Evaluate, StrictlyMonotoneTransformInvariance) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto [s, owner] = random_retrieval_case(rng, 30, trial % 2 == 0);
    const Matrix t = s.unaryExpr([](double x) { return std::exp(3.0 * x) - 7.0; });
    const auto a = evaluate(s, owner), b = evaluate(t, owner);
    EXPECT_EQ(a.text_to_video.ranks, b.text_to_video.ranks);
    EXPECT_EQ(a.video_to_text.ranks, b.video_to_text.ranks);
  }
}

TEST(Evaluate, RecallInvariants) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto [s, owner] = random_retrieval_case(rng, 60, false);
    const int all = static_cast<int>(std::max(s.rows(), s.cols()));
    const auto r = evaluate(s, owner, {1, 5, 10, 50, all});
    for (const auto* rep : {&r.text_to_video, &r.video_to_text}) {
      double prev = 0.0;
      for (const auto& [k, v] : rep->recall_at) {
        EXPECT_GE(v, prev);
        prev = v;
      }
      EXPECT_EQ(rep->recall_at.at(all), 1.0);
      EXPECT_GE(rep->median_rank, 1.0);
      EXPECT_GE(rep->mean_rank, 1.0);
    }
    EXPECT_LE(r.text_to_video.median_rank, static_cast<double>(s.rows()));
  }
}

TEST(Evaluate, IntegrityErrors) {
  Matrix s = Matrix::Zero(2, 2);
  EXPECT_THROW(evaluate(s, {0, 0}), DatasetError);  // video 1 has no caption
  EXPECT_THROW(evaluate(s, {0, 2}), DatasetError);  // unmapped caption
  EXPECT_THROW(evaluate(s, {0}), DatasetError);
}

TEST(Median, EvenCountAveragesMiddles) {
  EXPECT_EQ(median({3, 1, 4, 2}), 2.5);
  EXPECT_EQ(median({5}), 5.0);
}

TEST(GeometricMean, OfR1R5R10) {
  RetrievalReport r;
  r.recall_at = {{1, 0.125}, {5, 0.5}, {10, 1.0}};
  EXPECT_NEAR(recall_geometric_mean(r), std::cbrt(0.0625), 1e-15);
}
