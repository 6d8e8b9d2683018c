// Copyright 2026 The protovote Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "protovote/kernels.hpp"
#include "protovote/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

namespace protovote::kernels {
namespace {

class ThreadCounts : public ::testing::TestWithParam<int> {
protected:
    void SetUp() override {
        saved_ = max_threads();
        set_max_threads(GetParam());
    }
    void TearDown() override { set_max_threads(saved_); }

private:
    int saved_ = 1;
};

Eigen::MatrixXd noise(Eigen::Index n, Eigen::Index d, std::uint64_t seed, bool coarse = false) {
    Rng rng(seed);
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = coarse ? static_cast<double>(rng.below(4)) : rng.normal();
    return x;
}

TEST_P(ThreadCounts, ColumnMomentsBitIdentical) {
    const Eigen::MatrixXd x = noise(513, 37, 1);
    const ColumnMoments a = column_moments_serial(x);
    const ColumnMoments b = column_moments_parallel(x);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.variance, b.variance);
}

TEST_P(ThreadCounts, BestSplitBitIdentical) {
    const Eigen::MatrixXd x = noise(300, 9, 2, true);  // coarse values force many gain ties
    Rng rng(5);
    std::vector<double> g(300);
    std::vector<double> h(300);
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = rng.normal();
        h[i] = 0.05 + rng.uniform();
    }
    std::vector<std::vector<std::uint32_t>> sorted(9);
    for (Eigen::Index f = 0; f < 9; ++f) {
        auto& rows = sorted[static_cast<std::size_t>(f)];
        rows.resize(300);
        std::iota(rows.begin(), rows.end(), 0U);
        std::stable_sort(rows.begin(), rows.end(), [&](auto a, auto b) { return x(a, f) < x(b, f); });
    }
    const SplitParams params{1.0, 0.0, 1e-3};
    const SplitCandidate s = best_split_serial(x, sorted, g, h, params);
    const SplitCandidate p = best_split_parallel(x, sorted, g, h, params);
    ASSERT_TRUE(s.found);
    EXPECT_EQ(s.feature, p.feature);
    EXPECT_EQ(s.threshold, p.threshold);
    EXPECT_EQ(s.gain, p.gain);
    EXPECT_EQ(s.grad_left, p.grad_left);
    EXPECT_EQ(s.hess_right, p.hess_right);
}

TEST_P(ThreadCounts, ArgmaxBitIdenticalWithTiesToLowestColumn) {
    Eigen::MatrixXd s = noise(1000, 5, 3, true);
    EXPECT_EQ(argmax_rows_serial(s), argmax_rows_parallel(s));
    s.row(0) << 2, 3, 3, 1, 3;
    EXPECT_EQ(argmax_rows_parallel(s)[0], 1);
}

TEST_P(ThreadCounts, ClipBitIdenticalAndInsideBall) {
    Eigen::MatrixXd a = noise(777, 6, 4) * 3.0;
    Eigen::MatrixXd b = a;
    clip_rows_to_ball_serial(a, 1.5);
    clip_rows_to_ball_parallel(b, 1.5);
    EXPECT_EQ(a, b);
    for (Eigen::Index i = 0; i < a.rows(); ++i) EXPECT_LE(a.row(i).norm(), 1.5);
}

TEST_P(ThreadCounts, HardVoteBitIdentical) {
    Rng rng(6);
    const std::size_t n = 2000;
    std::vector<int> v1(n);
    std::vector<int> v2(n);
    std::vector<int> v3(n);
    Eigen::MatrixXd post(static_cast<Eigen::Index>(n), 4);
    for (std::size_t i = 0; i < n; ++i) {
        v1[i] = static_cast<int>(rng.below(4));
        v2[i] = static_cast<int>(rng.below(4));
        v3[i] = static_cast<int>(rng.below(4));
        for (int c = 0; c < 4; ++c) post(static_cast<Eigen::Index>(i), c) = rng.uniform();
    }
    EXPECT_EQ(hard_vote_serial(v1, v2, v3, post), hard_vote_parallel(v1, v2, v3, post));
}

INSTANTIATE_TEST_SUITE_P(Threads, ThreadCounts, ::testing::Values(1, 2, 3, 8));

TEST(Rng, SplitStreamsAreReproducible) {
    const Rng root(42);
    Rng a = root.split(3);
    Rng b = root.split(3);
    Rng c = root.split(4);
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
}

}  // namespace
}  // namespace protovote::kernels
