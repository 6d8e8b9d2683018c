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

#include "protovote/gbdt.hpp"
#include "protovote/kernels.hpp"
#include "protovote/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace protovote {
namespace {

struct Toy {
    Eigen::MatrixXd x;
    std::vector<int> y;
};

Toy noisy_classes(Index n, Index d, int n_classes, std::uint64_t seed) {
    Rng rng(seed);
    Toy t;
    t.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Index i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % static_cast<Index>(n_classes));
        t.y.push_back(c);
        for (Index j = 0; j < d; ++j)
            t.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rng.normal() + (j == 0 ? c : 0.0);
    }
    return t;
}

TEST(SplitGain, HandComputed) {
    // G_L = -4, H_L = 3, G_R = 2, H_R = 1, lambda = 1, gamma = 0.5
    // 0.5 * (16/4 + 4/2 - 4/5) - 0.5 = 2.1
    EXPECT_NEAR(split_gain(-4, 3, 2, 1, 1.0, 0.5), 2.1, 1e-15);
    EXPECT_DOUBLE_EQ(leaf_weight(-4, 3, 1.0), 1.0);
    EXPECT_THROW(leaf_weight(1.0, 0.0, 0.0), DegenerateError);
}

TEST(SplitSearch, MatchesExhaustiveEnumerationIn1D) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        const Eigen::Index n = 40;
        Eigen::MatrixXd x(n, 1);
        std::vector<double> g(n);
        std::vector<double> h(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            x(i, 0) = static_cast<double>(rng.below(15));
            g[static_cast<std::size_t>(i)] = rng.normal();
            h[static_cast<std::size_t>(i)] = 0.1 + rng.uniform();
        }
        std::vector<std::vector<std::uint32_t>> sorted(1, std::vector<std::uint32_t>(n));
        std::iota(sorted[0].begin(), sorted[0].end(), 0U);
        std::stable_sort(sorted[0].begin(), sorted[0].end(), [&](auto a, auto b) { return x(a, 0) < x(b, 0); });

        const double lambda = 1.0;
        double best = 0.0;
        double best_thr = 0.0;
        bool found = false;
        for (int t = 0; t < 15; ++t) {
            double gl = 0, hl = 0, gr = 0, hr = 0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (x(i, 0) <= t) {
                    gl += g[static_cast<std::size_t>(i)];
                    hl += h[static_cast<std::size_t>(i)];
                } else {
                    gr += g[static_cast<std::size_t>(i)];
                    hr += h[static_cast<std::size_t>(i)];
                }
            }
            if (hl == 0 || hr == 0) continue;
            const double gain = split_gain(gl, hl, gr, hr, lambda, 0.0);
            if (gain > best + 1e-12) {
                best = gain;
                best_thr = t;
                found = true;
            }
        }
        const kernels::SplitCandidate s = kernels::best_split_serial(x, sorted, g, h, {lambda, 0.0, 0.0});
        ASSERT_EQ(s.found, found) << "seed " << seed;
        if (!found) continue;
        EXPECT_NEAR(s.gain, best, 1e-10) << "seed " << seed;
        // enumerated threshold t splits at x <= t; the kernel uses the midpoint to the next value
        Eigen::Index below = 0;
        Eigen::Index below_ref = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            below += x(i, 0) <= s.threshold;
            below_ref += x(i, 0) <= best_thr;
        }
        EXPECT_EQ(below, below_ref) << "seed " << seed;
    }
}

TEST(Gbdt, LeafValuesAreNewtonStepsOfTheirRows) {
    for (Growth growth : {Growth::DepthWise, Growth::LeafWise}) {
        const Toy t = noisy_classes(120, 4, 3, 7);
        GbdtConfig cfg = growth == Growth::DepthWise ? GbdtConfig::depth_wise(3) : GbdtConfig::leaf_wise(6);
        cfg.n_rounds = 8;
        cfg.lambda_l2 = 0.7;
        GbdtTrace trace;
        const GbdtModel m = fit_gbdt(t.x, t.y, 3, cfg, &trace);
        ASSERT_EQ(trace.gradients.size(), 8u);
        for (int k = 0; k < m.n_outputs(); ++k) {
            for (int r = 0; r < cfg.n_rounds; ++r) {
                const RegressionTree& tree = m.trees[static_cast<std::size_t>(k)][static_cast<std::size_t>(r)];
                std::vector<double> gsum(tree.nodes.size(), 0.0);
                std::vector<double> hsum(tree.nodes.size(), 0.0);
                for (Eigen::Index i = 0; i < t.x.rows(); ++i) {
                    const auto leaf = static_cast<std::size_t>(tree.leaf_of(t.x.row(i)));
                    gsum[leaf] += trace.gradients[static_cast<std::size_t>(r)](i, k);
                    hsum[leaf] += trace.hessians[static_cast<std::size_t>(r)](i, k);
                }
                for (std::size_t nidx = 0; nidx < tree.nodes.size(); ++nidx) {
                    const TreeNode& node = tree.nodes[nidx];
                    if (!node.is_leaf()) continue;
                    EXPECT_NEAR(node.sum_grad, gsum[nidx], 1e-9);
                    EXPECT_NEAR(node.sum_hess, hsum[nidx], 1e-9);
                    EXPECT_NEAR(node.leaf_value, -gsum[nidx] / (hsum[nidx] + cfg.lambda_l2), 1e-9);
                }
            }
        }
    }
}

TEST(Gbdt, TrainingLogLossNeverIncreases) {
    for (int classes : {2, 4}) {
        const Toy t = noisy_classes(200, 5, classes, 3);
        GbdtConfig cfg = GbdtConfig::depth_wise(4);
        cfg.n_rounds = 40;
        GbdtTrace trace;
        fit_gbdt(t.x, t.y, classes, cfg, &trace);
        ASSERT_EQ(trace.train_log_loss.size(), 41u);
        for (std::size_t r = 1; r < trace.train_log_loss.size(); ++r)
            EXPECT_LE(trace.train_log_loss[r], trace.train_log_loss[r - 1] + 1e-12) << "classes " << classes << " round " << r;
    }
}

TEST(Gbdt, FitsSeparableToyExactly) {
    Eigen::MatrixXd x(20, 2);
    std::vector<int> y;
    for (int i = 0; i < 20; ++i) {
        x(i, 0) = i;
        x(i, 1) = (i * 7) % 5;
        y.push_back(i < 8 ? 0 : (i < 14 ? 1 : 0));  // two cuts on feature 0
    }
    for (GbdtConfig cfg : {GbdtConfig::depth_wise(3), GbdtConfig::leaf_wise(4)}) {
        cfg.n_rounds = 50;
        cfg.learning_rate = 0.3;
        cfg.min_child_hessian = 0.0;
        const GbdtModel m = fit_gbdt(x, y, 2, cfg);
        EXPECT_EQ(predict(m, x), y) << growth_name(cfg.growth);
    }
}

TEST(Gbdt, GrowthLimitsRespected) {
    const Toy t = noisy_classes(300, 6, 2, 9);
    GbdtConfig depth = GbdtConfig::depth_wise(2);
    depth.n_rounds = 5;
    const GbdtModel dm = fit_gbdt(t.x, t.y, 2, depth);
    for (const auto& tree : dm.trees[0]) EXPECT_LE(tree.depth(), 2);
    GbdtConfig leaf = GbdtConfig::leaf_wise(5);
    leaf.n_rounds = 5;
    const GbdtModel lm = fit_gbdt(t.x, t.y, 2, leaf);
    for (const auto& tree : lm.trees[0]) EXPECT_LE(tree.n_leaves(), 5);
}

TEST(Gbdt, ProbabilitiesAndMarginsAgree) {
    const Toy t = noisy_classes(90, 3, 3, 4);
    GbdtConfig cfg = GbdtConfig::leaf_wise(8);
    cfg.n_rounds = 10;
    const GbdtModel m = fit_gbdt(t.x, t.y, 3, cfg);
    const Eigen::MatrixXd p = predict_proba(m, t.x);
    const Eigen::MatrixXd margin = predict_margin(m, t.x);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-12);
        Eigen::Index a = 0;
        Eigen::Index b = 0;
        p.row(i).maxCoeff(&a);
        margin.row(i).maxCoeff(&b);
        EXPECT_EQ(a, b);
    }
}

TEST(Gbdt, BinaryUsesSingleLogitOutput) {
    const Toy t = noisy_classes(60, 2, 2, 5);
    GbdtConfig cfg;
    cfg.n_rounds = 3;
    const GbdtModel m = fit_gbdt(t.x, t.y, 2, cfg);
    EXPECT_EQ(m.n_outputs(), 1);
    EXPECT_NEAR(m.base_score[0], 0.0, 1e-12);  // balanced classes
    EXPECT_EQ(predict_proba(m, t.x).cols(), 2);
}

TEST(Gbdt, RejectsBadConfig) {
    GbdtConfig cfg;
    cfg.learning_rate = 0.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = GbdtConfig{};
    cfg.min_child_hessian = -1;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Gbdt, JsonRoundTripKeepsPredictions) {
    const Toy t = noisy_classes(80, 3, 3, 6);
    GbdtConfig cfg = GbdtConfig::leaf_wise(7);
    cfg.n_rounds = 6;
    const GbdtModel m = fit_gbdt(t.x, t.y, 3, cfg);
    const GbdtModel back = nlohmann::json(m).get<GbdtModel>();
    EXPECT_EQ(predict_margin(m, t.x), predict_margin(back, t.x));
    EXPECT_EQ(back.config.growth, Growth::LeafWise);
}

}  // namespace
}  // namespace protovote
