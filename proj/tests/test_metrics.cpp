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

#include "protovote/metrics.hpp"
#include "protovote/rng.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace protovote {
namespace {

TEST(Confusion, HandBuilt) {
    const std::vector<int> t{0, 0, 0, 1, 1, 2, 2, 2, 2};
    const std::vector<int> p{0, 1, 0, 1, 2, 2, 2, 0, 2};
    const ConfusionMatrix cm = confusion_matrix(t, p, 3);
    Eigen::Matrix<long long, 3, 3> expected;
    expected << 2, 1, 0, 0, 1, 1, 1, 0, 3;
    EXPECT_EQ(cm.counts, expected);
    EXPECT_EQ(cm.tp(2), 3);
    EXPECT_EQ(cm.fn(0), 1);
    EXPECT_EQ(cm.fp(0), 1);
    EXPECT_EQ(cm.tn(1), 6);

    const MetricsReport r = build_report(t, p, 3);
    EXPECT_NEAR(r.accuracy, 6.0 / 9.0, 1e-15);
    EXPECT_NEAR(r.balanced_accuracy, (2.0 / 3 + 1.0 / 2 + 3.0 / 4) / 3.0, 1e-15);
    EXPECT_NEAR(*r.per_class[1].ppv, 0.5, 1e-15);
    EXPECT_NEAR(*r.per_class[0].specificity, 5.0 / 6.0, 1e-15);
    EXPECT_FALSE(r.auc.has_value());
}

TEST(BalancedAccuracy, EqualsMeanRecallOnRandomSets) {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const int c = 2 + static_cast<int>(rng.below(4));
        const std::size_t n = 20 + rng.below(200);
        std::vector<int> t(n);
        std::vector<int> p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
            p[i] = rng.bernoulli(0.6) ? t[i] : static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
        }
        double sum = 0.0;
        int present = 0;
        for (int k = 0; k < c; ++k) {
            int hit = 0;
            int tot = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (t[i] != k) continue;
                ++tot;
                hit += p[i] == k;
            }
            if (tot == 0) continue;
            sum += static_cast<double>(hit) / tot;
            ++present;
        }
        EXPECT_NEAR(balanced_accuracy(t, p, c), sum / present, 1e-12);
    }
}

TEST(BalancedAccuracy, MajorityPredictorOnImbalancedData) {
    std::vector<int> t(100, 0);
    for (int i = 0; i < 10; ++i) t[static_cast<std::size_t>(i)] = 1;
    const std::vector<int> p(100, 0);
    const MetricsReport r = build_report(t, p, 2);
    EXPECT_DOUBLE_EQ(r.accuracy, 0.9);
    EXPECT_DOUBLE_EQ(r.balanced_accuracy, 0.5);
    // nothing predicted positive: PPV of class 1 is undefined and excluded
    EXPECT_FALSE(r.per_class[1].ppv.has_value());
    EXPECT_GE(r.undefined_excluded, 1);
}

TEST(Auc, MatchesPairCounting) {
    Rng rng(2);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 2 + rng.below(199);
        std::vector<int> y(n);
        std::vector<double> s(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = rng.bernoulli(0.4) ? 1 : 0;
            s[i] = trial % 2 ? static_cast<double>(rng.below(6)) : rng.normal() + y[i];  // odd trials have ties
        }
        y[0] = 0;
        y[1] = 1;
        double wins = 0.0;
        double pairs = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (y[i] != 1 || y[j] != 0) continue;
                pairs += 1.0;
                wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            }
        EXPECT_NEAR(binary_auc(y, s), wins / pairs, 1e-12) << "trial " << trial;
    }
}

TEST(Auc, ReportedForBinaryWithScores) {
    const std::vector<int> y{0, 0, 1, 1};
    const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
    const MetricsReport r = build_report(y, std::vector<int>{0, 1, 0, 1}, 2, s);
    ASSERT_TRUE(r.auc.has_value());
    EXPECT_DOUBLE_EQ(*r.auc, 0.75);
}

TEST(MetricsCsv, HeaderAndRowShareColumnCount) {
    std::ostringstream os;
    write_metrics_header(os);
    const std::vector<int> y{0, 1, 1, 0};
    write_metrics_row(os, "HF (50)", build_report(y, y, 2));
    std::istringstream is(os.str());
    std::string header;
    std::string row;
    std::getline(is, header);
    std::getline(is, row);
    EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
    EXPECT_EQ(row.rfind("HF (50)", 0), 0u);
}

}  // namespace
}  // namespace protovote
