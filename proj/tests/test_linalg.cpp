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

#include "protovote/error.hpp"
#include "protovote/linalg.hpp"
#include "protovote/rng.hpp"
#include "protovote/workflow.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace protovote {
namespace {

Eigen::MatrixXd random_matrix(Index n, Index d, std::uint64_t seed, double anisotropy = 1.0) {
    Rng rng(seed);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal() * std::pow(anisotropy, static_cast<double>(j));
    // mix the columns so components are not axis aligned
    Eigen::MatrixXd mix = Eigen::MatrixXd::Identity(x.cols(), x.cols());
    for (Eigen::Index j = 0; j + 1 < x.cols(); ++j) mix(j, j + 1) = 0.5;
    return x * mix;
}

// Cyclic Jacobi rotations on a symmetric matrix; returns eigenvalues (desc) and
// eigenvectors as columns.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> jacobi_eigen(Eigen::MatrixXd a) {
    const Eigen::Index n = a.rows();
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30) break;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) > a(y, y); });
    Eigen::VectorXd values(n);
    Eigen::MatrixXd vectors(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        values[i] = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
        vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
    }
    return {values, vectors};
}

TEST(Standardizer, SampleStdAndConstantColumns) {
    Eigen::MatrixXd x(4, 2);
    x << 1, 5, 2, 5, 3, 5, 4, 5;
    const Standardizer s = fit_standardizer(x);
    EXPECT_DOUBLE_EQ(s.means[0], 2.5);
    EXPECT_NEAR(s.stds[0], std::sqrt(5.0 / 3.0), 1e-15);
    EXPECT_EQ(s.stds[1], 1.0);
    EXPECT_EQ(s.constant_columns, (IndexList{1}));
    const Eigen::MatrixXd z = s.transform(x);
    EXPECT_NEAR(z.col(0).mean(), 0.0, 1e-15);
    EXPECT_EQ(z.col(1).squaredNorm(), 0.0);
}

TEST(Pca, ComponentsAreOrthonormal) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Eigen::MatrixXd x = random_matrix(60, 25, seed, 0.9);
        const PcaModel m = fit_pca(x, 20);
        const Eigen::MatrixXd gram = m.components * m.components.transpose();
        EXPECT_LT((gram - Eigen::MatrixXd::Identity(20, 20)).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Pca, MatchesJacobiOnCovariance) {
    for (Index d = 2; d <= 8; ++d) {
        const Eigen::MatrixXd x = random_matrix(40, d, 100 + d, 0.7);
        const PcaModel m = fit_pca(x, d);
        const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
        const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
        const auto [values, vectors] = jacobi_eigen(cov);
        for (Index c = 0; c < d; ++c) {
            const auto ci = static_cast<Eigen::Index>(c);
            EXPECT_NEAR(m.explained_variance[ci], values[ci], 1e-7) << "d=" << d << " c=" << c;
            Eigen::VectorXd ref = vectors.col(ci);
            Eigen::Index axis = 0;
            ref.cwiseAbs().maxCoeff(&axis);
            if (ref[axis] < 0) ref = -ref;
            EXPECT_LT((m.components.row(ci).transpose() - ref).cwiseAbs().maxCoeff(), 1e-7) << "d=" << d << " c=" << c;
        }
    }
}

TEST(Pca, FullRankRoundTrip) {
    const Eigen::MatrixXd x = random_matrix(30, 6, 8);
    const PcaModel m = fit_pca(x, 6);
    EXPECT_LT((pca_inverse_transform(m, pca_transform(m, x)) - x).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Pca, RejectsTooManyComponents) {
    const Eigen::MatrixXd x = random_matrix(5, 10, 1);
    EXPECT_EQ(max_components(5, 10), 4u);
    EXPECT_THROW(fit_pca(x, 5), std::invalid_argument);
    EXPECT_THROW(fit_pca(x, 0), std::invalid_argument);
}

TEST(Pca, JsonRoundTrip) {
    const PcaModel m = fit_pca(random_matrix(20, 5, 4), 3, Provenance::of("pca", {0, 1, 2}));
    const PcaModel back = nlohmann::json(m).get<PcaModel>();
    EXPECT_EQ(back.components, m.components);
    EXPECT_EQ(back.provenance.rows, m.provenance.rows);
}

TEST(Leakage, ProvenanceRejectsFittedRows) {
    const Provenance p = Provenance::of("scaler", {4, 1, 9});
    EXPECT_NO_THROW(p.require_disjoint(IndexList{0, 2, 3}));
    EXPECT_THROW(p.require_disjoint(IndexList{2, 9}), LeakageError);
}

class FoldLeakage : public ::testing::Test {
protected:
    void SetUp() override {
        x = random_matrix(50, 12, 77, 0.8);
        std::vector<int> ids(50);
        for (int i = 0; i < 50; ++i) ids[static_cast<std::size_t>(i)] = i % 2;
        y = LabelSet::from_ids(ids);
        plan = stratified_kfold(y, 5, 3);
        cfg.model = ModelChoice::Proto;
    }
    Eigen::MatrixXd x;
    LabelSet y;
    SplitPlan plan;
    RunConfig cfg;
};

TEST_F(FoldLeakage, HeldoutTransformUsesTrainStatisticsOnly) {
    for (int f = 0; f < plan.n_folds(); ++f) {
        const SplitPlan h = plan.fold(f);
        const FittedPipeline p = fit_pipeline(x, y, h.train_indices, 6, cfg);

        // statistics depend on training rows alone: scrambling the held-out rows changes nothing
        Eigen::MatrixXd scrambled = x;
        for (Index r : h.test_indices) scrambled.row(static_cast<Eigen::Index>(r)) *= -7.0;
        const FittedPipeline q = fit_pipeline(scrambled, y, h.train_indices, 6, cfg);
        EXPECT_EQ(p.scaler.means, q.scaler.means);
        EXPECT_EQ(p.scaler.stds, q.scaler.stds);
        EXPECT_EQ(p.pca.components, q.pca.components);

        // and they equal the moments of the training rows computed by hand
        Eigen::MatrixXd train(static_cast<Eigen::Index>(h.train_indices.size()), x.cols());
        for (std::size_t i = 0; i < h.train_indices.size(); ++i)
            train.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(h.train_indices[i]));
        const Eigen::RowVectorXd mean = train.colwise().mean();
        EXPECT_LT((p.scaler.means.transpose() - mean).cwiseAbs().maxCoeff(), 1e-12);

        const Eigen::MatrixXd z = p.transform_heldout(x, h.test_indices);
        EXPECT_EQ(z.rows(), static_cast<Eigen::Index>(h.test_indices.size()));
        EXPECT_THROW(p.transform_heldout(x, h.train_indices), LeakageError);
        for (Index r : h.test_indices) {
            EXPECT_FALSE(p.scaler.provenance.contains(r));
            EXPECT_FALSE(p.pca.provenance.contains(r));
        }
    }
}

}  // namespace
}  // namespace protovote
