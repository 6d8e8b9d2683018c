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
#include "protovote/theory_lab.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace protovote {
namespace {

TEST(Concentration, RadiusValues) {
    EXPECT_NEAR(concentration_radius(1.0, 4, 0.05, 25), 0.6371922042984409, 1e-14);
    EXPECT_NEAR(concentration_radius(1.0, 4, 0.05, 100), 0.31859610214922046, 1e-14);
    EXPECT_NEAR(concentration_radius(1.0, 4, 0.05, 400), 0.15929805107461023, 1e-14);
    EXPECT_THROW(concentration_radius(1.0, 4, 0.05, 0), std::invalid_argument);
    EXPECT_THROW(concentration_radius(1.0, 4, 1.0, 10), std::invalid_argument);
}

TEST(Placement, SeparatedAndInsideBall) {
    for (int c : {2, 3, 4, 6}) {
        SyntheticSpec spec;
        spec.n_classes = c;
        spec.dim = 8;
        spec.separation = 1.0;
        const Eigen::MatrixXd p = place_prototypes(spec);
        ASSERT_EQ(p.rows(), c);
        EXPECT_GE(min_pairwise_distance(p), 1.0 - 1e-12) << c;
        for (Eigen::Index i = 0; i < p.rows(); ++i) EXPECT_LE(p.row(i).norm(), 1.0 + 1e-12);
    }
    SyntheticSpec bad;
    bad.separation = 2.5;
    EXPECT_THROW(place_prototypes(bad), InfeasibleError);
}

TEST(Generator, RowsInsideBallWithRequestedPools) {
    SyntheticSpec spec;
    spec.n_classes = 3;
    spec.pool_sizes = {10, 20, 30};
    spec.noise = 2.0;
    spec.seed = 5;
    const SyntheticData d = gen_gaussian_prototype_data(spec);
    EXPECT_EQ(d.x.rows(), 60);
    for (Eigen::Index i = 0; i < d.x.rows(); ++i) EXPECT_LE(d.x.row(i).norm(), 1.0 + 1e-12);
    EXPECT_EQ(std::count(d.labels.begin(), d.labels.end(), 2), 30);
    const SyntheticData again = gen_gaussian_prototype_data(spec);
    EXPECT_EQ(d.x, again.x);
}

TEST(Joint, SolveMatchesRequestedMoments) {
    const std::array<double, 3> e{0.1, 0.15, 0.2};
    const std::array<double, 3> cov{0.01, 0.005, 0.0};
    const JointErrorDistribution j = solve_joint(e, cov);
    double total = 0.0;
    for (double p : j.cell) {
        EXPECT_GE(p, -1e-12);
        total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    for (int v = 0; v < 3; ++v) EXPECT_NEAR(j.marginal(v), e[static_cast<std::size_t>(v)], 1e-12);
    EXPECT_NEAR(j.covariance(0, 1), 0.01, 1e-12);
    EXPECT_NEAR(j.covariance(0, 2), 0.005, 1e-12);
    EXPECT_NEAR(j.covariance(1, 2), 0.0, 1e-12);
    EXPECT_NEAR(j.vote_error(), j.pair(0, 1) + j.pair(0, 2) + j.pair(1, 2) - 2.0 * j.triple(), 1e-12);
}

TEST(Joint, IndependentMarginalsGiveClosedForm) {
    const JointErrorDistribution j = solve_joint({0.1, 0.1, 0.1}, {0.0, 0.0, 0.0});
    EXPECT_NEAR(j.vote_error(), 0.028000000000000004, 1e-12);
}

TEST(Joint, InfeasibleCovarianceRejected) {
    // p_HL = 0.1*0.1 + 0.09 = 0.1 equals both marginals, leaving no room for a negative p_HX
    EXPECT_THROW(solve_joint({0.1, 0.1, 0.5}, {0.09, -0.05, 0.0}), InfeasibleError);
    EXPECT_THROW(solve_joint({1.2, 0.1, 0.1}, {0.0, 0.0, 0.0}), std::invalid_argument);
}

TEST(Joint, SamplerReproducesCellsWithinSamplingError) {
    const JointErrorDistribution j = solve_joint({0.2, 0.25, 0.3}, {0.02, 0.0, 0.01});
    const ErrorIndicatorTable t = sample_joint(j, 200000, 3);
    std::array<double, 8> freq{};
    for (std::size_t i = 0; i < t.size(); ++i) freq[t.bits(i) & 7U] += 1.0 / static_cast<double>(t.size());
    for (std::size_t m = 0; m < 8; ++m) EXPECT_NEAR(freq[m], j.cell[m], 0.005) << "cell " << m;
}

TEST(Experiments, IdentityAndIndependenceHold) {
    const BoundReport id = vote_identity_experiment(20, 1);
    EXPECT_EQ(id.kind, ReportKind::Identity);
    EXPECT_TRUE(id.holds);
    const BoundReport ind = independence_experiment(0.1, 100000, 2);
    EXPECT_TRUE(ind.holds);
    EXPECT_NEAR(ind.details.at("exact").get<double>(), 0.028000000000000004, 1e-15);
    EXPECT_NEAR(ind.details.at("measured").get<double>(), 0.028, 0.003);
}

TEST(Experiments, PriorShiftFlipsStayUnderPairBound) {
    PriorShiftOptions opt;
    opt.n = 50000;
    opt.seed = 4;
    const BoundReport ind = prior_shift_experiment(opt);
    EXPECT_TRUE(ind.holds);
    opt.dependence = FlipDependence::Comonotone;
    EXPECT_TRUE(prior_shift_experiment(opt).holds);
}

TEST(Suite, QuickRunIsDeterministicAndSerializable) {
    TheorySuiteConfig cfg;
    cfg.quick = true;
    cfg.seed = 42;
    const auto a = run_theory_suite(cfg);
    const auto b = run_theory_suite(cfg);
    ASSERT_EQ(a.size(), b.size());
    ASSERT_FALSE(a.empty());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].name, b[i].name);
        EXPECT_EQ(a[i].empirical, b[i].empirical);
        if (a[i].kind != ReportKind::Skipped) {
            EXPECT_TRUE(a[i].holds) << a[i].name;
        }
        EXPECT_TRUE(nlohmann::json(a[i]).contains("experiment"));
    }
    std::ostringstream os;
    write_report_summary_csv(os, a);
    const std::string csv = os.str();
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), a.size() + 1);
}

}  // namespace
}  // namespace protovote
