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

#include "protovote/ensemble.hpp"
#include "protovote/error.hpp"
#include "protovote/rng.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <sstream>

namespace protovote {
namespace {

// Returns a fixed posterior table regardless of the input rows.
class TableVoter final : public Voter {
public:
    TableVoter(std::string name, Eigen::MatrixXd post, std::vector<std::string> classes)
        : name_(std::move(name)), post_(std::move(post)), classes_(std::move(classes)) {}
    std::string name() const override { return name_; }
    const std::vector<std::string>& class_names() const override { return classes_; }
    Eigen::MatrixXd posterior(const Eigen::MatrixXd&) const override { return post_; }

private:
    std::string name_;
    Eigen::MatrixXd post_;
    std::vector<std::string> classes_;
};

const std::vector<std::string> kThree{"a", "b", "c"};

std::shared_ptr<const Voter> voter(const char* name, std::initializer_list<std::initializer_list<double>> rows,
                                   const std::vector<std::string>& classes = kThree) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(classes.size()));
    Eigen::Index i = 0;
    for (const auto& r : rows) {
        Eigen::Index j = 0;
        for (double v : r) m(i, j++) = v;
        ++i;
    }
    return std::make_shared<TableVoter>(name, m, classes);
}

TEST(HardVote, MajorityThenMeanPosteriorThenLowestClass) {
    // row 0: H=a, L=a, X=c          -> a by majority
    // row 1: H=a, L=b, X=c          -> c has the largest mean posterior
    // row 2: H=a, L=b, X=c, equal means -> lowest id a
    // row 3: H=b, L=c, X=c          -> c even though H is confident in b
    const auto h = voter("HF", {{.6, .3, .1}, {.5, .2, .3}, {.4, .3, .3}, {0, 1, 0}});
    const auto l = voter("LGB", {{.7, .2, .1}, {.1, .5, .4}, {.3, .4, .3}, {.3, .3, .4}});
    const auto x = voter("XGB", {{.1, .2, .7}, {.1, .3, .6}, {.3, .3, .4}, {.3, .3, .4}});
    const VoterSet set(h, l, x);
    const VoteResult r = hard_vote(set, Eigen::MatrixXd(Eigen::MatrixXd::Zero(4, 1)));
    EXPECT_EQ(r.voter_predictions[kPrototypeSlot], (std::vector<int>{0, 0, 0, 1}));
    EXPECT_EQ(r.voter_predictions[kLeafWiseSlot], (std::vector<int>{0, 1, 1, 2}));
    EXPECT_EQ(r.voter_predictions[kDepthWiseSlot], (std::vector<int>{2, 2, 2, 2}));
    EXPECT_EQ(r.ensemble, (std::vector<int>{0, 2, 0, 2}));
    EXPECT_NEAR(r.mean_posterior(1, 2), (0.3 + 0.4 + 0.6) / 3.0, 1e-15);
}

TEST(HardVote, MismatchedClassMapsRejected) {
    const auto h = voter("HF", {{.5, .5, 0}});
    const auto l = voter("LGB", {{.5, .5, 0}}, {"a", "b", "d"});
    EXPECT_THROW(VoterSet(h, l, h), ConfigurationError);
}

ErrorIndicatorTable random_table(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    ErrorIndicatorTable t;
    for (std::size_t i = 0; i < n; ++i) {
        const bool shared = rng.bernoulli(0.1);
        t.add(static_cast<int>(rng.below(3)),
              {shared || rng.bernoulli(0.2), shared || rng.bernoulli(0.15), rng.bernoulli(0.25)});
    }
    return t;
}

TEST(VoteIdentity, EnsembleErrorEqualsPairsMinusTwiceTriple) {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const ErrorIndicatorTable t = random_table(seed, 500);
        for (int c : t.classes_present()) {
            const VoteDecomposition d = decompose_vote_error(t, c);
            EXPECT_NEAR(d.e_ens, d.p_hl + d.p_hx + d.p_lx - 2.0 * d.p_123, 1e-12);
            EXPECT_LT(std::abs(d.identity_residual), 1e-12);
            // direct count of rows with at least two errors
            std::size_t wrong = 0;
            for (std::size_t i = 0; i < t.size(); ++i) {
                if (t.cls(i) != c) continue;
                const int errs = std::popcount(static_cast<unsigned>(t.bits(i) & 7U));
                wrong += errs >= 2;
            }
            EXPECT_NEAR(d.e_ens, static_cast<double>(wrong) / static_cast<double>(d.n), 1e-15);
        }
    }
}

TEST(VoteIdentity, BalancedErrorAveragesClasses) {
    ErrorIndicatorTable t;
    t.add(0, {true, true, false});
    t.add(0, {false, false, false});
    t.add(1, {false, false, true});
    EXPECT_DOUBLE_EQ(balanced_vote_error(t), 0.25);
}

TEST(ErrorStats, CovarianceAndKappa) {
    ErrorIndicatorTable t;
    // e_H = e_L = 0.5 with perfectly correlated errors; X never errs
    t.add(0, {true, true, false});
    t.add(0, {false, false, false});
    const ClassErrorStats s = error_stats(t, 0);
    EXPECT_DOUBLE_EQ(s.covariance[0], 0.25);
    EXPECT_DOUBLE_EQ(s.kappa(), 0.25);
    EXPECT_DOUBLE_EQ(s.ensemble_error, 0.5);
    EXPECT_THROW(error_stats(t, 3), MissingClassError);
}

TEST(Bounds, ClosedForms) {
    EXPECT_NEAR(independent_vote_error(0.1, 0.1, 0.1), 0.028000000000000004, 1e-15);
    EXPECT_NEAR(bounded_dependence_bound(0.1, 0.2, 0.3, 0.01), 0.02 + 0.03 + 0.06 + 0.03, 1e-15);
    EXPECT_NEAR(symmetric_improvement_threshold(0.05), 0.014166666666666668, 1e-15);
    EXPECT_NEAR(symmetric_improvement_threshold(0.1), 0.023333333333333334, 1e-15);
    EXPECT_NEAR(symmetric_improvement_threshold(0.2), 0.02666666666666666, 1e-15);
    EXPECT_THROW(symmetric_improvement_threshold(0.5), std::invalid_argument);
    EXPECT_TRUE(symmetric_improvement(0.1, 0.02).certified);
    EXPECT_FALSE(symmetric_improvement(0.1, 0.03).certified);
}

TEST(Bounds, IndependentFormulaMatchesEnumeration) {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const std::array<double, 3> e{rng.uniform() * 0.5, rng.uniform() * 0.5, rng.uniform() * 0.5};
        double p = 0.0;
        for (unsigned m = 0; m < 8; ++m) {
            if (std::popcount(m) < 2) continue;
            double cell = 1.0;
            for (unsigned j = 0; j < 3; ++j) cell *= (m >> j) & 1U ? e[j] : 1.0 - e[j];
            p += cell;
        }
        EXPECT_NEAR(independent_vote_error(e[0], e[1], e[2]), p, 1e-14);
    }
}

TEST(FlipCheck, RatesAndPrecondition) {
    ErrorIndicatorTable t(true);
    t.add(0, {false, false, false}, {false, true, true}, true);
    t.add(0, {false, false, false}, {false, true, false}, false);
    t.add(0, {false, false, false}, {false, false, false}, false);
    t.add(0, {false, false, false}, {false, false, true}, false);
    const FlipCheck f = flip_bound_check(t);
    EXPECT_EQ(f.n, 4u);
    EXPECT_DOUBLE_EQ(f.ensemble_flip_rate, 0.25);
    EXPECT_DOUBLE_EQ(f.both_flip_rate, 0.25);
    EXPECT_DOUBLE_EQ(f.min_pair_bound, 0.5);
    EXPECT_TRUE(f.precondition_met);
    EXPECT_TRUE(f.holds);

    t.add(0, {false, false, false}, {true, false, false}, false);
    const FlipCheck g = flip_bound_check(t);
    EXPECT_FALSE(g.precondition_met);
    EXPECT_FALSE(g.holds);
    EXPECT_FALSE(g.note.empty());

    EXPECT_THROW(flip_bound_check(ErrorIndicatorTable{}), std::invalid_argument);
}

TEST(ErrorTable, BuiltFromPredictionsAndExported) {
    const std::vector<int> y{0, 1, 1};
    const std::array<std::vector<int>, 3> pred{std::vector<int>{0, 0, 1}, std::vector<int>{1, 0, 1},
                                               std::vector<int>{0, 1, 0}};
    const std::vector<std::string> ids{"s1", "s2", "s3"};
    const ErrorIndicatorTable t = build_error_table(y, pred, ids);
    EXPECT_EQ(t.bits(0), ErrorIndicatorTable::kErrL);
    EXPECT_EQ(t.bits(1), ErrorIndicatorTable::kErrH | ErrorIndicatorTable::kErrL);
    EXPECT_EQ(t.bits(2), ErrorIndicatorTable::kErrX);
    std::ostringstream os;
    t.write_csv(os);
    EXPECT_NE(os.str().find("s2"), std::string::npos);
}

}  // namespace
}  // namespace protovote
