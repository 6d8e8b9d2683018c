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

#include "protovote/synthetic_task.hpp"

#include "protovote/metrics.hpp"
#include "protovote/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace protovote {
namespace {

constexpr int kClasses = 4;
constexpr int kMinority = 3;
enum Subtype { kCore = 0, kProto = 1, kCorner = 2, kRare = 3 };

std::vector<int> minority_subtypes(const std::array<double, 4>& mix, Index n, Rng& rng) {
    std::vector<int> out;
    out.reserve(n);
    Index assigned = 0;
    for (int s = 0; s < 4; ++s) {
        const auto m = s == 3 ? n - assigned : static_cast<Index>(std::llround(mix[static_cast<std::size_t>(s)] * static_cast<double>(n)));
        const Index take = std::min(m, n - assigned);
        out.insert(out.end(), take, s);
        assigned += take;
    }
    rng.shuffle(std::span<int>(out));
    return out;
}

// 0 and 1 name their classes; class 2 shares code 2 with every minority row.
double code(int c) { return c < 2 ? c : 2.0; }

void draw_split(const EnsembleTaskSpec& spec, const Eigen::MatrixXd& means, const std::array<Index, 4>& counts, Rng rng,
                Eigen::MatrixXd& x, std::vector<int>& y, std::vector<int>& subtype) {
    const auto dim = static_cast<Eigen::Index>(spec.dense_dim);
    const Index total = std::accumulate(counts.begin(), counts.end(), Index{0});
    x.resize(static_cast<Eigen::Index>(total), dim + 4);
    y.clear();
    subtype.clear();
    Eigen::Index row = 0;
    for (int c = 0; c < kClasses; ++c) {
        Rng cr = rng.split(static_cast<std::uint64_t>(c));
        const Index n = counts[static_cast<std::size_t>(c)];
        std::vector<int> kinds = c == kMinority ? minority_subtypes(spec.minority_mix, n, cr) : std::vector<int>(n, -1);
        for (Index i = 0; i < n; ++i, ++row) {
            const int s = kinds[i];
            const int dense_class = s == kProto ? 0 : c;
            for (Eigen::Index d = 0; d < dim; ++d) x(row, d) = means(dense_class, d) + cr.normal();
            double b1 = 0.0;
            double b2 = 0.0;
            if (s == kCore || s == kProto) {
                b1 = 1.0;
                b2 = 1.0;
            } else if (s == kCorner) {
                b1 = -1.0;
                b2 = -1.0;
            } else {
                b1 = cr.bernoulli(0.5) ? 1.0 : -1.0;
                b2 = -b1;
            }
            x(row, dim) = b1 + spec.cue_noise * cr.normal();
            x(row, dim + 1) = b2 + spec.cue_noise * cr.normal();
            x(row, dim + 2) = (s == kRare ? 1.0 : 0.0) + spec.cue_noise * cr.normal();
            x(row, dim + 3) = code(c) + spec.cue_noise * cr.normal();
            y.push_back(c);
            subtype.push_back(s);
        }
    }
}

}  // namespace

EnsembleTaskLearners EnsembleTaskLearners::defaults() {
    EnsembleTaskLearners l;
    l.leaf_wise = GbdtConfig::leaf_wise(31);
    l.leaf_wise.n_rounds = 100;
    l.leaf_wise.min_child_hessian = 3.0;
    l.depth_wise = GbdtConfig::depth_wise(1);
    l.depth_wise.n_rounds = 100;
    return l;
}

EnsembleTaskData make_ensemble_task(const EnsembleTaskSpec& spec, std::uint64_t seed) {
    if (spec.dense_dim < 1) throw std::invalid_argument("dense block needs at least one coordinate");
    const Rng root(seed);
    Rng mr = root.split(1);
    Eigen::MatrixXd means(kClasses, static_cast<Eigen::Index>(spec.dense_dim));
    for (int c = 0; c < kClasses; ++c) {
        for (Eigen::Index d = 0; d < means.cols(); ++d) means(c, d) = mr.normal();
        means.row(c) *= spec.dense_separation / means.row(c).norm();
    }
    EnsembleTaskData data;
    std::vector<int> ignored;
    draw_split(spec, means, spec.train_counts, root.split(2), data.x_train, data.y_train, ignored);
    draw_split(spec, means, spec.test_counts, root.split(3), data.x_test, data.y_test, data.subtype_test);
    return data;
}

EnsembleTaskResult run_ensemble_task(const EnsembleTaskSpec& spec, const EnsembleTaskLearners& learners,
                                     std::uint64_t seed) {
    const EnsembleTaskData data = make_ensemble_task(spec, seed);
    const LabelSet y_train = LabelSet::from_ids(data.y_train, kClasses);
    const Rng root = Rng(seed).split(4);

    PrototypeConfig pc = learners.prototype;
    pc.seed = root.split(0).next_u64();
    GbdtConfig lc = learners.leaf_wise;
    lc.seed = root.split(1).next_u64();
    GbdtConfig xc = learners.depth_wise;
    xc.seed = root.split(2).next_u64();

    IndexList all(data.y_train.size());
    std::iota(all.begin(), all.end(), Index{0});
    const auto names = y_train.class_names;
    const VoterSet voters(std::make_shared<PrototypeVoter>(fit_prototype_classifier(data.x_train, y_train, all, pc), names),
                          std::make_shared<GbdtVoter>("LGB", fit_gbdt(data.x_train, y_train, lc), names),
                          std::make_shared<GbdtVoter>("XGB", fit_gbdt(data.x_train, y_train, xc), names));
    const VoteResult vote = hard_vote(voters, data.x_test);

    EnsembleTaskResult r;
    r.seed = seed;
    const ErrorIndicatorTable table = build_error_table(data.y_test, vote.voter_predictions);
    r.minority_stats = error_stats(table, kMinority);
    r.minority_error = r.minority_stats.error_rate;
    r.ensemble_minority_error = r.minority_stats.ensemble_error;
    const double eps = *std::max_element(r.minority_error.begin(), r.minority_error.end());
    if (eps > 0.0 && eps < 0.5) {
        r.improvement_threshold = symmetric_improvement_threshold(eps);
        r.in_improvement_region = r.minority_stats.kappa() < r.improvement_threshold;
    }
    for (std::size_t m = 0; m < 3; ++m)
        r.balanced_accuracy[m] = balanced_accuracy(data.y_test, vote.voter_predictions[m], kClasses);
    r.ensemble_balanced_accuracy = balanced_accuracy(data.y_test, vote.ensemble, kClasses);

    std::array<std::array<long long, 4>, 4> wrong{};
    std::array<long long, 4> seen{};
    for (std::size_t i = 0; i < data.y_test.size(); ++i) {
        const int s = data.subtype_test[i];
        if (s < 0) continue;
        ++seen[static_cast<std::size_t>(s)];
        for (std::size_t m = 0; m < 3; ++m)
            if (vote.voter_predictions[m][i] != kMinority) ++wrong[m][static_cast<std::size_t>(s)];
        if (vote.ensemble[i] != kMinority) ++wrong[3][static_cast<std::size_t>(s)];
    }
    for (std::size_t m = 0; m < 4; ++m)
        for (std::size_t s = 0; s < 4; ++s)
            r.subtype_error[m][s] = seen[s] ? static_cast<double>(wrong[m][s]) / static_cast<double>(seen[s]) : 0.0;
    return r;
}

double sign_test_p_value(int wins, int n) {
    if (n < 1 || wins < 0 || wins > n) throw std::invalid_argument("sign test needs 0 <= wins <= n, n >= 1");
    double p = 0.0;
    for (int i = wins; i <= n; ++i)
        p += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
    return std::min(1.0, p);
}

BoundReport ensemble_benefit_experiment(const EnsembleTaskSpec& spec, const EnsembleTaskLearners& learners,
                                        int n_seeds, std::uint64_t seed, std::vector<EnsembleTaskResult>* runs) {
    if (n_seeds < 1) throw std::invalid_argument("need at least one seed");
    const Rng root(seed);
    std::vector<EnsembleTaskResult> results;
    results.reserve(static_cast<std::size_t>(n_seeds));
    int wins = 0;
    int in_region = 0;
    nlohmann::json per_run = nlohmann::json::array();
    for (int s = 0; s < n_seeds; ++s) {
        results.push_back(run_ensemble_task(spec, learners, root.split(static_cast<std::uint64_t>(s)).next_u64()));
        const EnsembleTaskResult& r = results.back();
        const double best_base = *std::min_element(r.minority_error.begin(), r.minority_error.end());
        if (r.ensemble_minority_error < best_base) ++wins;
        if (r.in_improvement_region) ++in_region;
        per_run.push_back({{"seed", r.seed},
                           {"minority_error", r.minority_error},
                           {"ensemble_minority_error", r.ensemble_minority_error},
                           {"kappa", r.minority_stats.kappa()},
                           {"threshold", r.improvement_threshold},
                           {"in_region", r.in_improvement_region}});
    }
    BoundReport rep;
    rep.name = "ensemble_minority_benefit";
    rep.kind = ReportKind::Bound;
    rep.trials = n_seeds;
    rep.empirical = sign_test_p_value(wins, n_seeds);
    rep.bound = 0.05;
    rep.holds = rep.empirical < rep.bound;
    rep.confidence_note = "one-sided sign test over seeds: ensemble minority error strictly below every base learner";
    rep.details = {{"wins", wins}, {"runs_in_improvement_region", in_region}, {"runs", per_run}};
    if (runs) *runs = std::move(results);
    return rep;
}

}  // namespace protovote
