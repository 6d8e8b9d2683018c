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

#include "kernels_detail.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace protovote::kernels {

namespace {

int initial_threads() {
    if (const char* env = std::getenv("PROTOVOTE_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return n;
        } catch (const std::exception&) {
        }
    }
    return omp_get_max_threads();
}

int& thread_limit() {
    static int limit = initial_threads();
    return limit;
}

}  // namespace

int max_threads() { return thread_limit(); }

void set_max_threads(int n) { thread_limit() = n > 0 ? n : omp_get_max_threads(); }

ColumnMoments column_moments_parallel(const Eigen::MatrixXd& x) {
    ColumnMoments m;
    m.mean.resize(x.cols());
    m.variance.resize(x.cols());
    const Eigen::Index d = x.cols();
#pragma omp parallel for schedule(static) num_threads(max_threads())
    for (Eigen::Index j = 0; j < d; ++j) detail::column_moment(x, j, m.mean[j], m.variance[j]);
    return m;
}

SplitCandidate best_split_parallel(const Eigen::MatrixXd& x, const std::vector<std::vector<std::uint32_t>>& sorted_rows,
                                   std::span<const double> grad, std::span<const double> hess,
                                   const SplitParams& params) {
    const auto n_features = static_cast<long>(sorted_rows.size());
    std::vector<SplitCandidate> per_feature(sorted_rows.size());
#pragma omp parallel for schedule(dynamic, 4) num_threads(max_threads())
    for (long f = 0; f < n_features; ++f)
        per_feature[static_cast<std::size_t>(f)] =
            detail::best_split_on_feature(x, static_cast<int>(f), sorted_rows[static_cast<std::size_t>(f)], grad, hess, params);
    SplitCandidate best;
    for (const auto& cand : per_feature) detail::keep_better(best, cand);
    return best;
}

std::vector<int> argmax_rows_parallel(const Eigen::MatrixXd& scores) {
    std::vector<int> out(static_cast<std::size_t>(scores.rows()));
    const Eigen::Index n = scores.rows();
#pragma omp parallel for schedule(static) num_threads(max_threads())
    for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = detail::argmax_row(scores, i);
    return out;
}

void clip_rows_to_ball_parallel(Eigen::MatrixXd& rows, double radius) {
    const Eigen::Index n = rows.rows();
#pragma omp parallel for schedule(static) num_threads(max_threads())
    for (Eigen::Index i = 0; i < n; ++i) detail::clip_row(rows, i, radius);
}

std::vector<int> hard_vote_parallel(std::span<const int> first, std::span<const int> second, std::span<const int> third,
                                    const Eigen::MatrixXd& mean_posterior) {
    detail::check_vote_shapes(first, second, third, mean_posterior);
    std::vector<int> out(first.size());
    const auto n = static_cast<long>(first.size());
#pragma omp parallel for schedule(static) num_threads(max_threads())
    for (long i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        out[k] = detail::vote_one(first[k], second[k], third[k], mean_posterior, i);
    }
    return out;
}

}  // namespace protovote::kernels
