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

namespace protovote::kernels {

ColumnMoments column_moments_serial(const Eigen::MatrixXd& x) {
    ColumnMoments m;
    m.mean.resize(x.cols());
    m.variance.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) detail::column_moment(x, j, m.mean[j], m.variance[j]);
    return m;
}

SplitCandidate best_split_serial(const Eigen::MatrixXd& x, const std::vector<std::vector<std::uint32_t>>& sorted_rows,
                                 std::span<const double> grad, std::span<const double> hess, const SplitParams& params) {
    SplitCandidate best;
    for (std::size_t f = 0; f < sorted_rows.size(); ++f) {
        const SplitCandidate cand = detail::best_split_on_feature(x, static_cast<int>(f), sorted_rows[f], grad, hess, params);
        detail::keep_better(best, cand);
    }
    return best;
}

std::vector<int> argmax_rows_serial(const Eigen::MatrixXd& scores) {
    std::vector<int> out(static_cast<std::size_t>(scores.rows()));
    for (Eigen::Index i = 0; i < scores.rows(); ++i) out[static_cast<std::size_t>(i)] = detail::argmax_row(scores, i);
    return out;
}

void clip_rows_to_ball_serial(Eigen::MatrixXd& rows, double radius) {
    for (Eigen::Index i = 0; i < rows.rows(); ++i) detail::clip_row(rows, i, radius);
}

std::vector<int> hard_vote_serial(std::span<const int> first, std::span<const int> second, std::span<const int> third,
                                  const Eigen::MatrixXd& mean_posterior) {
    detail::check_vote_shapes(first, second, third, mean_posterior);
    std::vector<int> out(first.size());
    for (std::size_t i = 0; i < first.size(); ++i)
        out[i] = detail::vote_one(first[i], second[i], third[i], mean_posterior, static_cast<Eigen::Index>(i));
    return out;
}

}  // namespace protovote::kernels
