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

// Per-element bodies shared by the serial and OpenMP kernels, so the two flavours
// differ only in how the outer loop is scheduled.

#pragma once

#include "protovote/gbdt.hpp"
#include "protovote/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace protovote::kernels::detail {

inline void column_moment(const Eigen::MatrixXd& x, Eigen::Index j, double& mean, double& variance) {
    const Eigen::Index n = x.rows();
    if (n == 0) {
        mean = 0.0;
        variance = 0.0;
        return;
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) sum += x(i, j);
    mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = x(i, j) - mean;
        ss += d * d;
    }
    variance = n > 1 ? ss / static_cast<double>(n - 1) : 0.0;
}

inline SplitCandidate best_split_on_feature(const Eigen::MatrixXd& x, int feature, const std::vector<std::uint32_t>& rows,
                                            std::span<const double> grad, std::span<const double> hess,
                                            const SplitParams& params) {
    SplitCandidate best;
    if (rows.size() < 2) return best;
    double g_total = 0.0;
    double h_total = 0.0;
    for (std::uint32_t r : rows) {
        g_total += grad[r];
        h_total += hess[r];
    }
    double g_left = 0.0;
    double h_left = 0.0;
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        g_left += grad[rows[i]];
        h_left += hess[rows[i]];
        const double v = x(rows[i], feature);
        const double v_next = x(rows[i + 1], feature);
        if (!(v < v_next)) continue;  // no threshold between equal values
        const double h_right = h_total - h_left;
        if (h_left < params.min_child_hessian || h_right < params.min_child_hessian) continue;
        const double g_right = g_total - g_left;
        const double gain =
            split_gain(g_left, h_left, g_right, h_right, params.lambda, params.complexity_gamma);
        if (!best.found || gain > best.gain) {
            double threshold = v + (v_next - v) * 0.5;
            if (!(threshold < v_next)) threshold = v;
            best.found = true;
            best.feature = feature;
            best.threshold = threshold;
            best.gain = gain;
            best.grad_left = g_left;
            best.hess_left = h_left;
            best.grad_right = g_right;
            best.hess_right = h_right;
        }
    }
    return best;
}

// Candidates arrive in ascending feature order, so a strict comparison keeps the lowest feature on ties.
inline void keep_better(SplitCandidate& best, const SplitCandidate& cand) {
    if (cand.found && (!best.found || cand.gain > best.gain)) best = cand;
}

inline int argmax_row(const Eigen::MatrixXd& scores, Eigen::Index i) {
    int best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c)
        if (scores(i, c) > scores(i, best)) best = static_cast<int>(c);
    return best;
}

inline void clip_row(Eigen::MatrixXd& rows, Eigen::Index i, double radius) {
    double norm = rows.row(i).norm();
    if (norm <= radius) return;
    rows.row(i) *= radius / norm;
    norm = rows.row(i).norm();
    while (norm > radius) {
        rows.row(i) *= std::nextafter(1.0, 0.0);
        norm = rows.row(i).norm();
    }
}

inline void check_vote_shapes(std::span<const int> a, std::span<const int> b, std::span<const int> c,
                              const Eigen::MatrixXd& posterior) {
    if (a.size() != b.size() || a.size() != c.size() || static_cast<Eigen::Index>(a.size()) != posterior.rows())
        throw std::invalid_argument("vote inputs differ in length");
}

inline int vote_one(int a, int b, int c, const Eigen::MatrixXd& posterior, Eigen::Index row) {
    if (a == b || a == c) return a;
    if (b == c) return b;
    int best = std::min({a, b, c});
    for (int cls : {a, b, c}) {
        const double p = posterior(row, cls);
        const double q = posterior(row, best);
        if (p > q || (p == q && cls < best)) best = cls;
    }
    return best;
}

}  // namespace protovote::kernels::detail
