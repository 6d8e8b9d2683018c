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

// Hot loops, each in two flavours: a plain serial reference (kernels_serial.cpp)
// and an OpenMP version (kernels_omp.cpp). The parallel versions reduce in a fixed
// order and must return bit-identical results to the serial ones for any thread
// count; tests/test_kernels.cpp holds them to that.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace protovote::kernels {

/// Number of threads the parallel kernels may use (PROTOVOTE_THREADS, else the OpenMP default).
int max_threads();
void set_max_threads(int n);

struct ColumnMoments {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;  // n - 1 denominator; 0 when n < 2
};

ColumnMoments column_moments_serial(const Eigen::MatrixXd& x);
ColumnMoments column_moments_parallel(const Eigen::MatrixXd& x);

struct SplitParams {
    double lambda = 1.0;
    double complexity_gamma = 0.0;
    double min_child_hessian = 1e-3;
};

struct SplitCandidate {
    bool found = false;  // at least one admissible threshold existed
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
    double grad_left = 0.0;
    double hess_left = 0.0;
    double grad_right = 0.0;
    double hess_right = 0.0;
};

/// Exact greedy search. `sorted_rows[f]` lists the node's rows ordered by x(row, f)
/// ascending (ties by row id). Rows with x <= threshold go left; the threshold is the
/// midpoint of two consecutive distinct values. Among equal gains the lowest feature,
/// then the lowest threshold, wins.
SplitCandidate best_split_serial(const Eigen::MatrixXd& x, const std::vector<std::vector<std::uint32_t>>& sorted_rows,
                                 std::span<const double> grad, std::span<const double> hess, const SplitParams& params);
SplitCandidate best_split_parallel(const Eigen::MatrixXd& x, const std::vector<std::vector<std::uint32_t>>& sorted_rows,
                                   std::span<const double> grad, std::span<const double> hess, const SplitParams& params);

/// Row-wise argmax; ties go to the lowest column.
std::vector<int> argmax_rows_serial(const Eigen::MatrixXd& scores);
std::vector<int> argmax_rows_parallel(const Eigen::MatrixXd& scores);

/// Rescales every row whose Euclidean norm exceeds `radius` onto the sphere of that
/// radius; the result satisfies norm <= radius in floating point, not just approximately.
void clip_rows_to_ball_serial(Eigen::MatrixXd& rows, double radius);
void clip_rows_to_ball_parallel(Eigen::MatrixXd& rows, double radius);

/// Three-voter hard vote per row. `mean_posterior` is n x C; only consulted when all
/// three predictions differ, in which case the voted class of largest mean posterior
/// wins (lowest class id on an exact tie).
std::vector<int> hard_vote_serial(std::span<const int> first, std::span<const int> second,
                                  std::span<const int> third, const Eigen::MatrixXd& mean_posterior);
std::vector<int> hard_vote_parallel(std::span<const int> first, std::span<const int> second,
                                    std::span<const int> third, const Eigen::MatrixXd& mean_posterior);

}  // namespace protovote::kernels
