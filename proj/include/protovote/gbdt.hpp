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

// Gradient-boosted regression trees under the second-order regularised objective
//
//   sum_j [ G_j w_j + 1/2 (H_j + lambda) w_j^2 ] + complexity_gamma * T
//
// with G_j, H_j the gradient and hessian sums routed to leaf j. Binary problems use
// the logistic loss (one tree per round), multiclass problems softmax cross-entropy
// (one tree per class per round). Trees grow either level by level up to max_depth
// or best-leaf-first up to max_leaves.

#pragma once

#include "protovote/data_pipeline.hpp"
#include "protovote/error.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <vector>

namespace protovote {

/// Loss reduction of splitting a leaf (G_L + G_R, H_L + H_R) into two, minus the
/// per-leaf complexity penalty.
inline double split_gain(double grad_left, double hess_left, double grad_right, double hess_right, double lambda,
                         double complexity_gamma) {
    const double g = grad_left + grad_right;
    const double h = hess_left + hess_right;
    return 0.5 * (grad_left * grad_left / (hess_left + lambda) + grad_right * grad_right / (hess_right + lambda) -
                  g * g / (h + lambda)) -
           complexity_gamma;
}

/// Newton leaf value -G / (H + lambda).
inline double leaf_weight(double grad, double hess, double lambda) {
    const double denom = hess + lambda;
    if (denom == 0.0) throw DegenerateError("leaf with H + lambda = 0");
    return -grad / denom;
}

enum class Growth { DepthWise, LeafWise };

struct GbdtConfig {
    int n_rounds = 200;
    double learning_rate = 0.1;
    double lambda_l2 = 1.0;
    double complexity_gamma = 0.0;
    Growth growth = Growth::DepthWise;
    int max_depth = 6;     // depth-wise only
    int max_leaves = 31;   // leaf-wise only
    double min_child_hessian = 1e-3;
    std::uint64_t seed = 0;

    void validate() const;
    static GbdtConfig depth_wise(int max_depth = 6);
    static GbdtConfig leaf_wise(int max_leaves = 31);
};

struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double leaf_value = 0.0;  // unshrunk Newton weight
    double sum_grad = 0.0;
    double sum_hess = 0.0;

    bool is_leaf() const noexcept { return left < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    int leaf_of(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
    double value(const Eigen::Ref<const Eigen::RowVectorXd>& row) const { return nodes[static_cast<std::size_t>(leaf_of(row))].leaf_value; }
    int n_leaves() const;
    int depth() const;
};

struct GbdtModel {
    static constexpr int kVersion = 1;

    int n_classes = 0;
    Index n_features = 0;
    Eigen::VectorXd base_score;                     // one entry per output
    std::vector<std::vector<RegressionTree>> trees;  // [output][round]
    GbdtConfig config;

    int n_outputs() const noexcept { return n_classes == 2 ? 1 : n_classes; }
};

/// Optional per-round record of the fit, for auditing leaf values and the loss path.
struct GbdtTrace {
    std::vector<double> train_log_loss;    // [0] before the first round, then after each round
    std::vector<Eigen::MatrixXd> gradients;  // per round, n x outputs
    std::vector<Eigen::MatrixXd> hessians;
};

GbdtModel fit_gbdt(const Eigen::MatrixXd& x, std::span<const int> labels, int n_classes, const GbdtConfig& cfg,
                   GbdtTrace* trace = nullptr);
GbdtModel fit_gbdt(const Eigen::MatrixXd& x, const LabelSet& y, const GbdtConfig& cfg, GbdtTrace* trace = nullptr);

/// Raw additive scores, n x outputs (base score plus shrunken leaf values).
Eigen::MatrixXd predict_margin(const GbdtModel& model, const Eigen::MatrixXd& x);
/// n x C probabilities: sigmoid expanded to two columns, or softmax.
Eigen::MatrixXd predict_proba(const GbdtModel& model, const Eigen::MatrixXd& x);
std::vector<int> predict(const GbdtModel& model, const Eigen::MatrixXd& x);

/// Mean negative log-likelihood of `labels` under the given margins.
double log_loss_from_margin(const Eigen::MatrixXd& margin, std::span<const int> labels, int n_classes);

const char* growth_name(Growth g);

void to_json(nlohmann::json& j, const GbdtConfig& cfg);
void from_json(const nlohmann::json& j, GbdtConfig& cfg);
void to_json(nlohmann::json& j, const GbdtModel& m);
void from_json(const nlohmann::json& j, GbdtModel& m);

}  // namespace protovote
