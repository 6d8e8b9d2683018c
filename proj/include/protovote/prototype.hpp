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

// Prototype classifier.
//
// A support set holding exactly k samples of every class is pushed through a
// support-fitted feature map Phi that never leaves the ball of radius B. Class c is
// scored by <mu_c + r_c, Phi(x)> + b_c, where mu_c is the mean mapped support point of
// class c, r_c a residual with |r_c| <= rho and b_c a support-only bias (0 by
// default). Because nothing in the fit looks at how many training samples each class
// has beyond the k drawn, decisions do not depend on the class priors of the pool.

#pragma once

#include "protovote/data_pipeline.hpp"
#include "protovote/linalg.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace protovote {

enum class FeatureMapKind { RandomRelu, Identity };

/// Phi: random affine projection -> ReLU -> PCA fitted on the support -> scale -> clip
/// to the B-ball. The identity kind only clips, for inputs that already live in
/// feature space.
struct FeatureMap {
    FeatureMapKind kind = FeatureMapKind::RandomRelu;
    Index input_dim = 0;
    Eigen::MatrixXd projection;  // width x input_dim
    Eigen::VectorXd offsets;     // width
    PcaModel support_pca;
    double scale = 1.0;
    double norm_bound = 1.0;  // B
    std::uint64_t seed = 0;

    Index width() const noexcept { return static_cast<Index>(projection.rows()); }
    Index output_dim() const noexcept;
    /// Maps each row of `rows`; every output row has norm <= norm_bound.
    Eigen::MatrixXd map(const Eigen::MatrixXd& rows) const;
    Eigen::VectorXd map_one(const Eigen::VectorXd& x) const;
};

/// `width` = 0 selects 4 * p.
FeatureMap fit_feature_map(const Eigen::MatrixXd& support_rows, Index p, double norm_bound, std::uint64_t seed,
                           Index width = 0);
FeatureMap identity_feature_map(Index dim, double norm_bound);

/// Scales x onto the sphere of radius `radius` when it lies outside; exact in floating point.
Eigen::VectorXd clip_to_ball(Eigen::VectorXd x, double radius);

struct BalancedSupport {
    std::vector<IndexList> per_class;  // k row indices per class, ascending
    Index k = 0;
    std::vector<std::string> warnings;

    int n_classes() const noexcept { return static_cast<int>(per_class.size()); }
    IndexList all() const;
};

/// Uniform draw without replacement of k training rows per class. k is clamped to
/// the smallest class count (with a warning).
BalancedSupport build_balanced_support(const LabelSet& y, std::span<const Index> train_indices, Index k,
                                       std::uint64_t seed);

struct PrototypeModel {
    static constexpr int kVersion = 1;

    FeatureMap feature_map;
    Eigen::MatrixXd prototypes;  // C x p
    Eigen::MatrixXd residuals;   // C x p
    double residual_bound = 0.0;
    Eigen::VectorXd biases;  // C
    std::uint64_t residual_seed = 0;
    Index k = 0;

    int n_classes() const noexcept { return static_cast<int>(prototypes.rows()); }
    Eigen::MatrixXd weights() const { return prototypes + residuals; }
};

/// Prototypes are the class means of the mapped support rows of `data`; residuals are
/// uniform in the rho-ball (exactly zero when rho = 0); biases are zero.
PrototypeModel fit_prototypes(const FeatureMap& fm, const BalancedSupport& support, const Eigen::MatrixXd& data,
                              double residual_bound, std::uint64_t residual_seed);

Eigen::VectorXd decision_scores(const PrototypeModel& model, const Eigen::VectorXd& x);
Eigen::MatrixXd decision_scores(const PrototypeModel& model, const Eigen::MatrixXd& rows);
int predict(const PrototypeModel& model, const Eigen::VectorXd& x);
std::vector<int> predict(const PrototypeModel& model, const Eigen::MatrixXd& rows);
Eigen::VectorXd posterior(const PrototypeModel& model, const Eigen::VectorXd& x);
Eigen::MatrixXd posterior(const PrototypeModel& model, const Eigen::MatrixXd& rows);

/// Row-wise softmax at temperature 1.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores);

struct PrototypeConfig {
    Index k = 0;      // 0: smallest training class count, capped at 64
    Index p = 0;      // 0: min(|S| - 1, 64)
    Index width = 0;  // 0: 4 * p
    double norm_bound = 1.0;
    double residual_bound = 0.0;
    std::uint64_t seed = 0;
};

/// Support draw, feature-map fit and prototype fit in one call.
PrototypeModel fit_prototype_classifier(const Eigen::MatrixXd& x, const LabelSet& y, std::span<const Index> train_rows,
                                        const PrototypeConfig& cfg);

void to_json(nlohmann::json& j, const FeatureMap& fm);
void from_json(const nlohmann::json& j, FeatureMap& fm);
void to_json(nlohmann::json& j, const PrototypeModel& m);
void from_json(const nlohmann::json& j, PrototypeModel& m);

}  // namespace protovote
