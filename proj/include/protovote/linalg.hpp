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

#pragma once

#include "protovote/data_pipeline.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <span>
#include <string>
#include <vector>

namespace protovote {

/// Records which rows a transform was fitted on. A fitted transform may only score
/// rows outside that set when evaluating held-out data.
struct Provenance {
    std::string tag;
    IndexList rows;  // sorted ascending; empty = unknown (no guard possible)

    static Provenance of(std::string tag, IndexList rows);
    bool contains(Index row) const;
    /// Throws LeakageError if any of `eval_rows` was used for fitting.
    void require_disjoint(std::span<const Index> eval_rows) const;
};

struct Standardizer {
    static constexpr const char* kStdConvention = "sample";  // n - 1 denominator

    Eigen::VectorXd means;
    Eigen::VectorXd stds;  // constant columns hold 1
    IndexList constant_columns;
    Provenance provenance;

    Index dim() const noexcept { return static_cast<Index>(means.size()); }
    Eigen::MatrixXd transform(const Eigen::MatrixXd& rows) const;
};

Standardizer fit_standardizer(const Eigen::MatrixXd& train, Provenance provenance = {});

struct PcaModel {
    static constexpr int kVersion = 1;

    Eigen::VectorXd mean;
    Eigen::MatrixXd components;  // n_pcs x d, orthonormal rows
    Eigen::VectorXd explained_variance;
    Provenance provenance;

    Index dim() const noexcept { return static_cast<Index>(mean.size()); }
    Index n_components() const noexcept { return static_cast<Index>(components.rows()); }
};

/// Thin SVD of the centred training matrix. Each component's largest-magnitude loading
/// is made positive; components of equal variance are ordered by that loading's axis.
PcaModel fit_pca(const Eigen::MatrixXd& train_scaled, Index n_pcs, Provenance provenance = {});

/// (rows - mean) * components^T
Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& rows);

/// scores * components + mean
Eigen::MatrixXd pca_inverse_transform(const PcaModel& model, const Eigen::MatrixXd& scores);

/// Largest admissible component count for n training rows in d dimensions.
inline Index max_components(Index n_train, Index d) { return n_train == 0 ? 0 : std::min(n_train - 1, d); }

void to_json(nlohmann::json& j, const Provenance& p);
void from_json(const nlohmann::json& j, Provenance& p);
void to_json(nlohmann::json& j, const Standardizer& s);
void from_json(const nlohmann::json& j, Standardizer& s);
void to_json(nlohmann::json& j, const PcaModel& m);
void from_json(const nlohmann::json& j, PcaModel& m);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);

}  // namespace protovote
