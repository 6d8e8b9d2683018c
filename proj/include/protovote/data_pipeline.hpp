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

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace protovote {

using Index = std::size_t;
using IndexList = std::vector<Index>;

/// Samples x features, with ids on both axes.
struct ExpressionMatrix {
    std::vector<std::string> sample_ids;
    std::vector<std::string> feature_names;
    Eigen::MatrixXd values;

    Index n_samples() const noexcept { return static_cast<Index>(values.rows()); }
    Index n_features() const noexcept { return static_cast<Index>(values.cols()); }

    /// Throws std::invalid_argument when shape, uniqueness or finiteness is violated.
    void validate() const;

    ExpressionMatrix select_rows(std::span<const Index> rows) const;
    ExpressionMatrix select_columns(std::span<const Index> cols) const;
};

/// Class labels aligned with sample ids. Class ids are contiguous from 0.
struct LabelSet {
    std::vector<std::string> sample_ids;
    std::vector<int> labels;
    std::vector<std::string> class_names;  // class id -> name

    Index size() const noexcept { return labels.size(); }
    int n_classes() const noexcept { return static_cast<int>(class_names.size()); }
    std::vector<Index> class_counts() const;
    /// Throws std::out_of_range for an unknown name.
    int class_id(const std::string& name) const;

    LabelSet select(std::span<const Index> rows) const;
    void validate() const;

    /// Builds a label set from raw names; ids follow numeric order when every
    /// name is an integer and lexicographic order otherwise.
    static LabelSet from_names(std::vector<std::string> sample_ids,
                               const std::vector<std::string>& names);
    /// Builds a label set from integer ids 0..n_classes-1 with names "0", "1", ...
    static LabelSet from_ids(std::vector<int> ids, int n_classes = -1);
};

enum class MissingPolicy { DropFeatures, DropSamples };

struct LoadReport {
    Index unlabeled_samples_dropped = 0;
    Index features_dropped = 0;
    Index samples_dropped = 0;  // only under MissingPolicy::DropSamples
    char delimiter = ',';
};

struct LoadedData {
    ExpressionMatrix matrix;
    LabelSet labels;
    LoadReport report;
};

/// Reads a CSV/TSV expression matrix (first column sample id, header row of
/// feature names) and a labels file with columns sample_id,label. Empty cells,
/// NA/NaN and non-finite values count as missing.
LoadedData load_matrix(const std::filesystem::path& matrix_path,
                       const std::filesystem::path& label_path,
                       MissingPolicy policy = MissingPolicy::DropFeatures);

/// Labels file on its own; samples keep file order.
LabelSet read_labels(const std::filesystem::path& label_path);

void write_matrix_csv(const std::filesystem::path& path, const ExpressionMatrix& m,
                      const std::string& comment = {});
void write_labels_csv(const std::filesystem::path& path, const LabelSet& y,
                      const std::string& comment = {});

/// Per-row counts per million: 1e6 * v / row_sum.
Eigen::MatrixXd counts_per_million(const ExpressionMatrix& m);

/// v -> log2(1 + 1e6 * v / row_sum).
ExpressionMatrix logcpm(const ExpressionMatrix& m);

/// Keeps features whose CPM exceeds cpm_threshold in at least
/// ceil(min_fraction * n_samples) samples. Input must be raw counts.
ExpressionMatrix filter_low_expression(const ExpressionMatrix& m, double cpm_threshold = 1.0,
                                       double min_fraction = 0.10);

/// Keeps the n_keep features of largest sample variance, ordered by variance
/// descending with ties resolved by original column order.
ExpressionMatrix select_top_variance(const ExpressionMatrix& m, Index n_keep);

struct SplitPlan {
    IndexList train_indices;
    IndexList test_indices;
    std::uint64_t seed = 0;
    std::vector<int> fold_assignments;  // empty for a holdout plan
    std::vector<std::string> warnings;

    int n_folds() const noexcept;
    /// Holdout view of fold f: train = every other fold, test = fold f.
    SplitPlan fold(int f) const;
};

SplitPlan stratified_split(const LabelSet& y, double test_fraction, std::uint64_t seed);
SplitPlan stratified_kfold(const LabelSet& y, int k, std::uint64_t seed);

void to_json(nlohmann::json& j, const SplitPlan& plan);
void from_json(const nlohmann::json& j, SplitPlan& plan);

}  // namespace protovote
