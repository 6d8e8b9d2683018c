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

#include "protovote/linalg.hpp"

#include "protovote/error.hpp"
#include "protovote/kernels.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace protovote {

Provenance Provenance::of(std::string tag, IndexList rows) {
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    return Provenance{std::move(tag), std::move(rows)};
}

bool Provenance::contains(Index row) const { return std::binary_search(rows.begin(), rows.end(), row); }

void Provenance::require_disjoint(std::span<const Index> eval_rows) const {
    for (Index r : eval_rows)
        if (contains(r))
            throw LeakageError("row " + std::to_string(r) + " was used to fit transform '" + tag +
                               "' and cannot be scored as held-out data");
}

Eigen::MatrixXd Standardizer::transform(const Eigen::MatrixXd& rows) const {
    if (rows.cols() != means.size())
        throw std::invalid_argument("standardizer expects " + std::to_string(means.size()) + " columns, got " +
                                    std::to_string(rows.cols()));
    return (rows.rowwise() - means.transpose()).array().rowwise() / stds.transpose().array();
}

Standardizer fit_standardizer(const Eigen::MatrixXd& train, Provenance provenance) {
    if (train.rows() < 2) throw std::invalid_argument("standardizer needs at least 2 training rows");
    const kernels::ColumnMoments moments = kernels::column_moments_parallel(train);
    Standardizer s;
    s.means = moments.mean;
    s.stds = moments.variance.cwiseSqrt();
    for (Eigen::Index j = 0; j < s.stds.size(); ++j) {
        // Relative threshold: a column of repeated 0.1 can leave ~1e-17 of spurious spread.
        if (s.stds[j] <= 1e-12 * std::max(1.0, std::abs(s.means[j]))) {
            s.stds[j] = 1.0;
            s.constant_columns.push_back(static_cast<Index>(j));
        }
    }
    s.provenance = std::move(provenance);
    return s;
}

PcaModel fit_pca(const Eigen::MatrixXd& train_scaled, Index n_pcs, Provenance provenance) {
    const auto n = static_cast<Index>(train_scaled.rows());
    const auto d = static_cast<Index>(train_scaled.cols());
    const Index bound = max_components(n, d);
    if (n_pcs == 0 || n_pcs > bound)
        throw std::invalid_argument("n_pcs = " + std::to_string(n_pcs) + " must lie in [1, min(n_train - 1, d)] = [1, " +
                                    std::to_string(bound) + "]");
    if (!train_scaled.allFinite()) throw DomainError("PCA input holds non-finite values");

    PcaModel model;
    model.mean = train_scaled.colwise().mean().transpose();
    const Eigen::MatrixXd centered = train_scaled.rowwise() - model.mean.transpose();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const Eigen::MatrixXd& v = svd.matrixV();

    const auto k = static_cast<Index>(sv.size());
    std::vector<Index> order(k);
    std::iota(order.begin(), order.end(), Index{0});
    std::vector<double> variance(k);
    std::vector<Index> dominant_axis(k);
    for (Index c = 0; c < k; ++c) {
        variance[c] = sv[static_cast<Eigen::Index>(c)] * sv[static_cast<Eigen::Index>(c)] / static_cast<double>(n - 1);
        Eigen::Index axis = 0;
        v.col(static_cast<Eigen::Index>(c)).cwiseAbs().maxCoeff(&axis);
        dominant_axis[c] = static_cast<Index>(axis);
    }
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return variance[a] > variance[b]; });
    // Within runs of numerically equal variance, order by dominant axis.
    for (Index start = 0; start < k;) {
        Index end = start + 1;
        while (end < k &&
               std::abs(variance[order[end]] - variance[order[start]]) <= 1e-12 * std::max(1.0, variance[order[start]]))
            ++end;
        std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end),
                         [&](Index a, Index b) { return dominant_axis[a] < dominant_axis[b]; });
        start = end;
    }

    model.components.resize(static_cast<Eigen::Index>(n_pcs), static_cast<Eigen::Index>(d));
    model.explained_variance.resize(static_cast<Eigen::Index>(n_pcs));
    for (Index c = 0; c < n_pcs; ++c) {
        Eigen::VectorXd comp = v.col(static_cast<Eigen::Index>(order[c]));
        if (comp[static_cast<Eigen::Index>(dominant_axis[order[c]])] < 0.0) comp = -comp;
        model.components.row(static_cast<Eigen::Index>(c)) = comp.transpose();
        model.explained_variance[static_cast<Eigen::Index>(c)] = variance[order[c]];
    }
    model.provenance = std::move(provenance);
    return model;
}

Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& rows) {
    if (rows.cols() != model.mean.size())
        throw std::invalid_argument("PCA model expects " + std::to_string(model.mean.size()) + " columns, got " +
                                    std::to_string(rows.cols()));
    return (rows.rowwise() - model.mean.transpose()) * model.components.transpose();
}

Eigen::MatrixXd pca_inverse_transform(const PcaModel& model, const Eigen::MatrixXd& scores) {
    if (scores.cols() != model.components.rows())
        throw std::invalid_argument("score matrix has " + std::to_string(scores.cols()) + " columns, model has " +
                                    std::to_string(model.components.rows()) + " components");
    return (scores * model.components).rowwise() + model.mean.transpose();
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j.at(0).size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != cols) throw std::invalid_argument("ragged matrix in JSON");
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void to_json(nlohmann::json& j, const Provenance& p) { j = {{"tag", p.tag}, {"rows", p.rows}}; }

void from_json(const nlohmann::json& j, Provenance& p) {
    p = Provenance::of(j.value("tag", std::string{}), j.value("rows", IndexList{}));
}

void to_json(nlohmann::json& j, const Standardizer& s) {
    j = {{"version", 1},
         {"std_convention", Standardizer::kStdConvention},
         {"means", vector_to_json(s.means)},
         {"stds", vector_to_json(s.stds)},
         {"constant_columns", s.constant_columns},
         {"provenance", s.provenance}};
}

void from_json(const nlohmann::json& j, Standardizer& s) {
    if (j.at("std_convention").get<std::string>() != Standardizer::kStdConvention)
        throw std::invalid_argument("unsupported std convention");
    s.means = vector_from_json(j.at("means"));
    s.stds = vector_from_json(j.at("stds"));
    s.constant_columns = j.value("constant_columns", IndexList{});
    s.provenance = j.value("provenance", Provenance{});
}

void to_json(nlohmann::json& j, const PcaModel& m) {
    j = {{"version", PcaModel::kVersion},
         {"mean", vector_to_json(m.mean)},
         {"components", matrix_to_json(m.components)},
         {"explained_variance", vector_to_json(m.explained_variance)},
         {"provenance", m.provenance}};
}

void from_json(const nlohmann::json& j, PcaModel& m) {
    const int version = j.at("version").get<int>();
    if (version != PcaModel::kVersion) throw std::invalid_argument("unsupported PcaModel version " + std::to_string(version));
    m.mean = vector_from_json(j.at("mean"));
    m.components = matrix_from_json(j.at("components"));
    m.explained_variance = vector_from_json(j.at("explained_variance"));
    m.provenance = j.value("provenance", Provenance{});
    if (m.components.rows() > 0 && m.components.cols() != m.mean.size())
        throw std::invalid_argument("PcaModel components do not match mean dimension");
}

}  // namespace protovote
