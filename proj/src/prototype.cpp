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

#include "protovote/prototype.hpp"

#include "protovote/error.hpp"
#include "protovote/kernels.hpp"
#include "protovote/rng.hpp"

#include <algorithm>
#include <cmath>

namespace protovote {

namespace {

constexpr Index kMaxAutoK = 64;
constexpr Index kMaxAutoP = 64;

void require_finite(const Eigen::MatrixXd& rows) {
    if (!rows.allFinite()) throw DomainError("prototype classifier input holds non-finite values");
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& data, std::span<const Index> rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), data.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= static_cast<Index>(data.rows())) throw std::out_of_range("support row index out of range");
        out.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

const char* kind_name(FeatureMapKind kind) { return kind == FeatureMapKind::Identity ? "identity" : "random_relu"; }

}  // namespace

Index FeatureMap::output_dim() const noexcept {
    return kind == FeatureMapKind::Identity ? input_dim : support_pca.n_components();
}

Eigen::MatrixXd FeatureMap::map(const Eigen::MatrixXd& rows) const {
    if (static_cast<Index>(rows.cols()) != input_dim)
        throw std::invalid_argument("feature map expects " + std::to_string(input_dim) + " inputs, got " +
                                    std::to_string(rows.cols()));
    Eigen::MatrixXd out;
    if (kind == FeatureMapKind::Identity) {
        out = rows;
    } else {
        Eigen::MatrixXd hidden = (rows * projection.transpose()).rowwise() + offsets.transpose();
        hidden = hidden.cwiseMax(0.0);
        out = pca_transform(support_pca, hidden) * scale;
    }
    kernels::clip_rows_to_ball_parallel(out, norm_bound);
    return out;
}

Eigen::VectorXd FeatureMap::map_one(const Eigen::VectorXd& x) const {
    return map(x.transpose()).row(0).transpose();
}

Eigen::VectorXd clip_to_ball(Eigen::VectorXd x, double radius) {
    Eigen::MatrixXd row = x.transpose();
    kernels::clip_rows_to_ball_serial(row, radius);
    return row.row(0).transpose();
}

FeatureMap fit_feature_map(const Eigen::MatrixXd& support_rows, Index p, double norm_bound, std::uint64_t seed,
                           Index width) {
    if (!(norm_bound > 0.0)) throw std::invalid_argument("norm bound B must be positive");
    if (support_rows.rows() < 2) throw std::invalid_argument("feature map needs at least 2 support rows");
    require_finite(support_rows);
    if (width == 0) width = 4 * p;
    const Index bound = std::min(static_cast<Index>(support_rows.rows()) - 1, width);
    if (p == 0 || p > bound)
        throw std::invalid_argument("p = " + std::to_string(p) + " must lie in [1, min(|S| - 1, width)] = [1, " +
                                    std::to_string(bound) + "]");

    FeatureMap fm;
    fm.kind = FeatureMapKind::RandomRelu;
    fm.input_dim = static_cast<Index>(support_rows.cols());
    fm.norm_bound = norm_bound;
    fm.seed = seed;

    // Projection scaled by the support's RMS row norm so pre-activations are O(1).
    double rms = std::sqrt(support_rows.rowwise().squaredNorm().mean());
    if (!(rms > 0.0)) rms = 1.0;
    Rng rng(seed);
    fm.projection.resize(static_cast<Eigen::Index>(width), support_rows.cols());
    for (Eigen::Index i = 0; i < fm.projection.rows(); ++i)
        for (Eigen::Index j = 0; j < fm.projection.cols(); ++j) fm.projection(i, j) = rng.normal() / rms;
    fm.offsets.resize(static_cast<Eigen::Index>(width));
    for (Eigen::Index i = 0; i < fm.offsets.size(); ++i) fm.offsets[i] = rng.normal();

    Eigen::MatrixXd hidden = (support_rows * fm.projection.transpose()).rowwise() + fm.offsets.transpose();
    hidden = hidden.cwiseMax(0.0);
    fm.support_pca = fit_pca(hidden, p, Provenance{"support", {}});
    const Eigen::MatrixXd scores = pca_transform(fm.support_pca, hidden);
    const double max_norm = scores.rowwise().norm().maxCoeff();
    fm.scale = max_norm > 0.0 ? norm_bound / max_norm : 1.0;
    return fm;
}

FeatureMap identity_feature_map(Index dim, double norm_bound) {
    if (!(norm_bound > 0.0)) throw std::invalid_argument("norm bound B must be positive");
    FeatureMap fm;
    fm.kind = FeatureMapKind::Identity;
    fm.input_dim = dim;
    fm.norm_bound = norm_bound;
    return fm;
}

IndexList BalancedSupport::all() const {
    IndexList out;
    for (const auto& c : per_class) out.insert(out.end(), c.begin(), c.end());
    return out;
}

BalancedSupport build_balanced_support(const LabelSet& y, std::span<const Index> train_indices, Index k,
                                       std::uint64_t seed) {
    if (k == 0) throw std::invalid_argument("support size k must be positive");
    std::vector<IndexList> members(static_cast<std::size_t>(y.n_classes()));
    for (Index i : train_indices) members.at(static_cast<std::size_t>(y.labels.at(i))).push_back(i);
    Index smallest = k;
    for (std::size_t c = 0; c < members.size(); ++c) {
        if (members[c].empty()) throw MissingClassError("class '" + y.class_names[c] + "' is absent from the training rows");
        smallest = std::min(smallest, static_cast<Index>(members[c].size()));
    }
    BalancedSupport support;
    support.k = smallest;
    if (smallest < k)
        support.warnings.push_back("support size clamped from k = " + std::to_string(k) + " to " +
                                   std::to_string(smallest) + " (smallest class)");
    const Rng root(seed);
    for (std::size_t c = 0; c < members.size(); ++c) {
        auto& idx = members[c];
        std::sort(idx.begin(), idx.end());
        Rng rng = root.split(c);
        rng.shuffle(std::span<Index>(idx));
        idx.resize(support.k);
        std::sort(idx.begin(), idx.end());
        support.per_class.push_back(std::move(idx));
    }
    return support;
}

PrototypeModel fit_prototypes(const FeatureMap& fm, const BalancedSupport& support, const Eigen::MatrixXd& data,
                              double residual_bound, std::uint64_t residual_seed) {
    if (!(residual_bound >= 0.0)) throw std::invalid_argument("residual bound rho must be non-negative");
    if (support.per_class.empty()) throw MissingClassError("support holds no classes");
    for (std::size_t c = 0; c < support.per_class.size(); ++c) {
        if (support.per_class[c].empty()) throw MissingClassError("support class " + std::to_string(c) + " is empty");
        if (support.per_class[c].size() != support.k)
            throw std::invalid_argument("support class " + std::to_string(c) + " holds " +
                                        std::to_string(support.per_class[c].size()) + " rows, expected k = " +
                                        std::to_string(support.k));
    }
    const auto n_classes = static_cast<Eigen::Index>(support.per_class.size());
    const auto p = static_cast<Eigen::Index>(fm.output_dim());

    PrototypeModel model;
    model.feature_map = fm;
    model.residual_bound = residual_bound;
    model.residual_seed = residual_seed;
    model.k = support.k;
    model.prototypes.resize(n_classes, p);
    model.residuals = Eigen::MatrixXd::Zero(n_classes, p);
    model.biases = Eigen::VectorXd::Zero(n_classes);

    const Rng root(residual_seed);
    for (Eigen::Index c = 0; c < n_classes; ++c) {
        const Eigen::MatrixXd rows = gather_rows(data, support.per_class[static_cast<std::size_t>(c)]);
        require_finite(rows);
        const Eigen::MatrixXd mapped = fm.map(rows);
        model.prototypes.row(c) = mapped.colwise().sum() / static_cast<double>(mapped.rows());
        if (residual_bound > 0.0) {
            Rng rng = root.split(static_cast<std::uint64_t>(c));
            Eigen::VectorXd dir(p);
            for (Eigen::Index j = 0; j < p; ++j) dir[j] = rng.normal();
            const double norm = dir.norm();
            if (norm > 0.0) {
                const double radius = residual_bound * std::pow(rng.uniform(), 1.0 / static_cast<double>(p));
                model.residuals.row(c) = clip_to_ball(dir * (radius / norm), residual_bound).transpose();
            }
        }
    }
    return model;
}

Eigen::MatrixXd decision_scores(const PrototypeModel& model, const Eigen::MatrixXd& rows) {
    require_finite(rows);
    const Eigen::MatrixXd phi = model.feature_map.map(rows);
    return (phi * model.weights().transpose()).rowwise() + model.biases.transpose();
}

Eigen::VectorXd decision_scores(const PrototypeModel& model, const Eigen::VectorXd& x) {
    return decision_scores(model, Eigen::MatrixXd(x.transpose())).row(0).transpose();
}

std::vector<int> predict(const PrototypeModel& model, const Eigen::MatrixXd& rows) {
    return kernels::argmax_rows_parallel(decision_scores(model, rows));
}

int predict(const PrototypeModel& model, const Eigen::VectorXd& x) {
    return predict(model, Eigen::MatrixXd(x.transpose())).front();
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores) {
    Eigen::MatrixXd out(scores.rows(), scores.cols());
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        const double m = scores.row(i).maxCoeff();
        out.row(i) = (scores.row(i).array() - m).exp();
        out.row(i) /= out.row(i).sum();
    }
    return out;
}

Eigen::MatrixXd posterior(const PrototypeModel& model, const Eigen::MatrixXd& rows) {
    return softmax_rows(decision_scores(model, rows));
}

Eigen::VectorXd posterior(const PrototypeModel& model, const Eigen::VectorXd& x) {
    return posterior(model, Eigen::MatrixXd(x.transpose())).row(0).transpose();
}

PrototypeModel fit_prototype_classifier(const Eigen::MatrixXd& x, const LabelSet& y, std::span<const Index> train_rows,
                                        const PrototypeConfig& cfg) {
    Index k = cfg.k;
    if (k == 0) {
        std::vector<Index> counts(static_cast<std::size_t>(y.n_classes()), 0);
        for (Index r : train_rows) ++counts.at(static_cast<std::size_t>(y.labels.at(r)));
        k = std::min(kMaxAutoK, *std::min_element(counts.begin(), counts.end()));
        if (k == 0) throw MissingClassError("a class is absent from the training rows");
    }
    const Rng root(cfg.seed);
    const BalancedSupport support = build_balanced_support(y, train_rows, k, root.split(0).next_u64());
    const IndexList support_rows = support.all();
    const Eigen::MatrixXd rows = gather_rows(x, support_rows);
    const Index max_p = static_cast<Index>(rows.rows()) - 1;
    const Index p = cfg.p == 0 ? std::min(max_p, kMaxAutoP) : cfg.p;
    const FeatureMap fm = fit_feature_map(rows, p, cfg.norm_bound, root.split(1).next_u64(), cfg.width);
    return fit_prototypes(fm, support, x, cfg.residual_bound, root.split(2).next_u64());
}

void to_json(nlohmann::json& j, const FeatureMap& fm) {
    j = {{"kind", kind_name(fm.kind)},
         {"input_dim", fm.input_dim},
         {"activation", "relu"},
         {"projection", matrix_to_json(fm.projection)},
         {"offsets", vector_to_json(fm.offsets)},
         {"support_pca", fm.support_pca},
         {"scale", fm.scale},
         {"B", fm.norm_bound},
         {"seed", fm.seed}};
}

void from_json(const nlohmann::json& j, FeatureMap& fm) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "identity" && kind != "random_relu") throw std::invalid_argument("unknown feature map kind " + kind);
    fm.kind = kind == "identity" ? FeatureMapKind::Identity : FeatureMapKind::RandomRelu;
    fm.input_dim = j.at("input_dim").get<Index>();
    fm.norm_bound = j.at("B").get<double>();
    fm.seed = j.value("seed", std::uint64_t{0});
    if (fm.kind == FeatureMapKind::RandomRelu) {
        fm.projection = matrix_from_json(j.at("projection"));
        fm.offsets = vector_from_json(j.at("offsets"));
        fm.support_pca = j.at("support_pca").get<PcaModel>();
        fm.scale = j.at("scale").get<double>();
    }
}

void to_json(nlohmann::json& j, const PrototypeModel& m) {
    j = {{"version", PrototypeModel::kVersion},
         {"feature_map", m.feature_map},
         {"prototypes", matrix_to_json(m.prototypes)},
         {"residuals", matrix_to_json(m.residuals)},
         {"residual_bound", m.residual_bound},
         {"biases", vector_to_json(m.biases)},
         {"B", m.feature_map.norm_bound},
         {"k", m.k},
         {"seeds", {{"feature_map", m.feature_map.seed}, {"residual", m.residual_seed}}}};
}

void from_json(const nlohmann::json& j, PrototypeModel& m) {
    if (j.at("version").get<int>() != PrototypeModel::kVersion) throw std::invalid_argument("unsupported PrototypeModel version");
    m.feature_map = j.at("feature_map").get<FeatureMap>();
    m.prototypes = matrix_from_json(j.at("prototypes"));
    m.residuals = matrix_from_json(j.at("residuals"));
    m.residual_bound = j.at("residual_bound").get<double>();
    m.biases = vector_from_json(j.at("biases"));
    m.k = j.value("k", Index{0});
    m.residual_seed = j.at("seeds").at("residual").get<std::uint64_t>();
}

}  // namespace protovote
