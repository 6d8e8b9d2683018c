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

#include "protovote/gbdt.hpp"

#include "protovote/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace protovote {

namespace {

using SortedRows = std::vector<std::vector<std::uint32_t>>;

struct OpenNode {
    int id = 0;
    int depth = 0;
    SortedRows sorted;
    kernels::SplitCandidate best;
};

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& x, std::span<const double> grad, std::span<const double> hess,
                const GbdtConfig& cfg)
        : x_(x), grad_(grad), hess_(hess), cfg_(cfg), go_left_(static_cast<std::size_t>(x.rows()), 0) {
        params_.lambda = cfg.lambda_l2;
        params_.complexity_gamma = cfg.complexity_gamma;
        params_.min_child_hessian = cfg.min_child_hessian;
    }

    RegressionTree build(SortedRows root_rows, std::span<const std::uint32_t> all_rows) {
        tree_.nodes.clear();
        OpenNode root = make_node(std::move(root_rows), all_rows, 0);
        if (cfg_.growth == Growth::DepthWise)
            grow_depth_wise(std::move(root));
        else
            grow_leaf_wise(std::move(root));
        return std::move(tree_);
    }

private:
    OpenNode make_node(SortedRows sorted, std::span<const std::uint32_t> rows, int depth) {
        TreeNode node;
        for (std::uint32_t r : rows) {
            node.sum_grad += grad_[r];
            node.sum_hess += hess_[r];
        }
        node.leaf_value = leaf_weight(node.sum_grad, node.sum_hess, cfg_.lambda_l2);
        tree_.nodes.push_back(node);
        OpenNode open;
        open.id = static_cast<int>(tree_.nodes.size()) - 1;
        open.depth = depth;
        open.sorted = std::move(sorted);
        return open;
    }

    void find_split(OpenNode& node) { node.best = kernels::best_split_parallel(x_, node.sorted, grad_, hess_, params_); }

    static bool accepted(const OpenNode& node) { return node.best.found && node.best.gain > 0.0; }

    std::pair<OpenNode, OpenNode> split(OpenNode& parent) {
        const auto& best = parent.best;
        // Row membership is read off the first feature's list, which holds every row of the node.
        std::vector<std::uint32_t> left_rows;
        std::vector<std::uint32_t> right_rows;
        const std::vector<std::uint32_t>& rows = parent.sorted.front();
        for (std::uint32_t r : rows) {
            const bool left = x_(r, best.feature) <= best.threshold;
            go_left_[r] = left ? 1 : 0;
            (left ? left_rows : right_rows).push_back(r);
        }
        SortedRows left_sorted(parent.sorted.size());
        SortedRows right_sorted(parent.sorted.size());
        for (std::size_t f = 0; f < parent.sorted.size(); ++f) {
            left_sorted[f].reserve(left_rows.size());
            right_sorted[f].reserve(right_rows.size());
            for (std::uint32_t r : parent.sorted[f]) (go_left_[r] ? left_sorted[f] : right_sorted[f]).push_back(r);
        }
        parent.sorted.clear();
        std::sort(left_rows.begin(), left_rows.end());
        std::sort(right_rows.begin(), right_rows.end());
        OpenNode l = make_node(std::move(left_sorted), left_rows, parent.depth + 1);
        OpenNode r = make_node(std::move(right_sorted), right_rows, parent.depth + 1);
        TreeNode& p = tree_.nodes[static_cast<std::size_t>(parent.id)];
        p.feature = best.feature;
        p.threshold = best.threshold;
        p.left = l.id;
        p.right = r.id;
        return {std::move(l), std::move(r)};
    }

    void grow_depth_wise(OpenNode root) {
        std::vector<OpenNode> level;
        level.push_back(std::move(root));
        while (!level.empty()) {
            std::vector<OpenNode> next;
            for (auto& node : level) {
                if (node.depth >= cfg_.max_depth) continue;
                find_split(node);
                if (!accepted(node)) continue;
                auto [l, r] = split(node);
                next.push_back(std::move(l));
                next.push_back(std::move(r));
            }
            level = std::move(next);
        }
    }

    void grow_leaf_wise(OpenNode root) {
        std::vector<OpenNode> open;
        find_split(root);
        open.push_back(std::move(root));
        int leaves = 1;
        while (leaves < cfg_.max_leaves) {
            std::size_t pick = open.size();
            for (std::size_t i = 0; i < open.size(); ++i) {
                if (!accepted(open[i])) continue;
                if (pick == open.size() || open[i].best.gain > open[pick].best.gain ||
                    (open[i].best.gain == open[pick].best.gain && open[i].id < open[pick].id))
                    pick = i;
            }
            if (pick == open.size()) break;
            OpenNode parent = std::move(open[pick]);
            open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));
            auto [l, r] = split(parent);
            find_split(l);
            find_split(r);
            open.push_back(std::move(l));
            open.push_back(std::move(r));
            ++leaves;
        }
    }

    const Eigen::MatrixXd& x_;
    std::span<const double> grad_;
    std::span<const double> hess_;
    const GbdtConfig& cfg_;
    kernels::SplitParams params_;
    std::vector<char> go_left_;
    RegressionTree tree_;
};

double softplus(double m) { return m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m)); }

double sigmoid(double m) {
    if (m >= 0.0) return 1.0 / (1.0 + std::exp(-m));
    const double e = std::exp(m);
    return e / (1.0 + e);
}

Eigen::RowVectorXd softmax(const Eigen::RowVectorXd& m) {
    Eigen::RowVectorXd p = (m.array() - m.maxCoeff()).exp();
    return p / p.sum();
}

void fill_gradients(const Eigen::MatrixXd& margin, std::span<const int> labels, int n_classes, Eigen::MatrixXd& grad,
                    Eigen::MatrixXd& hess) {
    const Eigen::Index n = margin.rows();
    grad.resize(n, margin.cols());
    hess.resize(n, margin.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (n_classes == 2) {
            const double p = sigmoid(margin(i, 0));
            grad(i, 0) = p - (y == 1 ? 1.0 : 0.0);
            hess(i, 0) = p * (1.0 - p);
        } else {
            const Eigen::RowVectorXd p = softmax(margin.row(i));
            for (Eigen::Index c = 0; c < margin.cols(); ++c) {
                grad(i, c) = p[c] - (c == y ? 1.0 : 0.0);
                hess(i, c) = p[c] * (1.0 - p[c]);
            }
        }
    }
}

}  // namespace

void GbdtConfig::validate() const {
    if (n_rounds < 1) throw std::invalid_argument("n_rounds must be at least 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw std::invalid_argument("learning_rate must lie in (0, 1]");
    if (!(lambda_l2 >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
    if (!(complexity_gamma >= 0.0)) throw std::invalid_argument("complexity_gamma must be non-negative");
    if (!(min_child_hessian >= 0.0)) throw std::invalid_argument("min_child_hessian must be non-negative");
    if (growth == Growth::DepthWise && max_depth < 0) throw std::invalid_argument("max_depth must be non-negative");
    if (growth == Growth::LeafWise && max_leaves < 1) throw std::invalid_argument("max_leaves must be at least 1");
}

GbdtConfig GbdtConfig::depth_wise(int max_depth) {
    GbdtConfig cfg;
    cfg.growth = Growth::DepthWise;
    cfg.max_depth = max_depth;
    return cfg;
}

GbdtConfig GbdtConfig::leaf_wise(int max_leaves) {
    GbdtConfig cfg;
    cfg.growth = Growth::LeafWise;
    cfg.max_leaves = max_leaves;
    return cfg;
}

int RegressionTree::leaf_of(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    int id = 0;
    while (!nodes[static_cast<std::size_t>(id)].is_leaf()) {
        const TreeNode& n = nodes[static_cast<std::size_t>(id)];
        id = row[n.feature] <= n.threshold ? n.left : n.right;
    }
    return id;
}

int RegressionTree::n_leaves() const {
    return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

int RegressionTree::depth() const {
    std::vector<int> depth(nodes.size(), 0);
    int deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].is_leaf()) continue;
        depth[static_cast<std::size_t>(nodes[i].left)] = depth[i] + 1;
        depth[static_cast<std::size_t>(nodes[i].right)] = depth[i] + 1;
        deepest = std::max(deepest, depth[i] + 1);
    }
    return deepest;
}

double log_loss_from_margin(const Eigen::MatrixXd& margin, std::span<const int> labels, int n_classes) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < margin.rows(); ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (n_classes == 2) {
            total += softplus(margin(i, 0)) - (y == 1 ? margin(i, 0) : 0.0);
        } else {
            const double m = margin.row(i).maxCoeff();
            total += m + std::log((margin.row(i).array() - m).exp().sum()) - margin(i, y);
        }
    }
    return total / static_cast<double>(margin.rows());
}

GbdtModel fit_gbdt(const Eigen::MatrixXd& x, std::span<const int> labels, int n_classes, const GbdtConfig& cfg,
                   GbdtTrace* trace) {
    cfg.validate();
    const Eigen::Index n = x.rows();
    if (n < 2) throw std::invalid_argument("boosting needs at least 2 training rows");
    if (static_cast<Eigen::Index>(labels.size()) != n) throw std::invalid_argument("labels and rows differ in length");
    if (n_classes < 2) throw std::invalid_argument("boosting needs at least 2 classes");
    if (x.cols() < 1) throw std::invalid_argument("boosting needs at least 1 feature");
    if (!x.allFinite()) throw DomainError("boosting input holds non-finite values");
    std::vector<Index> counts(static_cast<std::size_t>(n_classes), 0);
    for (int l : labels) {
        if (l < 0 || l >= n_classes) throw std::invalid_argument("label outside [0, n_classes)");
        ++counts[static_cast<std::size_t>(l)];
    }
    if (std::count_if(counts.begin(), counts.end(), [](Index c) { return c > 0; }) < 2)
        throw std::invalid_argument("training labels hold a single class");

    GbdtModel model;
    model.n_classes = n_classes;
    model.n_features = static_cast<Index>(x.cols());
    model.config = cfg;
    const int outputs = model.n_outputs();
    const auto nd = static_cast<double>(n);
    model.base_score.resize(outputs);
    if (n_classes == 2) {
        const double p = static_cast<double>(counts[1]) / nd;
        model.base_score[0] = std::log(p / (1.0 - p));
    } else {
        // A class absent from this training set gets half a pseudo-count instead of log(0).
        for (int c = 0; c < n_classes; ++c)
            model.base_score[c] = std::log(std::max(static_cast<double>(counts[static_cast<std::size_t>(c)]), 0.5) / nd);
    }
    model.trees.assign(static_cast<std::size_t>(outputs), {});

    SortedRows root(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
        auto& order = root[static_cast<std::size_t>(f)];
        order.resize(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0U);
        std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
    }
    std::vector<std::uint32_t> all_rows(static_cast<std::size_t>(n));
    std::iota(all_rows.begin(), all_rows.end(), 0U);

    Eigen::MatrixXd margin = model.base_score.transpose().replicate(n, 1);
    if (trace) {
        *trace = GbdtTrace{};
        trace->train_log_loss.push_back(log_loss_from_margin(margin, labels, n_classes));
    }
    Eigen::MatrixXd grad;
    Eigen::MatrixXd hess;
    for (int round = 0; round < cfg.n_rounds; ++round) {
        fill_gradients(margin, labels, n_classes, grad, hess);
        Eigen::MatrixXd step = Eigen::MatrixXd::Zero(n, outputs);
        for (int k = 0; k < outputs; ++k) {
            const Eigen::VectorXd g = grad.col(k);
            const Eigen::VectorXd h = hess.col(k);
            TreeBuilder builder(x, std::span<const double>(g.data(), static_cast<std::size_t>(n)),
                                std::span<const double>(h.data(), static_cast<std::size_t>(n)), cfg);
            RegressionTree tree = builder.build(root, all_rows);
            for (Eigen::Index i = 0; i < n; ++i) step(i, k) = cfg.learning_rate * tree.value(x.row(i));
            model.trees[static_cast<std::size_t>(k)].push_back(std::move(tree));
        }
        margin += step;
        if (trace) {
            trace->gradients.push_back(grad);
            trace->hessians.push_back(hess);
            trace->train_log_loss.push_back(log_loss_from_margin(margin, labels, n_classes));
        }
    }
    return model;
}

GbdtModel fit_gbdt(const Eigen::MatrixXd& x, const LabelSet& y, const GbdtConfig& cfg, GbdtTrace* trace) {
    return fit_gbdt(x, y.labels, y.n_classes(), cfg, trace);
}

Eigen::MatrixXd predict_margin(const GbdtModel& model, const Eigen::MatrixXd& x) {
    if (static_cast<Index>(x.cols()) != model.n_features)
        throw std::invalid_argument("model expects " + std::to_string(model.n_features) + " features, got " +
                                    std::to_string(x.cols()));
    const double lr = model.config.learning_rate;
    Eigen::MatrixXd margin = model.base_score.transpose().replicate(x.rows(), 1);
    for (std::size_t k = 0; k < model.trees.size(); ++k)
        for (const RegressionTree& tree : model.trees[k])
            for (Eigen::Index i = 0; i < x.rows(); ++i) margin(i, static_cast<Eigen::Index>(k)) += lr * tree.value(x.row(i));
    return margin;
}

Eigen::MatrixXd predict_proba(const GbdtModel& model, const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd margin = predict_margin(model, x);
    Eigen::MatrixXd proba(x.rows(), model.n_classes);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (model.n_classes == 2) {
            const double p = sigmoid(margin(i, 0));
            proba(i, 1) = p;
            proba(i, 0) = 1.0 - p;
        } else {
            proba.row(i) = softmax(margin.row(i));
        }
    }
    return proba;
}

std::vector<int> predict(const GbdtModel& model, const Eigen::MatrixXd& x) {
    return kernels::argmax_rows_parallel(predict_proba(model, x));
}

const char* growth_name(Growth g) { return g == Growth::DepthWise ? "depth_wise" : "leaf_wise"; }

void to_json(nlohmann::json& j, const GbdtConfig& cfg) {
    j = {{"n_rounds", cfg.n_rounds},
         {"learning_rate", cfg.learning_rate},
         {"lambda", cfg.lambda_l2},
         {"complexity_gamma", cfg.complexity_gamma},
         {"growth", growth_name(cfg.growth)},
         {"max_depth", cfg.max_depth},
         {"max_leaves", cfg.max_leaves},
         {"min_child_hessian", cfg.min_child_hessian},
         {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, GbdtConfig& cfg) {
    const GbdtConfig defaults;
    cfg.n_rounds = j.value("n_rounds", defaults.n_rounds);
    cfg.learning_rate = j.value("learning_rate", defaults.learning_rate);
    cfg.lambda_l2 = j.value("lambda", defaults.lambda_l2);
    cfg.complexity_gamma = j.value("complexity_gamma", defaults.complexity_gamma);
    const auto growth = j.value("growth", std::string("depth_wise"));
    if (growth != "depth_wise" && growth != "leaf_wise") throw std::invalid_argument("unknown growth policy " + growth);
    cfg.growth = growth == "leaf_wise" ? Growth::LeafWise : Growth::DepthWise;
    cfg.max_depth = j.value("max_depth", defaults.max_depth);
    cfg.max_leaves = j.value("max_leaves", defaults.max_leaves);
    cfg.min_child_hessian = j.value("min_child_hessian", defaults.min_child_hessian);
    cfg.seed = j.value("seed", defaults.seed);
}

void to_json(nlohmann::json& j, const GbdtModel& m) {
    nlohmann::json outputs = nlohmann::json::array();
    for (const auto& per_output : m.trees) {
        nlohmann::json trees = nlohmann::json::array();
        for (const auto& tree : per_output) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const auto& n : tree.nodes) {
                nlohmann::json node = {{"feature", n.feature},
                                       {"threshold", n.threshold},
                                       {"children", n.is_leaf() ? nlohmann::json::array()
                                                                : nlohmann::json::array({n.left, n.right})},
                                       {"leaf_value", n.leaf_value},
                                       {"sum_grad", n.sum_grad},
                                       {"sum_hess", n.sum_hess}};
                nodes.push_back(std::move(node));
            }
            trees.push_back(std::move(nodes));
        }
        outputs.push_back(std::move(trees));
    }
    j = {{"version", GbdtModel::kVersion},
         {"n_classes", m.n_classes},
         {"n_features", m.n_features},
         {"base_score", std::vector<double>(m.base_score.data(), m.base_score.data() + m.base_score.size())},
         {"config", m.config},
         {"trees", std::move(outputs)}};
}

void from_json(const nlohmann::json& j, GbdtModel& m) {
    if (j.at("version").get<int>() != GbdtModel::kVersion) throw std::invalid_argument("unsupported GbdtModel version");
    m.n_classes = j.at("n_classes").get<int>();
    m.n_features = j.at("n_features").get<Index>();
    const auto base = j.at("base_score").get<std::vector<double>>();
    m.base_score = Eigen::Map<const Eigen::VectorXd>(base.data(), static_cast<Eigen::Index>(base.size()));
    m.config = j.at("config").get<GbdtConfig>();
    m.trees.clear();
    for (const auto& per_output : j.at("trees")) {
        std::vector<RegressionTree> trees;
        for (const auto& nodes : per_output) {
            RegressionTree tree;
            for (const auto& node : nodes) {
                TreeNode n;
                n.feature = node.at("feature").get<int>();
                n.threshold = node.at("threshold").get<double>();
                const auto& children = node.at("children");
                if (children.size() == 2) {
                    n.left = children[0].get<int>();
                    n.right = children[1].get<int>();
                }
                n.leaf_value = node.at("leaf_value").get<double>();
                n.sum_grad = node.value("sum_grad", 0.0);
                n.sum_hess = node.value("sum_hess", 0.0);
                tree.nodes.push_back(n);
            }
            trees.push_back(std::move(tree));
        }
        m.trees.push_back(std::move(trees));
    }
    if (static_cast<int>(m.trees.size()) != m.n_outputs()) throw std::invalid_argument("tree lists do not match class count");
}

}  // namespace protovote
