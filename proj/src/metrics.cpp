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

#include "protovote/metrics.hpp"

#include "protovote/error.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace protovote {
namespace {

std::optional<double> ratio(long long num, long long den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

std::string fmt(std::optional<double> v) {
    if (!v) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

nlohmann::json opt_json(std::optional<double> v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred, int n_classes) {
    if (y_true.size() != y_pred.size()) throw std::invalid_argument("y_true and y_pred differ in length");
    if (n_classes < 1) throw std::invalid_argument("n_classes must be positive");
    ConfusionMatrix cm;
    cm.counts.setZero(n_classes, n_classes);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i];
        const int p = y_pred[i];
        if (t < 0 || t >= n_classes || p < 0 || p >= n_classes)
            throw std::invalid_argument("label outside the class map at row " + std::to_string(i));
        ++cm.counts(t, p);
    }
    return cm;
}

MetricsReport build_report(std::span<const int> y_true, std::span<const int> y_pred, int n_classes,
                           std::span<const double> scores) {
    if (y_true.empty()) throw std::invalid_argument("cannot build a report from zero samples");
    MetricsReport r;
    r.confusion = confusion_matrix(y_true, y_pred, n_classes);
    const ConfusionMatrix& cm = r.confusion;
    r.n_classes = n_classes;
    r.n = cm.total();
    r.accuracy = static_cast<double>(cm.counts.trace()) / static_cast<double>(r.n);

    double recall_sum = 0.0;
    int recall_n = 0;
    double f1_sum = 0.0;
    double ppv_sum = 0.0;
    double spec_sum = 0.0;
    int f1_n = 0;
    int ppv_n = 0;
    int spec_n = 0;
    for (int c = 0; c < n_classes; ++c) {
        ClassMetrics m;
        m.support = cm.tp(c) + cm.fn(c);
        m.recall = ratio(cm.tp(c), cm.tp(c) + cm.fn(c));
        m.specificity = ratio(cm.tn(c), cm.tn(c) + cm.fp(c));
        m.ppv = ratio(cm.tp(c), cm.tp(c) + cm.fp(c));
        if (m.recall && m.ppv && (*m.recall + *m.ppv) > 0.0)
            m.f1 = 2.0 * *m.recall * *m.ppv / (*m.recall + *m.ppv);
        else if (m.recall && m.ppv)
            m.f1 = 0.0;
        if (m.recall) {
            recall_sum += *m.recall;
            ++recall_n;
        } else {
            ++r.undefined_excluded;
        }
        if (m.f1) {
            f1_sum += *m.f1;
            ++f1_n;
        } else {
            ++r.undefined_excluded;
        }
        if (m.ppv) {
            ppv_sum += *m.ppv;
            ++ppv_n;
        } else {
            ++r.undefined_excluded;
        }
        if (m.specificity) {
            spec_sum += *m.specificity;
            ++spec_n;
        } else {
            ++r.undefined_excluded;
        }
        r.per_class.push_back(m);
    }
    r.balanced_accuracy = recall_n ? recall_sum / recall_n : 0.0;
    r.macro_f1 = f1_n ? f1_sum / f1_n : 0.0;
    r.macro_ppv = ppv_n ? ppv_sum / ppv_n : 0.0;
    r.macro_specificity = spec_n ? spec_sum / spec_n : 0.0;

    if (!scores.empty()) {
        if (scores.size() != y_true.size()) throw std::invalid_argument("scores and labels differ in length");
        if (n_classes == 2) {
            try {
                r.auc = binary_auc(y_true, scores);
            } catch (const UndefinedMetricError&) {
                r.auc.reset();
            }
        }
    }
    return r;
}

double binary_auc(std::span<const int> y_true, std::span<const double> scores) {
    if (y_true.size() != scores.size()) throw std::invalid_argument("scores and labels differ in length");
    const std::size_t n = y_true.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // midranks, 1-based
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) rank[order[t]] = mid;
        i = j + 1;
    }
    double pos_rank_sum = 0.0;
    long long n_pos = 0;
    long long n_neg = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (y_true[i] == 1) {
            pos_rank_sum += rank[i];
            ++n_pos;
        } else if (y_true[i] == 0) {
            ++n_neg;
        } else {
            throw std::invalid_argument("binary AUC needs 0/1 labels");
        }
    }
    if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("AUC undefined: only one class present");
    const double u = pos_rank_sum - static_cast<double>(n_pos) * static_cast<double>(n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double balanced_accuracy(std::span<const int> y_true, std::span<const int> y_pred, int n_classes) {
    return build_report(y_true, y_pred, n_classes).balanced_accuracy;
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
    j = nlohmann::json::object();
    j["n"] = r.n;
    j["n_classes"] = r.n_classes;
    j["accuracy"] = r.accuracy;
    j["balanced_accuracy"] = r.balanced_accuracy;
    j["auc"] = opt_json(r.auc);
    if (r.n_classes > 2) j["auc_note"] = "unavailable for more than two classes";
    j["positive_class"] = r.positive_class;
    j["undefined_excluded"] = r.undefined_excluded;
    j["macro_f1"] = r.macro_f1;
    j["macro_ppv"] = r.macro_ppv;
    j["macro_specificity"] = r.macro_specificity;
    nlohmann::json per = nlohmann::json::array();
    for (const auto& m : r.per_class)
        per.push_back({{"support", m.support},
                       {"recall", opt_json(m.recall)},
                       {"specificity", opt_json(m.specificity)},
                       {"ppv", opt_json(m.ppv)},
                       {"f1", opt_json(m.f1)}});
    j["per_class"] = per;
    nlohmann::json cm = nlohmann::json::array();
    for (Eigen::Index i = 0; i < r.confusion.counts.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index k = 0; k < r.confusion.counts.cols(); ++k) row.push_back(r.confusion.counts(i, k));
        cm.push_back(row);
    }
    j["confusion"] = cm;
}

void write_metrics_header(std::ostream& os) {
    os << "Model,Accuracy,AUC,F1,PPV,Sensitivity,Specificity,BalancedAccuracy\n";
}

void write_metrics_row(std::ostream& os, const std::string& model, const MetricsReport& r) {
    std::optional<double> f1;
    std::optional<double> ppv;
    std::optional<double> sens;
    std::optional<double> spec;
    if (r.n_classes == 2) {
        const ClassMetrics& m = r.per_class[static_cast<std::size_t>(r.positive_class)];
        f1 = m.f1;
        ppv = m.ppv;
        sens = m.recall;
        spec = m.specificity;
    } else {
        f1 = r.macro_f1;
        ppv = r.macro_ppv;
        sens = r.balanced_accuracy;
        spec = r.macro_specificity;
    }
    os << model << ',' << fmt(r.accuracy) << ',' << fmt(r.auc) << ',' << fmt(f1) << ',' << fmt(ppv) << ','
       << fmt(sens) << ',' << fmt(spec) << ',' << fmt(r.balanced_accuracy) << '\n';
}

}  // namespace protovote
