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

// Classification metrics. Rates that would divide by zero are carried as
// std::nullopt and left out of macro averages.

#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace protovote {

struct ConfusionMatrix {
    Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> counts;  // rows true, cols predicted

    int n_classes() const { return static_cast<int>(counts.rows()); }
    long long total() const { return counts.sum(); }
    long long tp(int c) const { return counts(c, c); }
    long long fn(int c) const { return counts.row(c).sum() - counts(c, c); }
    long long fp(int c) const { return counts.col(c).sum() - counts(c, c); }
    long long tn(int c) const { return total() - tp(c) - fn(c) - fp(c); }
};

/// Throws std::invalid_argument on length mismatch or labels outside [0, n_classes).
ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred, int n_classes);

struct ClassMetrics {
    long long support = 0;
    std::optional<double> recall;  // sensitivity
    std::optional<double> specificity;
    std::optional<double> ppv;
    std::optional<double> f1;
};

struct MetricsReport {
    int n_classes = 0;
    long long n = 0;
    double accuracy = 0.0;
    double balanced_accuracy = 0.0;  // mean recall over classes with support
    std::vector<ClassMetrics> per_class;
    std::optional<double> auc;  // binary only
    int positive_class = 1;
    /// Undefined per-class rates skipped by the macro averages.
    int undefined_excluded = 0;
    double macro_f1 = 0.0;
    double macro_ppv = 0.0;
    double macro_specificity = 0.0;
    ConfusionMatrix confusion;
};

/// `scores` (optional) are positive-class scores used for the binary AUC. The
/// positive class for single-number binary rates is class id 1.
MetricsReport build_report(std::span<const int> y_true, std::span<const int> y_pred, int n_classes,
                           std::span<const double> scores = {});

/// Mann-Whitney AUC with midranks: P(s+ > s-) + P(s+ = s-)/2. Labels must be 0/1.
/// Throws UndefinedMetricError when either class is absent.
double binary_auc(std::span<const int> y_true, std::span<const double> scores);

double balanced_accuracy(std::span<const int> y_true, std::span<const int> y_pred, int n_classes);

void to_json(nlohmann::json& j, const MetricsReport& r);

/// Row layout: Model,Accuracy,AUC,F1,PPV,Sensitivity,Specificity,BalancedAccuracy.
/// Binary reports use the positive class; multiclass reports use macro averages and
/// leave AUC as "NA".
void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const std::string& model, const MetricsReport& r);

}  // namespace protovote
