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

// Four-class imbalanced task whose minority class mixes subtypes that each
// defeat one learner family:
//
//   core      dense block near the minority mean, cue cell (+,+)   nobody fails
//   proto     dense block near class 0's mean,   cue cell (+,+)   prototype fails
//   corner    dense block near the minority mean, cue cell (-,-)  additive trees fail
//   rare      dense block near the minority mean, tag feature on   large-leaf trees fail
//
// A code feature names classes 0 and 1 and lumps class 2 with the minority. Inside
// that group class 2 fills both mixed cue cells (+,-) and (-,+) while the minority
// sits on the diagonal, so an additive model must give up one diagonal cell. Rare
// rows differ from class 2 only by the tag, in few rows for a leaf under the
// leaf-wise hessian floor. The dense
// block carries the class signal spread thinly over many coordinates, which suits a
// class-mean classifier better than axis-aligned splits.

#pragma once

#include "protovote/ensemble.hpp"
#include "protovote/gbdt.hpp"
#include "protovote/prototype.hpp"
#include "protovote/theory_lab.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace protovote {

struct EnsembleTaskSpec {
    std::array<Index, 4> train_counts{600, 480, 360, 120};  // class 3 is the minority
    std::array<Index, 4> test_counts{1500, 1250, 1000, 600};
    Index dense_dim = 16;
    double dense_separation = 4.0;  // norm of each class mean in the dense block
    double cue_noise = 0.1;
    /// Minority subtype shares: core, proto, corner, rare.
    std::array<double, 4> minority_mix{0.40, 0.10, 0.25, 0.25};
};

struct EnsembleTaskLearners {
    PrototypeConfig prototype;
    GbdtConfig leaf_wise;
    GbdtConfig depth_wise;

    /// Stumps for the depth-wise voter; leaf-wise trees that need a sizeable hessian per leaf.
    static EnsembleTaskLearners defaults();
};

struct EnsembleTaskData {
    Eigen::MatrixXd x_train;
    std::vector<int> y_train;
    Eigen::MatrixXd x_test;
    std::vector<int> y_test;
    std::vector<int> subtype_test;  // 0..3 for minority rows, -1 otherwise
};

EnsembleTaskData make_ensemble_task(const EnsembleTaskSpec& spec, std::uint64_t seed);

struct EnsembleTaskResult {
    std::uint64_t seed = 0;
    std::array<double, 3> minority_error{};  // H, L, X
    double ensemble_minority_error = 0.0;
    ClassErrorStats minority_stats;
    double improvement_threshold = 0.0;  // (eps - 3 eps^2)/3 at eps = largest base error
    bool in_improvement_region = false;
    std::array<double, 3> balanced_accuracy{};
    double ensemble_balanced_accuracy = 0.0;
    /// Per-subtype error of each voter (rows H, L, X, ensemble).
    std::array<std::array<double, 4>, 4> subtype_error{};
};

EnsembleTaskResult run_ensemble_task(const EnsembleTaskSpec& spec, const EnsembleTaskLearners& learners,
                                     std::uint64_t seed);

/// One-sided sign test: P(Binomial(n, 1/2) >= wins).
double sign_test_p_value(int wins, int n);

/// Runs `n_seeds` independent tasks; holds when the ensemble's minority error is
/// strictly below every base learner's in enough seeds for p < 0.05.
BoundReport ensemble_benefit_experiment(const EnsembleTaskSpec& spec, const EnsembleTaskLearners& learners,
                                        int n_seeds, std::uint64_t seed, std::vector<EnsembleTaskResult>* runs = nullptr);

}  // namespace protovote
