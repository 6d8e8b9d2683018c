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

// Three-voter hard vote and the class-wise error algebra around it.
//
// For class c, I_j = 1 when voter j misclassifies a class-c sample. The vote errs
// when at least two voters err, so with p_jk = P(I_j = I_k = 1) and
// p_123 = P(all three err):
//
//   e_ens(c) = p_HL + p_HX + p_LX - 2 p_123          (exact)
//            <= e_H e_L + e_H e_X + e_L e_X + 3 kappa  (pairwise covariances <= kappa)

#pragma once

#include "protovote/data_pipeline.hpp"
#include "protovote/gbdt.hpp"
#include "protovote/prototype.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace protovote {

class Voter {
public:
    virtual ~Voter() = default;
    virtual std::string name() const = 0;
    virtual const std::vector<std::string>& class_names() const = 0;
    /// n x C, rows summing to one.
    virtual Eigen::MatrixXd posterior(const Eigen::MatrixXd& rows) const = 0;
    /// Defaults to the row-wise argmax of posterior() with ties to the lowest class id.
    virtual std::vector<int> predict(const Eigen::MatrixXd& rows) const;
};

class PrototypeVoter final : public Voter {
public:
    PrototypeVoter(PrototypeModel model, std::vector<std::string> class_names)
        : model_(std::move(model)), class_names_(std::move(class_names)) {}
    std::string name() const override { return "HF"; }
    const std::vector<std::string>& class_names() const override { return class_names_; }
    Eigen::MatrixXd posterior(const Eigen::MatrixXd& rows) const override;
    std::vector<int> predict(const Eigen::MatrixXd& rows) const override;
    const PrototypeModel& model() const noexcept { return model_; }

private:
    PrototypeModel model_;
    std::vector<std::string> class_names_;
};

class GbdtVoter final : public Voter {
public:
    GbdtVoter(std::string name, GbdtModel model, std::vector<std::string> class_names)
        : name_(std::move(name)), model_(std::move(model)), class_names_(std::move(class_names)) {}
    std::string name() const override { return name_; }
    const std::vector<std::string>& class_names() const override { return class_names_; }
    Eigen::MatrixXd posterior(const Eigen::MatrixXd& rows) const override;
    const GbdtModel& model() const noexcept { return model_; }

private:
    std::string name_;
    GbdtModel model_;
    std::vector<std::string> class_names_;
};

enum VoterSlot : std::size_t { kPrototypeSlot = 0, kLeafWiseSlot = 1, kDepthWiseSlot = 2 };

/// Exactly three voters in the fixed order (prototype, leaf-wise trees, depth-wise trees).
class VoterSet {
public:
    /// Throws ConfigurationError when the class maps differ.
    VoterSet(std::shared_ptr<const Voter> prototype, std::shared_ptr<const Voter> leaf_wise,
             std::shared_ptr<const Voter> depth_wise);

    const Voter& operator[](std::size_t slot) const { return *voters_.at(slot); }
    const std::vector<std::string>& class_names() const { return voters_[0]->class_names(); }
    int n_classes() const { return static_cast<int>(class_names().size()); }

private:
    std::array<std::shared_ptr<const Voter>, 3> voters_;
};

struct VoteResult {
    std::vector<int> ensemble;
    std::array<std::vector<int>, 3> voter_predictions;
    Eigen::MatrixXd mean_posterior;  // n x C
};

/// Majority over the three predictions; a three-way split goes to the voted class of
/// largest mean posterior, then to the lowest class id.
VoteResult hard_vote(const VoterSet& voters, const Eigen::MatrixXd& rows);
int hard_vote(const VoterSet& voters, const Eigen::VectorXd& x);

/// Per-sample error (and optional flip) indicators of the three voters.
class ErrorIndicatorTable {
public:
    static constexpr std::uint8_t kErrH = 1U << 0U;
    static constexpr std::uint8_t kErrL = 1U << 1U;
    static constexpr std::uint8_t kErrX = 1U << 2U;
    static constexpr std::uint8_t kFlipH = 1U << 3U;
    static constexpr std::uint8_t kFlipL = 1U << 4U;
    static constexpr std::uint8_t kFlipX = 1U << 5U;
    static constexpr std::uint8_t kFlipEns = 1U << 6U;

    explicit ErrorIndicatorTable(bool with_flips = false) : with_flips_(with_flips) {}

    void reserve(std::size_t n);
    /// `sample_id` may be empty; the CSV export then writes the row index.
    void add(int cls, std::array<bool, 3> errors, std::string sample_id = {});
    void add(int cls, std::array<bool, 3> errors, std::array<bool, 3> flips, bool ensemble_flip,
             std::string sample_id = {});
    /// Appends a raw bit pattern (see the k* constants).
    void add_bits(int cls, std::uint8_t bits);

    bool has_flips() const noexcept { return with_flips_; }
    std::size_t size() const noexcept { return bits_.size(); }
    int cls(std::size_t i) const { return classes_[i]; }
    std::uint8_t bits(std::size_t i) const { return bits_[i]; }
    std::vector<int> classes_present() const;

    void write_csv(std::ostream& os) const;

private:
    bool with_flips_;
    std::vector<std::string> sample_ids_;
    std::vector<int> classes_;
    std::vector<std::uint8_t> bits_;
};

/// Builds the table from true labels and the three voters' predictions.
ErrorIndicatorTable build_error_table(std::span<const int> y_true, const std::array<std::vector<int>, 3>& predictions,
                                      std::span<const std::string> sample_ids = {});

/// Counts over the class-c rows of a table. Pair order is (HL, HX, LX).
struct ClassErrorCounts {
    std::size_t n = 0;
    std::array<std::size_t, 3> errors{};
    std::array<std::size_t, 3> pairs{};
    std::size_t triple = 0;
    std::size_t at_least_two = 0;
};

ClassErrorCounts count_errors(const ErrorIndicatorTable& table, int c);

struct ClassErrorStats {
    std::size_t n = 0;
    std::array<double, 3> error_rate{};   // e_H, e_L, e_X
    std::array<double, 3> joint_error{};  // p_HL, p_HX, p_LX
    std::array<double, 3> covariance{};   // plug-in p_jk - e_j e_k
    double triple = 0.0;                  // p_123
    double ensemble_error = 0.0;          // fraction with at least two errors
    /// max(0, largest pairwise covariance)
    double kappa() const;
};

ClassErrorStats error_stats(const ErrorIndicatorTable& table, int c);

struct VoteDecomposition {
    double e_ens = 0.0;
    double p_hl = 0.0;
    double p_hx = 0.0;
    double p_lx = 0.0;
    double p_123 = 0.0;
    double identity_residual = 0.0;
    std::size_t n = 0;
};

/// e_ens is measured directly; the right-hand side p_HL + p_HX + p_LX - 2 p_123 is
/// accumulated in integer counts and divided once, so on empirical tables the
/// residual is exactly zero. Throws MissingClassError without class-c rows.
VoteDecomposition decompose_vote_error(const ErrorIndicatorTable& table, int c);

/// (1/C) sum_c e_ens(c) over the classes present in the table.
double balanced_vote_error(const ErrorIndicatorTable& table);

/// e_H e_L + e_H e_X + e_L e_X + 3 kappa
double bounded_dependence_bound(double e_h, double e_l, double e_x, double kappa);

/// Exact vote error for independent voters: e_H e_L + e_H e_X + e_L e_X - 2 e_H e_L e_X.
double independent_vote_error(double e_h, double e_l, double e_x);

/// (eps - 3 eps^2) / 3; throws std::invalid_argument unless 0 < eps < 1/2.
double symmetric_improvement_threshold(double eps);

struct SymmetricImprovement {
    double threshold = 0.0;  // kappa must stay below this
    double bound = 0.0;      // 3 eps^2 + 3 kappa
    bool certified = false;  // bound < eps
};

SymmetricImprovement symmetric_improvement(double eps, double kappa);

struct FlipCheck {
    std::size_t n = 0;
    double ensemble_flip_rate = 0.0;
    double both_flip_rate = 0.0;               // L and X flip together
    std::array<double, 3> voter_flip_rate{};   // H, L, X
    double min_pair_bound = 0.0;               // min(p_L, p_X)
    double product_bound = 0.0;                // p_L * p_X
    bool precondition_met = false;             // H never flips
    bool holds = false;                        // rate <= both-flip rate <= min bound; false when skipped
    std::string note;
};

/// Requires flip columns. When H flips anywhere the min-bound check is skipped and
/// reported through `precondition_met` and `note`.
FlipCheck flip_bound_check(const ErrorIndicatorTable& table, std::optional<int> c = std::nullopt);

}  // namespace protovote
