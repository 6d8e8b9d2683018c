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

#include "protovote/ensemble.hpp"

#include "protovote/error.hpp"
#include "protovote/kernels.hpp"

#include <algorithm>
#include <set>

namespace protovote {

std::vector<int> Voter::predict(const Eigen::MatrixXd& rows) const { return kernels::argmax_rows_parallel(posterior(rows)); }

Eigen::MatrixXd PrototypeVoter::posterior(const Eigen::MatrixXd& rows) const { return protovote::posterior(model_, rows); }

std::vector<int> PrototypeVoter::predict(const Eigen::MatrixXd& rows) const { return protovote::predict(model_, rows); }

Eigen::MatrixXd GbdtVoter::posterior(const Eigen::MatrixXd& rows) const { return predict_proba(model_, rows); }

VoterSet::VoterSet(std::shared_ptr<const Voter> prototype, std::shared_ptr<const Voter> leaf_wise,
                   std::shared_ptr<const Voter> depth_wise)
    : voters_{std::move(prototype), std::move(leaf_wise), std::move(depth_wise)} {
    for (const auto& v : voters_)
        if (!v) throw ConfigurationError("voter set needs three voters");
    for (std::size_t i = 1; i < voters_.size(); ++i)
        if (voters_[i]->class_names() != voters_[0]->class_names())
            throw ConfigurationError("voter '" + voters_[i]->name() + "' uses a different class map than '" +
                                     voters_[0]->name() + "'");
}

VoteResult hard_vote(const VoterSet& voters, const Eigen::MatrixXd& rows) {
    VoteResult out;
    out.mean_posterior = Eigen::MatrixXd::Zero(rows.rows(), voters.n_classes());
    for (std::size_t m = 0; m < 3; ++m) {
        const Eigen::MatrixXd post = voters[m].posterior(rows);
        if (post.cols() != voters.n_classes()) throw ConfigurationError("voter posterior width differs from class count");
        out.mean_posterior += post / 3.0;
        out.voter_predictions[m] = voters[m].predict(rows);
    }
    out.ensemble = kernels::hard_vote_parallel(out.voter_predictions[0], out.voter_predictions[1],
                                               out.voter_predictions[2], out.mean_posterior);
    return out;
}

int hard_vote(const VoterSet& voters, const Eigen::VectorXd& x) {
    return hard_vote(voters, Eigen::MatrixXd(x.transpose())).ensemble.front();
}

void ErrorIndicatorTable::reserve(std::size_t n) {
    classes_.reserve(n);
    bits_.reserve(n);
}

void ErrorIndicatorTable::add(int cls, std::array<bool, 3> errors, std::string sample_id) {
    if (with_flips_) throw std::invalid_argument("table expects flip indicators");
    std::uint8_t b = 0;
    if (errors[0]) b |= kErrH;
    if (errors[1]) b |= kErrL;
    if (errors[2]) b |= kErrX;
    if (!sample_id.empty()) {
        sample_ids_.resize(bits_.size());
        sample_ids_.push_back(std::move(sample_id));
    }
    classes_.push_back(cls);
    bits_.push_back(b);
}

void ErrorIndicatorTable::add(int cls, std::array<bool, 3> errors, std::array<bool, 3> flips, bool ensemble_flip,
                              std::string sample_id) {
    if (!with_flips_) throw std::invalid_argument("table was created without flip indicators");
    std::uint8_t b = 0;
    if (errors[0]) b |= kErrH;
    if (errors[1]) b |= kErrL;
    if (errors[2]) b |= kErrX;
    if (flips[0]) b |= kFlipH;
    if (flips[1]) b |= kFlipL;
    if (flips[2]) b |= kFlipX;
    if (ensemble_flip) b |= kFlipEns;
    if (!sample_id.empty()) {
        sample_ids_.resize(bits_.size());
        sample_ids_.push_back(std::move(sample_id));
    }
    classes_.push_back(cls);
    bits_.push_back(b);
}

void ErrorIndicatorTable::add_bits(int cls, std::uint8_t bits) {
    if (!with_flips_ && (bits & ~(kErrH | kErrL | kErrX)) != 0)
        throw std::invalid_argument("flip bits on a table without flip indicators");
    classes_.push_back(cls);
    bits_.push_back(bits);
}

std::vector<int> ErrorIndicatorTable::classes_present() const {
    std::set<int> s(classes_.begin(), classes_.end());
    return {s.begin(), s.end()};
}

void ErrorIndicatorTable::write_csv(std::ostream& os) const {
    os << "sample_id,class,I_H,I_L,I_X";
    if (with_flips_) os << ",F_H,F_L,F_X,F_ENS";
    os << '\n';
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        const std::uint8_t b = bits_[i];
        if (i < sample_ids_.size() && !sample_ids_[i].empty())
            os << sample_ids_[i];
        else
            os << i;
        os << ',' << classes_[i] << ',' << ((b & kErrH) ? 1 : 0) << ',' << ((b & kErrL) ? 1 : 0) << ','
           << ((b & kErrX) ? 1 : 0);
        if (with_flips_)
            os << ',' << ((b & kFlipH) ? 1 : 0) << ',' << ((b & kFlipL) ? 1 : 0) << ',' << ((b & kFlipX) ? 1 : 0) << ','
               << ((b & kFlipEns) ? 1 : 0);
        os << '\n';
    }
}

ErrorIndicatorTable build_error_table(std::span<const int> y_true, const std::array<std::vector<int>, 3>& predictions,
                                      std::span<const std::string> sample_ids) {
    for (const auto& p : predictions)
        if (p.size() != y_true.size()) throw std::invalid_argument("predictions and labels differ in length");
    if (!sample_ids.empty() && sample_ids.size() != y_true.size())
        throw std::invalid_argument("sample ids and labels differ in length");
    ErrorIndicatorTable table;
    table.reserve(y_true.size());
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int c = y_true[i];
        table.add(c, {predictions[0][i] != c, predictions[1][i] != c, predictions[2][i] != c},
                  sample_ids.empty() ? std::string{} : sample_ids[i]);
    }
    return table;
}

ClassErrorCounts count_errors(const ErrorIndicatorTable& table, int c) {
    ClassErrorCounts k;
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (table.cls(i) != c) continue;
        const std::uint8_t b = table.bits(i);
        const bool h = (b & ErrorIndicatorTable::kErrH) != 0;
        const bool l = (b & ErrorIndicatorTable::kErrL) != 0;
        const bool x = (b & ErrorIndicatorTable::kErrX) != 0;
        ++k.n;
        k.errors[0] += h ? 1 : 0;
        k.errors[1] += l ? 1 : 0;
        k.errors[2] += x ? 1 : 0;
        k.pairs[0] += (h && l) ? 1 : 0;
        k.pairs[1] += (h && x) ? 1 : 0;
        k.pairs[2] += (l && x) ? 1 : 0;
        k.triple += (h && l && x) ? 1 : 0;
        k.at_least_two += (int(h) + int(l) + int(x) >= 2) ? 1 : 0;
    }
    return k;
}

double ClassErrorStats::kappa() const { return std::max(0.0, *std::max_element(covariance.begin(), covariance.end())); }

ClassErrorStats error_stats(const ErrorIndicatorTable& table, int c) {
    const ClassErrorCounts k = count_errors(table, c);
    if (k.n == 0) throw MissingClassError("no rows of class " + std::to_string(c) + " in the error table");
    ClassErrorStats s;
    s.n = k.n;
    const auto n = static_cast<double>(k.n);
    for (std::size_t j = 0; j < 3; ++j) {
        s.error_rate[j] = static_cast<double>(k.errors[j]) / n;
        s.joint_error[j] = static_cast<double>(k.pairs[j]) / n;
    }
    s.covariance[0] = s.joint_error[0] - s.error_rate[0] * s.error_rate[1];
    s.covariance[1] = s.joint_error[1] - s.error_rate[0] * s.error_rate[2];
    s.covariance[2] = s.joint_error[2] - s.error_rate[1] * s.error_rate[2];
    s.triple = static_cast<double>(k.triple) / n;
    s.ensemble_error = static_cast<double>(k.at_least_two) / n;
    return s;
}

VoteDecomposition decompose_vote_error(const ErrorIndicatorTable& table, int c) {
    const ClassErrorCounts k = count_errors(table, c);
    if (k.n == 0) throw MissingClassError("no rows of class " + std::to_string(c) + " in the error table");
    VoteDecomposition d;
    d.n = k.n;
    const auto n = static_cast<double>(k.n);
    d.e_ens = static_cast<double>(k.at_least_two) / n;
    d.p_hl = static_cast<double>(k.pairs[0]) / n;
    d.p_hx = static_cast<double>(k.pairs[1]) / n;
    d.p_lx = static_cast<double>(k.pairs[2]) / n;
    d.p_123 = static_cast<double>(k.triple) / n;
    const auto rhs_count = static_cast<long long>(k.pairs[0] + k.pairs[1] + k.pairs[2]) - 2LL * static_cast<long long>(k.triple);
    d.identity_residual = std::abs(d.e_ens - static_cast<double>(rhs_count) / n);
    return d;
}

double balanced_vote_error(const ErrorIndicatorTable& table) {
    const auto classes = table.classes_present();
    if (classes.empty()) throw std::invalid_argument("empty error table");
    double total = 0.0;
    for (int c : classes) total += decompose_vote_error(table, c).e_ens;
    return total / static_cast<double>(classes.size());
}

double bounded_dependence_bound(double e_h, double e_l, double e_x, double kappa) {
    return e_h * e_l + e_h * e_x + e_l * e_x + 3.0 * kappa;
}

double independent_vote_error(double e_h, double e_l, double e_x) {
    return e_h * e_l + e_h * e_x + e_l * e_x - 2.0 * e_h * e_l * e_x;
}

double symmetric_improvement_threshold(double eps) {
    if (!(eps > 0.0 && eps < 0.5)) throw std::invalid_argument("symmetric improvement needs 0 < eps < 1/2");
    return (eps - 3.0 * eps * eps) / 3.0;
}

SymmetricImprovement symmetric_improvement(double eps, double kappa) {
    SymmetricImprovement s;
    s.threshold = symmetric_improvement_threshold(eps);
    s.bound = 3.0 * eps * eps + 3.0 * kappa;
    s.certified = s.bound < eps;
    return s;
}

FlipCheck flip_bound_check(const ErrorIndicatorTable& table, std::optional<int> c) {
    if (!table.has_flips()) throw std::invalid_argument("error table carries no flip indicators");
    std::array<std::size_t, 3> flips{};
    std::size_t both = 0;
    std::size_t ens = 0;
    FlipCheck out;
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (c && table.cls(i) != *c) continue;
        const std::uint8_t b = table.bits(i);
        ++out.n;
        const bool fh = (b & ErrorIndicatorTable::kFlipH) != 0;
        const bool fl = (b & ErrorIndicatorTable::kFlipL) != 0;
        const bool fx = (b & ErrorIndicatorTable::kFlipX) != 0;
        flips[0] += fh ? 1 : 0;
        flips[1] += fl ? 1 : 0;
        flips[2] += fx ? 1 : 0;
        both += (fl && fx) ? 1 : 0;
        ens += (b & ErrorIndicatorTable::kFlipEns) ? 1 : 0;
    }
    if (out.n == 0) throw MissingClassError("no rows selected for the flip check");
    const auto n = static_cast<double>(out.n);
    for (std::size_t j = 0; j < 3; ++j) out.voter_flip_rate[j] = static_cast<double>(flips[j]) / n;
    out.both_flip_rate = static_cast<double>(both) / n;
    out.ensemble_flip_rate = static_cast<double>(ens) / n;
    out.min_pair_bound = std::min(out.voter_flip_rate[1], out.voter_flip_rate[2]);
    out.product_bound = out.voter_flip_rate[1] * out.voter_flip_rate[2];
    out.precondition_met = flips[0] == 0;
    if (!out.precondition_met) {
        out.note = "prototype voter flipped on " + std::to_string(flips[0]) + " rows; min-bound check skipped";
        return out;
    }
    out.holds = ens <= both && out.both_flip_rate <= out.min_pair_bound;
    return out;
}

}  // namespace protovote
