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

// Synthetic generators and Monte-Carlo experiments for the prototype-classifier
// and majority-vote guarantees. Trials run in parallel with per-trial seeds
// derived from the experiment seed, and results are reduced in trial order, so
// every report is independent of the thread count.

#pragma once

#include "protovote/ensemble.hpp"
#include "protovote/rng.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace protovote {

struct SyntheticSpec {
    int n_classes = 4;
    Index dim = 8;
    double separation = 1.0;  // requested minimum pairwise prototype distance
    double norm_bound = 1.0;  // B
    double noise = 0.3;       // isotropic Gaussian scale before clipping
    std::vector<Index> pool_sizes;  // per class; empty means 100 each
    std::uint64_t seed = 0;

    Index pool_size(int c) const;
};

/// C x dim prototype placement on the sphere of radius B: antipodal for two
/// classes, a regular simplex for C <= dim + 1, greedy farthest-point otherwise.
/// Throws InfeasibleError when the requested separation is not reached.
Eigen::MatrixXd place_prototypes(const SyntheticSpec& spec);

double min_pairwise_distance(const Eigen::MatrixXd& points);

struct SyntheticData {
    Eigen::MatrixXd x;  // rows inside the B-ball
    std::vector<int> labels;
    Eigen::MatrixXd placed;  // C x dim
};

/// Per class, pool_size(c) draws of clip(mu_c + noise * z). Class c draws come from
/// its own stream, so the first m draws of a class do not depend on other pool sizes.
SyntheticData gen_gaussian_prototype_data(const SyntheticSpec& spec);

/// Draws `n` clipped samples of class c from `rng`.
Eigen::MatrixXd draw_class_samples(const SyntheticSpec& spec, const Eigen::MatrixXd& placed, int c, Index n, Rng& rng);

/// Class-conditional means of the clipped distribution. Exact when noise is zero,
/// otherwise a seeded Monte-Carlo estimate with `n_mc` draws per class.
Eigen::MatrixXd population_prototypes(const SyntheticSpec& spec, const Eigen::MatrixXd& placed, Index n_mc = 400000);

enum class ReportKind { Bound, Identity, Skipped };

struct BoundReport {
    std::string name;
    ReportKind kind = ReportKind::Bound;
    double empirical = 0.0;
    double bound = 0.0;
    bool holds = false;
    long long trials = 0;
    std::string confidence_note;
    nlohmann::json details = nlohmann::json::object();
};

void to_json(nlohmann::json& j, const BoundReport& r);
void write_report_summary_csv(std::ostream& os, const std::vector<BoundReport>& reports);

/// B sqrt(2 log(2C / delta) / k)
double concentration_radius(double norm_bound, int n_classes, double delta, Index k);

/// Fraction of trials where max_c ||mean of k class-c draws - mu_c|| is within
/// the concentration radius; holds when the fraction is at least 1 - delta.
BoundReport concentration_experiment(const SyntheticSpec& spec, Index k, double delta, int trials);

struct MarginOptions {
    Index k = 50;
    double delta = 0.05;
    double residual_bound = 0.0;  // rho
    int trials = 200;
    Index queries_per_class = 200;
    double prior_ratio = 10.0;    // class 0 : other classes in the shifted pool
};

/// Balanced query error of prototype classifiers on balanced supports against
/// C exp(-gamma^2 / 2B^2), gamma = Delta/2 - eps_k. Also compares balanced error on
/// a 1:1 pool and a prior_ratio:1 pool built from shared per-class streams; their
/// supports coincide, so shared queries must receive identical predictions.
BoundReport margin_bound_experiment(const SyntheticSpec& spec, const MarginOptions& opt);

/// Probabilities of the eight outcomes of (I_H, I_L, I_X); cell index h + 2l + 4x.
struct JointErrorDistribution {
    std::array<double, 8> cell{};

    double marginal(int voter) const;
    double pair(int a, int b) const;
    double triple() const { return cell[7]; }
    double covariance(int a, int b) const { return pair(a, b) - marginal(a) * marginal(b); }
    /// Mass on outcomes with at least two errors.
    double vote_error() const;
};

/// Joint distribution with the given marginals (H, L, X) and pairwise covariances
/// (HL, HX, LX). The triple probability is the feasible value closest to
/// e_H e_L e_X. Throws InfeasibleError naming the violated cell constraint.
JointErrorDistribution solve_joint(std::array<double, 3> marginals, std::array<double, 3> covariances);

/// Draws `n` indicator triples as class-0 rows of a table.
ErrorIndicatorTable sample_joint(const JointErrorDistribution& joint, std::size_t n, std::uint64_t seed);

ErrorIndicatorTable joint_error_simulator(std::array<double, 3> marginals, std::array<double, 3> covariances,
                                          std::size_t n, std::uint64_t seed);

/// Random joints sampled into random-size tables; residual must be exactly zero.
BoundReport vote_identity_experiment(int n_tables, std::uint64_t seed);
/// Independent errors at rate eps; empirical vote error against the exact value within 3 sigma.
BoundReport independence_experiment(double eps, std::size_t n, std::uint64_t seed);
/// Random feasible joints; empirical vote error against the bound built from measured kappa.
BoundReport bounded_dependence_experiment(int n_joints, std::size_t n, std::uint64_t seed);
/// Equal error eps with covariance below the improvement threshold; vote error must beat eps.
BoundReport symmetric_improvement_experiment(double eps, int n_runs, std::size_t n, std::uint64_t seed);

enum class FlipDependence { Independent, Comonotone };

struct PriorShiftOptions {
    double p_l = 0.2;
    double p_x = 0.2;
    FlipDependence dependence = FlipDependence::Independent;
    /// Probability that the three voters agree before the shift. Below 1 the other
    /// samples start with H agreeing with exactly one of L and X.
    double agreement = 1.0;
    std::size_t n = 100000;
    std::uint64_t seed = 0;
};

ErrorIndicatorTable simulate_prior_shift(const PriorShiftOptions& opt);

/// Ensemble flip rate against min(p_L, p_X); under independence also against
/// p_L p_X + 3 sigma; under comonotone flips also the min bound attained within 3 sigma.
BoundReport prior_shift_experiment(const PriorShiftOptions& opt);

struct TheorySuiteConfig {
    std::uint64_t seed = 20240917;
    bool quick = false;  // fewer trials, for smoke runs
};

std::vector<BoundReport> run_theory_suite(const TheorySuiteConfig& cfg);

}  // namespace protovote
