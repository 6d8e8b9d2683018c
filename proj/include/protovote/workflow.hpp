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

// Subcommand implementations behind the `protovote` executable. Every artifact
// carries {tool, version, seed, config_hash}; wall-clock timestamps go only to
// the sidecar log, so reruns with the same inputs produce identical files.

#pragma once

#include "protovote/data_pipeline.hpp"
#include "protovote/ensemble.hpp"
#include "protovote/gbdt.hpp"
#include "protovote/linalg.hpp"
#include "protovote/metrics.hpp"
#include "protovote/prototype.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace protovote {

enum class ModelChoice { Proto, GbdtDepth, GbdtLeaf, Ensemble };

const char* model_choice_name(ModelChoice m);
ModelChoice parse_model_choice(const std::string& s);

struct RunConfig {
    std::string subcommand;
    std::filesystem::path input;
    std::filesystem::path labels;
    std::vector<Index> pcs{50};  // positive, strictly increasing
    ModelChoice model = ModelChoice::Ensemble;
    std::uint64_t seed = 42;
    int folds = 5;
    double test_fraction = 0.25;
    std::filesystem::path out = "protovote_out";
    bool skip_normalization = false;

    // prep
    double cpm_threshold = 1.0;
    double min_fraction = 0.10;
    Index top_variance = 0;  // 0 keeps every surviving feature
    MissingPolicy missing = MissingPolicy::DropFeatures;

    // theory
    bool quick = false;

    PrototypeConfig proto;
    GbdtConfig gbdt_depth = GbdtConfig::depth_wise(6);
    GbdtConfig gbdt_leaf = GbdtConfig::leaf_wise(31);

    void validate() const;
    /// Everything that influences results; the output directory is left out.
    nlohmann::json to_json() const;
    /// FNV-1a 64 of the canonical to_json() dump, as 16 hex digits.
    std::string hash() const;
};

/// Applies the keys of a JSON config on top of `base`. Syntax errors and unknown or
/// ill-typed keys raise ParseError with the line of the offending text.
RunConfig apply_config_text(RunConfig base, std::string_view text);
RunConfig apply_config_file(RunConfig base, const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);

/// Writes `content` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Standardizer and PCA fitted on training rows, plus whichever learners were asked for.
struct FittedPipeline {
    Index n_pcs_requested = 0;
    Index n_pcs = 0;
    Standardizer scaler;
    PcaModel pca;
    std::vector<std::string> class_names;
    std::shared_ptr<PrototypeVoter> proto;
    std::shared_ptr<GbdtVoter> depth;  // "XGB"
    std::shared_ptr<GbdtVoter> leaf;   // "LGB"

    /// Standardize then project. Throws LeakageError when any of `rows` (indices into
    /// the matrix the pipeline was fitted on) took part in fitting.
    Eigen::MatrixXd transform_heldout(const Eigen::MatrixXd& x, std::span<const Index> rows) const;
};

/// `warnings` receives the clamping note when n_pcs exceeds min(n_train - 1, d).
FittedPipeline fit_pipeline(const Eigen::MatrixXd& x, const LabelSet& y, std::span<const Index> train_rows,
                            Index n_pcs, const RunConfig& cfg, std::vector<std::string>* warnings = nullptr);

struct ModelPredictions {
    std::string model;  // HF, XGB, LGB or ENS
    std::vector<int> predicted;
    Eigen::MatrixXd posterior;
};

/// Predictions of the selected model; the ensemble choice yields all three voters then ENS.
std::vector<ModelPredictions> predict_selected(const FittedPipeline& p, const Eigen::MatrixXd& z, ModelChoice m);

struct RunOutcome {
    int exit_code = 0;
    std::vector<std::filesystem::path> artifacts;
    std::vector<std::string> warnings;
};

/// Dispatches on cfg.subcommand. Diagnostics go to `log`; files land in cfg.out.
RunOutcome run(const RunConfig& cfg, std::ostream& log);

RunOutcome run_prep(const RunConfig& cfg, std::ostream& log);
RunOutcome run_split(const RunConfig& cfg, std::ostream& log);
RunOutcome run_train(const RunConfig& cfg, std::ostream& log);
RunOutcome run_eval(const RunConfig& cfg, std::ostream& log);
RunOutcome run_cv(const RunConfig& cfg, std::ostream& log);
RunOutcome run_theory(const RunConfig& cfg, std::ostream& log);
RunOutcome run_report(const RunConfig& cfg, std::ostream& log);

/// "0.740 / 0.650"
std::string format_acc_bacc(double acc, double bacc);

}  // namespace protovote
