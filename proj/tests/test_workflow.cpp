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

#include "protovote/error.hpp"
#include "protovote/rng.hpp"
#include "protovote/workflow.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <regex>
#include <sstream>

namespace protovote {
namespace {

using protovote::testing::read_text;
using protovote::testing::TempDir;
using protovote::testing::write_text;

// Two classes whose high- and low-expression gene blocks are swapped.
void write_separable(const TempDir& dir, int n_per_class, std::uint64_t seed) {
    Rng rng(seed);
    std::ostringstream counts;
    std::ostringstream labels;
    counts << "sample_id";
    for (int g = 0; g < 20; ++g) counts << ",g" << g;
    counts << '\n';
    labels << "sample_id,label\n";
    for (int i = 0; i < 2 * n_per_class; ++i) {
        const bool b = i % 2 == 1;
        counts << "S" << i;
        for (int g = 0; g < 20; ++g) {
            const bool high = (g < 10) != b;
            counts << ',' << (high ? 900 : 30) + static_cast<int>(rng.below(40));
        }
        counts << '\n';
        labels << "S" << i << ',' << (b ? "B" : "A") << '\n';
    }
    write_text(dir / "counts.csv", counts.str());
    write_text(dir / "labels.csv", labels.str());
}

RunConfig quick_config(const TempDir& dir) {
    RunConfig cfg;
    cfg.input = dir / "counts.csv";
    cfg.labels = dir / "labels.csv";
    cfg.out = dir / "out";
    cfg.pcs = {4};
    cfg.gbdt_depth.n_rounds = 20;
    cfg.gbdt_leaf.n_rounds = 20;
    return cfg;
}

TEST(Config, FileValuesAndLineNumbers) {
    RunConfig cfg = apply_config_text(RunConfig{}, R"({"seed": 9, "pcs": [5, 10], "model": "proto",
 "gbdt_leaf": {"n_rounds": 7}})");
    EXPECT_EQ(cfg.seed, 9u);
    EXPECT_EQ(cfg.pcs, (std::vector<Index>{5, 10}));
    EXPECT_EQ(cfg.model, ModelChoice::Proto);
    EXPECT_EQ(cfg.gbdt_leaf.n_rounds, 7);
    EXPECT_EQ(cfg.gbdt_leaf.growth, Growth::LeafWise);

    try {
        apply_config_text(RunConfig{}, "{\n  \"seed\": 1,\n  \"colour\": 3\n}");
        FAIL() << "unknown key accepted";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
    EXPECT_THROW(apply_config_text(RunConfig{}, "{\"seed\": 1,"), ParseError);
}

TEST(Config, ValidateRejectsBadValues) {
    RunConfig cfg;
    cfg.pcs = {10, 5};
    EXPECT_THROW(cfg.validate(), ConfigurationError);
    cfg = RunConfig{};
    cfg.test_fraction = 1.0;
    EXPECT_THROW(cfg.validate(), ConfigurationError);
    EXPECT_THROW(parse_model_choice("forest"), std::invalid_argument);
}

TEST(Config, HashIgnoresOutputDirectory) {
    RunConfig a;
    RunConfig b;
    b.out = "elsewhere";
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_EQ(a.hash().size(), 16u);
    b.seed = 43;
    EXPECT_NE(a.hash(), b.hash());
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Io, AtomicWriteReplacesWholeFile) {
    TempDir dir("pv_atomic");
    write_file_atomic(dir / "f.txt", "first version, long");
    write_file_atomic(dir / "f.txt", "second");
    EXPECT_EQ(read_text(dir / "f.txt"), "second");
    EXPECT_FALSE(std::filesystem::exists(dir / "f.txt.tmp"));
}

TEST(Eval, SeparableDataScoresPerfectly) {
    TempDir dir("pv_eval");
    write_separable(dir, 30, 1);
    RunConfig cfg = quick_config(dir);
    cfg.subcommand = "eval";
    std::ostringstream log;
    const RunOutcome o = run(cfg, log);
    EXPECT_EQ(o.exit_code, 0);
    const auto j = nlohmann::json::parse(read_text(cfg.out / "eval.json"));
    ASSERT_EQ(j.at("results").size(), 4u);
    for (const auto& r : j.at("results")) EXPECT_DOUBLE_EQ(r.at("metrics").at("accuracy").get<double>(), 1.0) << r.at("model");
    const std::string csv = read_text(cfg.out / "eval.csv");
    EXPECT_EQ(csv.rfind("# protovote", 0), 0u);
    EXPECT_NE(csv.find("\nHF (4),1.0000"), std::string::npos) << csv;
    EXPECT_NE(csv.find("\nENS (4),"), std::string::npos);
}

TEST(Eval, ByteIdenticalAcrossRuns) {
    TempDir dir("pv_det");
    write_separable(dir, 25, 2);
    RunConfig cfg = quick_config(dir);
    cfg.subcommand = "eval";
    std::ostringstream log;
    run(cfg, log);
    const std::string first = read_text(cfg.out / "eval.json");
    run(cfg, log);
    EXPECT_EQ(first, read_text(cfg.out / "eval.json"));
}

TEST(Eval, ClampsOversizedPcCountWithWarning) {
    TempDir dir("pv_clamp");
    write_separable(dir, 20, 3);
    RunConfig cfg = quick_config(dir);
    cfg.subcommand = "eval";
    cfg.model = ModelChoice::Proto;
    cfg.pcs = {500};
    std::ostringstream log;
    const RunOutcome o = run(cfg, log);
    ASSERT_FALSE(o.warnings.empty());
    EXPECT_NE(o.warnings.front().find("clamped"), std::string::npos);
    const auto j = nlohmann::json::parse(read_text(cfg.out / "eval.json"));
    EXPECT_EQ(j.at("results")[0].at("n_pcs_requested").get<Index>(), 500u);
    EXPECT_LE(j.at("results")[0].at("n_pcs").get<Index>(), 20u);
}

TEST(Cv, TableLayout) {
    TempDir dir("pv_cv");
    write_separable(dir, 20, 4);
    RunConfig cfg = quick_config(dir);
    cfg.subcommand = "cv";
    cfg.folds = 4;
    cfg.pcs = {3, 6};
    std::ostringstream log;
    run(cfg, log);
    std::istringstream csv(read_text(cfg.out / "cv.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line.rfind("# protovote", 0), 0u);
    std::getline(csv, line);
    EXPECT_EQ(line, "PCs,HF,XGB,LGB,ENS");
    const std::regex row(R"(\d+(,\d\.\d{3} / \d\.\d{3}){4})");
    int rows = 0;
    while (std::getline(csv, line)) {
        EXPECT_TRUE(std::regex_match(line, row)) << line;
        ++rows;
    }
    EXPECT_EQ(rows, 2);
    EXPECT_EQ(format_acc_bacc(0.91234, 0.5), "0.912 / 0.500");
}

TEST(Report, TablesFromEvalSweep) {
    TempDir dir("pv_report");
    write_separable(dir, 20, 5);
    RunConfig cfg = quick_config(dir);
    cfg.subcommand = "eval";
    cfg.pcs = {2, 4};
    std::ostringstream log;
    run(cfg, log);
    RunConfig rep;
    rep.subcommand = "report";
    rep.input = cfg.out;
    rep.out = dir / "report";
    const RunOutcome o = run(rep, log);
    EXPECT_EQ(o.exit_code, 0);
    const std::string acc = read_text(rep.out / "accuracy_vs_pcs.csv");
    EXPECT_NE(acc.find("HF"), std::string::npos);
    EXPECT_TRUE(std::filesystem::exists(rep.out / "balanced_accuracy_vs_pcs.csv"));
}

TEST(Errors, MissingInputReported) {
    TempDir dir("pv_missing");
    RunConfig cfg;
    cfg.subcommand = "eval";
    cfg.input = dir / "nope.csv";
    cfg.labels = dir / "nope_labels.csv";
    cfg.out = dir / "out";
    std::ostringstream log;
    EXPECT_ANY_THROW(run(cfg, log));
}

}  // namespace
}  // namespace protovote
