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
#include "protovote/workflow.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct Flags {
    std::string config;
    std::string input;
    std::string labels;
    std::string pcs;
    std::string model;
    std::uint64_t seed = 0;
    int folds = 0;
    double test_fraction = 0.0;
    std::string out;
    bool skip_normalization = false;
    protovote::Index top_variance = 0;
    bool quick = false;
};

std::vector<protovote::Index> parse_pcs(const std::string& s) {
    std::vector<protovote::Index> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size() || v <= 0) throw CLI::ValidationError("--pcs", "expected positive integers, got '" + item + "'");
        out.push_back(static_cast<protovote::Index>(v));
    }
    if (out.empty()) throw CLI::ValidationError("--pcs", "empty list");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"protovote: prototype classifier, gradient-boosted trees and their hard-vote ensemble"};
    app.set_version_flag("--version", std::string(PROTOVOTE_VERSION));
    app.require_subcommand(1);

    Flags f;
    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config", f.config, "JSON config; flags override its values")->check(CLI::ExistingFile);
        sub->add_option("--input", f.input, "expression matrix (CSV/TSV), or eval.json for report");
        sub->add_option("--labels", f.labels, "labels file with sample_id,label");
        sub->add_option("--pcs", f.pcs, "PC count or increasing comma list, e.g. 200,500,1000");
        sub->add_option("--model", f.model, "proto, gbdt_depth, gbdt_leaf or ensemble");
        sub->add_option("--seed", f.seed, "master seed");
        sub->add_option("--folds", f.folds, "cross-validation folds");
        sub->add_option("--test-fraction", f.test_fraction, "held-out fraction for the stratified split");
        sub->add_option("--out", f.out, "output directory");
        sub->add_flag("--skip-normalization", f.skip_normalization, "input is already normalized; skip CPM filter and logCPM");
        sub->add_option("--top-variance", f.top_variance, "keep this many most variable features (0 keeps all)");
    };
    const std::vector<std::pair<std::string, std::string>> subs{
        {"prep", "ingest, filter low expression, logCPM, optional top-variance selection"},
        {"split", "stratified hold-out split and k-fold assignment"},
        {"train", "fit scaler, PCA and learners on the training split"},
        {"eval", "metric rows per model and PC count on the held-out split"},
        {"cv", "per-fold and mean accuracy / balanced accuracy"},
        {"theory", "Monte-Carlo checks of the prototype and majority-vote guarantees"},
        {"report", "accuracy-vs-PCs tables from an eval sweep"}};
    for (const auto& [name, help] : subs) {
        CLI::App* sub = app.add_subcommand(name, help);
        common(sub);
        if (name == "theory") sub->add_flag("--quick", f.quick, "fewer trials");
    }

    CLI11_PARSE(app, argc, argv);
    CLI::App* sub = app.get_subcommands().front();
    const auto given = [&](const char* flag) {
        const CLI::Option* o = sub->get_option_no_throw(flag);
        return o != nullptr && o->count() > 0;
    };

    try {
        protovote::RunConfig cfg;
        if (given("--config")) cfg = protovote::apply_config_file(cfg, f.config);
        cfg.subcommand = sub->get_name();
        if (given("--input")) cfg.input = f.input;
        if (given("--labels")) cfg.labels = f.labels;
        if (given("--pcs")) cfg.pcs = parse_pcs(f.pcs);
        if (given("--model")) cfg.model = protovote::parse_model_choice(f.model);
        if (given("--seed")) cfg.seed = f.seed;
        if (given("--folds")) cfg.folds = f.folds;
        if (given("--test-fraction")) cfg.test_fraction = f.test_fraction;
        if (given("--out")) cfg.out = f.out;
        if (given("--skip-normalization")) cfg.skip_normalization = true;
        if (given("--top-variance")) cfg.top_variance = f.top_variance;
        if (given("--quick")) cfg.quick = true;

        const protovote::RunOutcome outcome = protovote::run(cfg, std::cerr);
        for (const auto& a : outcome.artifacts) std::cout << a.generic_string() << '\n';
        return outcome.exit_code;
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const protovote::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const protovote::ConfigurationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
