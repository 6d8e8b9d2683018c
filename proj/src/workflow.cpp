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

#include "protovote/workflow.hpp"

#include "protovote/error.hpp"
#include "protovote/rng.hpp"
#include "protovote/theory_lab.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#ifndef PROTOVOTE_VERSION
#define PROTOVOTE_VERSION "0.0.0"
#endif

namespace protovote {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<const char*, 4> kModelOrder{"HF", "XGB", "LGB", "ENS"};

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

std::size_t line_of_key(std::string_view text, const std::string& key) {
    const auto pos = text.find("\"" + key + "\"");
    return pos == std::string_view::npos ? 1 : line_of_offset(text, pos);
}

json proto_to_json(const PrototypeConfig& p) {
    return {{"k", p.k}, {"p", p.p}, {"width", p.width}, {"norm_bound", p.norm_bound}, {"residual_bound", p.residual_bound}};
}

PrototypeConfig proto_from_json(const json& j, PrototypeConfig p) {
    for (const auto& [key, value] : j.items()) {
        if (key == "k") p.k = value.get<Index>();
        else if (key == "p") p.p = value.get<Index>();
        else if (key == "width") p.width = value.get<Index>();
        else if (key == "norm_bound") p.norm_bound = value.get<double>();
        else if (key == "residual_bound") p.residual_bound = value.get<double>();
        else throw std::invalid_argument("unknown prototype key '" + key + "'");
    }
    return p;
}

GbdtConfig gbdt_merge(const GbdtConfig& base, const json& patch) {
    json j = base;
    for (const auto& [key, value] : patch.items()) {
        if (!j.contains(key)) throw std::invalid_argument("unknown gbdt key '" + key + "'");
        j[key] = value;
    }
    return j.get<GbdtConfig>();
}

json meta_json(const RunConfig& cfg) {
    return {{"tool", "protovote"}, {"version", PROTOVOTE_VERSION}, {"seed", cfg.seed}, {"config_hash", cfg.hash()}};
}

std::string meta_comment(const RunConfig& cfg) {
    return std::string("protovote ") + PROTOVOTE_VERSION + " seed=" + std::to_string(cfg.seed) +
           " config_hash=" + cfg.hash();
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

void warn(RunOutcome& out, std::ostream& log, std::string msg) {
    log << "warning: " << msg << '\n';
    out.warnings.push_back(std::move(msg));
}

fs::path emit(RunOutcome& out, const fs::path& path, std::string_view content) {
    write_file_atomic(path, content);
    out.artifacts.push_back(path);
    return path;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, std::span<const Index> rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

std::vector<int> take(const std::vector<int>& v, std::span<const Index> rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (Index r : rows) out.push_back(v[r]);
    return out;
}

LoadedData load_inputs(const RunConfig& cfg, RunOutcome& out, std::ostream& log, bool normalize) {
    if (cfg.input.empty()) throw std::invalid_argument("--input is required");
    if (cfg.labels.empty()) throw std::invalid_argument("--labels is required");
    LoadedData d = load_matrix(cfg.input, cfg.labels, cfg.missing);
    if (d.report.unlabeled_samples_dropped)
        warn(out, log, std::to_string(d.report.unlabeled_samples_dropped) + " samples without a label dropped");
    if (d.report.features_dropped)
        warn(out, log, std::to_string(d.report.features_dropped) + " features with missing values dropped");
    if (normalize && !cfg.skip_normalization) {
        d.matrix = logcpm(filter_low_expression(d.matrix, cfg.cpm_threshold, cfg.min_fraction));
    }
    if (normalize && cfg.top_variance > 0) {
        Index keep = cfg.top_variance;
        if (keep > d.matrix.n_features()) {
            warn(out, log, "top_variance " + std::to_string(keep) + " exceeds " + std::to_string(d.matrix.n_features()) +
                               " features; keeping all");
            keep = d.matrix.n_features();
        }
        d.matrix = select_top_variance(d.matrix, keep);
    }
    return d;
}

std::vector<double> positive_scores(const Eigen::MatrixXd& posterior) {
    if (posterior.cols() != 2) return {};
    std::vector<double> s(static_cast<std::size_t>(posterior.rows()));
    for (Eigen::Index i = 0; i < posterior.rows(); ++i) s[static_cast<std::size_t>(i)] = posterior(i, 1);
    return s;
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void append_sidecar_log(const RunConfig& cfg, const RunOutcome& out) {
    std::ofstream log(cfg.out / "protovote.log", std::ios::app);
    log << timestamp_utc() << ' ' << cfg.subcommand << " seed=" << cfg.seed << " config_hash=" << cfg.hash()
        << " exit=" << out.exit_code << '\n';
    for (const auto& w : out.warnings) log << "  warning: " << w << '\n';
    for (const auto& a : out.artifacts) log << "  wrote " << a.generic_string() << '\n';
}

}  // namespace

const char* model_choice_name(ModelChoice m) {
    switch (m) {
        case ModelChoice::Proto: return "proto";
        case ModelChoice::GbdtDepth: return "gbdt_depth";
        case ModelChoice::GbdtLeaf: return "gbdt_leaf";
        case ModelChoice::Ensemble: return "ensemble";
    }
    return "ensemble";
}

ModelChoice parse_model_choice(const std::string& s) {
    if (s == "proto") return ModelChoice::Proto;
    if (s == "gbdt_depth") return ModelChoice::GbdtDepth;
    if (s == "gbdt_leaf") return ModelChoice::GbdtLeaf;
    if (s == "ensemble") return ModelChoice::Ensemble;
    throw std::invalid_argument("unknown model '" + s + "' (expected proto, gbdt_depth, gbdt_leaf or ensemble)");
}

void RunConfig::validate() const {
    static const std::vector<std::string> known{"", "prep", "split", "train", "eval", "cv", "theory", "report"};
    if (std::find(known.begin(), known.end(), subcommand) == known.end())
        throw ConfigurationError("unknown subcommand '" + subcommand + "'");
    if (pcs.empty()) throw ConfigurationError("pcs must list at least one value");
    for (std::size_t i = 0; i < pcs.size(); ++i) {
        if (pcs[i] == 0) throw ConfigurationError("pcs values must be positive");
        if (i > 0 && pcs[i] <= pcs[i - 1]) throw ConfigurationError("pcs values must be strictly increasing");
    }
    if (folds < 2) throw ConfigurationError("folds must be at least 2");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigurationError("test_fraction must lie in (0, 1)");
    if (cpm_threshold < 0.0) throw ConfigurationError("cpm_threshold must be non-negative");
    if (!(min_fraction >= 0.0 && min_fraction <= 1.0)) throw ConfigurationError("min_fraction must lie in [0, 1]");
    if (proto.norm_bound <= 0.0) throw ConfigurationError("proto.norm_bound must be positive");
    if (proto.residual_bound < 0.0) throw ConfigurationError("proto.residual_bound must be non-negative");
    try {
        gbdt_depth.validate();
        gbdt_leaf.validate();
    } catch (const std::exception& e) {
        throw ConfigurationError(e.what());
    }
}

json RunConfig::to_json() const {
    return {{"subcommand", subcommand},
            {"input", input.generic_string()},
            {"labels", labels.generic_string()},
            {"pcs", pcs},
            {"model", model_choice_name(model)},
            {"seed", seed},
            {"folds", folds},
            {"test_fraction", test_fraction},
            {"skip_normalization", skip_normalization},
            {"cpm_threshold", cpm_threshold},
            {"min_fraction", min_fraction},
            {"top_variance", top_variance},
            {"missing", missing == MissingPolicy::DropFeatures ? "drop_features" : "drop_samples"},
            {"quick", quick},
            {"proto", proto_to_json(proto)},
            {"gbdt_depth", json(gbdt_depth)},
            {"gbdt_leaf", json(gbdt_leaf)}};
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string RunConfig::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json().dump())));
    return buf;
}

RunConfig apply_config_text(RunConfig cfg, std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0), "invalid JSON config");
    }
    if (!j.is_object()) throw ParseError(1, "config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "input") cfg.input = value.get<std::string>();
            else if (key == "labels") cfg.labels = value.get<std::string>();
            else if (key == "pcs") cfg.pcs = value.is_array() ? value.get<std::vector<Index>>() : std::vector<Index>{value.get<Index>()};
            else if (key == "model") cfg.model = parse_model_choice(value.get<std::string>());
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "folds") cfg.folds = value.get<int>();
            else if (key == "test_fraction") cfg.test_fraction = value.get<double>();
            else if (key == "out") cfg.out = value.get<std::string>();
            else if (key == "skip_normalization") cfg.skip_normalization = value.get<bool>();
            else if (key == "cpm_threshold") cfg.cpm_threshold = value.get<double>();
            else if (key == "min_fraction") cfg.min_fraction = value.get<double>();
            else if (key == "top_variance") cfg.top_variance = value.get<Index>();
            else if (key == "missing") {
                const auto m = value.get<std::string>();
                if (m != "drop_features" && m != "drop_samples") throw std::invalid_argument("missing must be drop_features or drop_samples");
                cfg.missing = m == "drop_features" ? MissingPolicy::DropFeatures : MissingPolicy::DropSamples;
            } else if (key == "quick") cfg.quick = value.get<bool>();
            else if (key == "proto") cfg.proto = proto_from_json(value, cfg.proto);
            else if (key == "gbdt_depth") cfg.gbdt_depth = gbdt_merge(cfg.gbdt_depth, value);
            else if (key == "gbdt_leaf") cfg.gbdt_leaf = gbdt_merge(cfg.gbdt_leaf, value);
            else throw std::invalid_argument("unknown key");
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(line_of_key(text, key), "config key '" + key + "': " + e.what());
        }
    }
    return cfg;
}

RunConfig apply_config_file(RunConfig base, const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return apply_config_text(std::move(base), ss.str());
}

void write_file_atomic(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + tmp.string());
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!os) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string format_acc_bacc(double acc, double bacc) { return fmt("%.3f", acc) + " / " + fmt("%.3f", bacc); }

Eigen::MatrixXd FittedPipeline::transform_heldout(const Eigen::MatrixXd& x, std::span<const Index> rows) const {
    scaler.provenance.require_disjoint(rows);
    pca.provenance.require_disjoint(rows);
    return pca_transform(pca, scaler.transform(take_rows(x, rows)));
}

FittedPipeline fit_pipeline(const Eigen::MatrixXd& x, const LabelSet& y, std::span<const Index> train_rows, Index n_pcs,
                            const RunConfig& cfg, std::vector<std::string>* warnings) {
    const IndexList rows(train_rows.begin(), train_rows.end());
    FittedPipeline p;
    p.n_pcs_requested = n_pcs;
    const Eigen::MatrixXd xt = take_rows(x, rows);
    p.scaler = fit_standardizer(xt, Provenance::of("standardizer", rows));
    const Eigen::MatrixXd zt = p.scaler.transform(xt);
    const Index cap = max_components(rows.size(), static_cast<Index>(x.cols()));
    p.n_pcs = std::min(n_pcs, cap);
    if (p.n_pcs < n_pcs && warnings)
        warnings->push_back("n_pcs " + std::to_string(n_pcs) + " exceeds min(n_train - 1, d) = " + std::to_string(cap) +
                            "; clamped");
    p.pca = fit_pca(zt, p.n_pcs, Provenance::of("pca", rows));
    const Eigen::MatrixXd st = pca_transform(p.pca, zt);

    const LabelSet yt = y.select(rows);
    p.class_names = y.class_names;
    IndexList all(rows.size());
    std::iota(all.begin(), all.end(), Index{0});
    const Rng root = Rng(cfg.seed).split(0x70726f746fULL);
    const bool ens = cfg.model == ModelChoice::Ensemble;
    if (ens || cfg.model == ModelChoice::Proto) {
        PrototypeConfig pc = cfg.proto;
        pc.seed = root.split(0).next_u64();
        p.proto = std::make_shared<PrototypeVoter>(fit_prototype_classifier(st, yt, all, pc), p.class_names);
    }
    if (ens || cfg.model == ModelChoice::GbdtDepth) {
        GbdtConfig gc = cfg.gbdt_depth;
        gc.seed = root.split(1).next_u64();
        p.depth = std::make_shared<GbdtVoter>("XGB", fit_gbdt(st, yt, gc), p.class_names);
    }
    if (ens || cfg.model == ModelChoice::GbdtLeaf) {
        GbdtConfig gc = cfg.gbdt_leaf;
        gc.seed = root.split(2).next_u64();
        p.leaf = std::make_shared<GbdtVoter>("LGB", fit_gbdt(st, yt, gc), p.class_names);
    }
    return p;
}

std::vector<ModelPredictions> predict_selected(const FittedPipeline& p, const Eigen::MatrixXd& z, ModelChoice m) {
    std::vector<ModelPredictions> out;
    for (const Voter* v : {static_cast<const Voter*>(p.proto.get()), static_cast<const Voter*>(p.depth.get()),
                           static_cast<const Voter*>(p.leaf.get())}) {
        if (v) out.push_back({v->name(), v->predict(z), v->posterior(z)});
    }
    if (m == ModelChoice::Ensemble) {
        // voter order H, L, X
        const VoterSet voters(p.proto, p.leaf, p.depth);
        VoteResult vote = hard_vote(voters, z);
        out.push_back({"ENS", std::move(vote.ensemble), std::move(vote.mean_posterior)});
    }
    return out;
}

RunOutcome run_prep(const RunConfig& cfg, std::ostream& log) {
    RunOutcome out;
    const LoadedData raw = load_inputs(cfg, out, log, false);
    LoadedData d = raw;
    if (!cfg.skip_normalization) d.matrix = logcpm(filter_low_expression(d.matrix, cfg.cpm_threshold, cfg.min_fraction));
    const Index after_filter = d.matrix.n_features();
    if (cfg.top_variance > 0) {
        Index keep = cfg.top_variance;
        if (keep > d.matrix.n_features()) {
            warn(out, log, "top_variance exceeds feature count; keeping all " + std::to_string(d.matrix.n_features()));
            keep = d.matrix.n_features();
        }
        d.matrix = select_top_variance(d.matrix, keep);
    }
    write_matrix_csv(cfg.out / "processed.csv.tmp", d.matrix, meta_comment(cfg));
    fs::rename(cfg.out / "processed.csv.tmp", cfg.out / "processed.csv");
    out.artifacts.push_back(cfg.out / "processed.csv");
    write_labels_csv(cfg.out / "labels.csv.tmp", d.labels, meta_comment(cfg));
    fs::rename(cfg.out / "labels.csv.tmp", cfg.out / "labels.csv");
    out.artifacts.push_back(cfg.out / "labels.csv");
    const json summary = {{"meta", meta_json(cfg)},
                          {"n_samples", d.matrix.n_samples()},
                          {"n_features_loaded", raw.matrix.n_features()},
                          {"n_features_after_filter", after_filter},
                          {"n_features_out", d.matrix.n_features()},
                          {"unlabeled_samples_dropped", raw.report.unlabeled_samples_dropped},
                          {"features_dropped_missing", raw.report.features_dropped},
                          {"normalized", !cfg.skip_normalization},
                          {"class_names", d.labels.class_names},
                          {"class_counts", d.labels.class_counts()}};
    emit(out, cfg.out / "prep.json", summary.dump(2) + "\n");
    log << "prep: " << d.matrix.n_samples() << " samples x " << d.matrix.n_features() << " features\n";
    return out;
}

RunOutcome run_split(const RunConfig& cfg, std::ostream& log) {
    RunOutcome out;
    const LabelSet y = !cfg.labels.empty() && cfg.input.empty() ? read_labels(cfg.labels)
                                                                 : load_inputs(cfg, out, log, false).labels;
    const SplitPlan holdout = stratified_split(y, cfg.test_fraction, cfg.seed);
    const SplitPlan kfold = stratified_kfold(y, cfg.folds, cfg.seed);
    for (const auto& w : holdout.warnings) warn(out, log, w);
    for (const auto& w : kfold.warnings) warn(out, log, w);
    emit(out, cfg.out / "split.json", json{{"meta", meta_json(cfg)}, {"plan", holdout}}.dump(2) + "\n");
    emit(out, cfg.out / "folds.json", json{{"meta", meta_json(cfg)}, {"plan", kfold}}.dump(2) + "\n");
    log << "split: " << holdout.train_indices.size() << " train / " << holdout.test_indices.size() << " test, "
        << cfg.folds << " folds\n";
    return out;
}

RunOutcome run_train(const RunConfig& cfg, std::ostream& log) {
    RunOutcome out;
    const LoadedData d = load_inputs(cfg, out, log, true);
    const SplitPlan plan = stratified_split(d.labels, cfg.test_fraction, cfg.seed);
    for (const auto& w : plan.warnings) warn(out, log, w);
    for (Index n : cfg.pcs) {
        std::vector<std::string> notes;
        const FittedPipeline p = fit_pipeline(d.matrix.values, d.labels, plan.train_indices, n, cfg, &notes);
        for (auto& w : notes) warn(out, log, std::move(w));
        json models = json::object();
        if (p.proto) models["HF"] = p.proto->model();
        if (p.depth) models["XGB"] = p.depth->model();
        if (p.leaf) models["LGB"] = p.leaf->model();
        const json artifact = {{"meta", meta_json(cfg)},
                               {"model", model_choice_name(cfg.model)},
                               {"n_pcs_requested", p.n_pcs_requested},
                               {"n_pcs", p.n_pcs},
                               {"feature_names", d.matrix.feature_names},
                               {"class_names", p.class_names},
                               {"train_indices", plan.train_indices},
                               {"standardizer", p.scaler},
                               {"pca", p.pca},
                               {"models", models}};
        emit(out, cfg.out / ("model_pcs" + std::to_string(n) + ".json"), artifact.dump() + "\n");
        log << "train: " << n << " PCs fitted on " << plan.train_indices.size() << " rows\n";
    }
    return out;
}

RunOutcome run_eval(const RunConfig& cfg, std::ostream& log) {
    RunOutcome out;
    const LoadedData d = load_inputs(cfg, out, log, true);
    const SplitPlan plan = stratified_split(d.labels, cfg.test_fraction, cfg.seed);
    for (const auto& w : plan.warnings) warn(out, log, w);
    const std::vector<int> y_test = take(d.labels.labels, plan.test_indices);
    const int C = d.labels.n_classes();

    struct Row {
        std::string model;
        Index n_pcs_requested;
        Index n_pcs;
        MetricsReport report;
    };
    std::vector<Row> rows;
    for (Index n : cfg.pcs) {
        std::vector<std::string> notes;
        const FittedPipeline p = fit_pipeline(d.matrix.values, d.labels, plan.train_indices, n, cfg, &notes);
        for (auto& w : notes) warn(out, log, std::move(w));
        const Eigen::MatrixXd z = p.transform_heldout(d.matrix.values, plan.test_indices);
        for (const auto& m : predict_selected(p, z, cfg.model)) {
            const auto scores = positive_scores(m.posterior);
            rows.push_back({m.model, n, p.n_pcs, build_report(y_test, m.predicted, C, scores)});
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        const auto rank = [](const std::string& s) { return std::find(kModelOrder.begin(), kModelOrder.end(), s) - kModelOrder.begin(); };
        return rank(a.model) < rank(b.model);
    });

    std::ostringstream csv;
    csv << "# " << meta_comment(cfg) << '\n';
    write_metrics_header(csv);
    json results = json::array();
    for (const auto& r : rows) {
        write_metrics_row(csv, r.model + " (" + std::to_string(r.n_pcs_requested) + ")", r.report);
        results.push_back({{"model", r.model}, {"n_pcs_requested", r.n_pcs_requested}, {"n_pcs", r.n_pcs}, {"metrics", r.report}});
    }
    emit(out, cfg.out / "eval.csv", csv.str());
    emit(out, cfg.out / "eval.json",
         json{{"meta", meta_json(cfg)},
              {"test_fraction", cfg.test_fraction},
              {"n_train", plan.train_indices.size()},
              {"n_test", plan.test_indices.size()},
              {"class_names", d.labels.class_names},
              {"results", results}}
                 .dump(2) + "\n");
    log << "eval: " << rows.size() << " rows on " << plan.test_indices.size() << " held-out samples\n";
    return out;
}

RunOutcome run_cv(const RunConfig& cfg, std::ostream& log) {
    RunOutcome out;
    const LoadedData d = load_inputs(cfg, out, log, true);
    const SplitPlan plan = stratified_kfold(d.labels, cfg.folds, cfg.seed);
    for (const auto& w : plan.warnings) warn(out, log, w);
    const int C = d.labels.n_classes();

    std::ostringstream folds_csv;
    folds_csv << "# " << meta_comment(cfg) << '\n' << "PCs,Fold,Model,Accuracy,BalancedAccuracy\n";
    std::ostringstream table;
    table << "# " << meta_comment(cfg) << '\n' << "PCs";
    std::vector<std::string> columns;
    json per_pcs = json::array();

    for (Index n : cfg.pcs) {
        std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> acc;  // model -> (acc, bacc)
        Index used = n;
        for (int f = 0; f < plan.n_folds(); ++f) {
            const SplitPlan fold = plan.fold(f);
            std::vector<std::string> notes;
            const FittedPipeline p = fit_pipeline(d.matrix.values, d.labels, fold.train_indices, n, cfg, &notes);
            for (auto& w : notes) warn(out, log, "fold " + std::to_string(f) + ": " + w);
            used = std::min(used, p.n_pcs);
            const Eigen::MatrixXd z = p.transform_heldout(d.matrix.values, fold.test_indices);
            const std::vector<int> yt = take(d.labels.labels, fold.test_indices);
            for (const auto& m : predict_selected(p, z, cfg.model)) {
                const MetricsReport r = build_report(yt, m.predicted, C);
                acc[m.model].first.push_back(r.accuracy);
                acc[m.model].second.push_back(r.balanced_accuracy);
                folds_csv << n << ',' << f << ',' << m.model << ',' << fmt("%.4f", r.accuracy) << ','
                          << fmt("%.4f", r.balanced_accuracy) << '\n';
            }
        }
        if (columns.empty()) {
            for (const char* name : kModelOrder)
                if (acc.count(name)) {
                    columns.emplace_back(name);
                    table << ',' << name;
                }
            table << '\n';
        }
        table << n;
        json models = json::object();
        for (const auto& name : columns) {
            const auto& [a, b] = acc.at(name);
            const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
            const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
            table << ',' << format_acc_bacc(ma, mb);
            models[name] = {{"fold_accuracy", a}, {"fold_balanced_accuracy", b}, {"mean_accuracy", ma}, {"mean_balanced_accuracy", mb}};
        }
        table << '\n';
        per_pcs.push_back({{"n_pcs_requested", n}, {"min_n_pcs_used", used}, {"models", models}});
    }
    emit(out, cfg.out / "cv.csv", table.str());
    emit(out, cfg.out / "cv_folds.csv", folds_csv.str());
    emit(out, cfg.out / "cv.json",
         json{{"meta", meta_json(cfg)}, {"folds", plan.n_folds()}, {"class_names", d.labels.class_names}, {"results", per_pcs}}
                 .dump(2) + "\n");
    log << "cv: " << plan.n_folds() << " folds x " << cfg.pcs.size() << " PC settings\n";
    return out;
}

RunOutcome run_theory(const RunConfig& cfg, std::ostream& log) {
    RunOutcome out;
    TheorySuiteConfig tc;
    tc.seed = cfg.seed;
    tc.quick = cfg.quick;
    const std::vector<BoundReport> reports = run_theory_suite(tc);
    bool all_hold = true;
    for (const auto& r : reports) {
        if (r.kind != ReportKind::Skipped && !r.holds) all_hold = false;
        log << (r.kind == ReportKind::Skipped ? "SKIP " : r.holds ? "ok   " : "FAIL ") << r.name << '\n';
    }
    emit(out, cfg.out / "theory.json", json{{"meta", meta_json(cfg)}, {"reports", reports}}.dump(2) + "\n");
    std::ostringstream csv;
    csv << "# " << meta_comment(cfg) << '\n';
    write_report_summary_csv(csv, reports);
    emit(out, cfg.out / "theory_summary.csv", csv.str());
    out.exit_code = all_hold ? 0 : 3;
    return out;
}

RunOutcome run_report(const RunConfig& cfg, std::ostream& log) {
    RunOutcome out;
    if (cfg.input.empty()) throw std::invalid_argument("--input must name an eval.json or a directory holding one");
    const fs::path src = fs::is_directory(cfg.input) ? cfg.input / "eval.json" : cfg.input;
    std::ifstream in(src);
    if (!in) throw std::runtime_error("cannot open " + src.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(1, src.string() + ": " + e.what());
    }
    std::map<Index, std::map<std::string, std::pair<double, double>>> table;
    std::vector<std::string> seen;
    for (const auto& r : j.at("results")) {
        const auto model = r.at("model").get<std::string>();
        const auto& m = r.at("metrics");
        table[r.at("n_pcs_requested").get<Index>()][model] = {m.at("accuracy").get<double>(), m.at("balanced_accuracy").get<double>()};
        if (std::find(seen.begin(), seen.end(), model) == seen.end()) seen.push_back(model);
    }
    std::vector<std::string> columns;
    for (const char* name : kModelOrder)
        if (std::find(seen.begin(), seen.end(), name) != seen.end()) columns.emplace_back(name);

    const std::string source_hash = j.contains("meta") ? j["meta"].value("config_hash", std::string{}) : std::string{};
    for (int which = 0; which < 2; ++which) {
        std::ostringstream csv;
        csv << "# " << meta_comment(cfg) << " source_config_hash=" << source_hash << '\n' << "PCs";
        for (const auto& c : columns) csv << ',' << c;
        csv << '\n';
        for (const auto& [n, models] : table) {
            csv << n;
            for (const auto& c : columns) {
                const auto it = models.find(c);
                csv << ',' << (it == models.end() ? std::string("NA") : fmt("%.4f", which == 0 ? it->second.first : it->second.second));
            }
            csv << '\n';
        }
        emit(out, cfg.out / (which == 0 ? "accuracy_vs_pcs.csv" : "balanced_accuracy_vs_pcs.csv"), csv.str());
    }
    log << "report: " << table.size() << " PC settings, " << columns.size() << " models\n";
    return out;
}

RunOutcome run(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    fs::create_directories(cfg.out);
    RunOutcome out;
    if (cfg.subcommand == "prep") out = run_prep(cfg, log);
    else if (cfg.subcommand == "split") out = run_split(cfg, log);
    else if (cfg.subcommand == "train") out = run_train(cfg, log);
    else if (cfg.subcommand == "eval") out = run_eval(cfg, log);
    else if (cfg.subcommand == "cv") out = run_cv(cfg, log);
    else if (cfg.subcommand == "theory") out = run_theory(cfg, log);
    else if (cfg.subcommand == "report") out = run_report(cfg, log);
    else throw ConfigurationError("no subcommand given");
    append_sidecar_log(cfg, out);
    return out;
}

}  // namespace protovote
