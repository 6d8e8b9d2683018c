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

#include "protovote/data_pipeline.hpp"

#include "protovote/error.hpp"
#include "protovote/kernels.hpp"
#include "protovote/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace protovote {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\r' || s[b] == '\n')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
    std::string out(s.substr(b, e - b));
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
    return out;
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delim, start);
        if (pos == std::string::npos) {
            fields.push_back(trim(std::string_view(line).substr(start)));
            break;
        }
        fields.push_back(trim(std::string_view(line).substr(start, pos - start)));
        start = pos + 1;
    }
    return fields;
}

char detect_delimiter(const std::string& header) {
    return header.find('\t') != std::string::npos ? '\t' : ',';
}

bool is_missing_token(const std::string& s) {
    return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "NULL" || s == "null";
}

// Missing cells become NaN; anything else that does not parse is a ParseError.
double parse_cell(const std::string& s, std::size_t line) {
    if (is_missing_token(s)) return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        if (ec == std::errc::result_out_of_range) return std::numeric_limits<double>::infinity();
        throw ParseError(line, "cannot parse numeric value '" + s + "'");
    }
    return v;
}

bool read_nonempty_line(std::istream& in, std::string& line, std::size_t& line_no) {
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (!t.empty() && t.front() != '#') return true;
    }
    return false;
}

std::ifstream open_or_throw(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    return in;
}

bool parse_int(const std::string& s, long long& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

double round_half_up(double x) { return std::floor(x + 0.5 + 1e-9); }

void write_atomically(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

void ExpressionMatrix::validate() const {
    if (static_cast<Index>(values.rows()) != sample_ids.size())
        throw std::invalid_argument("row count does not match sample_ids");
    if (static_cast<Index>(values.cols()) != feature_names.size())
        throw std::invalid_argument("column count does not match feature_names");
    std::unordered_set<std::string> seen;
    for (const auto& f : feature_names)
        if (!seen.insert(f).second) throw std::invalid_argument("duplicate feature name '" + f + "'");
    if (!values.allFinite()) throw std::invalid_argument("matrix holds non-finite values");
}

ExpressionMatrix ExpressionMatrix::select_rows(std::span<const Index> rows) const {
    ExpressionMatrix out;
    out.feature_names = feature_names;
    out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
    out.sample_ids.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.values.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(rows[i]));
        out.sample_ids.push_back(sample_ids[rows[i]]);
    }
    return out;
}

ExpressionMatrix ExpressionMatrix::select_columns(std::span<const Index> cols) const {
    ExpressionMatrix out;
    out.sample_ids = sample_ids;
    out.values.resize(values.rows(), static_cast<Eigen::Index>(cols.size()));
    out.feature_names.reserve(cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
        out.values.col(static_cast<Eigen::Index>(j)) = values.col(static_cast<Eigen::Index>(cols[j]));
        out.feature_names.push_back(feature_names[cols[j]]);
    }
    return out;
}

std::vector<Index> LabelSet::class_counts() const {
    std::vector<Index> counts(class_names.size(), 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    return counts;
}

int LabelSet::class_id(const std::string& name) const {
    for (std::size_t c = 0; c < class_names.size(); ++c)
        if (class_names[c] == name) return static_cast<int>(c);
    throw std::out_of_range("unknown class '" + name + "'");
}

LabelSet LabelSet::select(std::span<const Index> rows) const {
    LabelSet out;
    out.class_names = class_names;
    out.labels.reserve(rows.size());
    for (Index r : rows) {
        out.labels.push_back(labels[r]);
        if (!sample_ids.empty()) out.sample_ids.push_back(sample_ids[r]);
    }
    return out;
}

void LabelSet::validate() const {
    if (!sample_ids.empty() && sample_ids.size() != labels.size())
        throw std::invalid_argument("labels not aligned with sample_ids");
    for (int l : labels)
        if (l < 0 || l >= n_classes()) throw std::invalid_argument("label outside class map");
}

LabelSet LabelSet::from_names(std::vector<std::string> ids, const std::vector<std::string>& names) {
    if (ids.size() != names.size()) throw std::invalid_argument("ids and names differ in length");
    std::vector<std::string> distinct(names.begin(), names.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    const bool all_int = std::all_of(distinct.begin(), distinct.end(), [](const std::string& s) {
        long long v = 0;
        return parse_int(s, v);
    });
    if (all_int) {
        std::sort(distinct.begin(), distinct.end(), [](const std::string& a, const std::string& b) {
            long long x = 0;
            long long y = 0;
            parse_int(a, x);
            parse_int(b, y);
            return x < y;
        });
    }
    std::unordered_map<std::string, int> id_of;
    for (std::size_t c = 0; c < distinct.size(); ++c) id_of[distinct[c]] = static_cast<int>(c);
    LabelSet out;
    out.sample_ids = std::move(ids);
    out.class_names = distinct;
    out.labels.reserve(names.size());
    for (const auto& n : names) out.labels.push_back(id_of.at(n));
    return out;
}

LabelSet LabelSet::from_ids(std::vector<int> ids, int n_classes) {
    int c_max = -1;
    for (int l : ids) {
        if (l < 0) throw std::invalid_argument("negative class id");
        c_max = std::max(c_max, l);
    }
    if (n_classes < 0) n_classes = c_max + 1;
    if (c_max >= n_classes) throw std::invalid_argument("class id exceeds n_classes");
    LabelSet out;
    out.labels = std::move(ids);
    for (int c = 0; c < n_classes; ++c) out.class_names.push_back(std::to_string(c));
    out.sample_ids.reserve(out.labels.size());
    for (std::size_t i = 0; i < out.labels.size(); ++i) out.sample_ids.push_back("s" + std::to_string(i));
    return out;
}

LabelSet read_labels(const std::filesystem::path& label_path) {
    auto in = open_or_throw(label_path);
    std::string line;
    std::size_t line_no = 0;
    if (!read_nonempty_line(in, line, line_no)) throw ParseError(1, "labels file is empty");
    const char delim = detect_delimiter(line);
    const auto header = split_fields(line, delim);
    if (header.size() < 2) throw ParseError(line_no, "labels header needs columns sample_id,label");
    std::size_t id_col = 0;
    std::size_t label_col = 1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "sample_id") id_col = i;
        if (header[i] == "label") label_col = i;
    }
    if (id_col == label_col) throw ParseError(line_no, "labels header needs distinct sample_id and label columns");

    std::vector<std::string> ids;
    std::vector<std::string> names;
    std::unordered_set<std::string> seen;
    while (read_nonempty_line(in, line, line_no)) {
        const auto fields = split_fields(line, delim);
        if (fields.size() != header.size())
            throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                          std::to_string(fields.size()));
        if (fields[id_col].empty()) throw ParseError(line_no, "empty sample_id");
        if (fields[label_col].empty()) continue;  // unlabeled
        if (!seen.insert(fields[id_col]).second)
            throw ParseError(line_no, "duplicate sample_id '" + fields[id_col] + "'");
        ids.push_back(fields[id_col]);
        names.push_back(fields[label_col]);
    }
    return LabelSet::from_names(std::move(ids), names);
}

LoadedData load_matrix(const std::filesystem::path& matrix_path, const std::filesystem::path& label_path,
                       MissingPolicy policy) {
    const LabelSet all_labels = read_labels(label_path);
    std::unordered_map<std::string, std::size_t> label_row;
    for (std::size_t i = 0; i < all_labels.sample_ids.size(); ++i) label_row[all_labels.sample_ids[i]] = i;

    auto in = open_or_throw(matrix_path);
    std::string line;
    std::size_t line_no = 0;
    if (!read_nonempty_line(in, line, line_no)) throw ParseError(1, "matrix file is empty");
    const char delim = detect_delimiter(line);
    const auto header = split_fields(line, delim);
    if (header.size() < 2) throw ParseError(line_no, "header must hold a sample id column and at least one feature");
    std::vector<std::string> features(header.begin() + 1, header.end());
    {
        std::unordered_set<std::string> seen;
        for (const auto& f : features) {
            if (f.empty()) throw ParseError(line_no, "empty feature name in header");
            if (!seen.insert(f).second) throw ParseError(line_no, "duplicate feature name '" + f + "'");
        }
    }

    LoadReport report;
    report.delimiter = delim;
    std::vector<std::string> ids;
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::unordered_set<std::string> seen_ids;
    while (read_nonempty_line(in, line, line_no)) {
        const auto fields = split_fields(line, delim);
        if (fields.size() != header.size())
            throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                          std::to_string(fields.size()));
        const std::string& id = fields[0];
        if (id.empty()) throw ParseError(line_no, "empty sample id");
        if (!seen_ids.insert(id).second) throw ParseError(line_no, "duplicate sample id '" + id + "'");
        std::vector<double> row(features.size());
        for (std::size_t j = 0; j < features.size(); ++j) row[j] = parse_cell(fields[j + 1], line_no);
        const auto it = label_row.find(id);
        if (it == label_row.end()) {
            ++report.unlabeled_samples_dropped;
            continue;
        }
        ids.push_back(id);
        rows.push_back(std::move(row));
        labels.push_back(all_labels.labels[it->second]);
    }
    if (ids.empty()) throw AlignmentError("matrix and labels share no sample ids");

    std::vector<bool> keep_row(rows.size(), true);
    std::vector<bool> keep_col(features.size(), true);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < features.size(); ++j)
            if (!std::isfinite(rows[i][j])) {
                if (policy == MissingPolicy::DropFeatures)
                    keep_col[j] = false;
                else
                    keep_row[i] = false;
            }

    LoadedData out;
    out.labels.class_names = all_labels.class_names;
    std::vector<std::size_t> cols;
    for (std::size_t j = 0; j < features.size(); ++j)
        if (keep_col[j]) cols.push_back(j);
    std::vector<std::size_t> kept_rows;
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (keep_row[i]) kept_rows.push_back(i);
    report.features_dropped = features.size() - cols.size();
    report.samples_dropped = rows.size() - kept_rows.size();
    if (cols.empty()) throw EmptyResultError("every feature contains a missing value");
    if (kept_rows.empty()) throw EmptyResultError("every sample contains a missing value");

    out.matrix.values.resize(static_cast<Eigen::Index>(kept_rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < kept_rows.size(); ++r) {
        const std::size_t i = kept_rows[r];
        out.matrix.sample_ids.push_back(ids[i]);
        out.labels.sample_ids.push_back(ids[i]);
        out.labels.labels.push_back(labels[i]);
        for (std::size_t c = 0; c < cols.size(); ++c)
            out.matrix.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[i][cols[c]];
    }
    for (std::size_t c : cols) out.matrix.feature_names.push_back(features[c]);
    out.report = report;
    return out;
}

void write_matrix_csv(const std::filesystem::path& path, const ExpressionMatrix& m, const std::string& comment) {
    std::ostringstream os;
    os.precision(17);
    if (!comment.empty()) os << "# " << comment << '\n';
    os << "sample_id";
    for (const auto& f : m.feature_names) os << ',' << f;
    os << '\n';
    for (Index i = 0; i < m.n_samples(); ++i) {
        os << m.sample_ids[i];
        for (Index j = 0; j < m.n_features(); ++j)
            os << ',' << m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        os << '\n';
    }
    write_atomically(path, os.str());
}

void write_labels_csv(const std::filesystem::path& path, const LabelSet& y, const std::string& comment) {
    std::ostringstream os;
    if (!comment.empty()) os << "# " << comment << '\n';
    os << "sample_id,label\n";
    for (std::size_t i = 0; i < y.labels.size(); ++i)
        os << y.sample_ids.at(i) << ',' << y.class_names.at(static_cast<std::size_t>(y.labels[i])) << '\n';
    write_atomically(path, os.str());
}

Eigen::MatrixXd counts_per_million(const ExpressionMatrix& m) {
    if ((m.values.array() < 0.0).any()) throw DomainError("counts must be non-negative");
    Eigen::MatrixXd cpm(m.values.rows(), m.values.cols());
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
        const double lib = m.values.row(i).sum();
        if (!(lib > 0.0))
            throw DegenerateError("sample '" + m.sample_ids.at(static_cast<std::size_t>(i)) +
                                  "' has zero library size");
        cpm.row(i) = m.values.row(i) * (1e6 / lib);
    }
    return cpm;
}

ExpressionMatrix logcpm(const ExpressionMatrix& m) {
    ExpressionMatrix out = m;
    const Eigen::MatrixXd cpm = counts_per_million(m);
    out.values = (cpm.array() + 1.0).log() / std::log(2.0);
    return out;
}

ExpressionMatrix filter_low_expression(const ExpressionMatrix& m, double cpm_threshold, double min_fraction) {
    if (min_fraction < 0.0 || min_fraction > 1.0) throw std::invalid_argument("min_fraction must lie in [0, 1]");
    const Eigen::MatrixXd cpm = counts_per_million(m);
    // ceil with slack so that 0.1 * 30 == 3 rather than 3.0000000000000004 -> 4.
    const auto needed = static_cast<Index>(std::ceil(min_fraction * static_cast<double>(m.n_samples()) - 1e-9));
    IndexList keep;
    for (Eigen::Index j = 0; j < cpm.cols(); ++j) {
        const auto above = static_cast<Index>((cpm.col(j).array() > cpm_threshold).count());
        if (above >= needed) keep.push_back(static_cast<Index>(j));
    }
    if (keep.empty()) throw EmptyResultError("low-expression filter removed every feature");
    return m.select_columns(keep);
}

ExpressionMatrix select_top_variance(const ExpressionMatrix& m, Index n_keep) {
    if (n_keep == 0) throw std::invalid_argument("n_keep must be positive");
    if (n_keep > m.n_features())
        throw std::invalid_argument("n_keep " + std::to_string(n_keep) + " exceeds feature count " +
                                    std::to_string(m.n_features()));
    const kernels::ColumnMoments moments = kernels::column_moments_parallel(m.values);
    IndexList order(m.n_features());
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return moments.variance[a] > moments.variance[b]; });
    order.resize(n_keep);
    return m.select_columns(order);
}

int SplitPlan::n_folds() const noexcept {
    int k = 0;
    for (int f : fold_assignments) k = std::max(k, f + 1);
    return k;
}

SplitPlan SplitPlan::fold(int f) const {
    if (f < 0 || f >= n_folds()) throw std::out_of_range("fold index out of range");
    SplitPlan out;
    out.seed = seed;
    for (std::size_t i = 0; i < fold_assignments.size(); ++i)
        (fold_assignments[i] == f ? out.test_indices : out.train_indices).push_back(i);
    return out;
}

namespace {

std::vector<IndexList> members_by_class(const LabelSet& y) {
    std::vector<IndexList> members(static_cast<std::size_t>(y.n_classes()));
    for (std::size_t i = 0; i < y.labels.size(); ++i) members[static_cast<std::size_t>(y.labels[i])].push_back(i);
    return members;
}

}  // namespace

SplitPlan stratified_split(const LabelSet& y, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("test_fraction must lie strictly between 0 and 1");
    y.validate();
    SplitPlan plan;
    plan.seed = seed;
    const Rng root(seed);
    auto members = members_by_class(y);
    for (std::size_t c = 0; c < members.size(); ++c) {
        auto& idx = members[c];
        if (idx.empty()) continue;
        if (idx.size() == 1) {
            plan.warnings.push_back("class '" + y.class_names[c] + "' has 1 sample; placed in train");
            plan.train_indices.push_back(idx[0]);
            continue;
        }
        Rng rng = root.split(c);
        rng.shuffle(std::span<Index>(idx));
        auto n_test = static_cast<std::size_t>(round_half_up(test_fraction * static_cast<double>(idx.size())));
        n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
        plan.test_indices.insert(plan.test_indices.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
        plan.train_indices.insert(plan.train_indices.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    }
    std::sort(plan.train_indices.begin(), plan.train_indices.end());
    std::sort(plan.test_indices.begin(), plan.test_indices.end());
    return plan;
}

SplitPlan stratified_kfold(const LabelSet& y, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("k must be at least 2");
    if (static_cast<std::size_t>(k) > y.size())
        throw std::invalid_argument("k = " + std::to_string(k) + " exceeds sample count " + std::to_string(y.size()));
    y.validate();
    SplitPlan plan;
    plan.seed = seed;
    plan.fold_assignments.assign(y.size(), -1);
    const Rng root(seed);
    auto members = members_by_class(y);
    // The starting fold rotates from class to class so overall fold sizes stay balanced.
    std::size_t offset = 0;
    for (std::size_t c = 0; c < members.size(); ++c) {
        auto& idx = members[c];
        if (idx.empty()) continue;
        if (idx.size() < static_cast<std::size_t>(k))
            plan.warnings.push_back("class '" + y.class_names[c] + "' has " + std::to_string(idx.size()) +
                                    " samples, fewer than k = " + std::to_string(k));
        Rng rng = root.split(c);
        rng.shuffle(std::span<Index>(idx));
        for (std::size_t i = 0; i < idx.size(); ++i)
            plan.fold_assignments[idx[i]] = static_cast<int>((offset + i) % static_cast<std::size_t>(k));
        offset = (offset + idx.size()) % static_cast<std::size_t>(k);
    }
    plan.train_indices.resize(y.size());
    std::iota(plan.train_indices.begin(), plan.train_indices.end(), Index{0});
    return plan;
}

void to_json(nlohmann::json& j, const SplitPlan& plan) {
    j = nlohmann::json{{"seed", plan.seed},
                       {"train_indices", plan.train_indices},
                       {"test_indices", plan.test_indices},
                       {"folds", plan.fold_assignments}};
}

void from_json(const nlohmann::json& j, SplitPlan& plan) {
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.train_indices = j.at("train_indices").get<IndexList>();
    plan.test_indices = j.at("test_indices").get<IndexList>();
    plan.fold_assignments = j.value("folds", std::vector<int>{});
}

}  // namespace protovote
