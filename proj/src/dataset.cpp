#include "recalx/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "recalx/numeric.hpp"
#include "recalx/rng.hpp"

namespace recalx {

void Dataset::validate(bool allow_empty) const {
    const std::size_t nrows = labels.size();
    require(n_classes >= 1, ErrorCode::invalid_argument, "Dataset: n_classes must be >= 1");
    require(!feature_names.empty(), ErrorCode::invalid_argument, "Dataset: d must be >= 1");
    if (!allow_empty) {
        require(nrows >= 1, ErrorCode::invalid_argument, "Dataset: N must be >= 1");
    }
    require(features.size() == nrows * feature_names.size(), ErrorCode::invalid_argument,
            "Dataset: feature matrix shape mismatch");
    for (std::size_t i = 0; i < nrows; ++i) {
        require(labels[i] >= 0 && labels[i] < n_classes, ErrorCode::domain,
                "Dataset: label out of range at row " + std::to_string(i));
    }
    require(all_finite(features), ErrorCode::numeric, "Dataset: non-finite feature value");
}

Dataset make_dataset(std::vector<double> features, std::vector<int> labels,
                     std::vector<std::string> feature_names, int n_classes) {
    Dataset ds;
    ds.features = std::move(features);
    ds.labels = std::move(labels);
    ds.feature_names = std::move(feature_names);
    ds.n_classes = n_classes;
    ds.validate(true);
    return ds;
}

std::vector<double> FiniteJoint::class_marginal() const {
    std::vector<double> m(static_cast<std::size_t>(n_classes), 0.0);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        m[static_cast<std::size_t>(ys[i])] += probs[i];
    }
    return m;
}

std::vector<std::vector<double>> FiniteJoint::alphabets() const {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(dim()));
    for (const auto& x : xs) {
        for (std::size_t c = 0; c < x.size(); ++c) out[c].push_back(x[c]);
    }
    for (auto& col : out) {
        std::sort(col.begin(), col.end());
        col.erase(std::unique(col.begin(), col.end()), col.end());
    }
    return out;
}

void FiniteJoint::validate() const {
    require(!probs.empty(), ErrorCode::invalid_argument, "FiniteJoint: empty support");
    require(xs.size() == probs.size() && ys.size() == probs.size(), ErrorCode::invalid_argument,
            "FiniteJoint: support arrays must have equal length");
    require(n_classes >= 1, ErrorCode::invalid_argument, "FiniteJoint: n_classes must be >= 1");
    const std::size_t d = xs.front().size();
    require(d >= 1, ErrorCode::invalid_argument, "FiniteJoint: d must be >= 1");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        require(xs[i].size() == d, ErrorCode::invalid_argument,
                "FiniteJoint: inconsistent feature dimension");
        require(all_finite(xs[i]), ErrorCode::numeric, "FiniteJoint: non-finite support point");
        require(probs[i] >= 0.0, ErrorCode::domain, "FiniteJoint: negative probability");
        require(ys[i] >= 0 && ys[i] < n_classes, ErrorCode::domain,
                "FiniteJoint: label out of range");
        total += probs[i];
    }
    require(std::fabs(total - 1.0) <= 1e-12, ErrorCode::domain,
            "FiniteJoint: probabilities must sum to 1 within 1e-12");
    require(total > 0.0, ErrorCode::domain, "FiniteJoint: all probabilities zero");
    // Distinct (x, y) entries.
    std::map<std::pair<std::vector<double>, int>, int> seen;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        auto key = std::make_pair(xs[i], ys[i]);
        require(seen.emplace(key, 1).second, ErrorCode::domain,
                "FiniteJoint: duplicate support entry");
    }
}

void SplitSpec::validate() const {
    require(train >= 0.0 && val >= 0.0 && test >= 0.0, ErrorCode::invalid_argument,
            "SplitSpec: fractions must be nonnegative");
    require(std::fabs(train + val + test - 1.0) <= 1e-9, ErrorCode::invalid_argument,
            "SplitSpec: fractions must sum to 1 within 1e-9");
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

bool parse_double_cell(const std::string& cell, double& out) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
    if (begin == end) return false;
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && ptr == end;
}

}  // namespace

CsvLoadResult load_csv_dataset(const std::string& path, const std::string& label_column,
                               int n_classes) {
    require(n_classes >= 1, ErrorCode::invalid_argument, "load_csv_dataset: n_classes must be >= 1");
    std::ifstream in(path);
    require(in.good(), ErrorCode::io, "load_csv_dataset: cannot open '" + path + "'");

    std::string line;
    std::size_t comment_lines = 0;
    // Provenance comment lines ('#') may precede the header.
    for (;;) {
        require(static_cast<bool>(std::getline(in, line)), ErrorCode::parse,
                "load_csv_dataset: missing header row in '" + path + "'");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() != '#') break;
        ++comment_lines;
    }
    const std::vector<std::string> header = split_line(line);

    int label_idx = -1;
    std::vector<std::string> feature_names;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == label_column) {
            require(label_idx < 0, ErrorCode::parse,
                    "load_csv_dataset: duplicate label column '" + label_column + "'");
            label_idx = static_cast<int>(c);
        } else {
            feature_names.push_back(header[c]);
        }
    }
    require(label_idx >= 0, ErrorCode::parse,
            "load_csv_dataset: label column '" + label_column + "' not found");
    require(!feature_names.empty(), ErrorCode::parse,
            "load_csv_dataset: no feature columns in '" + path + "'");

    std::vector<double> features;
    std::vector<int> labels;
    std::size_t dropped = 0;
    std::size_t line_no = 1 + comment_lines;
    std::vector<double> row_buf(feature_names.size());
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
        const std::vector<std::string> cells = split_line(line);
        require(cells.size() == header.size(), ErrorCode::parse,
                "load_csv_dataset: line " + std::to_string(line_no) + " has " +
                    std::to_string(cells.size()) + " cells, expected " +
                    std::to_string(header.size()));
        bool finite_row = true;
        std::size_t fi = 0;
        int label = -1;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double value = 0.0;
            require(parse_double_cell(cells[c], value), ErrorCode::parse,
                    "load_csv_dataset: unparseable cell at line " + std::to_string(line_no) +
                        ", column '" + header[c] + "'");
            if (static_cast<int>(c) == label_idx) {
                require(std::isfinite(value) && std::floor(value) == value, ErrorCode::parse,
                        "load_csv_dataset: non-integer label at line " + std::to_string(line_no));
                require(value >= 0 && value < n_classes, ErrorCode::domain,
                        "load_csv_dataset: label " + std::to_string(static_cast<long long>(value)) +
                            " out of range [0," + std::to_string(n_classes) + ") at line " +
                            std::to_string(line_no));
                label = static_cast<int>(value);
            } else {
                if (!std::isfinite(value)) finite_row = false;
                row_buf[fi++] = value;
            }
        }
        if (!finite_row) {
            ++dropped;
            continue;
        }
        features.insert(features.end(), row_buf.begin(), row_buf.end());
        labels.push_back(label);
    }
    require(!labels.empty(), ErrorCode::domain,
            "load_csv_dataset: no usable rows in '" + path + "' (" + std::to_string(dropped) +
                " dropped)");
    CsvLoadResult result;
    result.dataset = make_dataset(std::move(features), std::move(labels),
                                  std::move(feature_names), n_classes);
    result.rows_dropped = dropped;
    return result;
}

void SyntheticSpec::validate() const {
    switch (kind) {
        case Kind::finite:
            joint.validate();
            break;
        case Kind::planted:
            require(!w.empty(), ErrorCode::invalid_argument, "planted spec: w must be nonempty");
            require(all_finite(w), ErrorCode::numeric, "planted spec: non-finite weight");
            break;
        case Kind::moons:
            require(noise >= 0.0 && std::isfinite(noise), ErrorCode::invalid_argument,
                    "moons spec: noise must be finite and >= 0");
            break;
    }
}

SyntheticResult make_synthetic(const SyntheticSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    require(n >= 1, ErrorCode::invalid_argument, "make_synthetic: n must be positive");
    Rng rng(seed);

    std::vector<double> features;
    std::vector<int> labels;
    labels.reserve(n);
    std::vector<std::string> names;
    int n_classes = 2;
    std::optional<FiniteJoint> joint_out;

    switch (spec.kind) {
        case SyntheticSpec::Kind::finite: {
            const FiniteJoint& joint = spec.joint;
            const int d = joint.dim();
            features.reserve(n * static_cast<std::size_t>(d));
            std::vector<double> cdf(joint.probs.size());
            std::partial_sum(joint.probs.begin(), joint.probs.end(), cdf.begin());
            cdf.back() = 1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double u = rng.uniform01();
                const std::size_t idx = static_cast<std::size_t>(
                    std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
                features.insert(features.end(), joint.xs[idx].begin(), joint.xs[idx].end());
                labels.push_back(joint.ys[idx]);
            }
            for (int c = 0; c < d; ++c) names.push_back("f" + std::to_string(c));
            n_classes = joint.n_classes;
            joint_out = joint;
            break;
        }
        case SyntheticSpec::Kind::planted: {
            const int d = static_cast<int>(spec.w.size());
            features.reserve(n * static_cast<std::size_t>(d));
            std::vector<double> x(static_cast<std::size_t>(d));
            for (std::size_t i = 0; i < n; ++i) {
                double score = 0.0;
                for (int c = 0; c < d; ++c) {
                    x[static_cast<std::size_t>(c)] = rng.normal();
                    score += spec.w[static_cast<std::size_t>(c)] * x[static_cast<std::size_t>(c)];
                }
                const double p1 = 1.0 / (1.0 + std::exp(-score));
                labels.push_back(rng.uniform01() < p1 ? 1 : 0);
                features.insert(features.end(), x.begin(), x.end());
            }
            for (int c = 0; c < d; ++c) names.push_back("f" + std::to_string(c));
            break;
        }
        case SyntheticSpec::Kind::moons: {
            constexpr double pi = 3.14159265358979323846;
            features.reserve(n * 2);
            for (std::size_t i = 0; i < n; ++i) {
                const int cls = static_cast<int>(i % 2);
                const double t = rng.uniform01() * pi;
                double fx, fy;
                if (cls == 0) {
                    fx = std::cos(t);
                    fy = std::sin(t);
                } else {
                    fx = 1.0 - std::cos(t);
                    fy = 0.5 - std::sin(t);
                }
                fx += rng.normal(0.0, spec.noise);
                fy += rng.normal(0.0, spec.noise);
                features.push_back(fx);
                features.push_back(fy);
                labels.push_back(cls);
            }
            names = {"f0", "f1"};
            break;
        }
    }
    SyntheticResult result;
    result.dataset = make_dataset(std::move(features), std::move(labels), std::move(names),
                                  n_classes);
    result.joint = std::move(joint_out);
    return result;
}

namespace {

Dataset take_rows(const Dataset& ds, std::span<const std::size_t> idx) {
    const std::size_t d = static_cast<std::size_t>(ds.dim());
    std::vector<double> features;
    features.reserve(idx.size() * d);
    std::vector<int> labels;
    labels.reserve(idx.size());
    for (std::size_t i : idx) {
        const auto row = ds.row(i);
        features.insert(features.end(), row.begin(), row.end());
        labels.push_back(ds.labels[i]);
    }
    return make_dataset(std::move(features), std::move(labels), ds.feature_names, ds.n_classes);
}

}  // namespace

std::array<Dataset, 3> split(const Dataset& ds, const SplitSpec& spec) {
    ds.require_nonempty();
    spec.validate();
    const std::size_t n = ds.n();

    // Largest-remainder allocation of n rows to the three fractions.
    const double fracs[3] = {spec.train, spec.val, spec.test};
    std::size_t counts[3];
    double remainders[3];
    std::size_t assigned = 0;
    for (int p = 0; p < 3; ++p) {
        const double quota = fracs[p] * static_cast<double>(n);
        counts[p] = static_cast<std::size_t>(std::floor(quota));
        remainders[p] = quota - std::floor(quota);
        assigned += counts[p];
    }
    std::size_t leftover = n - assigned;
    while (leftover > 0) {
        int best = 0;
        for (int p = 1; p < 3; ++p) {
            if (remainders[p] > remainders[best]) best = p;
        }
        ++counts[best];
        remainders[best] = -1.0;
        --leftover;
    }
    for (int p = 0; p < 3; ++p) {
        require(fracs[p] == 0.0 || counts[p] > 0, ErrorCode::domain,
                "split: requested nonzero part received 0 rows");
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(spec.seed);
    rng.shuffle(order);

    std::span<const std::size_t> all(order);
    return {take_rows(ds, all.first(counts[0])),
            take_rows(ds, all.subspan(counts[0], counts[1])),
            take_rows(ds, all.subspan(counts[0] + counts[1], counts[2]))};
}

std::vector<double> feature_means(const Dataset& ds) {
    ds.require_nonempty();
    const int d = ds.dim();
    const std::size_t n = ds.n();
    std::vector<double> means(static_cast<std::size_t>(d), 0.0);
    std::vector<double> column(n);
    for (int c = 0; c < d; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            column[i] = ds.features[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)];
        }
        const bool constant =
            std::all_of(column.begin(), column.end(), [&](double v) { return v == column[0]; });
        // A constant column's mean is that constant, exactly.
        means[static_cast<std::size_t>(c)] =
            constant ? column[0] : pairwise_sum(column) / static_cast<double>(n);
    }
    return means;
}

ZScoreStats zscore_fit(const Dataset& ds) {
    ds.require_nonempty();
    const int d = ds.dim();
    const std::size_t n = ds.n();
    ZScoreStats stats;
    stats.means = feature_means(ds);
    stats.stddevs.assign(static_cast<std::size_t>(d), 1.0);
    std::vector<double> sq(n);
    for (int c = 0; c < d; ++c) {
        const double m = stats.means[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < n; ++i) {
            const double v =
                ds.features[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)] - m;
            sq[i] = v * v;
        }
        const double var = pairwise_sum(sq) / static_cast<double>(n);
        if (var > 0.0) stats.stddevs[static_cast<std::size_t>(c)] = std::sqrt(var);
    }
    return stats;
}

Dataset zscore_apply(const Dataset& ds, const ZScoreStats& stats) {
    const int d = ds.dim();
    require(static_cast<int>(stats.means.size()) == d &&
                static_cast<int>(stats.stddevs.size()) == d,
            ErrorCode::invalid_argument, "zscore_apply: stats dimension mismatch");
    Dataset out = ds;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (int c = 0; c < d; ++c) {
            double& v = out.features[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)];
            v = (v - stats.means[static_cast<std::size_t>(c)]) /
                stats.stddevs[static_cast<std::size_t>(c)];
        }
    }
    return out;
}

}  // namespace recalx
