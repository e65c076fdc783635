#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "recalx/error.hpp"

namespace recalx {

// Row-major feature matrix plus integer class labels. Immutable by
// convention after construction; every operation returns new datasets.
struct Dataset {
    std::vector<double> features;  // n x dim, row-major
    std::vector<int> labels;       // length n, values in {0..n_classes-1}
    std::vector<std::string> feature_names;
    int n_classes = 0;

    std::size_t n() const { return labels.size(); }
    int dim() const { return static_cast<int>(feature_names.size()); }

    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(features)
            .subspan(i * static_cast<std::size_t>(dim()), static_cast<std::size_t>(dim()));
    }

    // Structural checks. Split outputs may be empty; ingestion rejects
    // empty datasets via require_nonempty.
    void validate(bool allow_empty = false) const;
    void require_nonempty() const { validate(false); }
};

Dataset make_dataset(std::vector<double> features, std::vector<int> labels,
                     std::vector<std::string> feature_names, int n_classes);

// Finite joint distribution over (x, y) pairs with enumerable support.
// Enables exact conditionals, mutual information and KL computations.
struct FiniteJoint {
    std::vector<std::vector<double>> xs;  // support feature vectors
    std::vector<int> ys;                  // matching class labels
    std::vector<double> probs;            // matching probabilities, sum 1
    int n_classes = 0;

    std::size_t support_size() const { return probs.size(); }
    int dim() const { return xs.empty() ? 0 : static_cast<int>(xs.front().size()); }

    std::vector<double> class_marginal() const;
    // Sorted distinct values per coordinate.
    std::vector<std::vector<double>> alphabets() const;

    void validate() const;
};

struct SplitSpec {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct CsvLoadResult {
    Dataset dataset;
    std::size_t rows_dropped = 0;  // rows rejected for non-finite features
};

// Strict CSV ingestion: comma-separated, header required, UTF-8, '.' decimal
// point, no quoting. Leading '#' comment lines before the header are skipped.
// Rows containing non-finite feature values are dropped (counted in
// rows_dropped); unparseable cells and out-of-range labels are hard errors
// naming the offending row.
CsvLoadResult load_csv_dataset(const std::string& path, const std::string& label_column,
                               int n_classes);

// Synthetic generators with known structure.
struct SyntheticSpec {
    enum class Kind { finite, planted, moons };
    Kind kind = Kind::finite;
    FiniteJoint joint;          // kind == finite
    std::vector<double> w;      // kind == planted: P(y=1|x) = sigmoid(w.x), x ~ N(0, I)
    double noise = 0.1;         // kind == moons: coordinate noise stddev

    void validate() const;
};

struct SyntheticResult {
    Dataset dataset;
    std::optional<FiniteJoint> joint;  // present only for Kind::finite
};

SyntheticResult make_synthetic(const SyntheticSpec& spec, std::size_t n, std::uint64_t seed);

// Disjoint (train, val, test) partition; sizes by largest-remainder rounding
// of the fractions, rows shuffled with the seeded generator.
std::array<Dataset, 3> split(const Dataset& ds, const SplitSpec& spec);

std::vector<double> feature_means(const Dataset& ds);

// Optional per-feature standardization. Constant columns keep stddev 1 so
// the transform stays defined.
struct ZScoreStats {
    std::vector<double> means;
    std::vector<double> stddevs;
};

ZScoreStats zscore_fit(const Dataset& ds);
Dataset zscore_apply(const Dataset& ds, const ZScoreStats& stats);

}  // namespace recalx
