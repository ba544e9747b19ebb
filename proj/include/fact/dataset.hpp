#ifndef FACT_DATASET_HPP
#define FACT_DATASET_HPP

#include <cstddef>
#include <string>
#include <vector>

namespace fact {

/// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    double* row(std::size_t r) { return data.data() + r * cols; }
};

/// Feature matrix on the unit hypercube plus a response vector.
struct Dataset {
    Matrix features;                         // n x p, entries in [0, 1]
    std::vector<double> response;            // length n
    std::vector<std::string> feature_names;  // empty or length p

    std::size_t n_rows() const { return features.rows; }
    std::size_t n_cols() const { return features.cols; }

    /// Checks the structural invariants: n >= 2, p >= 1, matching row
    /// counts, all feature entries in [0, 1]. Throws std::invalid_argument.
    void validate() const;

    /// Copy with column j removed (feature names follow).
    Dataset without_column(std::size_t j) const;

    /// Copy of column j.
    std::vector<double> column(std::size_t j) const;

    /// Copy restricted to the given rows (in the given order).
    Dataset subset(const std::vector<std::size_t>& rows) const;

    /// Copy keeping only the given columns (in the given order).
    Dataset select_columns(const std::vector<std::size_t>& cols) const;

    std::string name_of(std::size_t j) const;
};

/// Min-max scales every column to [0, 1] in place; constant columns map
/// to 0.5. Returns the per-column (min, max) used, for reporting.
std::vector<std::pair<double, double>> min_max_scale(Matrix& m);

/// Builds a Dataset from raw (unscaled) columns, applying ingestion scaling.
Dataset make_scaled_dataset(Matrix raw_features, std::vector<double> response,
                            std::vector<std::string> names = {});

}  // namespace fact

#endif  // FACT_DATASET_HPP
