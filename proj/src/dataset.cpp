#include "fact/dataset.hpp"

#include <cmath>
#include <stdexcept>

namespace fact {

void Dataset::validate() const {
    if (features.rows < 2) {
        throw std::invalid_argument("Dataset: need at least 2 rows");
    }
    if (features.cols < 1) {
        throw std::invalid_argument("Dataset: need at least 1 feature column");
    }
    if (features.rows != response.size()) {
        throw std::invalid_argument("Dataset: feature rows do not match response length");
    }
    if (!feature_names.empty() && feature_names.size() != features.cols) {
        throw std::invalid_argument("Dataset: feature name count does not match columns");
    }
    for (double v : features.data) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("Dataset: feature entry outside [0, 1]");
        }
    }
}

Dataset Dataset::without_column(std::size_t j) const {
    if (j >= features.cols) {
        throw std::invalid_argument("Dataset::without_column: column out of range");
    }
    Dataset out;
    out.features = Matrix(features.rows, features.cols - 1);
    for (std::size_t r = 0; r < features.rows; ++r) {
        std::size_t w = 0;
        for (std::size_t c = 0; c < features.cols; ++c) {
            if (c == j) continue;
            out.features(r, w++) = features(r, c);
        }
    }
    out.response = response;
    if (!feature_names.empty()) {
        for (std::size_t c = 0; c < features.cols; ++c) {
            if (c != j) out.feature_names.push_back(feature_names[c]);
        }
    }
    return out;
}

std::vector<double> Dataset::column(std::size_t j) const {
    if (j >= features.cols) {
        throw std::invalid_argument("Dataset::column: column out of range");
    }
    std::vector<double> out(features.rows);
    for (std::size_t r = 0; r < features.rows; ++r) out[r] = features(r, j);
    return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
    Dataset out;
    out.features = Matrix(rows.size(), features.cols);
    out.response.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= features.rows) {
            throw std::invalid_argument("Dataset::subset: row out of range");
        }
        for (std::size_t c = 0; c < features.cols; ++c) {
            out.features(i, c) = features(rows[i], c);
        }
        out.response[i] = response[rows[i]];
    }
    out.feature_names = feature_names;
    return out;
}

Dataset Dataset::select_columns(const std::vector<std::size_t>& cols) const {
    Dataset out;
    out.features = Matrix(features.rows, cols.size());
    for (std::size_t r = 0; r < features.rows; ++r) {
        for (std::size_t i = 0; i < cols.size(); ++i) {
            if (cols[i] >= features.cols) {
                throw std::invalid_argument("Dataset::select_columns: column out of range");
            }
            out.features(r, i) = features(r, cols[i]);
        }
    }
    out.response = response;
    if (!feature_names.empty()) {
        for (std::size_t c : cols) out.feature_names.push_back(feature_names[c]);
    }
    return out;
}

std::string Dataset::name_of(std::size_t j) const {
    if (j < feature_names.size()) return feature_names[j];
    return "X" + std::to_string(j + 1);
}

std::vector<std::pair<double, double>> min_max_scale(Matrix& m) {
    std::vector<std::pair<double, double>> ranges(m.cols);
    for (std::size_t c = 0; c < m.cols; ++c) {
        double lo = m(0, c), hi = m(0, c);
        for (std::size_t r = 1; r < m.rows; ++r) {
            lo = std::min(lo, m(r, c));
            hi = std::max(hi, m(r, c));
        }
        ranges[c] = {lo, hi};
        if (hi > lo) {
            const double scale = 1.0 / (hi - lo);
            for (std::size_t r = 0; r < m.rows; ++r) {
                double v = (m(r, c) - lo) * scale;
                m(r, c) = std::min(1.0, std::max(0.0, v));
            }
        } else {
            // Constant column carries no split information; park it mid-range.
            for (std::size_t r = 0; r < m.rows; ++r) m(r, c) = 0.5;
        }
    }
    return ranges;
}

Dataset make_scaled_dataset(Matrix raw_features, std::vector<double> response,
                            std::vector<std::string> names) {
    Dataset d;
    min_max_scale(raw_features);
    d.features = std::move(raw_features);
    d.response = std::move(response);
    d.feature_names = std::move(names);
    d.validate();
    return d;
}

}  // namespace fact
