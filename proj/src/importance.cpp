#include "fact/importance.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "fact/errors.hpp"
#include "fact/rng.hpp"

namespace fact {

std::string method_name(ImportanceMethod m) {
    switch (m) {
        case ImportanceMethod::MDI: return "MDI";
        case ImportanceMethod::MDA: return "MDA";
        case ImportanceMethod::CPI: return "CPI";
    }
    return "unknown";
}

ImportanceMethod method_from_name(const std::string& name) {
    if (name == "MDI" || name == "mdi") return ImportanceMethod::MDI;
    if (name == "MDA" || name == "mda") return ImportanceMethod::MDA;
    if (name == "CPI" || name == "cpi") return ImportanceMethod::CPI;
    throw std::invalid_argument("unknown importance method: " + name);
}

ImportanceScores mdi(const RegressionForest& forest, std::size_t p) {
    if (p < forest.n_features) {
        throw std::invalid_argument("mdi: p smaller than the forest's feature count");
    }
    ImportanceScores out;
    out.method = ImportanceMethod::MDI;
    out.scores.assign(p, 0.0);
    for (const Tree& tree : forest.trees) {
        for (const TreeNode& node : tree.nodes) {
            if (!node.is_leaf()) {
                out.scores[static_cast<std::size_t>(node.feature)] += node.decrease;
            }
        }
    }
    const double k = static_cast<double>(forest.trees.size());
    for (double& s : out.scores) s /= k;
    return out;
}

StrataBuilder single_stratum_builder() {
    return [](const Dataset& data, int) {
        return std::vector<int>(data.n_rows(), 0);
    };
}

StrataBuilder tree_strata_builder(int min_node_size) {
    return [min_node_size](const Dataset& data, int j) {
        // One deterministic CART tree on all remaining features (no
        // bootstrap, full mtry), leaves as cells.
        Dataset g = data.without_column(static_cast<std::size_t>(j));
        g.response = data.column(static_cast<std::size_t>(j));
        ForestParams params;
        params.n_trees = 1;
        params.mtry = static_cast<int>(g.n_cols());
        params.min_node_size = min_node_size;
        params.bootstrap = false;
        const RegressionForest strata_forest = fit_forest(g, params, 0);
        const Tree& tree = strata_forest.trees.front();
        // Leaf index per row.
        std::map<int, int> leaf_cell;
        int next_cell = 0;
        std::vector<int> cells(data.n_rows());
        for (std::size_t r = 0; r < data.n_rows(); ++r) {
            int idx = 0;
            while (!tree.nodes[static_cast<std::size_t>(idx)].is_leaf()) {
                const TreeNode& node = tree.nodes[static_cast<std::size_t>(idx)];
                idx = (g.features(r, static_cast<std::size_t>(node.feature)) <=
                       node.split_value)
                          ? node.left
                          : node.right;
            }
            auto [it, inserted] = leaf_cell.emplace(idx, next_cell);
            if (inserted) ++next_cell;
            cells[r] = it->second;
        }
        return cells;
    };
}

namespace {

// Merges cells with fewer than 2 rows into the cell with the nearest mean
// of column j. Throws StrataTooSmall when no merge target exists.
std::vector<int> merge_small_cells(std::vector<int> cells,
                                   const std::vector<double>& xj) {
    for (;;) {
        std::map<int, std::pair<double, int>> stats;  // cell -> (sum, count)
        for (std::size_t r = 0; r < cells.size(); ++r) {
            auto& s = stats[cells[r]];
            s.first += xj[r];
            s.second += 1;
        }
        int small_cell = -1;
        for (const auto& [cell, s] : stats) {
            if (s.second < 2) {
                small_cell = cell;
                break;
            }
        }
        if (small_cell < 0) return cells;
        if (stats.size() < 2) {
            throw StrataTooSmall("cpi: a stratum has fewer than 2 rows and no merge target");
        }
        const double small_mean =
            stats[small_cell].first / stats[small_cell].second;
        int target = -1;
        double best_dist = 0.0;
        for (const auto& [cell, s] : stats) {
            if (cell == small_cell) continue;
            const double dist = std::abs(s.first / s.second - small_mean);
            if (target < 0 || dist < best_dist) {
                target = cell;
                best_dist = dist;
            }
        }
        for (int& c : cells) {
            if (c == small_cell) c = target;
        }
    }
}

// Shared permutation contrast: mean over reps of
// [OOB MSE with column j permuted within cells] - [OOB MSE].
double permutation_contrast(const RegressionForest& forest, const Dataset& data,
                            int j, const std::vector<int>& cells, int reps,
                            std::uint64_t seed) {
    if (reps < 1) throw std::invalid_argument("permutation importance: reps must be >= 1");
    if (j < 0 || static_cast<std::size_t>(j) >= data.n_cols()) {
        throw std::invalid_argument("permutation importance: feature index out of range");
    }
    const std::size_t n = data.n_rows();
    const auto oob_sets = oob_tree_sets(forest);

    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < n; ++i) {
        if (!oob_sets[i].empty()) usable.push_back(i);
    }
    const std::size_t dropped = n - usable.size();
    if (dropped > n / 10) {
        throw EmptyOob("permutation importance: " + std::to_string(dropped) +
                       " rows lack out-of-bag predictions");
    }

    // Baseline OOB MSE.
    double base_mse = 0.0;
    for (std::size_t i : usable) {
        double sum = 0.0;
        for (int t : oob_sets[i]) {
            sum += forest.trees[static_cast<std::size_t>(t)].predict(data.features.row(i));
        }
        const double err = data.response[i] - sum / static_cast<double>(oob_sets[i].size());
        base_mse += err * err;
    }
    base_mse /= static_cast<double>(usable.size());

    // Row lists per cell, ascending, for a reproducible permutation stream.
    std::map<int, std::vector<std::size_t>> cell_rows;
    for (std::size_t r = 0; r < n; ++r) cell_rows[cells[r]].push_back(r);

    Rng rng(seed);
    std::vector<double> xj = data.column(static_cast<std::size_t>(j));
    std::vector<double> permuted(n);
    std::vector<double> row_buffer(data.n_cols());
    double contrast_sum = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
        permuted = xj;
        for (auto& [cell, rows] : cell_rows) {
            // Fisher-Yates over the values held by this cell's rows.
            for (std::size_t i = rows.size(); i > 1; --i) {
                const std::size_t k = static_cast<std::size_t>(rng.bounded(i));
                std::swap(permuted[rows[i - 1]], permuted[rows[k]]);
            }
        }
        double mse = 0.0;
        for (std::size_t i : usable) {
            const double* row = data.features.row(i);
            std::copy(row, row + data.n_cols(), row_buffer.begin());
            row_buffer[static_cast<std::size_t>(j)] = permuted[i];
            double sum = 0.0;
            for (int t : oob_sets[i]) {
                sum += forest.trees[static_cast<std::size_t>(t)].predict(row_buffer.data());
            }
            const double err =
                data.response[i] - sum / static_cast<double>(oob_sets[i].size());
            mse += err * err;
        }
        mse /= static_cast<double>(usable.size());
        contrast_sum += mse - base_mse;
    }
    return contrast_sum / static_cast<double>(reps);
}

}  // namespace

double mda(const RegressionForest& forest, const Dataset& data, int j, int reps,
           std::uint64_t seed) {
    const std::vector<int> one_cell(data.n_rows(), 0);
    return permutation_contrast(forest, data, j, one_cell, reps, seed);
}

double cpi(const RegressionForest& forest, const Dataset& data, int j,
           const StrataBuilder& strata_builder, int reps, std::uint64_t seed) {
    std::vector<int> cells = strata_builder(data, j);
    if (cells.size() != data.n_rows()) {
        throw std::invalid_argument("cpi: strata builder returned wrong row count");
    }
    cells = merge_small_cells(std::move(cells), data.column(static_cast<std::size_t>(j)));
    return permutation_contrast(forest, data, j, cells, reps, seed);
}

Dataset example1_generate(std::size_t n, std::size_t p, std::uint64_t seed,
                          double noise_sd) {
    if (p < 2) throw std::invalid_argument("example1_generate: need p >= 2");
    if (n < 2) throw std::invalid_argument("example1_generate: need n >= 2");
    Rng rng(seed);
    Dataset d;
    d.features = Matrix(n, p);
    d.response.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double x1 = rng.uniform01();
        d.features(r, 0) = x1;
        if (x1 > 0.7) {
            for (std::size_t c = 1; c < p; ++c) d.features(r, c) = x1;
        } else {
            for (std::size_t c = 1; c < p; ++c) d.features(r, c) = 0.7 * rng.uniform01();
        }
        const double indicator = (x1 >= 0.3 && x1 <= 0.7) ? 1.0 : 0.0;
        d.response[r] = indicator + noise_sd * rng.normal();
    }
    for (std::size_t c = 0; c < p; ++c) d.feature_names.push_back("X" + std::to_string(c + 1));
    return d;
}

}  // namespace fact
