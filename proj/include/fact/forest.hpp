#ifndef FACT_FOREST_HPP
#define FACT_FOREST_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fact/dataset.hpp"

namespace fact {

/// Hyperparameters for the regression forest. mtry == 0 means the
/// regression default ceil(p / 3), resolved at fit time.
struct ForestParams {
    int n_trees = 500;
    int mtry = 0;
    int min_node_size = 5;
    std::optional<int> max_depth;
    double bootstrap_fraction = 1.0;
    bool with_replacement = true;
    bool bootstrap = true;

    int resolve_mtry(std::size_t p) const;
    void validate(std::size_t p) const;
};

/// One node of a CART regression tree. feature == -1 marks a leaf, whose
/// prediction is the arithmetic mean of the bootstrap responses routed to
/// it. Internal nodes record the impurity (SSE) decrease of their split.
struct TreeNode {
    int feature = -1;
    double split_value = 0.0;
    int left = -1;
    int right = -1;
    double prediction = 0.0;
    int member_count = 0;
    double decrease = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;  // root at index 0, depth-first, left first

    double predict(const double* x) const {
        int idx = 0;
        while (!nodes[idx].is_leaf()) {
            idx = (x[nodes[idx].feature] <= nodes[idx].split_value)
                      ? nodes[idx].left
                      : nodes[idx].right;
        }
        return nodes[idx].prediction;
    }
};

struct RegressionForest {
    std::vector<Tree> trees;
    std::vector<std::vector<int>> bootstrap_indices;  // per-tree row multiset
    ForestParams params;
    std::uint64_t seed = 0;
    std::size_t n_features = 0;
    std::size_t n_rows = 0;
};

struct SplitCandidate {
    std::size_t feature = 0;
    double value = 0.0;
    double decrease = 0.0;
};

/// Best CART split over the given rows (a multiset of row indices) and
/// candidate features: maximizes parent SSE minus child SSE over midpoints
/// between consecutive distinct sorted values. Ties break on (feature,
/// value). Returns nullopt when no split has strictly positive decrease or
/// every split would leave a child below min_node_size.
std::optional<SplitCandidate> best_split(const std::vector<int>& rows,
                                         const Dataset& data,
                                         const std::vector<int>& candidate_features,
                                         int min_node_size = 1);

/// Grows a forest. Deterministic in (data, params, seed) for any thread
/// count: every tree draws from its own stream derived from the seed.
RegressionForest fit_forest(const Dataset& data, const ForestParams& params,
                            std::uint64_t seed, int n_threads = 1);

/// Mean of the per-tree predictions; always within the training response
/// range. Throws std::invalid_argument on dimension mismatch.
double predict(const RegressionForest& forest, const std::vector<double>& x);
double predict_row(const RegressionForest& forest, const double* x, std::size_t dim);

/// Out-of-bag predictions on the training data: entry i averages the trees
/// whose bootstrap multiset excludes row i, and is empty when no such tree
/// exists.
std::vector<std::optional<double>> predict_oob(const RegressionForest& forest,
                                               const Dataset& data);

/// Per-row sets A(i) of tree indices that are out-of-bag for row i.
std::vector<std::vector<int>> oob_tree_sets(const RegressionForest& forest);

/// Versioned JSON round-trip (tree structure, params, seed, bootstrap).
std::string forest_to_json(const RegressionForest& forest);
RegressionForest forest_from_json(const std::string& json_text);

}  // namespace fact

#endif  // FACT_FOREST_HPP
