#ifndef FACT_IMPORTANCE_HPP
#define FACT_IMPORTANCE_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fact/dataset.hpp"
#include "fact/forest.hpp"

namespace fact {

enum class ImportanceMethod { MDI, MDA, CPI };

std::string method_name(ImportanceMethod m);
ImportanceMethod method_from_name(const std::string& name);

struct ImportanceScores {
    ImportanceMethod method = ImportanceMethod::MDI;
    std::vector<double> scores;
    int reps = 0;
    std::uint64_t seed = 0;
};

/// Mean decrease in impurity: per feature, the total SSE decrease from all
/// splits on that feature, averaged over trees. Non-negative by
/// construction; the scores sum to the mean per-tree total decrease.
ImportanceScores mdi(const RegressionForest& forest, std::size_t p);

/// Assigns each row to a permutation cell approximating the conditional
/// law of X_j given the remaining features. Returns a cell id per row.
using StrataBuilder = std::function<std::vector<int>(const Dataset&, int)>;

/// All rows in one cell: conditional permutation degenerates to marginal.
StrataBuilder single_stratum_builder();

/// Cells from the leaves of one CART tree regressing X_j on the remaining
/// features (min_node_size controls the cell granularity).
StrataBuilder tree_strata_builder(int min_node_size = 30);

/// Mean decrease accuracy: increase of out-of-bag MSE after permuting
/// column j uniformly across rows, averaged over reps permutations.
double mda(const RegressionForest& forest, const Dataset& data, int j, int reps,
           std::uint64_t seed);

/// Conditional permutation importance: same contrast as mda, but column j
/// is permuted only within strata cells. Cells with fewer than 2 rows are
/// merged into the nearest cell by mean of X_j first.
double cpi(const RegressionForest& forest, const Dataset& data, int j,
           const StrataBuilder& strata_builder, int reps, std::uint64_t seed);

/// Identifiability example generator: X1 uniform on [0, 1]; given
/// {X1 <= 0.7} the features are jointly uniform on [0, 0.7]^p; given
/// {X1 > 0.7} all features equal X1. Response is the indicator of
/// 0.3 <= X1 <= 0.7 plus Gaussian noise of the given standard deviation.
Dataset example1_generate(std::size_t n, std::size_t p, std::uint64_t seed,
                          double noise_sd = 1.0);

}  // namespace fact

#endif  // FACT_IMPORTANCE_HPP
