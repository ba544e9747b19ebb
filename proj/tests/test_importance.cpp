#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>

#include "fact/errors.hpp"
#include "fact/importance.hpp"
#include "fact/rng.hpp"

using namespace fact;

namespace {

Dataset four_point_dataset() {
    Dataset d;
    d.features = Matrix(4, 2);
    d.features(0, 0) = 0.1; d.features(0, 1) = 0.5;
    d.features(1, 0) = 0.2; d.features(1, 1) = 0.5;
    d.features(2, 0) = 0.8; d.features(2, 1) = 0.5;
    d.features(3, 0) = 0.9; d.features(3, 1) = 0.5;
    d.response = {0.0, 0.0, 1.0, 1.0};
    return d;
}

Dataset signal_dataset(std::size_t n, std::size_t p, std::uint64_t seed) {
    Rng rng(seed);
    Dataset d;
    d.features = Matrix(n, p);
    d.response.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < p; ++c) d.features(r, c) = rng.uniform01();
        d.response[r] = 4.0 * d.features(r, 0) + 0.5 * rng.normal();
    }
    return d;
}

}  // namespace

TEST_CASE("mdi on single-leaf forests is zero") {
    Dataset d = four_point_dataset();
    d.response = {2.0, 2.0, 2.0, 2.0};
    ForestParams fp;
    fp.n_trees = 20;
    const RegressionForest forest = fit_forest(d, fp, 0);
    const ImportanceScores scores = mdi(forest, 2);
    CHECK(scores.scores == std::vector<double>{0.0, 0.0});
}

TEST_CASE("mdi attributes the single split's decrease") {
    const Dataset d = four_point_dataset();
    ForestParams fp;
    fp.n_trees = 1;
    fp.mtry = 2;
    fp.min_node_size = 1;
    fp.bootstrap = false;
    const RegressionForest forest = fit_forest(d, fp, 0);
    const ImportanceScores scores = mdi(forest, 2);
    CHECK(scores.scores[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(scores.scores[1] == 0.0);
}

TEST_CASE("mdi sums to the mean per-tree total decrease") {
    const Dataset d = signal_dataset(80, 3, 5);
    ForestParams fp;
    fp.n_trees = 30;
    const RegressionForest forest = fit_forest(d, fp, 7);
    const ImportanceScores scores = mdi(forest, 3);
    double direct = 0.0;
    for (const Tree& tree : forest.trees) {
        for (const TreeNode& node : tree.nodes) {
            if (!node.is_leaf()) direct += node.decrease;
        }
    }
    direct /= static_cast<double>(forest.trees.size());
    const double total = std::accumulate(scores.scores.begin(), scores.scores.end(), 0.0);
    CHECK(total == doctest::Approx(direct).epsilon(1e-12));
    for (double s : scores.scores) CHECK(s >= 0.0);
}

TEST_CASE("mda of an unused feature stays within permutation noise") {
    // Feature 2 is constant, so no tree can split on it.
    Dataset d = signal_dataset(100, 3, 9);
    for (std::size_t r = 0; r < d.n_rows(); ++r) d.features(r, 2) = 0.5;
    ForestParams fp;
    fp.n_trees = 120;
    const RegressionForest forest = fit_forest(d, fp, 11);
    const double score = mda(forest, d, 2, 200, 13);
    CHECK(score == doctest::Approx(0.0).epsilon(1e-9));

    // The informative feature has a clearly positive score.
    CHECK(mda(forest, d, 0, 50, 13) > 0.1);
}

TEST_CASE("mda rejects invalid reps") {
    const Dataset d = signal_dataset(50, 2, 15);
    ForestParams fp;
    fp.n_trees = 30;
    const RegressionForest forest = fit_forest(d, fp, 0);
    CHECK_THROWS_AS(mda(forest, d, 0, 0, 1), std::invalid_argument);
}

TEST_CASE("mda errors when too many rows lack oob predictions") {
    const Dataset d = signal_dataset(50, 2, 16);
    ForestParams fp;
    fp.n_trees = 1;  // most rows are in-bag for the only tree
    const RegressionForest forest = fit_forest(d, fp, 0);
    CHECK_THROWS_AS(mda(forest, d, 0, 5, 1), EmptyOob);
}

TEST_CASE("cpi with a single stratum equals mda exactly") {
    const Dataset d = signal_dataset(80, 3, 17);
    ForestParams fp;
    fp.n_trees = 60;
    const RegressionForest forest = fit_forest(d, fp, 3);
    const double a = mda(forest, d, 0, 25, 999);
    const double b = cpi(forest, d, 0, single_stratum_builder(), 25, 999);
    CHECK(a == b);  // identical permutation stream
}

TEST_CASE("cpi strata from the conditional tree") {
    // X0 determines X1 tightly; conditional permutation within strata of
    // X0 should shrink the correlated null feature's score.
    Rng rng(21);
    Dataset d;
    const std::size_t n = 300;
    d.features = Matrix(n, 2);
    d.response.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double x0 = rng.uniform01();
        d.features(r, 0) = x0;
        d.features(r, 1) = std::min(1.0, std::max(0.0, x0 + 0.05 * rng.normal()));
        d.response[r] = 3.0 * x0 + 0.3 * rng.normal();
    }
    ForestParams fp;
    fp.n_trees = 100;
    const RegressionForest forest = fit_forest(d, fp, 5);
    const double marginal = mda(forest, d, 1, 30, 7);
    const double conditional = cpi(forest, d, 1, tree_strata_builder(30), 30, 7);
    CHECK(conditional < marginal);
}

TEST_CASE("cpi strata merging handles degenerate cells") {
    const Dataset d = signal_dataset(40, 2, 23);
    ForestParams fp;
    fp.n_trees = 40;
    const RegressionForest forest = fit_forest(d, fp, 1);
    // A singleton cell merges into the nearest cell by mean of X_j.
    const StrataBuilder lopsided = [](const Dataset& data, int) {
        std::vector<int> cells(data.n_rows(), 0);
        cells[0] = 1;
        return cells;
    };
    CHECK_NOTHROW(cpi(forest, d, 0, lopsided, 5, 3));

    // All-singleton cells merge down to a usable partition.
    const StrataBuilder singletons = [](const Dataset& data, int) {
        std::vector<int> cells(data.n_rows());
        for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<int>(i);
        return cells;
    };
    CHECK_NOTHROW(cpi(forest, d, 0, singletons, 5, 3));
}

TEST_CASE("example1 generator matches its construction") {
    const std::size_t n = 4000, p = 4;
    const Dataset d = example1_generate(n, p, 31);
    CHECK(d.n_rows() == n);
    CHECK(d.n_cols() == p);
    std::size_t upper = 0;
    for (std::size_t r = 0; r < n; ++r) {
        const double x1 = d.features(r, 0);
        CHECK(x1 >= 0.0);
        CHECK(x1 <= 1.0);
        if (x1 > 0.7) {
            ++upper;
            for (std::size_t c = 1; c < p; ++c) CHECK(d.features(r, c) == x1);
        } else {
            for (std::size_t c = 1; c < p; ++c) CHECK(d.features(r, c) <= 0.7);
        }
    }
    // P(X1 > 0.7) = 0.3 within 3 standard errors.
    const double frac = static_cast<double>(upper) / static_cast<double>(n);
    CHECK(std::abs(frac - 0.3) < 3.0 * std::sqrt(0.21 / static_cast<double>(n)));
    CHECK_THROWS_AS(example1_generate(10, 1, 0), std::invalid_argument);
}

TEST_CASE("method names round trip") {
    for (ImportanceMethod m :
         {ImportanceMethod::MDI, ImportanceMethod::MDA, ImportanceMethod::CPI}) {
        CHECK(method_from_name(method_name(m)) == m);
    }
    CHECK_THROWS_AS(method_from_name("bogus"), std::invalid_argument);
}
