#ifndef FACT_INFERENCE_TOOLS_HPP
#define FACT_INFERENCE_TOOLS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fact/dataset.hpp"
#include "fact/fact_stats.hpp"
#include "fact/forest.hpp"

namespace fact {

/// Benjamini-Hochberg step-up: largest k with p_(k) <= k q / m, reject all
/// p-values <= p_(k). Returns rejected indices, ascending.
std::vector<std::size_t> bh_fdr(const std::vector<double>& p_values, double q);

/// Feature groups for residualization. Every group names one selected
/// feature; the other members get replaced by forest residuals.
struct Group {
    std::size_t selected = 0;
    std::vector<std::size_t> members;
};

struct GroupSpec {
    std::vector<Group> groups;

    void validate(std::size_t p) const;
};

/// Replaces each non-selected member column with its residual after a
/// forest regression on the group's selected feature (out-of-bag
/// predictions), then rescales the residual columns back to [0, 1].
Dataset group_residualize(const Dataset& data, const GroupSpec& spec,
                          const ForestParams& fp, std::uint64_t seed,
                          int n_threads = 1);

struct RollingSpec {
    std::size_t window_length = 60;
    std::size_t step = 1;
    std::size_t horizon = 1;  // response lead

    void validate() const;
};

struct RollingCell {
    std::size_t window_end = 0;  // index of the window's last row
    int feature = 0;
    double p_value = 1.0;
};

/// Runs the configured test per rolling window over a time-ordered
/// dataset, regressing the horizon-lead response on current features.
/// Window w covers rows [w*step, w*step + window_length).
std::vector<RollingCell> rolling_pvalues(const Dataset& data, const RollingSpec& spec,
                                         const FactConfig& cfg,
                                         const std::vector<int>& features,
                                         int n_threads = 1);

std::size_t rolling_window_count(std::size_t n_rows, const RollingSpec& spec);

}  // namespace fact

#endif  // FACT_INFERENCE_TOOLS_HPP
