#include "fact/inference_tools.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "fact/parallel.hpp"
#include "fact/rng.hpp"

namespace fact {

std::vector<std::size_t> bh_fdr(const std::vector<double>& p_values, double q) {
    if (!(q > 0.0 && q < 1.0)) {
        throw std::invalid_argument("bh_fdr: q must lie in (0, 1)");
    }
    for (double p : p_values) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument("bh_fdr: p-values must lie in [0, 1]");
        }
    }
    const std::size_t m = p_values.size();
    if (m == 0) return {};
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return p_values[a] < p_values[b];
    });
    double cutoff = -1.0;
    for (std::size_t k = m; k >= 1; --k) {
        if (p_values[order[k - 1]] <= static_cast<double>(k) * q / static_cast<double>(m)) {
            cutoff = p_values[order[k - 1]];
            break;
        }
    }
    std::vector<std::size_t> rejected;
    if (cutoff >= 0.0) {
        for (std::size_t i = 0; i < m; ++i) {
            if (p_values[i] <= cutoff) rejected.push_back(i);
        }
    }
    return rejected;
}

void GroupSpec::validate(std::size_t p) const {
    std::set<std::size_t> seen;
    for (const Group& g : groups) {
        bool selected_in_members = false;
        for (std::size_t m : g.members) {
            if (m >= p) {
                throw std::invalid_argument("GroupSpec: member column " +
                                            std::to_string(m) + " out of range");
            }
            if (!seen.insert(m).second) {
                throw std::invalid_argument("GroupSpec: groups are not disjoint");
            }
            if (m == g.selected) selected_in_members = true;
        }
        if (!selected_in_members) {
            throw std::invalid_argument(
                "GroupSpec: selected feature must belong to its group");
        }
    }
}

Dataset group_residualize(const Dataset& data, const GroupSpec& spec,
                          const ForestParams& fp, std::uint64_t seed, int n_threads) {
    spec.validate(data.n_cols());
    Dataset out = data;
    const std::size_t n = data.n_rows();

    struct Job {
        std::size_t selected;
        std::size_t member;
    };
    std::vector<Job> jobs;
    for (const Group& g : spec.groups) {
        for (std::size_t m : g.members) {
            if (m != g.selected) jobs.push_back({g.selected, m});
        }
    }

    std::vector<std::vector<double>> residuals(jobs.size());
    parallel_for(jobs.size(), n_threads, [&](std::size_t k) {
        const Job& job = jobs[k];
        Dataset one;
        one.features = Matrix(n, 1);
        for (std::size_t r = 0; r < n; ++r) {
            one.features(r, 0) = data.features(r, job.selected);
        }
        one.response = data.column(job.member);
        const RegressionForest forest =
            fit_forest(one, fp, derive_seed(seed, k), 1);
        const auto oob = predict_oob(forest, one);
        std::vector<double> res(n);
        for (std::size_t r = 0; r < n; ++r) {
            // Rows with empty OOB tree sets (rare with default tree counts)
            // fall back to full-forest predictions.
            const double fitted =
                oob[r] ? *oob[r] : predict_row(forest, one.features.row(r), 1);
            res[r] = one.response[r] - fitted;
        }
        residuals[k] = std::move(res);
    });

    // Rescale residual columns back onto [0, 1] to keep the invariant.
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        Matrix col(n, 1);
        for (std::size_t r = 0; r < n; ++r) col(r, 0) = residuals[k][r];
        min_max_scale(col);
        for (std::size_t r = 0; r < n; ++r) out.features(r, jobs[k].member) = col(r, 0);
    }
    return out;
}

void RollingSpec::validate() const {
    if (window_length < 20) {
        throw std::invalid_argument("RollingSpec: window_length must be >= 20");
    }
    if (step < 1) throw std::invalid_argument("RollingSpec: step must be >= 1");
    if (horizon < 1) throw std::invalid_argument("RollingSpec: horizon must be >= 1");
    if (horizon >= window_length) {
        throw std::invalid_argument("RollingSpec: horizon must be below window_length");
    }
}

std::size_t rolling_window_count(std::size_t n_rows, const RollingSpec& spec) {
    if (spec.window_length > n_rows) {
        throw std::invalid_argument("rolling: window exceeds the data length");
    }
    return (n_rows - spec.window_length) / spec.step + 1;
}

std::vector<RollingCell> rolling_pvalues(const Dataset& data, const RollingSpec& spec,
                                         const FactConfig& cfg,
                                         const std::vector<int>& features,
                                         int n_threads) {
    spec.validate();
    data.validate();
    const std::size_t n_windows = rolling_window_count(data.n_rows(), spec);

    std::vector<std::vector<RollingCell>> per_window(n_windows);
    parallel_for(n_windows, n_threads, [&](std::size_t w) {
        const std::size_t start = w * spec.step;
        const std::size_t window_end = start + spec.window_length - 1;

        // Pair features at time t with the response `horizon` steps ahead.
        const std::size_t n_eff = spec.window_length - spec.horizon;
        Dataset window;
        window.features = Matrix(n_eff, data.n_cols());
        window.response.resize(n_eff);
        for (std::size_t t = 0; t < n_eff; ++t) {
            for (std::size_t c = 0; c < data.n_cols(); ++c) {
                window.features(t, c) = data.features(start + t, c);
            }
            window.response[t] = data.response[start + t + spec.horizon];
        }
        window.feature_names = data.feature_names;

        FactConfig window_cfg = cfg;
        window_cfg.seed = derive_seed(cfg.seed, w);
        for (int j : features) {
            RollingCell cell;
            cell.window_end = window_end;
            cell.feature = j;
            cell.p_value = run_fact(j, window, window_cfg, 1).p_value;
            per_window[w].push_back(cell);
        }
    });

    std::vector<RollingCell> out;
    for (const auto& cells : per_window) {
        out.insert(out.end(), cells.begin(), cells.end());
    }
    return out;
}

}  // namespace fact
