#include "fact/fact_stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

#include "fact/errors.hpp"
#include "fact/math_util.hpp"
#include "fact/rng.hpp"

#include "json.hpp"

namespace fact {

namespace {

// Salts for the per-purpose seed streams. Shared by every variant so that
// statistics computed from the same root seed reuse identical forests.
constexpr std::uint64_t kSaltSplit = 1;
constexpr std::uint64_t kSaltYhat = 2;
constexpr std::uint64_t kSaltPartition = 3;
constexpr std::uint64_t kSaltGhatBase = 16;

bool warnings_enabled() {
    static const bool enabled = [] {
        const char* level = std::getenv("FACT_LOG");
        if (!level) return true;
        const std::string s(level);
        return !(s == "error" || s == "off");
    }();
    return enabled;
}

void warn(const std::string& msg) {
    if (warnings_enabled()) std::fprintf(stderr, "[fact] warning: %s\n", msg.c_str());
}

double column_mean(const Dataset& d, int j, const std::vector<std::size_t>& rows) {
    double s = 0.0;
    for (std::size_t r : rows) s += d.features(r, static_cast<std::size_t>(j));
    return s / static_cast<double>(rows.size());
}

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    return rows;
}

}  // namespace

std::string variant_name(FactVariant v) {
    switch (v) {
        case FactVariant::basic: return "basic";
        case FactVariant::imbalanced: return "imbalanced";
        case FactVariant::conditioning: return "conditioning";
        case FactVariant::ensemble: return "ensemble";
        case FactVariant::general: return "general";
    }
    return "unknown";
}

FactVariant variant_from_name(const std::string& name) {
    if (name == "basic") return FactVariant::basic;
    if (name == "imbalanced") return FactVariant::imbalanced;
    if (name == "conditioning") return FactVariant::conditioning;
    if (name == "ensemble") return FactVariant::ensemble;
    if (name == "general") return FactVariant::general;
    throw std::invalid_argument("unknown FACT variant: " + name);
}

int FactConfig::resolve_k_n(std::size_t n_inference) const {
    int k = k_n ? *k_n
                : std::max(1, static_cast<int>(std::lround(
                                  std::log(static_cast<double>(n_inference)) / 2.0)));
    return k;
}

double FactReport::leading_component() const {
    for (const auto& c : components) {
        if (c.transform_index == 0 && c.block_index == 0) return c.value;
    }
    return max_stat;
}

namespace {

void effective_sizes(FactVariant variant, int& n_transforms, int& n_blocks) {
    switch (variant) {
        case FactVariant::basic:
        case FactVariant::imbalanced:
        case FactVariant::conditioning:
            n_transforms = 1;
            n_blocks = 1;
            break;
        case FactVariant::ensemble:
            n_blocks = 1;
            break;
        case FactVariant::general:
            break;
    }
}

}  // namespace

double threshold(double alpha, FactVariant variant, int n_transforms, int n_blocks) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("threshold: alpha must lie in (0, 1)");
    }
    if (n_transforms < 1 || n_blocks < 1) {
        throw std::invalid_argument("threshold: sizes must be >= 1");
    }
    effective_sizes(variant, n_transforms, n_blocks);
    const double denom = 2.0 * n_transforms * n_blocks;
    return normal_quantile(1.0 - alpha / denom);
}

double fact_p_value(double max_stat, FactVariant variant, int n_transforms,
                    int n_blocks) {
    effective_sizes(variant, n_transforms, n_blocks);
    const double p = 2.0 * n_transforms * n_blocks * normal_cdf(-max_stat);
    return std::min(1.0, p);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_rows(
    std::size_t n, std::size_t n_train, std::uint64_t seed) {
    if (n_train == 0 || n_train >= n) {
        throw std::invalid_argument("split_rows: training size must be in [1, n-1]");
    }
    std::vector<std::size_t> idx = all_rows(n);
    Rng rng(derive_seed(seed, kSaltSplit));
    rng.shuffle(idx);
    std::vector<std::size_t> train(idx.begin(),
                                   idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> infer(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                                   idx.end());
    return {std::move(train), std::move(infer)};
}

std::size_t imbalanced_inference_size(std::size_t n_total) {
    return static_cast<std::size_t>(
        std::lround(static_cast<double>(n_total) / std::log(static_cast<double>(n_total))));
}

// ---------------------------------------------------------------------------
// Frames.
// ---------------------------------------------------------------------------

InferenceFrame build_split_frame(int j, const Dataset& train, const Dataset& infer,
                                 const std::vector<Transform>& transforms,
                                 const ForestParams& fp, std::uint64_t seed,
                                 bool fit_g_forests, int n_threads) {
    if (train.n_cols() != infer.n_cols()) {
        throw std::invalid_argument("fact: train and inference dimensions differ");
    }
    if (j < 0 || static_cast<std::size_t>(j) >= train.n_cols()) {
        throw std::invalid_argument("fact: feature index out of range");
    }
    if (transforms.empty()) {
        throw std::invalid_argument("fact: need at least one transform");
    }

    const Dataset train_minus = train.without_column(static_cast<std::size_t>(j));
    const Dataset infer_minus = infer.without_column(static_cast<std::size_t>(j));
    const std::size_t n = infer.n_rows();
    const std::size_t m = transforms.size();

    InferenceFrame frame;
    frame.n = n;
    frame.n_transforms = m;
    frame.has_ghat = fit_g_forests;
    frame.y = infer.response;

    const RegressionForest forest_y =
        fit_forest(train_minus, fp, derive_seed(seed, kSaltYhat), n_threads);
    frame.yhat.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        frame.yhat[i] = predict_row(forest_y, infer_minus.features.row(i),
                                    infer_minus.n_cols());
    }

    const double center_infer = column_mean(infer, j, all_rows(n));
    frame.g_values.resize(m * n);
    for (std::size_t l = 0; l < m; ++l) {
        for (std::size_t i = 0; i < n; ++i) {
            frame.g_values[l * n + i] =
                transforms[l].apply(infer.features(i, static_cast<std::size_t>(j)),
                                    center_infer);
        }
    }

    if (fit_g_forests) {
        const double center_train = column_mean(train, j, all_rows(train.n_rows()));
        frame.ghat.resize(m * n);
        for (std::size_t l = 0; l < m; ++l) {
            Dataset g_train = train_minus;
            for (std::size_t r = 0; r < train.n_rows(); ++r) {
                g_train.response[r] =
                    transforms[l].apply(train.features(r, static_cast<std::size_t>(j)),
                                        center_train);
            }
            const RegressionForest forest_g =
                fit_forest(g_train, fp, derive_seed(seed, kSaltGhatBase + l), n_threads);
            for (std::size_t i = 0; i < n; ++i) {
                frame.ghat[l * n + i] = predict_row(
                    forest_g, infer_minus.features.row(i), infer_minus.n_cols());
            }
        }
    }
    return frame;
}

InferenceFrame build_oob_frame(int j, const Dataset& full,
                               const std::vector<Transform>& transforms,
                               const ForestParams& fp, std::uint64_t seed,
                               bool fit_g_forests, int n_threads) {
    if (j < 0 || static_cast<std::size_t>(j) >= full.n_cols()) {
        throw std::invalid_argument("fact: feature index out of range");
    }
    if (transforms.empty()) {
        throw std::invalid_argument("fact: need at least one transform");
    }
    if (!fp.bootstrap) {
        throw std::invalid_argument(
            "fact: OOB mode requires bootstrap resampling to be enabled");
    }

    const Dataset full_minus = full.without_column(static_cast<std::size_t>(j));
    const std::size_t n = full.n_rows();
    const std::size_t m = transforms.size();

    const RegressionForest forest_y =
        fit_forest(full_minus, fp, derive_seed(seed, kSaltYhat), n_threads);
    const auto oob_y = predict_oob(forest_y, full_minus);

    const double center_full = column_mean(full, j, all_rows(n));
    std::vector<std::vector<std::optional<double>>> oob_g(m);
    if (fit_g_forests) {
        for (std::size_t l = 0; l < m; ++l) {
            Dataset g_data = full_minus;
            for (std::size_t r = 0; r < n; ++r) {
                g_data.response[r] =
                    transforms[l].apply(full.features(r, static_cast<std::size_t>(j)),
                                        center_full);
            }
            const RegressionForest forest_g =
                fit_forest(g_data, fp, derive_seed(seed, kSaltGhatBase + l), n_threads);
            oob_g[l] = predict_oob(forest_g, g_data);
        }
    }

    // Keep rows with an OOB prediction from every fitted forest.
    std::vector<std::size_t> usable;
    usable.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        bool ok = oob_y[i].has_value();
        if (ok && fit_g_forests) {
            for (std::size_t l = 0; l < m; ++l) ok = ok && oob_g[l][i].has_value();
        }
        if (ok) usable.push_back(i);
    }
    const std::size_t dropped = n - usable.size();
    if (dropped > n / 10) {
        throw EmptyOob("fact: " + std::to_string(dropped) + " of " + std::to_string(n) +
                       " rows lack out-of-bag predictions; grow more trees");
    }
    if (dropped > 0) {
        warn(std::to_string(dropped) + " rows dropped for empty out-of-bag tree sets");
    }

    InferenceFrame frame;
    frame.n = usable.size();
    frame.n_transforms = m;
    frame.has_ghat = fit_g_forests;
    frame.dropped = dropped;
    frame.y.resize(frame.n);
    frame.yhat.resize(frame.n);
    for (std::size_t i = 0; i < frame.n; ++i) {
        frame.y[i] = full.response[usable[i]];
        frame.yhat[i] = *oob_y[usable[i]];
    }
    const double center_usable = column_mean(full, j, usable);
    frame.g_values.resize(m * frame.n);
    for (std::size_t l = 0; l < m; ++l) {
        for (std::size_t i = 0; i < frame.n; ++i) {
            frame.g_values[l * frame.n + i] = transforms[l].apply(
                full.features(usable[i], static_cast<std::size_t>(j)), center_usable);
        }
    }
    if (fit_g_forests) {
        frame.ghat.resize(m * frame.n);
        for (std::size_t l = 0; l < m; ++l) {
            for (std::size_t i = 0; i < frame.n; ++i) {
                frame.ghat[l * frame.n + i] = *oob_g[l][usable[i]];
            }
        }
    }
    return frame;
}

// ---------------------------------------------------------------------------
// Statistic assembly.
// ---------------------------------------------------------------------------

FactReport assemble_report(const InferenceFrame& frame, int j, FactVariant variant,
                           bool conditioned, int k_n, std::uint64_t partition_seed) {
    const std::size_t n = frame.n;
    if (n < 2) {
        throw std::invalid_argument("fact: inference sample too small");
    }
    if (conditioned && !frame.has_ghat) {
        throw std::invalid_argument("fact: frame lacks conditional-mean estimates");
    }
    if (k_n < 1) throw std::invalid_argument("fact: k_n must be >= 1");
    if (static_cast<std::size_t>(k_n) >= n) {
        throw PartitionTooSmall("fact: k_n must be smaller than the inference sample");
    }

    const std::size_t m = frame.n_transforms;
    std::vector<std::vector<double>> d(m, std::vector<double>(n));
    std::vector<double> sigma(m);
    for (std::size_t l = 0; l < m; ++l) {
        double g_mean = 0.0;
        if (!conditioned) {
            for (std::size_t i = 0; i < n; ++i) g_mean += frame.g(l, i);
            g_mean /= static_cast<double>(n);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double residual = frame.y[i] - frame.yhat[i];
            const double centered =
                conditioned ? frame.g(l, i) - frame.gh(l, i) : frame.g(l, i) - g_mean;
            d[l][i] = residual * centered;
        }
        const double var = variance_pop(d[l]);  // 1/n normalization
        if (!(var > 1e-300)) {
            throw DegenerateVariance("fact: degenerate variance for transform " +
                                     std::to_string(l));
        }
        sigma[l] = std::sqrt(var);
    }

    // Random near-equal partition of the inference positions; drawn from the
    // seed so the blocks do not depend on row order.
    std::vector<std::size_t> positions = all_rows(n);
    if (k_n > 1) {
        Rng rng(partition_seed);
        rng.shuffle(positions);
    }
    const std::size_t base = n / static_cast<std::size_t>(k_n);
    const std::size_t remainder = n % static_cast<std::size_t>(k_n);
    if (base < 2) {
        throw PartitionTooSmall("fact: partition block with fewer than 2 rows");
    }

    FactReport report;
    report.feature = j;
    report.variant = variant;
    report.sigma_hats = sigma;
    report.n_effective = static_cast<int>(n);

    double max_abs = 0.0;
    for (std::size_t l = 0; l < m; ++l) {
        std::size_t offset = 0;
        for (int q = 0; q < k_n; ++q) {
            const std::size_t block_size =
                base + (static_cast<std::size_t>(q) < remainder ? 1 : 0);
            double sum = 0.0;
            for (std::size_t i = 0; i < block_size; ++i) {
                sum += d[l][positions[offset + i]];
            }
            offset += block_size;
            const double value =
                sum / (std::sqrt(static_cast<double>(block_size)) * sigma[l]);
            report.components.push_back(
                {static_cast<int>(l), q, value});
            max_abs = std::max(max_abs, std::abs(value));
        }
    }

    const bool single = (variant == FactVariant::basic ||
                         variant == FactVariant::imbalanced ||
                         variant == FactVariant::conditioning);
    report.max_stat = single ? report.components.front().value : max_abs;
    report.p_value = fact_p_value(max_abs, variant, static_cast<int>(m), k_n);
    for (double alpha : {0.1, 0.05, 0.025}) {
        report.threshold_at[alpha] =
            threshold(alpha, variant, static_cast<int>(m), k_n);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Public variants.
// ---------------------------------------------------------------------------

FactReport fact_basic(int j, const Dataset& train, const Dataset& infer,
                      const Transform& g, const ForestParams& fp, std::uint64_t seed,
                      int n_threads) {
    const InferenceFrame frame =
        build_split_frame(j, train, infer, {g}, fp, seed, false, n_threads);
    return assemble_report(frame, j, FactVariant::basic, false, 1, 0);
}

FactReport fact_imbalanced(int j, const Dataset& full, const FactConfig& cfg,
                           int n_threads) {
    if (cfg.split_mode.kind == SplitModeKind::oob) {
        throw std::invalid_argument(
            "fact: the imbalancing variant requires sample splitting");
    }
    const std::size_t n_total = full.n_rows();
    std::size_t n_infer;
    if (cfg.split_mode.train_fraction) {
        const std::size_t n_train = static_cast<std::size_t>(
            std::lround(*cfg.split_mode.train_fraction * static_cast<double>(n_total)));
        n_infer = n_total - n_train;
    } else {
        n_infer = imbalanced_inference_size(n_total);
    }
    if (n_infer < 10) {
        throw std::invalid_argument(
            "fact: inference sample too small after imbalanced split (n = " +
            std::to_string(n_infer) + ")");
    }
    const auto [train_rows, infer_rows] =
        split_rows(n_total, n_total - n_infer, cfg.seed);
    const Dataset train = full.subset(train_rows);
    const Dataset infer = full.subset(infer_rows);
    const Transform& g = cfg.transforms.front();
    const InferenceFrame frame = build_split_frame(j, train, infer, {g},
                                                   cfg.forest_params, cfg.seed, false,
                                                   n_threads);
    return assemble_report(frame, j, FactVariant::imbalanced, false, 1, 0);
}

FactReport fact_conditioning(int j, const Dataset& train, const Dataset& infer,
                             const Transform& g, const ForestParams& fp,
                             std::uint64_t seed, int n_threads) {
    const InferenceFrame frame =
        build_split_frame(j, train, infer, {g}, fp, seed, true, n_threads);
    return assemble_report(frame, j, FactVariant::conditioning, true, 1, 0);
}

FactReport fact_ensemble(int j, const Dataset& train, const Dataset& infer,
                         const std::vector<Transform>& transforms,
                         const ForestParams& fp, std::uint64_t seed, int n_threads) {
    const InferenceFrame frame =
        build_split_frame(j, train, infer, transforms, fp, seed, false, n_threads);
    return assemble_report(frame, j, FactVariant::ensemble, false, 1, 0);
}

FactReport fact_general(int j, const Dataset& full, const FactConfig& cfg,
                        int n_threads) {
    InferenceFrame frame;
    if (cfg.split_mode.kind == SplitModeKind::oob) {
        frame = build_oob_frame(j, full, cfg.transforms, cfg.forest_params, cfg.seed,
                                true, n_threads);
    } else {
        const double fraction = cfg.split_mode.train_fraction.value_or(0.5);
        if (!(fraction > 0.0 && fraction < 1.0)) {
            throw std::invalid_argument("fact: train_fraction must lie in (0, 1)");
        }
        const std::size_t n_train = static_cast<std::size_t>(
            std::lround(fraction * static_cast<double>(full.n_rows())));
        const auto [train_rows, infer_rows] =
            split_rows(full.n_rows(), n_train, cfg.seed);
        const Dataset train = full.subset(train_rows);
        const Dataset infer = full.subset(infer_rows);
        frame = build_split_frame(j, train, infer, cfg.transforms, cfg.forest_params,
                                  cfg.seed, true, n_threads);
    }
    const int k = cfg.resolve_k_n(frame.n);
    return assemble_report(frame, j, FactVariant::general, true, k,
                           derive_seed(cfg.seed, kSaltPartition));
}

FactReport run_fact(int j, const Dataset& data, const FactConfig& cfg, int n_threads) {
    const bool oob = cfg.split_mode.kind == SplitModeKind::oob;
    switch (cfg.variant) {
        case FactVariant::basic:
        case FactVariant::ensemble: {
            const std::vector<Transform> transforms =
                cfg.variant == FactVariant::basic
                    ? std::vector<Transform>{cfg.transforms.front()}
                    : cfg.transforms;
            InferenceFrame frame;
            if (oob) {
                frame = build_oob_frame(j, data, transforms, cfg.forest_params,
                                        cfg.seed, false, n_threads);
            } else {
                const double fraction = cfg.split_mode.train_fraction.value_or(0.5);
                const std::size_t n_train = static_cast<std::size_t>(
                    std::lround(fraction * static_cast<double>(data.n_rows())));
                const auto [train_rows, infer_rows] =
                    split_rows(data.n_rows(), n_train, cfg.seed);
                frame = build_split_frame(j, data.subset(train_rows),
                                          data.subset(infer_rows), transforms,
                                          cfg.forest_params, cfg.seed, false, n_threads);
            }
            return assemble_report(frame, j, cfg.variant, false, 1, 0);
        }
        case FactVariant::imbalanced:
            return fact_imbalanced(j, data, cfg, n_threads);
        case FactVariant::conditioning: {
            const std::vector<Transform> transforms{cfg.transforms.front()};
            InferenceFrame frame;
            if (oob) {
                frame = build_oob_frame(j, data, transforms, cfg.forest_params,
                                        cfg.seed, true, n_threads);
            } else {
                const double fraction = cfg.split_mode.train_fraction.value_or(0.5);
                const std::size_t n_train = static_cast<std::size_t>(
                    std::lround(fraction * static_cast<double>(data.n_rows())));
                const auto [train_rows, infer_rows] =
                    split_rows(data.n_rows(), n_train, cfg.seed);
                frame = build_split_frame(j, data.subset(train_rows),
                                          data.subset(infer_rows), transforms,
                                          cfg.forest_params, cfg.seed, true, n_threads);
            }
            return assemble_report(frame, j, cfg.variant, true, 1, 0);
        }
        case FactVariant::general:
            return fact_general(j, data, cfg, n_threads);
    }
    throw std::invalid_argument("run_fact: unknown variant");
}

// ---------------------------------------------------------------------------
// Population quantities.
// ---------------------------------------------------------------------------

PopulationKappa kappa_oracle(const std::function<double(double)>& h,
                             const Transform& g, FeatureLaw law,
                             std::size_t mc_samples, std::uint64_t seed) {
    if (law != FeatureLaw::uniform_iid) {
        throw std::invalid_argument("kappa_oracle: unsupported feature law");
    }
    if (mc_samples < 2) {
        throw std::invalid_argument("kappa_oracle: need at least 2 samples");
    }
    Rng rng(seed);
    std::vector<double> xs(mc_samples);
    for (double& x : xs) x = rng.uniform01();

    double x_mean = 0.0;
    for (double x : xs) x_mean += x;
    x_mean /= static_cast<double>(mc_samples);

    std::vector<double> hv(mc_samples), gv(mc_samples);
    for (std::size_t i = 0; i < mc_samples; ++i) {
        hv[i] = h(xs[i]);
        gv[i] = g.apply(xs[i], x_mean);
    }
    const double h_mean = mean(hv);
    const double g_mean = mean(gv);
    std::vector<double> products(mc_samples);
    for (std::size_t i = 0; i < mc_samples; ++i) {
        products[i] = (hv[i] - h_mean) * (gv[i] - g_mean);
    }
    PopulationKappa out;
    out.kappa_marginal = mean(products);
    // With independent features the conditional mean of g(X_j) given the
    // rest equals the marginal mean, so both quantities coincide.
    out.kappa_conditional = out.kappa_marginal;
    out.mc_samples = mc_samples;
    out.mc_stderr = sample_sd(products) / std::sqrt(static_cast<double>(mc_samples));
    return out;
}

std::string report_to_json(const FactReport& report, const std::string& feature_label,
                           const std::string& config_echo_json) {
    nlohmann::json j;
    j["feature"] = feature_label;
    j["feature_index"] = report.feature;
    j["variant"] = variant_name(report.variant);
    j["stat"] = report.max_stat;
    j["p_value"] = report.p_value;
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : report.components) {
        comps.push_back({{"l", c.transform_index}, {"q", c.block_index}, {"value", c.value}});
    }
    j["components"] = std::move(comps);
    j["sigma_hats"] = report.sigma_hats;
    j["n_effective"] = report.n_effective;
    nlohmann::json thresholds = nlohmann::json::object();
    for (const auto& [alpha, t] : report.threshold_at) {
        thresholds[std::to_string(alpha)] = t;
    }
    j["threshold_at"] = std::move(thresholds);
    if (!config_echo_json.empty()) {
        j["config_echo"] = nlohmann::json::parse(config_echo_json);
    }
    return j.dump();
}

}  // namespace fact
