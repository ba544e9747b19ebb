#ifndef FACT_FACT_STATS_HPP
#define FACT_FACT_STATS_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fact/dataset.hpp"
#include "fact/forest.hpp"

namespace fact {

/// Feature transformation applied before the residual correlation.
/// identity: g(x) = x. centered_square: g(x) = (x - c)^2, where c is the
/// mean of the raw feature over the sample the transform is evaluated on.
struct Transform {
    enum class Kind { identity, centered_square };
    Kind kind = Kind::identity;

    static Transform identity() { return {Kind::identity}; }
    static Transform centered_square() { return {Kind::centered_square}; }

    double apply(double x, double center) const {
        if (kind == Kind::identity) return x;
        const double d = x - center;
        return d * d;
    }
    bool needs_center() const { return kind == Kind::centered_square; }
    std::string name() const {
        return kind == Kind::identity ? "identity" : "centered_square";
    }
};

enum class FactVariant { basic, imbalanced, conditioning, ensemble, general };

std::string variant_name(FactVariant v);
FactVariant variant_from_name(const std::string& name);

enum class SplitModeKind { sample_split, oob };

struct SplitMode {
    SplitModeKind kind = SplitModeKind::oob;
    /// Training fraction for sample_split; nullopt selects the variant
    /// default (0.5, or the N/ln N imbalancing rule).
    std::optional<double> train_fraction;

    static SplitMode oob() { return {SplitModeKind::oob, std::nullopt}; }
    static SplitMode sample_split(std::optional<double> fraction = std::nullopt) {
        return {SplitModeKind::sample_split, fraction};
    }
};

struct FactConfig {
    FactVariant variant = FactVariant::general;
    std::vector<Transform> transforms = {Transform::identity(),
                                         Transform::centered_square()};
    /// Partition count |Q|; nullopt selects max(1, round(ln(n)/2)).
    std::optional<int> k_n;
    SplitMode split_mode = SplitMode::oob();
    ForestParams forest_params;
    std::uint64_t seed = 0;

    int resolve_k_n(std::size_t n_inference) const;
};

/// One (transform, block) component of a statistic.
struct ComponentStat {
    int transform_index = 0;
    int block_index = 0;
    double value = 0.0;  // signed
};

struct FactReport {
    int feature = 0;
    FactVariant variant = FactVariant::basic;
    std::vector<ComponentStat> components;
    /// Max of |component| for ensemble/general; the signed statistic for
    /// single-component variants.
    double max_stat = 0.0;
    double p_value = 1.0;
    std::map<double, double> threshold_at;  // alpha -> rejection threshold
    std::vector<double> sigma_hats;         // one per transform
    int n_effective = 0;

    /// Signed value of the (first transform, first block) component; the
    /// quantity plotted against Gaussian quantiles in the Q-Q diagnostics.
    double leading_component() const;
};

/// Rejection threshold at level alpha for a variant: the union-bound
/// inverse-normal with 2 * |L| * |Q| effective comparisons (|L| = |Q| = 1
/// for the single-statistic variants, |Q| = 1 for ensemble).
double threshold(double alpha, FactVariant variant, int n_transforms = 1,
                 int n_blocks = 1);

/// p-value paired with `threshold`: min{1, 2 |L| |Q| Phi(-max_stat)}.
double fact_p_value(double max_stat, FactVariant variant, int n_transforms,
                    int n_blocks);

/// Seed-determined train/inference row split (shuffle, then first n_train).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_rows(
    std::size_t n, std::size_t n_train, std::uint64_t seed);

/// Default inference size for the imbalancing rule: round(n / ln n).
std::size_t imbalanced_inference_size(std::size_t n_total);

// ---------------------------------------------------------------------------
// Explicit train/inference statistic variants.
// ---------------------------------------------------------------------------

/// Basic variant: regress Y on the training sample with feature j removed,
/// then correlate inference residuals with the centered transformed feature,
/// self-normalized. Throws DegenerateVariance when the normalizer is 0.
FactReport fact_basic(int j, const Dataset& train, const Dataset& infer,
                      const Transform& g, const ForestParams& fp, std::uint64_t seed,
                      int n_threads = 1);

/// Imbalancing variant: same statistic on a heavily imbalanced split of
/// `full`, inference size round(n / ln n) by default.
FactReport fact_imbalanced(int j, const Dataset& full, const FactConfig& cfg,
                           int n_threads = 1);

/// Conditioning variant: the marginal mean of g(X_j) is replaced by a
/// second forest regressing g(X_j) on the remaining features.
FactReport fact_conditioning(int j, const Dataset& train, const Dataset& infer,
                             const Transform& g, const ForestParams& fp,
                             std::uint64_t seed, int n_threads = 1);

/// Ensemble variant: max |basic statistic| over the transform list.
FactReport fact_ensemble(int j, const Dataset& train, const Dataset& infer,
                         const std::vector<Transform>& transforms,
                         const ForestParams& fp, std::uint64_t seed,
                         int n_threads = 1);

/// General variant: conditioning per transform, inference sample randomly
/// partitioned into k_n near-equal blocks, max |component|. Uses sample
/// splitting or out-of-bag predictions per cfg.split_mode.
FactReport fact_general(int j, const Dataset& full, const FactConfig& cfg,
                        int n_threads = 1);

/// Unified entry point: dispatches on cfg.variant and cfg.split_mode.
FactReport run_fact(int j, const Dataset& data, const FactConfig& cfg,
                    int n_threads = 1);

// ---------------------------------------------------------------------------
// Composition layer: forest predictions for one tested feature, reusable
// across statistic variants computed from the same fits.
// ---------------------------------------------------------------------------

struct InferenceFrame {
    std::vector<double> y;                        // inference responses
    std::vector<double> yhat;                     // forest estimate of E(Y | X_-j)
    std::vector<double> g_values;                 // per transform x rows, flattened
    std::vector<double> ghat;                     // same layout; empty if not fitted
    std::size_t n = 0;                            // usable inference rows
    std::size_t n_transforms = 0;
    bool has_ghat = false;
    std::size_t dropped = 0;                      // rows without OOB predictions

    double g(std::size_t l, std::size_t i) const { return g_values[l * n + i]; }
    double gh(std::size_t l, std::size_t i) const { return ghat[l * n + i]; }
};

/// Sample-split frame: forests fit on `train` minus column j, evaluated on
/// `infer`. Fits the conditional-mean forests for each transform only when
/// fit_g_forests is set.
InferenceFrame build_split_frame(int j, const Dataset& train, const Dataset& infer,
                                 const std::vector<Transform>& transforms,
                                 const ForestParams& fp, std::uint64_t seed,
                                 bool fit_g_forests, int n_threads = 1);

/// Out-of-bag frame: forests fit on the full sample minus column j; rows
/// lacking an OOB prediction in any forest are dropped (error when > 10%).
InferenceFrame build_oob_frame(int j, const Dataset& full,
                               const std::vector<Transform>& transforms,
                               const ForestParams& fp, std::uint64_t seed,
                               bool fit_g_forests, int n_threads = 1);

/// Assembles a report from a frame. conditioned selects the d_i form
/// (g - ghat vs g - mean g); k_n > 1 requires a conditioned frame.
FactReport assemble_report(const InferenceFrame& frame, int j, FactVariant variant,
                           bool conditioned, int k_n, std::uint64_t partition_seed);

// ---------------------------------------------------------------------------
// Population quantities (Monte Carlo oracle).
// ---------------------------------------------------------------------------

enum class FeatureLaw { uniform_iid };

struct PopulationKappa {
    double kappa_marginal = 0.0;
    double kappa_conditional = 0.0;
    std::size_t mc_samples = 0;
    double mc_stderr = 0.0;
};

/// Monte Carlo estimate of the residual-transform covariances for the
/// additive model Y = h(X_j) + H(X_-j) + eps with independent uniform
/// features, where the conditional mean is available in closed form and
/// the H and eps terms integrate out of both quantities.
PopulationKappa kappa_oracle(const std::function<double(double)>& h,
                             const Transform& g, FeatureLaw law,
                             std::size_t mc_samples, std::uint64_t seed);

/// JSON serialization of a report: {feature, variant, stat, p_value,
/// components: [{l, q, value}], config_echo}.
std::string report_to_json(const FactReport& report, const std::string& feature_label,
                           const std::string& config_echo_json);

}  // namespace fact

#endif  // FACT_FACT_STATS_HPP
