// Command-line front end: feature-significance testing, simulation
// experiment reproduction, baseline importance scores, and rolling-window
// p-value analysis. Exit codes: 0 success, 2 user/config error, 3 internal
// numerical error.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fact/config_json.hpp"
#include "fact/csv.hpp"
#include "fact/errors.hpp"
#include "fact/fact_stats.hpp"
#include "fact/importance.hpp"
#include "fact/inference_tools.hpp"
#include "fact/rng.hpp"
#include "fact/sim_bench.hpp"

namespace {

constexpr int kExitUser = 2;
constexpr int kExitNumerical = 3;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open file: " + path);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << content;
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string item;
    for (char ch : csv) {
        if (ch == ',') {
            if (!item.empty()) out.push_back(item);
            item.clear();
        } else {
            item.push_back(ch);
        }
    }
    if (!item.empty()) out.push_back(item);
    return out;
}

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::string out_dir = ".";
};

fact::FactConfig load_fact_config(const CommonOptions& common) {
    fact::FactConfig cfg;
    if (!common.config_path.empty()) {
        cfg = fact::fact_config_from_json(read_file(common.config_path));
    }
    if (common.seed) cfg.seed = *common.seed;
    return cfg;
}

std::string out_path(const CommonOptions& common, const std::string& name) {
    std::filesystem::create_directories(common.out_dir);
    return (std::filesystem::path(common.out_dir) / name).string();
}

std::vector<int> resolve_features(const fact::Dataset& data,
                                  const std::string& feature_list) {
    std::vector<int> features;
    if (feature_list.empty() || feature_list == "all") {
        for (std::size_t c = 0; c < data.n_cols(); ++c) {
            features.push_back(static_cast<int>(c));
        }
        return features;
    }
    for (const std::string& name : split_list(feature_list)) {
        bool found = false;
        for (std::size_t c = 0; c < data.n_cols(); ++c) {
            if (data.name_of(c) == name) {
                features.push_back(static_cast<int>(c));
                found = true;
                break;
            }
        }
        if (!found) throw std::invalid_argument("feature column not found: " + name);
    }
    return features;
}

// ---------------------------------------------------------------------------
// fact test
// ---------------------------------------------------------------------------

int cmd_test(const std::string& csv_path, const std::string& response_column,
             const std::string& feature_list, const std::string& exclude_list,
             const CommonOptions& common) {
    const fact::CsvTable table = fact::read_csv_file(csv_path);
    const fact::Dataset data =
        fact::dataset_from_csv(table, response_column, split_list(exclude_list));
    if (data.n_rows() < 10) {
        throw std::invalid_argument("inference sample too small (need >= 10 rows)");
    }
    const fact::FactConfig cfg = load_fact_config(common);
    const std::vector<int> features = resolve_features(data, feature_list);

    const std::string config_echo = fact::fact_config_to_json(cfg);
    const std::string hash = fact::config_hash(config_echo);

    nlohmann::json reports = nlohmann::json::array();
    std::vector<std::vector<std::string>> csv_rows;
    std::size_t degenerate = 0;
    for (int j : features) {
        const std::string label = data.name_of(static_cast<std::size_t>(j));
        try {
            const fact::FactReport r = fact::run_fact(j, data, cfg, common.threads);
            reports.push_back(
                nlohmann::json::parse(fact::report_to_json(r, label, config_echo)));
            csv_rows.push_back({label, fact::variant_name(r.variant),
                                fact::format_double(r.max_stat),
                                fact::format_double(r.p_value)});
        } catch (const fact::DegenerateVariance& e) {
            ++degenerate;
            nlohmann::json err;
            err["feature"] = label;
            err["error"] = e.what();
            reports.push_back(std::move(err));
            csv_rows.push_back({label, fact::variant_name(cfg.variant), "nan", "nan"});
        }
    }
    if (degenerate == features.size()) {
        std::cerr << "fact test: every selected feature has degenerate variance\n";
        return kExitNumerical;
    }

    nlohmann::json doc;
    doc["config_hash"] = hash;
    doc["reports"] = std::move(reports);
    write_file(out_path(common, "reports.json"), doc.dump(2) + "\n");
    write_file(out_path(common, "reports.csv"),
               fact::csv_to_string({"config_hash=" + hash},
                                   {"feature", "variant", "stat", "p_value"}, csv_rows));
    std::cout << "wrote " << csv_rows.size() << " feature reports to " << common.out_dir
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// fact simulate
// ---------------------------------------------------------------------------

int cmd_simulate(const CommonOptions& common) {
    if (common.config_path.empty()) {
        throw std::invalid_argument("simulate requires --config");
    }
    const nlohmann::json doc = nlohmann::json::parse(read_file(common.config_path));
    if (!doc.contains("experiments") || !doc["experiments"].is_array()) {
        throw std::invalid_argument("config must contain an \"experiments\" array");
    }
    for (const auto& exp : doc["experiments"]) {
        const std::string kind = exp.at("kind").get<std::string>();
        const std::string name = exp.at("name").get<std::string>();
        fact::SimulationSpec spec =
            fact::simulation_spec_from_json(exp.at("sim").dump());
        if (common.seed) spec.seed = *common.seed;
        if (spec.reps < 1) {
            throw std::invalid_argument("experiment " + name + ": reps must be >= 1");
        }
        const std::string hash = fact::config_hash(exp.dump());
        const std::vector<std::string> comments = {"config_hash=" + hash,
                                                   "experiment=" + name};

        if (kind == "size_power") {
            const fact::FactConfig cfg =
                fact::fact_config_from_json(exp.at("fact").dump());
            const std::vector<double> alphas = exp.at("alphas").get<std::vector<double>>();
            const std::vector<int> features = exp.at("features").get<std::vector<int>>();
            const fact::SizePowerTable table =
                fact::run_size_power(spec, cfg, alphas, features, common.threads);
            write_file(out_path(common, name + ".csv"),
                       fact::size_power_csv(table, comments));
            std::cout << name << ": size/power over " << spec.reps << " reps, case "
                      << spec.case_label << "\n";
        } else if (kind == "spurious") {
            const fact::FactConfig cfg =
                fact::fact_config_from_json(exp.at("fact").dump());
            fact::SpuriousOptions options;
            if (exp.contains("methods")) {
                options.importance_methods.clear();
                options.include_fact = false;
                for (const auto& m : exp["methods"]) {
                    const std::string mname = m.get<std::string>();
                    if (mname == "FACT") {
                        options.include_fact = true;
                    } else {
                        options.importance_methods.push_back(fact::method_from_name(mname));
                    }
                }
            }
            if (exp.contains("comparisons")) {
                options.comparisons.clear();
                for (const auto& pair : exp["comparisons"]) {
                    options.comparisons.emplace_back(pair.at(0).get<int>(),
                                                     pair.at(1).get<int>());
                }
            }
            if (exp.contains("perm_reps")) {
                options.permutation_reps = exp["perm_reps"].get<int>();
            }
            const fact::SpuriousTable table =
                fact::run_spurious(spec, options, cfg, common.threads);
            write_file(out_path(common, name + ".csv"),
                       fact::spurious_csv(table, comments));
            std::cout << name << ": spurious-effect fractions, case " << spec.case_label
                      << "\n";
        } else if (kind == "qq") {
            const fact::FactConfig cfg =
                fact::fact_config_from_json(exp.at("fact").dump());
            const int feature = exp.at("feature").get<int>();
            const fact::QqResult result = fact::run_qq(spec, cfg, feature, common.threads);
            std::vector<std::string> qq_comments = comments;
            if (result.ks_distance) {
                qq_comments.push_back("ks_distance=" +
                                      fact::format_double(*result.ks_distance));
                qq_comments.push_back("ks_pvalue=" +
                                      fact::format_double(*result.ks_pvalue));
            }
            write_file(out_path(common, name + ".csv"), fact::qq_csv(result, qq_comments));
            std::cout << name << ": " << result.stats.size() << " statistics";
            if (result.ks_pvalue) std::cout << ", KS p = " << *result.ks_pvalue;
            std::cout << "\n";
        } else if (kind == "rmse") {
            fact::ForestParams fp;
            if (exp.contains("forest")) {
                fp = fact::forest_params_from_json(exp["forest"].dump());
            }
            const std::size_t test_points =
                exp.contains("test_points") ? exp["test_points"].get<std::size_t>()
                                            : 10000;
            const fact::RmseResult result =
                fact::rmse_diagnostic(spec, fp, test_points, common.threads);
            std::vector<std::vector<std::string>> rows;
            for (std::size_t i = 0; i < result.per_rep.size(); ++i) {
                rows.push_back(
                    {std::to_string(i), fact::format_double(result.per_rep[i])});
            }
            rows.push_back({"mean", fact::format_double(result.mean_rmse)});
            write_file(out_path(common, name + ".csv"),
                       fact::csv_to_string(comments, {"rep", "rmse"}, rows));
            std::cout << name << ": mean RMSE " << result.mean_rmse << "\n";
        } else {
            throw std::invalid_argument("unknown experiment kind: " + kind);
        }
    }
    return 0;
}

// ---------------------------------------------------------------------------
// fact importance
// ---------------------------------------------------------------------------

int cmd_importance(const std::string& csv_path, const std::string& response_column,
                   const std::string& methods_list, int reps,
                   const std::string& exclude_list, const CommonOptions& common) {
    const fact::CsvTable table = fact::read_csv_file(csv_path);
    const fact::Dataset data =
        fact::dataset_from_csv(table, response_column, split_list(exclude_list));
    const fact::FactConfig cfg = load_fact_config(common);

    std::vector<fact::ImportanceMethod> methods;
    for (const std::string& name : split_list(methods_list)) {
        methods.push_back(fact::method_from_name(name));
    }
    if (methods.empty()) {
        throw std::invalid_argument("importance requires at least one method");
    }

    const std::string config_echo = fact::fact_config_to_json(cfg);
    const std::string hash = fact::config_hash(config_echo);
    const fact::RegressionForest forest =
        fact::fit_forest(data, cfg.forest_params, cfg.seed, common.threads);

    std::vector<std::vector<std::string>> rows;
    for (fact::ImportanceMethod method : methods) {
        std::vector<double> scores;
        if (method == fact::ImportanceMethod::MDI) {
            scores = fact::mdi(forest, data.n_cols()).scores;
        } else {
            for (std::size_t j = 0; j < data.n_cols(); ++j) {
                const std::uint64_t perm_seed = fact::derive_seed(cfg.seed, 500 + j);
                if (method == fact::ImportanceMethod::MDA) {
                    scores.push_back(
                        fact::mda(forest, data, static_cast<int>(j), reps, perm_seed));
                } else {
                    scores.push_back(fact::cpi(forest, data, static_cast<int>(j),
                                               fact::tree_strata_builder(), reps,
                                               perm_seed));
                }
            }
        }
        for (std::size_t j = 0; j < data.n_cols(); ++j) {
            rows.push_back({data.name_of(j), fact::method_name(method),
                            fact::format_double(scores[j])});
        }
    }
    write_file(out_path(common, "importance.csv"),
               fact::csv_to_string({"config_hash=" + hash},
                                   {"feature", "method", "score"}, rows));
    std::cout << "wrote " << rows.size() << " importance scores to " << common.out_dir
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// fact rolling
// ---------------------------------------------------------------------------

int cmd_rolling(const std::string& csv_path, const std::string& date_column,
                const std::string& response_column, const std::string& feature_list,
                const fact::RollingSpec& rolling, std::optional<double> fdr_q,
                const CommonOptions& common) {
    const fact::CsvTable table = fact::read_csv_file(csv_path);
    const std::vector<std::string> dates = fact::csv_column(table, date_column);
    for (std::size_t i = 1; i < dates.size(); ++i) {
        if (!(dates[i - 1] < dates[i])) {
            throw std::invalid_argument("date column is not strictly increasing at row " +
                                        std::to_string(i + 2));
        }
    }
    const fact::Dataset data =
        fact::dataset_from_csv(table, response_column, {date_column});

    fact::FactConfig cfg = load_fact_config(common);
    if (common.config_path.empty()) {
        // Small rolling windows default to the stability configuration:
        // one partition block, out-of-bag predictions.
        cfg.k_n = 1;
        cfg.split_mode = fact::SplitMode::oob();
    }
    const std::vector<int> features = resolve_features(data, feature_list);
    const auto cells =
        fact::rolling_pvalues(data, rolling, cfg, features, common.threads);

    // Per-window BH flags when an FDR level is requested.
    std::vector<bool> flags(cells.size(), false);
    if (fdr_q) {
        const std::size_t per_window = features.size();
        for (std::size_t start = 0; start < cells.size(); start += per_window) {
            std::vector<double> ps;
            for (std::size_t i = 0; i < per_window; ++i) {
                ps.push_back(cells[start + i].p_value);
            }
            for (std::size_t idx : fact::bh_fdr(ps, *fdr_q)) flags[start + idx] = true;
        }
    }

    const std::string config_echo = fact::fact_config_to_json(cfg);
    std::vector<std::string> header = {"window_end", "feature", "p_value"};
    if (fdr_q) header.push_back("fdr_reject");
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        std::vector<std::string> row = {
            dates[cells[i].window_end],
            data.name_of(static_cast<std::size_t>(cells[i].feature)),
            fact::format_double(cells[i].p_value)};
        if (fdr_q) row.push_back(flags[i] ? "1" : "0");
        rows.push_back(std::move(row));
    }
    write_file(out_path(common, "rolling.csv"),
               fact::csv_to_string({"config_hash=" + fact::config_hash(config_echo)},
                                   header, rows));
    std::cout << "wrote " << rows.size() << " window/feature cells to " << common.out_dir
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Random-forests feature significance toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand

    CommonOptions common;
    std::uint64_t seed_value = 0;
    app.add_option("--threads", common.threads, "Worker thread cap")->capture_default_str();
    app.add_option("--out", common.out_dir, "Output directory")->capture_default_str();
    auto* seed_opt = app.add_option("--seed", seed_value, "Root seed override");
    app.add_option("--config", common.config_path, "JSON configuration file");

    std::string csv_path, response_column, feature_list = "all", date_column = "date";
    std::string methods_list = "MDI,MDA,CPI", exclude_list;
    int perm_reps = 50;
    fact::RollingSpec rolling;
    double fdr_q = 0.0;

    auto* test_cmd = app.add_subcommand("test", "Feature significance tests on a CSV");
    test_cmd->add_option("--csv", csv_path, "Input CSV")->required();
    test_cmd->add_option("--response", response_column, "Response column name")->required();
    test_cmd->add_option("--features", feature_list,
                         "Comma-separated feature names or 'all'");
    test_cmd->add_option("--exclude", exclude_list,
                         "Columns to drop before testing (e.g. a date column)");

    auto* sim_cmd = app.add_subcommand("simulate", "Run configured experiments");

    auto* imp_cmd = app.add_subcommand("importance", "Baseline importance scores");
    imp_cmd->add_option("--csv", csv_path, "Input CSV")->required();
    imp_cmd->add_option("--response", response_column, "Response column name")->required();
    imp_cmd->add_option("--methods", methods_list, "Comma-separated: MDI,MDA,CPI");
    imp_cmd->add_option("--reps", perm_reps, "Permutation repetitions")
        ->capture_default_str();
    imp_cmd->add_option("--exclude", exclude_list,
                        "Columns to drop before scoring (e.g. a date column)");

    auto* roll_cmd = app.add_subcommand("rolling", "Rolling-window p-values");
    roll_cmd->add_option("--csv", csv_path, "Input CSV")->required();
    roll_cmd->add_option("--response", response_column, "Response column name")->required();
    roll_cmd->add_option("--date-column", date_column, "ISO-8601 date column")
        ->capture_default_str();
    roll_cmd->add_option("--features", feature_list,
                         "Comma-separated feature names or 'all'");
    roll_cmd->add_option("--window", rolling.window_length, "Window length in rows")
        ->capture_default_str();
    roll_cmd->add_option("--step", rolling.step, "Window step in rows")
        ->capture_default_str();
    roll_cmd->add_option("--horizon", rolling.horizon, "Response lead")
        ->capture_default_str();
    auto* fdr_opt = roll_cmd->add_option("--fdr", fdr_q, "Per-window BH level");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitUser;
    }
    if (seed_opt->count() > 0) common.seed = seed_value;

    try {
        if (test_cmd->parsed()) {
            return cmd_test(csv_path, response_column, feature_list, exclude_list,
                            common);
        }
        if (sim_cmd->parsed()) {
            return cmd_simulate(common);
        }
        if (imp_cmd->parsed()) {
            return cmd_importance(csv_path, response_column, methods_list, perm_reps,
                                  exclude_list, common);
        }
        if (roll_cmd->parsed()) {
            std::optional<double> fdr;
            if (fdr_opt->count() > 0) fdr = fdr_q;
            return cmd_rolling(csv_path, date_column, response_column, feature_list,
                               rolling, fdr, common);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUser;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUser;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return 0;
}
