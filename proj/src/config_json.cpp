#include "fact/config_json.hpp"

#include <cstdio>
#include <stdexcept>

#include "json.hpp"

namespace fact {

namespace {

nlohmann::json forest_params_json(const ForestParams& fp) {
    return {{"n_trees", fp.n_trees},
            {"mtry", fp.mtry},
            {"min_node_size", fp.min_node_size},
            {"max_depth", fp.max_depth ? nlohmann::json(*fp.max_depth)
                                       : nlohmann::json(nullptr)},
            {"bootstrap_fraction", fp.bootstrap_fraction},
            {"with_replacement", fp.with_replacement},
            {"bootstrap", fp.bootstrap}};
}

ForestParams forest_params_parse(const nlohmann::json& j) {
    ForestParams fp;
    if (j.contains("n_trees")) fp.n_trees = j["n_trees"].get<int>();
    if (j.contains("mtry")) fp.mtry = j["mtry"].get<int>();
    if (j.contains("min_node_size")) fp.min_node_size = j["min_node_size"].get<int>();
    if (j.contains("max_depth") && !j["max_depth"].is_null()) {
        fp.max_depth = j["max_depth"].get<int>();
    }
    if (j.contains("bootstrap_fraction")) {
        fp.bootstrap_fraction = j["bootstrap_fraction"].get<double>();
    }
    if (j.contains("with_replacement")) {
        fp.with_replacement = j["with_replacement"].get<bool>();
    }
    if (j.contains("bootstrap")) fp.bootstrap = j["bootstrap"].get<bool>();
    return fp;
}

nlohmann::json fact_config_json(const FactConfig& cfg) {
    nlohmann::json j;
    j["variant"] = variant_name(cfg.variant);
    nlohmann::json transforms = nlohmann::json::array();
    for (const Transform& t : cfg.transforms) transforms.push_back(t.name());
    j["transforms"] = std::move(transforms);
    j["k_n"] = cfg.k_n ? nlohmann::json(*cfg.k_n) : nlohmann::json(nullptr);
    if (cfg.split_mode.kind == SplitModeKind::oob) {
        j["split_mode"] = "oob";
    } else {
        j["split_mode"] = {{"sample_split", cfg.split_mode.train_fraction
                                                ? nlohmann::json(*cfg.split_mode.train_fraction)
                                                : nlohmann::json(nullptr)}};
    }
    j["forest"] = forest_params_json(cfg.forest_params);
    j["seed"] = cfg.seed;
    return j;
}

FactConfig fact_config_parse(const nlohmann::json& j) {
    FactConfig cfg;
    if (j.contains("variant")) cfg.variant = variant_from_name(j["variant"].get<std::string>());
    if (j.contains("transforms")) {
        cfg.transforms.clear();
        for (const auto& t : j["transforms"]) {
            const std::string name = t.get<std::string>();
            if (name == "identity") {
                cfg.transforms.push_back(Transform::identity());
            } else if (name == "centered_square") {
                cfg.transforms.push_back(Transform::centered_square());
            } else {
                throw std::invalid_argument("unknown transform: " + name);
            }
        }
        if (cfg.transforms.empty()) {
            throw std::invalid_argument("config: transforms must be non-empty");
        }
    }
    if (j.contains("k_n") && !j["k_n"].is_null()) cfg.k_n = j["k_n"].get<int>();
    if (j.contains("split_mode")) {
        const auto& sm = j["split_mode"];
        if (sm.is_string() && sm.get<std::string>() == "oob") {
            cfg.split_mode = SplitMode::oob();
        } else if (sm.is_object() && sm.contains("sample_split")) {
            std::optional<double> fraction;
            if (!sm["sample_split"].is_null()) fraction = sm["sample_split"].get<double>();
            cfg.split_mode = SplitMode::sample_split(fraction);
        } else {
            throw std::invalid_argument("config: split_mode must be \"oob\" or {\"sample_split\": f}");
        }
    }
    if (j.contains("forest")) cfg.forest_params = forest_params_parse(j["forest"]);
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    return cfg;
}

nlohmann::json simulation_spec_json(const SimulationSpec& spec) {
    return {{"n", spec.n},          {"p", spec.p},
            {"lambda", spec.lambda}, {"sigma", spec.sigma},
            {"reps", spec.reps},     {"seed", spec.seed},
            {"case_label", spec.case_label}, {"reduced", spec.reduced}};
}

SimulationSpec simulation_spec_parse(const nlohmann::json& j) {
    SimulationSpec spec;
    if (j.contains("n")) spec.n = j["n"].get<std::size_t>();
    if (j.contains("p")) spec.p = j["p"].get<std::size_t>();
    if (j.contains("lambda")) spec.lambda = j["lambda"].get<double>();
    if (j.contains("sigma")) spec.sigma = j["sigma"].get<double>();
    if (j.contains("reps")) spec.reps = j["reps"].get<int>();
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("case_label")) spec.case_label = j["case_label"].get<std::string>();
    if (j.contains("reduced")) spec.reduced = j["reduced"].get<bool>();
    return spec;
}

}  // namespace

std::string forest_params_to_json(const ForestParams& fp) {
    return forest_params_json(fp).dump();
}

ForestParams forest_params_from_json(const std::string& text) {
    return forest_params_parse(nlohmann::json::parse(text));
}

std::string fact_config_to_json(const FactConfig& cfg) {
    return fact_config_json(cfg).dump();
}

FactConfig fact_config_from_json(const std::string& text) {
    return fact_config_parse(nlohmann::json::parse(text));
}

std::string simulation_spec_to_json(const SimulationSpec& spec) {
    return simulation_spec_json(spec).dump();
}

SimulationSpec simulation_spec_from_json(const std::string& text) {
    return simulation_spec_parse(nlohmann::json::parse(text));
}

std::string config_hash(const std::string& canonical_json) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : canonical_json) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace fact
