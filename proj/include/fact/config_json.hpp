#ifndef FACT_CONFIG_JSON_HPP
#define FACT_CONFIG_JSON_HPP

#include <cstdint>
#include <string>

#include "fact/fact_stats.hpp"
#include "fact/forest.hpp"
#include "fact/sim_bench.hpp"

namespace fact {

std::string forest_params_to_json(const ForestParams& fp);
ForestParams forest_params_from_json(const std::string& text);

std::string fact_config_to_json(const FactConfig& cfg);
FactConfig fact_config_from_json(const std::string& text);

std::string simulation_spec_to_json(const SimulationSpec& spec);
SimulationSpec simulation_spec_from_json(const std::string& text);

/// FNV-1a hash of the canonical (sorted-key) JSON text, hex-encoded.
/// Embedded in output headers for provenance.
std::string config_hash(const std::string& canonical_json);

}  // namespace fact

#endif  // FACT_CONFIG_JSON_HPP
