#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "chargesim/env.hpp"
#include "chargesim/exogenous.hpp"
#include "chargesim/topology.hpp"

namespace chargesim {

/// Station JSON: {"root": node, "evse_order": [...], "battery": {...}} where a
/// node is {"id", "capacity_a", "eta", "children": [...]} and a leaf is
/// {"id", "voltage_v", "i_max_charge_a", "i_max_discharge_a", "eta_charge",
/// "eta_discharge", "kind"}. A missing or null capacity_a means unlimited.
nlohmann::json station_to_json(const StationTree& tree);
StationTree station_from_json(const nlohmann::json& j);
StationTree load_station_file(const std::filesystem::path& path);

nlohmann::json battery_to_json(const BatterySpec& b);
BatterySpec battery_from_json(const nlohmann::json& j);

struct StationChoice {
    StationLayout layout = StationLayout::MultiType;
    int ac = 6;
    int dc = 10;
    std::optional<std::filesystem::path> file;
    std::optional<BatterySpec> battery;
};

/// Everything needed to build an Environment from a config file.
struct RunConfig {
    EnvConfig env;
    StationChoice station;
    /// Dataset directory; synthetic defaults are generated when absent.
    std::optional<std::filesystem::path> data_dir;
    SyntheticOptions synthetic;
};

nlohmann::json env_config_to_json(const EnvConfig& c);
EnvConfig env_config_from_json(const nlohmann::json& j);

nlohmann::json run_config_to_json(const RunConfig& c);
/// Relative station/data paths resolve against `base_dir`.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

StationTree build_station(const StationChoice& choice);
std::shared_ptr<const Datasets> build_datasets(const RunConfig& c);
std::shared_ptr<const Environment> build_environment(const RunConfig& c);

/// Short stable hash of the resolved configuration.
std::string config_fingerprint(const RunConfig& c);

} // namespace chargesim
