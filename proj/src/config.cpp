#include "chargesim/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace chargesim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json node_to_json(const ArchNode& n) {
    if (n.is_leaf()) {
        const EvseSpec& e = *n.evse;
        return json{{"id", e.id},
                    {"voltage_v", e.voltage_v},
                    {"i_max_charge_a", e.i_max_charge_a},
                    {"i_max_discharge_a", e.i_max_discharge_a},
                    {"eta_charge", e.eta_charge},
                    {"eta_discharge", e.eta_discharge},
                    {"kind", to_string(e.kind)}};
    }
    json j{{"id", n.id}, {"eta", n.eta}};
    j["capacity_a"] = std::isfinite(n.capacity_a) ? json(n.capacity_a) : json(nullptr);
    json children = json::array();
    for (const auto& c : n.children) children.push_back(node_to_json(c));
    j["children"] = std::move(children);
    return j;
}

ArchNode node_from_json(const json& j) {
    if (!j.is_object()) throw StationError(StationError::Kind::InvalidLeaf, "station node must be an object");
    if (j.contains("voltage_v")) {
        EvseSpec e;
        e.id = j.at("id").get<int>();
        e.voltage_v = j.at("voltage_v").get<double>();
        e.i_max_charge_a = j.at("i_max_charge_a").get<double>();
        e.i_max_discharge_a = j.value("i_max_discharge_a", e.i_max_charge_a);
        e.eta_charge = j.value("eta_charge", 1.0);
        e.eta_discharge = j.value("eta_discharge", 1.0);
        e.kind = charger_kind_from_string(j.value("kind", std::string("AC")));
        return ArchNode::leaf(e);
    }
    ArchNode n;
    n.id = j.value("id", 0);
    n.eta = j.value("eta", 1.0);
    const auto cap = j.find("capacity_a");
    n.capacity_a = (cap == j.end() || cap->is_null()) ? std::numeric_limits<double>::infinity() : cap->get<double>();
    if (j.contains("children"))
        for (const auto& c : j.at("children")) n.children.push_back(node_from_json(c));
    return n;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(DataError::Kind::Io, "cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

fs::path resolve(const fs::path& p, const fs::path& base) {
    return p.is_absolute() || base.empty() ? p : base / p;
}

} // namespace

json battery_to_json(const BatterySpec& b) {
    return json{{"voltage_v", b.voltage_v},   {"capacity_kwh", b.capacity_kwh}, {"r_max_kw", b.r_max_kw},
                {"tau", b.tau},               {"eta_charge", b.eta_charge},     {"eta_discharge", b.eta_discharge},
                {"initial_soc", b.initial_soc}};
}

BatterySpec battery_from_json(const json& j) {
    BatterySpec b;
    b.voltage_v = j.value("voltage_v", b.voltage_v);
    b.capacity_kwh = j.value("capacity_kwh", b.capacity_kwh);
    b.r_max_kw = j.value("r_max_kw", b.r_max_kw);
    b.tau = j.value("tau", b.tau);
    b.eta_charge = j.value("eta_charge", b.eta_charge);
    b.eta_discharge = j.value("eta_discharge", b.eta_discharge);
    b.initial_soc = j.value("initial_soc", b.initial_soc);
    return b;
}

json station_to_json(const StationTree& tree) {
    json j{{"root", node_to_json(tree.root())}, {"evse_order", tree.evse_order()}};
    if (tree.battery()) j["battery"] = battery_to_json(*tree.battery());
    return j;
}

StationTree station_from_json(const json& j) {
    try {
        // A bare node object is accepted as the root.
        const json& root = j.contains("root") ? j.at("root") : j;
        std::vector<int> order;
        if (j.contains("evse_order")) order = j.at("evse_order").get<std::vector<int>>();
        std::optional<BatterySpec> battery;
        if (j.contains("battery") && !j.at("battery").is_null()) battery = battery_from_json(j.at("battery"));
        return StationTree::build(node_from_json(root), std::move(order), battery);
    } catch (const json::exception& e) {
        throw StationError(StationError::Kind::InvalidLeaf, std::string("station json: ") + e.what());
    }
}

StationTree load_station_file(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw DataError(DataError::Kind::Unparseable, path.string() + ": " + e.what());
    }
    return station_from_json(j);
}

json env_config_to_json(const EnvConfig& c) {
    const auto& a = c.alpha;
    return json{{"dt_min", c.dt_min},
                {"episode_steps", c.episode_steps},
                {"discretization_k", c.discretization_k},
                {"p_sell_eur_per_kwh", c.p_sell_eur_per_kwh},
                {"fixed_cost_per_step", c.fixed_cost_per_step},
                {"alpha",
                 {{"constraint", a.constraint},
                  {"sat0", a.sat0},
                  {"sat1", a.sat1},
                  {"sustain", a.sustain},
                  {"declined", a.declined},
                  {"degrad_battery", a.degrad_battery},
                  {"degrad_cars", a.degrad_cars},
                  {"grid", a.grid}}},
                {"beta", c.beta},
                {"allow_discharge", c.allow_discharge},
                {"battery_enabled", c.battery_enabled},
                {"observe_price_horizon", c.observe_price_horizon}};
}

EnvConfig env_config_from_json(const json& j) {
    EnvConfig c;
    c.dt_min = j.value("dt_min", c.dt_min);
    c.episode_steps = j.value("episode_steps", c.episode_steps);
    c.discretization_k = j.value("discretization_k", c.discretization_k);
    c.p_sell_eur_per_kwh = j.value("p_sell_eur_per_kwh", c.p_sell_eur_per_kwh);
    c.fixed_cost_per_step = j.value("fixed_cost_per_step", c.fixed_cost_per_step);
    c.beta = j.value("beta", c.beta);
    c.allow_discharge = j.value("allow_discharge", c.allow_discharge);
    c.battery_enabled = j.value("battery_enabled", c.battery_enabled);
    c.observe_price_horizon = j.value("observe_price_horizon", c.observe_price_horizon);
    if (j.contains("alpha")) {
        const json& a = j.at("alpha");
        for (const auto& [key, value] : a.items()) {
            const double v = value.get<double>();
            if (key == "constraint") c.alpha.constraint = v;
            else if (key == "sat0") c.alpha.sat0 = v;
            else if (key == "sat1") c.alpha.sat1 = v;
            else if (key == "sustain") c.alpha.sustain = v;
            else if (key == "declined") c.alpha.declined = v;
            else if (key == "degrad_battery") c.alpha.degrad_battery = v;
            else if (key == "degrad_cars") c.alpha.degrad_cars = v;
            else if (key == "grid") c.alpha.grid = v;
            else throw EnvError(EnvError::Kind::InvalidConfig, "unknown penalty '" + key + "'");
        }
    }
    c.validate();
    return c;
}

json run_config_to_json(const RunConfig& c) {
    json j = env_config_to_json(c.env);
    json station{{"layout", to_string(c.station.layout)}, {"ac", c.station.ac}, {"dc", c.station.dc}};
    if (c.station.file) station["file"] = c.station.file->string();
    if (c.station.battery) station["battery"] = battery_to_json(*c.station.battery);
    j["station"] = std::move(station);
    if (c.data_dir) j["data_dir"] = c.data_dir->string();
    const auto& s = c.synthetic;
    j["synthetic"] = json{{"scenario", to_string(s.scenario)},     {"traffic", to_string(s.traffic)},
                          {"car_region", to_string(s.car_region)}, {"price_region", to_string(s.price_region)},
                          {"seed", s.seed},                        {"days", s.days},
                          {"start_year", s.start_year},            {"with_aux", s.with_aux}};
    return j;
}

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
    RunConfig c;
    try {
        c.env = env_config_from_json(j);
        if (j.contains("station")) {
            const json& s = j.at("station");
            if (s.contains("layout")) c.station.layout = station_layout_from_string(s.at("layout").get<std::string>());
            c.station.ac = s.value("ac", c.station.ac);
            c.station.dc = s.value("dc", c.station.dc);
            if (s.contains("file")) c.station.file = resolve(s.at("file").get<std::string>(), base_dir);
            if (s.contains("battery") && !s.at("battery").is_null()) c.station.battery = battery_from_json(s.at("battery"));
        }
        if (j.contains("data_dir")) c.data_dir = resolve(j.at("data_dir").get<std::string>(), base_dir);
        if (j.contains("synthetic")) {
            const json& s = j.at("synthetic");
            auto& o = c.synthetic;
            if (s.contains("scenario")) o.scenario = user_scenario_from_string(s.at("scenario").get<std::string>());
            if (s.contains("traffic")) o.traffic = traffic_from_string(s.at("traffic").get<std::string>());
            if (s.contains("car_region")) o.car_region = car_region_from_string(s.at("car_region").get<std::string>());
            if (s.contains("price_region"))
                o.price_region = price_region_from_string(s.at("price_region").get<std::string>());
            o.seed = s.value("seed", o.seed);
            o.days = s.value("days", o.days);
            o.start_year = s.value("start_year", o.start_year);
            o.with_aux = s.value("with_aux", o.with_aux);
        }
    } catch (const json::exception& e) {
        throw EnvError(EnvError::Kind::InvalidConfig, std::string("config: ") + e.what());
    } catch (const StationError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw EnvError(EnvError::Kind::InvalidConfig, std::string("config: ") + e.what());
    }
    c.synthetic.dt_min = c.env.dt_min;
    c.synthetic.episode_steps = c.env.episode_steps;
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw EnvError(EnvError::Kind::InvalidConfig, path.string() + ": " + e.what());
    }
    return run_config_from_json(j, path.parent_path());
}

StationTree build_station(const StationChoice& choice) {
    if (choice.file) {
        StationTree t = load_station_file(*choice.file);
        if (choice.battery && !t.battery()) {
            return StationTree::build(t.root(), t.evse_order(), choice.battery);
        }
        return t;
    }
    PresetParams params;
    params.battery = choice.battery;
    return preset_station(choice.layout, choice.ac, choice.dc, params);
}

std::shared_ptr<const Datasets> build_datasets(const RunConfig& c) {
    if (c.data_dir) return std::make_shared<const Datasets>(load_dataset_dir(*c.data_dir));
    SyntheticOptions o = c.synthetic;
    o.dt_min = c.env.dt_min;
    o.episode_steps = c.env.episode_steps;
    return std::make_shared<const Datasets>(generate_synthetic_defaults(o));
}

std::shared_ptr<const Environment> build_environment(const RunConfig& c) {
    return std::make_shared<const Environment>(c.env, build_station(c.station), build_datasets(c));
}

std::string config_fingerprint(const RunConfig& c) {
    json j = run_config_to_json(c);
    // Resolve the station so file-based and preset configs hash by content.
    j["station_resolved"] = station_to_json(build_station(c.station));
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace chargesim
