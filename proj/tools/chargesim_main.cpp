// chargesim command-line front end.
//
//   chargesim simulate        --policy random --episodes 1 --out traj.csv
//   chargesim evaluate        --policy max-charge --episodes 100 --format json
//   chargesim bench           --batch 16 --steps 100000
//   chargesim gen-data        --out data/ --scenario Shopping --traffic Medium
//   chargesim inspect-station --config run.json
//
// Exit status: 0 success, 2 usage or configuration error, 3 data error.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "chargesim/config.hpp"
#include "chargesim/harness.hpp"

namespace cs = chargesim;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kData = 3;

struct Common {
    std::string config;
    std::string data_dir;
    std::uint64_t seed = 0;
    std::size_t episodes = 0;
    std::size_t batch = 0;
    std::string out;
    std::string format;
};

void add_common(CLI::App* cmd, Common& c, bool with_episodes, bool with_batch,
                std::vector<std::string> formats = {"csv", "json"}) {
    cmd->add_option("--config", c.config, "Run configuration (JSON)");
    cmd->add_option("--data-dir", c.data_dir, "Dataset directory; overrides the config");
    cmd->add_option("--seed", c.seed, "Master seed");
    if (with_episodes) cmd->add_option("--episodes", c.episodes, "Number of episodes")->check(CLI::PositiveNumber);
    if (with_batch) cmd->add_option("--batch", c.batch, "Environments stepped together")->check(CLI::PositiveNumber);
    cmd->add_option("--out", c.out, "Output file (stdout when omitted)");
    if (!formats.empty()) cmd->add_option("--format", c.format, "Output format")->check(CLI::IsMember(formats));
}

cs::RunConfig run_config(const Common& c) {
    cs::RunConfig rc = c.config.empty() ? cs::RunConfig{} : cs::load_run_config(c.config);
    if (!c.data_dir.empty()) rc.data_dir = fs::path(c.data_dir);
    return rc;
}

void emit(const std::string& text, const std::string& out) {
    if (out.empty()) {
        std::cout << text;
        return;
    }
    cs::write_text(out, text);
}

int run_simulate(const Common& c, const std::string& policy_name) {
    const auto policy = cs::make_policy(policy_name);
    const auto env = cs::build_environment(run_config(c));
    const auto rows = cs::simulate(*policy, *env, c.seed, c.episodes == 0 ? 1 : c.episodes);
    const auto fmt = cs::export_format_from_string(c.format.empty() ? "csv" : c.format);
    emit(fmt == cs::ExportFormat::Csv ? cs::trajectory_to_csv(rows) : cs::trajectory_to_json(rows), c.out);
    return kOk;
}

int run_evaluate(const Common& c, const std::string& policy_name, std::size_t workers) {
    const auto policy = cs::make_policy(policy_name);
    const cs::RunConfig rc = run_config(c);
    cs::EvaluateOptions opts;
    opts.episodes = c.episodes == 0 ? 100 : c.episodes;
    opts.batch = c.batch == 0 ? 16 : c.batch;
    opts.seed = c.seed;
    opts.workers = workers;
    opts.fingerprint = cs::config_fingerprint(rc);
    const auto report = cs::evaluate(*policy, cs::build_environment(rc), opts);
    const auto fmt = cs::export_format_from_string(c.format.empty() ? "json" : c.format);
    emit(fmt == cs::ExportFormat::Csv ? cs::report_to_csv(report) : cs::report_to_json(report), c.out);
    if (!c.out.empty()) {
        std::fprintf(stderr, "%s: profit %.4f +- %.4f EUR/day over %zu episodes\n", report.policy.c_str(),
                     report.mean_daily_profit_eur, report.std_daily_profit_eur, report.episodes);
    }
    return kOk;
}

int run_bench(const Common& c, std::uint64_t steps, std::size_t workers) {
    if (steps == 0) {
        std::cerr << "bench: --steps must be at least 1\n";
        return kUsage;
    }
    const auto env = cs::build_environment(run_config(c));
    const auto r = cs::throughput_probe(env, c.batch == 0 ? 1 : c.batch, steps, workers, c.seed);
    if (c.format == "csv") {
        std::ostringstream s;
        s << "batch,workers,total_steps,seconds,steps_per_second,hardware\n"
          << r.batch << ',' << r.workers << ',' << r.total_steps << ',' << cs::round_sig9(r.seconds) << ','
          << cs::round_sig9(r.steps_per_second) << ",\"" << r.hardware << "\"\n";
        emit(s.str(), c.out);
    } else {
        emit(cs::throughput_to_json(r), c.out);
    }
    std::fprintf(stderr, "%llu steps in %.3f s (%.0f steps/s), batch %zu, %zu worker(s), %s\n",
                 static_cast<unsigned long long>(r.total_steps), r.seconds, r.steps_per_second, r.batch, r.workers,
                 r.hardware.c_str());
    return kOk;
}

struct GenArgs {
    std::string scenario = "Shopping";
    std::string traffic = "Medium";
    std::string car_region = "EU";
    std::string price_region = "NL";
    int days = 365;
    int start_year = 2023;
    bool with_aux = false;
};

int run_gen_data(const Common& c, const GenArgs& g) {
    if (c.out.empty()) {
        std::cerr << "gen-data: --out <dir> is required\n";
        return kUsage;
    }
    cs::RunConfig rc = run_config(c);
    cs::SyntheticOptions o = rc.synthetic;
    o.scenario = cs::user_scenario_from_string(g.scenario);
    o.traffic = cs::traffic_from_string(g.traffic);
    o.car_region = cs::car_region_from_string(g.car_region);
    o.price_region = cs::price_region_from_string(g.price_region);
    o.days = g.days;
    o.start_year = g.start_year;
    o.with_aux = g.with_aux;
    o.seed = c.seed;
    const cs::Datasets data = cs::generate_synthetic_defaults(o);
    fs::create_directories(c.out);
    cs::write_dataset_dir(data, c.out);
    std::fprintf(stderr, "wrote %zu days of %s/%s data to %s\n", data.prices.days(), g.scenario.c_str(),
                 g.traffic.c_str(), c.out.c_str());
    return kOk;
}

std::string describe_station(const cs::StationTree& t) {
    std::ostringstream s;
    s << "ports " << t.num_ports() << ", splitters " << t.nodes().size() << ", depth " << t.depth()
      << (t.battery() ? ", battery" : "") << "\n";
    s << "nodes (children before parents):\n";
    for (const auto& n : t.nodes()) {
        s << "  node " << n.id << "  depth " << n.depth << "  capacity ";
        if (std::isfinite(n.capacity_a)) s << n.capacity_a << " A";
        else s << "unlimited";
        s << "  eta " << n.eta << "  ports [" << n.leaf_begin << ", " << n.leaf_end << ")\n";
    }
    s << "ports:\n";
    for (std::size_t i = 0; i < t.num_ports(); ++i) {
        const auto& p = t.port(i);
        s << "  " << i << "  id " << p.id << "  " << cs::to_string(p.kind) << "  " << p.voltage_v << " V  "
          << p.i_max_charge_a << "/" << p.i_max_discharge_a << " A  eta " << p.eta_charge << "/" << p.eta_discharge
          << "\n";
    }
    if (const auto& b = t.battery()) {
        s << "battery: " << b->capacity_kwh << " kWh, " << b->r_max_kw << " kW, " << b->voltage_v << " V, soc0 "
          << b->initial_soc << "\n";
    }
    return s.str();
}

int run_inspect(const Common& c, const std::string& station_file) {
    const cs::RunConfig rc = run_config(c);
    cs::StationChoice choice = rc.station;
    if (!station_file.empty()) choice.file = fs::path(station_file);
    const cs::StationTree tree = cs::build_station(choice);
    emit(c.format == "json" ? cs::station_to_json(tree).dump(2) + "\n" : describe_station(tree), c.out);
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"chargesim: EV charging station simulator"};
    app.require_subcommand(1);

    Common common;
    std::string policy = "max-charge";
    std::size_t workers = 1;
    std::uint64_t steps = 100000;
    std::string station_file;
    GenArgs gen;

    auto* sim = app.add_subcommand("simulate", "Run episodes and export the per-step trajectory");
    add_common(sim, common, true, false);
    sim->add_option("--policy", policy, "max-charge, random or idle");

    auto* ev = app.add_subcommand("evaluate", "Evaluate a baseline policy over many episodes");
    add_common(ev, common, true, true);
    ev->add_option("--policy", policy, "max-charge, random or idle");
    ev->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

    auto* bench = app.add_subcommand("bench", "Measure random-action throughput");
    add_common(bench, common, false, true);
    bench->add_option("--steps", steps, "Total environment steps");
    bench->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

    auto* gd = app.add_subcommand("gen-data", "Write a synthetic dataset directory");
    add_common(gd, common, false, false, {});
    gd->add_option("--scenario", gen.scenario, "Highway, Residential, Work or Shopping");
    gd->add_option("--traffic", gen.traffic, "Low, Medium or High");
    gd->add_option("--car-region", gen.car_region, "EU, US or World");
    gd->add_option("--price-region", gen.price_region, "NL, FR or DE");
    gd->add_option("--days", gen.days, "Days of price data")->check(CLI::PositiveNumber);
    gd->add_option("--start-year", gen.start_year, "First calendar year");
    gd->add_flag("--with-aux", gen.with_aux, "Also write MOER and grid-demand series");

    auto* ins = app.add_subcommand("inspect-station", "Print the resolved station tree");
    add_common(ins, common, false, false, {"text", "json"});
    ins->add_option("--station", station_file, "Station JSON file; overrides the config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*sim) return run_simulate(common, policy);
        if (*ev) return run_evaluate(common, policy, workers);
        if (*bench) return run_bench(common, steps, workers);
        if (*gd) return run_gen_data(common, gen);
        if (*ins) return run_inspect(common, station_file);
    } catch (const cs::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const cs::EnvError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == cs::EnvError::Kind::EmptyData ? kData : kUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kUsage;
}
