#include "chargesim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace chargesim {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Policies

void policy_max_charge(const Environment& env, const EnvState& state, std::span<int> out) {
    const int k = env.config().discretization_k;
    std::fill(out.begin(), out.end(), k);
    for (std::size_t i = 0; i < env.num_ports(); ++i)
        if (state.ports[i].occupied) out[i] = 2 * k;
}

void policy_random(const Environment& env, Stream& rng, std::span<int> out) { random_actions(rng, env, out); }

void policy_idle(const Environment& env, const EnvState& state, std::span<int> out) {
    const int k = env.config().discretization_k;
    const std::size_t n = env.num_ports();
    for (std::size_t slot = 0; slot < out.size(); ++slot) {
        double current = 0.0;
        if (slot < n) {
            current = state.ports[slot].i_drawn_a;
        } else if (state.battery) {
            current = state.battery->i_battery_a;
        }
        const double i_max = env.slot_i_max(slot);
        if (current == 0.0 || i_max <= 0.0) {
            out[slot] = k;
            continue;
        }
        // Largest grid step that does not overshoot zero.
        const double grid_steps = std::fabs(current) / i_max * k;
        const int steps = std::clamp(static_cast<int>(std::floor(grid_steps + 1e-9)), 0, k);
        out[slot] = current > 0.0 ? k - steps : k + steps;
    }
}

std::unique_ptr<Policy> make_policy(const std::string& name) {
    if (name == "max-charge" || name == "max_charge") return std::make_unique<MaxChargePolicy>();
    if (name == "random") return std::make_unique<RandomPolicy>();
    if (name == "idle") return std::make_unique<IdlePolicy>();
    throw std::invalid_argument("unknown policy '" + name + "' (expected max-charge, random or idle)");
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

EpisodeRecord record_from(const EnvState& s, const StepInfo& last) {
    EpisodeRecord r;
    r.seed = s.seed;
    r.day_index = s.day_index;
    r.profit_eur = s.metrics.profit_eur;
    r.reward = s.metrics.reward;
    r.energy_sold_kwh = s.metrics.energy_sold_kwh;
    r.missing_kwh = s.metrics.missing_kwh;
    r.overtime_steps = s.metrics.overtime_steps;
    r.departures = s.metrics.departures;
    r.declined = s.metrics.declined;
    r.arrivals = s.metrics.arrivals;
    r.unfinished = static_cast<std::int64_t>(last.unfinished.size());
    return r;
}

} // namespace

MetricsReport summarize(std::string policy, std::string fingerprint, std::vector<EpisodeRecord> records) {
    MetricsReport r;
    r.policy = std::move(policy);
    r.config_fingerprint = std::move(fingerprint);
    r.episodes = records.size();
    std::vector<double> profits, rewards;
    double missing = 0.0, sold = 0.0;
    std::int64_t overtime = 0, departures = 0, declined = 0;
    for (const auto& e : records) {
        profits.push_back(e.profit_eur);
        rewards.push_back(e.reward);
        missing += e.missing_kwh;
        sold += e.energy_sold_kwh;
        overtime += e.overtime_steps;
        departures += e.departures;
        declined += e.declined;
    }
    const double n = records.empty() ? 1.0 : static_cast<double>(records.size());
    r.mean_daily_profit_eur = mean_of(profits);
    r.std_daily_profit_eur = sample_std(profits);
    r.mean_reward = mean_of(rewards);
    r.std_reward = sample_std(rewards);
    r.missing_kwh_per_departure = departures > 0 ? missing / static_cast<double>(departures) : 0.0;
    r.overtime_steps_per_departure = departures > 0 ? static_cast<double>(overtime) / static_cast<double>(departures) : 0.0;
    r.declined_per_episode = static_cast<double>(declined) / n;
    r.energy_sold_kwh = sold / n;
    r.per_episode = std::move(records);
    return r;
}

MetricsReport evaluate(const Policy& policy, std::shared_ptr<const Environment> env, const EvaluateOptions& opts) {
    if (opts.episodes < 1) throw std::invalid_argument("evaluate needs at least one episode");
    if (!env) throw std::invalid_argument("evaluate needs an environment");
    const std::size_t width = std::max<std::size_t>(1, opts.batch);
    std::vector<EpisodeRecord> records;
    records.reserve(opts.episodes);

    for (std::size_t first = 0; first < opts.episodes; first += width) {
        const std::size_t b = std::min(width, opts.episodes - first);
        std::vector<std::uint64_t> seeds(b);
        for (std::size_t i = 0; i < b; ++i) seeds[i] = episode_seed(opts.seed, first + i);
        BatchEnv batch(env, seeds, false, opts.workers);
        std::vector<int> actions(b * batch.action_size());
        std::vector<StepInfo> last(b);

        bool running = true;
        while (running) {
            for (std::size_t i = 0; i < b; ++i) {
                const EnvState& s = batch.states()[i];
                std::span<int> row(actions.data() + i * batch.action_size(), batch.action_size());
                if (s.done) {
                    std::fill(row.begin(), row.end(), env->config().discretization_k);
                    continue;
                }
                Stream rng = policy_stream(s);
                policy.act(*env, s, rng, row);
            }
            batch.step(actions);
            running = false;
            for (std::size_t i = 0; i < b; ++i) {
                if (batch.infos()[i].done && !last[i].done) last[i] = batch.infos()[i];
                running = running || !batch.states()[i].done;
            }
        }
        for (std::size_t i = 0; i < b; ++i) records.push_back(record_from(batch.states()[i], last[i]));
    }
    return summarize(policy.name(), opts.fingerprint, std::move(records));
}

std::vector<TrajectoryRow> simulate(const Policy& policy, const Environment& env, std::uint64_t seed,
                                    std::size_t episodes) {
    std::vector<TrajectoryRow> rows;
    std::vector<int> action(env.action_size());
    StepInfo info;
    for (std::size_t e = 0; e < episodes; ++e) {
        EnvState s = env.reset(episode_seed(seed, e));
        while (!s.done) {
            Stream rng = policy_stream(s);
            policy.act(env, s, rng, action);
            const double reward = env.step(s, action, info);
            TrajectoryRow row;
            row.episode = e;
            row.step = info.step;
            row.day_index = s.day_index;
            row.reward = reward;
            row.profit_eur = info.reward.profit_eur;
            row.p_buy = info.frame.p_buy;
            row.lambda = info.frame.lambda_arrivals;
            row.flows = info.flows;
            row.constraint_excess_a = info.constraint_excess_a;
            row.occupied = static_cast<int>(
                std::count_if(s.ports.begin(), s.ports.end(), [](const PortState& p) { return p.occupied; }));
            row.arrivals = info.arrivals.sampled;
            row.admitted = info.arrivals.admitted;
            row.declined = info.arrivals.declined;
            row.departures = info.departures.size();
            for (const auto& d : info.departures) row.missing_kwh += d.missing_kwh;
            rows.push_back(row);
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Export

ExportFormat export_format_from_string(const std::string& s) {
    if (s == "csv" || s == "CSV") return ExportFormat::Csv;
    if (s == "json" || s == "JSON") return ExportFormat::Json;
    throw std::invalid_argument("unknown format '" + s + "' (expected csv or json)");
}

double round_sig9(double v) {
    if (!std::isfinite(v) || v == 0.0) return v == 0.0 ? 0.0 : v;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::strtod(buf, nullptr);
}

namespace {

std::string g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v == 0.0 ? 0.0 : v);
    return buf;
}

json record_to_json(const EpisodeRecord& e) {
    return json{{"seed", e.seed},
                {"day_index", e.day_index},
                {"profit_eur", round_sig9(e.profit_eur)},
                {"reward", round_sig9(e.reward)},
                {"energy_sold_kwh", round_sig9(e.energy_sold_kwh)},
                {"missing_kwh", round_sig9(e.missing_kwh)},
                {"overtime_steps", e.overtime_steps},
                {"departures", e.departures},
                {"declined", e.declined},
                {"arrivals", e.arrivals},
                {"unfinished", e.unfinished}};
}

json flows_to_json(const EnergyFlows& f) {
    return json{{"net_to_cars_kwh", round_sig9(f.net_to_cars)},
                {"grid_in_kwh", round_sig9(f.grid_in)},
                {"to_grid_kwh", round_sig9(f.to_grid)},
                {"battery_net_kwh", round_sig9(f.battery_net)},
                {"grid_net_kwh", round_sig9(f.grid_net)}};
}

} // namespace

std::string report_to_json(const MetricsReport& r) {
    json j{{"policy", r.policy},
           {"config_fingerprint", r.config_fingerprint},
           {"episodes", r.episodes},
           {"mean_daily_profit_eur", round_sig9(r.mean_daily_profit_eur)},
           {"std_daily_profit_eur", round_sig9(r.std_daily_profit_eur)},
           {"mean_reward", round_sig9(r.mean_reward)},
           {"std_reward", round_sig9(r.std_reward)},
           {"missing_kwh_per_departure", round_sig9(r.missing_kwh_per_departure)},
           {"overtime_steps_per_departure", round_sig9(r.overtime_steps_per_departure)},
           {"declined_per_episode", round_sig9(r.declined_per_episode)},
           {"energy_sold_kwh", round_sig9(r.energy_sold_kwh)}};
    json episodes = json::array();
    for (const auto& e : r.per_episode) episodes.push_back(record_to_json(e));
    j["per_episode"] = std::move(episodes);
    return j.dump(2) + "\n";
}

MetricsReport report_from_json(const std::string& text) {
    const json j = json::parse(text);
    MetricsReport r;
    r.policy = j.at("policy").get<std::string>();
    r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    r.episodes = j.at("episodes").get<std::size_t>();
    r.mean_daily_profit_eur = j.at("mean_daily_profit_eur").get<double>();
    r.std_daily_profit_eur = j.at("std_daily_profit_eur").get<double>();
    r.mean_reward = j.at("mean_reward").get<double>();
    r.std_reward = j.at("std_reward").get<double>();
    r.missing_kwh_per_departure = j.at("missing_kwh_per_departure").get<double>();
    r.overtime_steps_per_departure = j.at("overtime_steps_per_departure").get<double>();
    r.declined_per_episode = j.at("declined_per_episode").get<double>();
    r.energy_sold_kwh = j.at("energy_sold_kwh").get<double>();
    for (const auto& e : j.at("per_episode")) {
        EpisodeRecord x;
        x.seed = e.at("seed").get<std::uint64_t>();
        x.day_index = e.at("day_index").get<int>();
        x.profit_eur = e.at("profit_eur").get<double>();
        x.reward = e.at("reward").get<double>();
        x.energy_sold_kwh = e.at("energy_sold_kwh").get<double>();
        x.missing_kwh = e.at("missing_kwh").get<double>();
        x.overtime_steps = e.at("overtime_steps").get<std::int64_t>();
        x.departures = e.at("departures").get<std::int64_t>();
        x.declined = e.at("declined").get<std::int64_t>();
        x.arrivals = e.at("arrivals").get<std::int64_t>();
        x.unfinished = e.at("unfinished").get<std::int64_t>();
        r.per_episode.push_back(x);
    }
    return r;
}

std::string report_to_csv(const MetricsReport& r) {
    std::ostringstream out;
    out << "episode,seed,day_index,profit_eur,reward,energy_sold_kwh,missing_kwh,overtime_steps,departures,declined,"
           "arrivals,unfinished\n";
    for (std::size_t i = 0; i < r.per_episode.size(); ++i) {
        const auto& e = r.per_episode[i];
        out << i << ',' << e.seed << ',' << e.day_index << ',' << g9(e.profit_eur) << ',' << g9(e.reward) << ','
            << g9(e.energy_sold_kwh) << ',' << g9(e.missing_kwh) << ',' << e.overtime_steps << ',' << e.departures
            << ',' << e.declined << ',' << e.arrivals << ',' << e.unfinished << '\n';
    }
    return out.str();
}

std::string trajectory_to_csv(std::span<const TrajectoryRow> rows) {
    std::ostringstream out;
    out << "episode,step,day_index,reward,profit_eur,p_buy,lambda,net_to_cars_kwh,grid_in_kwh,to_grid_kwh,"
           "battery_net_kwh,grid_net_kwh,constraint_excess_a,occupied,arrivals,admitted,declined,departures,"
           "missing_kwh\n";
    for (const auto& r : rows) {
        out << r.episode << ',' << r.step << ',' << r.day_index << ',' << g9(r.reward) << ',' << g9(r.profit_eur)
            << ',' << g9(r.p_buy) << ',' << g9(r.lambda) << ',' << g9(r.flows.net_to_cars) << ','
            << g9(r.flows.grid_in) << ',' << g9(r.flows.to_grid) << ',' << g9(r.flows.battery_net) << ','
            << g9(r.flows.grid_net) << ',' << g9(r.constraint_excess_a) << ',' << r.occupied << ',' << r.arrivals
            << ',' << r.admitted << ',' << r.declined << ',' << r.departures << ',' << g9(r.missing_kwh) << '\n';
    }
    return out.str();
}

std::string trajectory_to_json(std::span<const TrajectoryRow> rows) {
    json arr = json::array();
    for (const auto& r : rows) {
        arr.push_back(json{{"episode", r.episode},
                           {"step", r.step},
                           {"day_index", r.day_index},
                           {"reward", round_sig9(r.reward)},
                           {"profit_eur", round_sig9(r.profit_eur)},
                           {"p_buy", round_sig9(r.p_buy)},
                           {"lambda", round_sig9(r.lambda)},
                           {"flows", flows_to_json(r.flows)},
                           {"constraint_excess_a", round_sig9(r.constraint_excess_a)},
                           {"occupied", r.occupied},
                           {"arrivals", r.arrivals},
                           {"admitted", r.admitted},
                           {"declined", r.declined},
                           {"departures", r.departures},
                           {"missing_kwh", round_sig9(r.missing_kwh)}});
    }
    return arr.dump(2) + "\n";
}

std::string throughput_to_json(const ThroughputReport& r) {
    json j{{"batch", r.batch},
           {"workers", r.workers},
           {"total_steps", r.total_steps},
           {"seconds", round_sig9(r.seconds)},
           {"steps_per_second", round_sig9(r.steps_per_second)},
           {"hardware", r.hardware}};
    return j.dump(2) + "\n";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(DataError::Kind::Io, "cannot write " + path.string());
    out << text;
    if (!out) throw DataError(DataError::Kind::Io, "write failed: " + path.string());
}

} // namespace chargesim
