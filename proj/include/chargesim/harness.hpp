#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "chargesim/batch.hpp"
#include "chargesim/env.hpp"

namespace chargesim {

/// A stateless decision rule. Randomized policies draw only from `rng`,
/// which the caller keys per (env seed, episode, step).
class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    virtual void act(const Environment& env, const EnvState& state, Stream& rng, std::span<int> out) const = 0;
};

/// Occupied ports step up by the full I_max every step; the battery and empty
/// ports hold their current.
void policy_max_charge(const Environment& env, const EnvState& state, std::span<int> out);

/// Uniform index in [0, 2K] for every slot.
void policy_random(const Environment& env, Stream& rng, std::span<int> out);

/// Moves each slot's current toward zero as far as the action grid allows
/// without crossing zero.
void policy_idle(const Environment& env, const EnvState& state, std::span<int> out);

class MaxChargePolicy final : public Policy {
public:
    std::string name() const override { return "max-charge"; }
    void act(const Environment& env, const EnvState& state, Stream&, std::span<int> out) const override {
        policy_max_charge(env, state, out);
    }
};

class RandomPolicy final : public Policy {
public:
    std::string name() const override { return "random"; }
    void act(const Environment& env, const EnvState&, Stream& rng, std::span<int> out) const override {
        policy_random(env, rng, out);
    }
};

class IdlePolicy final : public Policy {
public:
    std::string name() const override { return "idle"; }
    void act(const Environment& env, const EnvState& state, Stream&, std::span<int> out) const override {
        policy_idle(env, state, out);
    }
};

/// "max-charge", "random" or "idle". Throws std::invalid_argument otherwise.
std::unique_ptr<Policy> make_policy(const std::string& name);

/// The stream a policy uses at the state's current step.
inline Stream policy_stream(const EnvState& state) {
    return Stream::keyed(state.seed, state.episode, static_cast<std::uint64_t>(state.step), Phase::Policy);
}

/// Seed of evaluation episode `e`. Shared by every policy, so comparisons on
/// the same master seed see the same days and arrivals.
inline std::uint64_t episode_seed(std::uint64_t master_seed, std::uint64_t e) noexcept {
    return derive_seed(master_seed, e);
}

struct EpisodeRecord {
    std::uint64_t seed = 0;
    int day_index = 0;
    double profit_eur = 0.0;
    double reward = 0.0;
    double energy_sold_kwh = 0.0;
    double missing_kwh = 0.0;
    std::int64_t overtime_steps = 0;
    std::int64_t departures = 0;
    std::int64_t declined = 0;
    std::int64_t arrivals = 0;
    /// Cars still parked at the end of the episode.
    std::int64_t unfinished = 0;

    friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

struct MetricsReport {
    std::string policy;
    std::string config_fingerprint;
    std::size_t episodes = 0;
    double mean_daily_profit_eur = 0.0;
    double std_daily_profit_eur = 0.0;
    double mean_reward = 0.0;
    double std_reward = 0.0;
    /// Totals over all episodes divided by the number of departures.
    double missing_kwh_per_departure = 0.0;
    double overtime_steps_per_departure = 0.0;
    double declined_per_episode = 0.0;
    double energy_sold_kwh = 0.0; ///< mean per episode
    std::vector<EpisodeRecord> per_episode;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Aggregates per-episode records. Standard deviations use n - 1 and are 0
/// for a single episode.
MetricsReport summarize(std::string policy, std::string fingerprint, std::vector<EpisodeRecord> records);

struct EvaluateOptions {
    std::size_t episodes = 100;
    std::uint64_t seed = 0;
    std::size_t batch = 16;
    std::size_t workers = 1;
    std::string fingerprint;
};

MetricsReport evaluate(const Policy& policy, std::shared_ptr<const Environment> env, const EvaluateOptions& opts);

/// One row per executed step.
struct TrajectoryRow {
    std::uint64_t episode = 0;
    int step = 0;
    int day_index = 0;
    double reward = 0.0;
    double profit_eur = 0.0;
    double p_buy = 0.0;
    double lambda = 0.0;
    EnergyFlows flows;
    double constraint_excess_a = 0.0;
    int occupied = 0;
    std::uint64_t arrivals = 0;
    std::uint64_t admitted = 0;
    std::uint64_t declined = 0;
    std::size_t departures = 0;
    double missing_kwh = 0.0;
};

/// Runs `episodes` single-env episodes (seeds episode_seed(seed, e)) and
/// records every step.
std::vector<TrajectoryRow> simulate(const Policy& policy, const Environment& env, std::uint64_t seed,
                                    std::size_t episodes);

enum class ExportFormat { Csv, Json };
ExportFormat export_format_from_string(const std::string& s);

/// Rounds to 9 significant digits, the precision of every exported float.
double round_sig9(double v);

std::string report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const std::string& text);
/// One row per episode, then nothing else; summary fields live in JSON only.
std::string report_to_csv(const MetricsReport& r);
std::string trajectory_to_csv(std::span<const TrajectoryRow> rows);
std::string trajectory_to_json(std::span<const TrajectoryRow> rows);
std::string throughput_to_json(const ThroughputReport& r);

/// Writes `text` to `path`. Throws DataError(Io) if the file cannot be written.
void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace chargesim
