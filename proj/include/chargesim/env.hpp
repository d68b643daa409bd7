#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "chargesim/exogenous.hpp"
#include "chargesim/rng.hpp"
#include "chargesim/topology.hpp"
#include "chargesim/vehicle.hpp"

namespace chargesim {

/// Coefficients of the penalty terms subtracted from the profit.
struct PenaltyWeights {
    double constraint = 0.0;
    double sat0 = 0.0;
    double sat1 = 0.0;
    double sustain = 0.0;
    double declined = 0.0;
    double degrad_battery = 0.0;
    double degrad_cars = 0.0;
    double grid = 0.0;
};

struct EnvConfig {
    double dt_min = 5.0;
    int episode_steps = 288;
    int discretization_k = 10;
    double p_sell_eur_per_kwh = 0.75;
    double fixed_cost_per_step = 0.0;
    PenaltyWeights alpha;
    /// Weight of early departures against overtime for charge-sensitive users.
    double beta = 0.0;
    /// Allow negative (vehicle-to-grid) port currents.
    bool allow_discharge = true;
    bool battery_enabled = false;
    /// Number of future p_buy values (one per step ahead) in the observation.
    int observe_price_horizon = 0;

    double dt_hours() const noexcept { return dt_min / 60.0; }
    int steps_per_day() const noexcept;
    void validate() const;
};

class EnvError : public std::logic_error {
public:
    enum class Kind { InvalidConfig, EmptyData, BadAction, EpisodeDone };
    EnvError(Kind kind, const std::string& what) : std::logic_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

struct PortState {
    bool occupied = false;
    double i_drawn_a = 0.0;
    CarState car;

    friend bool operator==(const PortState&, const PortState&) = default;
};

struct EpisodeMetrics {
    double profit_eur = 0.0;
    double reward = 0.0;
    double energy_sold_kwh = 0.0;
    double missing_kwh = 0.0;
    std::int64_t overtime_steps = 0;
    std::int64_t early_steps = 0;
    std::int64_t departures = 0;
    std::int64_t departures_time_sensitive = 0;
    std::int64_t departures_charge_sensitive = 0;
    std::int64_t arrivals = 0;
    std::int64_t admitted = 0;
    std::int64_t declined = 0;

    friend bool operator==(const EpisodeMetrics&, const EpisodeMetrics&) = default;
};

/// Complete mutable state of one environment. Randomness is keyed by
/// (seed, episode, step, phase), so the state needs no generator object.
struct EnvState {
    int step = 0;
    int day_index = 0;
    std::uint64_t seed = 0;
    std::uint64_t episode = 0;
    std::vector<PortState> ports;
    std::optional<BatteryState> battery;
    EpisodeMetrics metrics;
    bool done = false;

    friend bool operator==(const EnvState&, const EnvState&) = default;
};

/// Energy flows of one step in kWh. grid_net = grid_in + to_grid + battery_net.
struct EnergyFlows {
    double net_to_cars = 0.0; ///< energy into cars, signed
    double grid_in = 0.0;     ///< drawn from the grid for charging cars, >= 0
    double to_grid = 0.0;     ///< returned by discharging cars, <= 0
    double battery_net = 0.0; ///< battery exchange, positive while charging it
    double grid_net = 0.0;
};

struct RewardBreakdown {
    double profit_eur = 0.0;
    double c_constraint = 0.0;
    double c_sat0 = 0.0;
    double c_sat1 = 0.0;
    double c_sustain = 0.0;
    double c_declined = 0.0;
    double c_degrad_battery = 0.0;
    double c_degrad_cars = 0.0;
    double c_grid = 0.0;
    double total = 0.0;
};

/// Per-port record of what happened during the charge phase.
struct PortLog {
    bool occupied = false;
    double requested_a = 0.0; ///< after car/port clipping, before tree rescaling
    double current_a = 0.0;   ///< after tree rescaling
    double voltage_v = 0.0;
    double eta_charge = 1.0;
    double eta_discharge = 1.0;
    double delivered_kwh = 0.0;
    double soc_before = 0.0;
    double soc_after = 0.0;
    double capacity_kwh = 0.0;
};

struct BatteryLog {
    bool present = false;
    double requested_a = 0.0;
    double current_a = 0.0;
    double voltage_v = 0.0;
    double de_b_net_kwh = 0.0;
    double soc_before = 0.0;
    double soc_after = 0.0;
};

struct Departure {
    std::size_t port = 0;
    Preference preference = Preference::TimeSensitive;
    double missing_kwh = 0.0;
    int overtime_steps = 0;
    /// Steps left on the clock when a charge-sensitive car leaves.
    int early_steps = 0;
    double soc_arrival = 0.0;
    double soc_departure = 0.0;
    double capacity_kwh = 0.0;
};

/// One sampled arrival, recorded whether or not the car found a spot.
struct ArrivalRecord {
    std::size_t car_index = 0;
    UserProfile user;
    bool admitted = false;
    std::size_t port = 0;
};

struct ArrivalOutcome {
    std::uint64_t sampled = 0;
    std::uint64_t admitted = 0;
    std::uint64_t declined = 0;
};

struct StepInfo {
    int step = 0; ///< the step that was executed
    ExogenousFrame frame;
    EnergyFlows flows;
    RewardBreakdown reward;
    double constraint_excess_a = 0.0;
    std::vector<PortLog> ports;
    BatteryLog battery;
    std::vector<Departure> departures;
    /// Cars still parked when the episode ends (charge-sensitive overtime lands here).
    std::vector<Departure> unfinished;
    ArrivalOutcome arrivals;
    std::vector<ArrivalRecord> arrival_draws;
    bool done = false;
};

/// Observation layout: per-port blocks first, then the battery block, the
/// global block and finally the optional future-price window.
struct ObservationLayout {
    static constexpr std::size_t kPortFeatures = 6;
    static constexpr std::size_t kBatteryFeatures = 2;
    static constexpr std::size_t kGlobalFeatures = 7;

    // Offsets within a port block.
    static constexpr std::size_t kOccupied = 0;
    static constexpr std::size_t kCurrent = 1;
    static constexpr std::size_t kSoc = 2;
    static constexpr std::size_t kEnergyRemaining = 3;
    static constexpr std::size_t kTimeRemaining = 4;
    static constexpr std::size_t kPreference = 5;

    // Offsets within the global block.
    static constexpr std::size_t kPriceBuy = 0;
    static constexpr std::size_t kPriceSellGrid = 1;
    static constexpr std::size_t kPriceSell = 2;
    static constexpr std::size_t kTimeSin = 3;
    static constexpr std::size_t kTimeCos = 4;
    static constexpr std::size_t kIsWeekday = 5;
    static constexpr std::size_t kDayIndex = 6;

    std::size_t num_ports = 0;
    std::size_t price_horizon = 0;

    std::size_t port_offset(std::size_t port) const noexcept { return port * kPortFeatures; }
    std::size_t battery_offset() const noexcept { return num_ports * kPortFeatures; }
    std::size_t global_offset() const noexcept { return battery_offset() + kBatteryFeatures; }
    std::size_t horizon_offset() const noexcept { return global_offset() + kGlobalFeatures; }
    std::size_t size() const noexcept { return horizon_offset() + price_horizon; }
};

/// Immutable environment definition: config, station and datasets. All
/// mutable data lives in EnvState, so one Environment can drive any number of
/// states from any number of threads.
class Environment {
public:
    Environment(EnvConfig config, StationTree station, std::shared_ptr<const Datasets> data);

    const EnvConfig& config() const noexcept { return config_; }
    const StationTree& station() const noexcept { return station_; }
    const Datasets& data() const noexcept { return *data_; }
    std::shared_ptr<const Datasets> data_ptr() const noexcept { return data_; }

    std::size_t num_ports() const noexcept { return station_.num_ports(); }
    /// Ports plus the battery slot (always present in the action vector).
    std::size_t action_size() const noexcept { return station_.num_ports() + 1; }
    int num_actions_per_slot() const noexcept { return 2 * config_.discretization_k + 1; }
    const ObservationLayout& layout() const noexcept { return layout_; }
    std::size_t observation_size() const noexcept { return layout_.size(); }
    bool has_battery() const noexcept { return battery_active_; }
    /// Days that can start an episode.
    int available_days() const noexcept { return available_days_; }

    EnvState reset(std::uint64_t seed, std::uint64_t episode = 0) const;

    /// Advance one step. `info` is overwritten; its buffers are reused.
    double step(EnvState& state, std::span<const int> action, StepInfo& info) const;

    struct StepResult {
        double reward = 0.0;
        bool done = false;
        StepInfo info;
    };
    StepResult step(EnvState& state, std::span<const int> action) const;

    void observe(const EnvState& state, std::span<double> out) const;
    std::vector<double> observe(const EnvState& state) const;

    /// Exogenous signals at the state's current step.
    ExogenousFrame frame(const EnvState& state) const;
    ExogenousFrame frame(int day, int step) const;

    /// Current limit of a port slot in the action grid (battery: slot N).
    double slot_i_max(std::size_t slot) const;

private:
    EnvConfig config_;
    StationTree station_;
    std::shared_ptr<const Datasets> data_;
    ObservationLayout layout_;
    bool battery_active_ = false;
    int available_days_ = 0;
};

// The transition split into its phases. step() runs them in order; they are
// public so each can be exercised on its own.

/// Index k becomes a current change of (k - K) / K * I_max. Writes one value
/// per slot (ports then battery).
void decode_action(std::span<const int> action, const EnvState& state, const Environment& env,
                   std::span<double> delta_out);

/// Applies deltas with car and port limits, then tree rescaling. Writes the
/// pre-rescaling currents to `requested_out` (size N+1) and returns the
/// constraint excess measured on them.
double apply_actions(EnvState& state, std::span<const double> delta, const Environment& env,
                     std::span<double> requested_out);

/// Integrates every parked car and the battery, then ticks the stay clocks.
EnergyFlows charge_phase(EnvState& state, const Environment& env, std::vector<PortLog>& logs, BatteryLog& battery_log);

void departure_phase(EnvState& state, std::vector<Departure>& departures);

/// Samples all arrivals for the step up front, then admits first-fit.
ArrivalOutcome arrival_phase(EnvState& state, const ExogenousFrame& frame, Stream& rng, const Environment& env,
                             std::vector<ArrivalRecord>& draws);

double compute_profit(const EnergyFlows& flows, const ExogenousFrame& frame, const EnvConfig& config);

struct PenaltyInputs {
    const EnergyFlows& flows;
    double profit_eur;
    double constraint_excess_a;
    std::span<const Departure> departures;
    std::uint64_t declined;
};

RewardBreakdown compute_penalties(const PenaltyInputs& in, const ExogenousFrame& frame, const EnvConfig& config);

/// Whether a parked car leaves at the end of this step.
bool should_depart(const CarState& car) noexcept;

} // namespace chargesim
