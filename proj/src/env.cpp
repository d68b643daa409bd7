#include "chargesim/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace chargesim {

int EnvConfig::steps_per_day() const noexcept { return static_cast<int>(std::lround(1440.0 / dt_min)); }

void EnvConfig::validate() const {
    auto fail = [](const std::string& m) { throw EnvError(EnvError::Kind::InvalidConfig, m); };
    if (!(dt_min > 0.0) || !std::isfinite(dt_min)) fail("dt_min must be positive");
    if (episode_steps < 1) fail("episode_steps must be at least 1");
    if (discretization_k < 1) fail("discretization_k must be at least 1");
    if (observe_price_horizon < 0) fail("observe_price_horizon must be non-negative");
    if (!std::isfinite(p_sell_eur_per_kwh) || !std::isfinite(fixed_cost_per_step) || !std::isfinite(beta))
        fail("prices and costs must be finite");
}

Environment::Environment(EnvConfig config, StationTree station, std::shared_ptr<const Datasets> data)
    : config_(config), station_(std::move(station)), data_(std::move(data)) {
    config_.validate();
    if (!data_) throw EnvError(EnvError::Kind::EmptyData, "no datasets");
    if (data_->prices.days() < 1) throw EnvError(EnvError::Kind::EmptyData, "price data covers no full day");
    if (data_->arrivals.rates_per_step.empty()) throw EnvError(EnvError::Kind::EmptyData, "no arrival rates");
    if (data_->cars.size() == 0) throw EnvError(EnvError::Kind::EmptyData, "car catalog is empty");
    data_->users.validate();
    if (config_.battery_enabled && !station_.battery())
        throw EnvError(EnvError::Kind::InvalidConfig, "battery enabled but the station has no battery");
    battery_active_ = config_.battery_enabled;

    const auto hours = static_cast<long>(std::ceil(config_.episode_steps * config_.dt_min / 60.0 - 1e-9));
    const long days_needed = std::max(1L, (hours + 23) / 24);
    available_days_ = static_cast<int>(static_cast<long>(data_->prices.days()) - days_needed + 1);
    if (available_days_ < 1) throw EnvError(EnvError::Kind::EmptyData, "price data shorter than one episode");

    layout_.num_ports = station_.num_ports();
    layout_.price_horizon = static_cast<std::size_t>(config_.observe_price_horizon);
}

double Environment::slot_i_max(std::size_t slot) const {
    if (slot < station_.num_ports()) return station_.port(slot).i_max_charge_a;
    if (slot == station_.num_ports()) return station_.battery() ? station_.battery()->i_max_a() : 0.0;
    throw std::out_of_range("action slot out of range");
}

EnvState Environment::reset(std::uint64_t seed, std::uint64_t episode) const {
    EnvState s;
    s.seed = seed;
    s.episode = episode;
    Stream rng = Stream::keyed(seed, episode, 0, Phase::Reset);
    s.day_index = static_cast<int>(rng.below(static_cast<std::uint64_t>(available_days_)));
    s.ports.assign(station_.num_ports(), PortState{});
    if (battery_active_) s.battery = initial_battery_state(*station_.battery());
    return s;
}

ExogenousFrame Environment::frame(int day, int step) const { return frame_at(*data_, day, step, config_.dt_min); }

ExogenousFrame Environment::frame(const EnvState& state) const { return frame(state.day_index, state.step); }

// ---------------------------------------------------------------------------
// Phases

void decode_action(std::span<const int> action, const EnvState& state, const Environment& env,
                   std::span<double> delta_out) {
    const std::size_t slots = env.action_size();
    if (action.size() != slots || delta_out.size() != slots)
        throw EnvError(EnvError::Kind::BadAction, "action vector must have " + std::to_string(slots) + " entries");
    const int k = env.config().discretization_k;
    const int max_index = 2 * k;
    const std::size_t n = env.num_ports();
    for (std::size_t i = 0; i < slots; ++i) {
        const int idx = action[i];
        if (idx < 0 || idx > max_index)
            throw EnvError(EnvError::Kind::BadAction, "action index " + std::to_string(idx) + " outside [0, " +
                                                          std::to_string(max_index) + "]");
        double delta = static_cast<double>(idx - k) / static_cast<double>(k) * env.slot_i_max(i);
        if (i < n && !env.config().allow_discharge) delta = std::max(delta, -state.ports[i].i_drawn_a);
        delta_out[i] = delta;
    }
}

namespace {

// Currents below this fraction of I_max snap to zero.
constexpr double kCurrentSnap = 1e-9;

double snapped(double target, double i_max) { return std::fabs(target) <= kCurrentSnap * i_max ? 0.0 : target; }

} // namespace

double apply_actions(EnvState& state, std::span<const double> delta, const Environment& env,
                     std::span<double> requested_out) {
    const StationTree& tree = env.station();
    const std::size_t n = tree.num_ports();
    std::vector<double> currents(tree.num_leaves(), 0.0);

    for (std::size_t i = 0; i < n; ++i) {
        PortState& port = state.ports[i];
        if (!port.occupied) continue;
        const EvseSpec& evse = tree.port(i);
        const CarState& car = port.car;
        const double target = snapped(port.i_drawn_a + delta[i], evse.i_max_charge_a);
        if (target >= 0.0) {
            const double car_limit = power_to_current(car.r_hat_kw, evse.voltage_v);
            currents[i] = std::min({target, car_limit, evse.i_max_charge_a});
        } else {
            const double car_limit =
                power_to_current(discharge_limit(car.soc, car.profile.tau, car.r_bar_kw), evse.voltage_v);
            currents[i] = -std::min({-target, car_limit, evse.i_max_discharge_a});
        }
    }
    if (state.battery && tree.battery()) {
        const BatterySpec& spec = *tree.battery();
        const BatteryState& b = *state.battery;
        const double target = snapped(b.i_battery_a + delta[n], spec.i_max_a());
        if (target >= 0.0) {
            currents[n] = std::min({target, power_to_current(b.r_hat_kw, spec.voltage_v), spec.i_max_a()});
        } else {
            const double limit = power_to_current(discharge_limit(b.soc, spec.tau, spec.r_max_kw), spec.voltage_v);
            currents[n] = -std::min({-target, limit, spec.i_max_a()});
        }
    }

    std::fill(requested_out.begin(), requested_out.end(), 0.0);
    std::copy_n(currents.begin(), std::min(currents.size(), requested_out.size()), requested_out.begin());
    const double excess = violation_excess(tree, currents);
    enforce_limits_inplace(tree, currents);

    for (std::size_t i = 0; i < n; ++i) state.ports[i].i_drawn_a = state.ports[i].occupied ? currents[i] : 0.0;
    if (state.battery) state.battery->i_battery_a = tree.battery() ? currents[n] : 0.0;
    return excess;
}

EnergyFlows charge_phase(EnvState& state, const Environment& env, std::vector<PortLog>& logs,
                         BatteryLog& battery_log) {
    const StationTree& tree = env.station();
    const double dt_h = env.config().dt_hours();
    EnergyFlows flows;
    logs.resize(tree.num_ports());

    for (std::size_t i = 0; i < tree.num_ports(); ++i) {
        PortState& port = state.ports[i];
        const EvseSpec& evse = tree.port(i);
        PortLog& log = logs[i];
        log = PortLog{};
        log.occupied = port.occupied;
        log.voltage_v = evse.voltage_v;
        log.eta_charge = evse.eta_charge;
        log.eta_discharge = evse.eta_discharge;
        log.current_a = port.i_drawn_a;
        if (!port.occupied) continue;

        log.soc_before = port.car.soc;
        log.capacity_kwh = port.car.profile.capacity_kwh;
        const ChargeResult res = integrate_charge(port.car, evse.voltage_v, port.i_drawn_a, dt_h);
        port.car = res.car;
        log.delivered_kwh = res.delivered_kwh;
        log.soc_after = port.car.soc;

        flows.net_to_cars += res.delivered_kwh;
        if (res.delivered_kwh > 0.0) {
            flows.grid_in += res.delivered_kwh / evse.eta_charge;
        } else if (res.delivered_kwh < 0.0) {
            flows.to_grid += evse.eta_discharge * res.delivered_kwh;
        }
    }

    battery_log = BatteryLog{};
    if (state.battery && tree.battery()) {
        const BatterySpec& spec = *tree.battery();
        battery_log.present = true;
        battery_log.current_a = state.battery->i_battery_a;
        battery_log.voltage_v = spec.voltage_v;
        battery_log.soc_before = state.battery->soc;
        const BatteryResult res = integrate_battery(*state.battery, spec, state.battery->i_battery_a, dt_h);
        *state.battery = res.state;
        battery_log.de_b_net_kwh = res.de_b_net_kwh;
        battery_log.soc_after = res.state.soc;
        flows.battery_net = res.de_b_net_kwh;
    }
    flows.grid_net = flows.grid_in + flows.to_grid + flows.battery_net;

    for (auto& port : state.ports)
        if (port.occupied) port.car.dt_remain_steps -= 1;
    return flows;
}

bool should_depart(const CarState& car) noexcept {
    if (car.preference == Preference::TimeSensitive) return car.dt_remain_steps <= 0;
    return car.de_remain_kwh == 0.0;
}

namespace {

Departure departure_record(std::size_t port, const CarState& car) {
    Departure d;
    d.port = port;
    d.preference = car.preference;
    d.missing_kwh = std::max(0.0, car.de_remain_kwh);
    d.overtime_steps = std::max(0, -car.dt_remain_steps);
    d.early_steps = std::max(0, car.dt_remain_steps);
    d.soc_arrival = car.soc_arrival;
    d.soc_departure = car.soc;
    d.capacity_kwh = car.profile.capacity_kwh;
    return d;
}

} // namespace

void departure_phase(EnvState& state, std::vector<Departure>& departures) {
    departures.clear();
    for (std::size_t i = 0; i < state.ports.size(); ++i) {
        PortState& port = state.ports[i];
        if (!port.occupied || !should_depart(port.car)) continue;
        departures.push_back(departure_record(i, port.car));
        port = PortState{};
    }
}

ArrivalOutcome arrival_phase(EnvState& state, const ExogenousFrame& frame, Stream& rng, const Environment& env,
                             std::vector<ArrivalRecord>& draws) {
    const Datasets& data = env.data();
    const StationTree& tree = env.station();
    ArrivalOutcome out;
    out.sampled = sample_arrival_count(rng, frame.lambda_arrivals);

    // Every sampled car gets its profiles drawn before clipping, so the
    // exogenous stream does not depend on how many spots were free.
    draws.clear();
    for (std::uint64_t j = 0; j < out.sampled; ++j) {
        ArrivalRecord r;
        r.car_index = sample_car_index(rng, data.cars);
        r.user = sample_user(rng, data.users, data.cars.entries()[r.car_index].profile);
        draws.push_back(r);
    }

    std::size_t cursor = 0;
    const auto order = tree.parking_order();
    for (auto& r : draws) {
        while (cursor < order.size() && state.ports[order[cursor]].occupied) ++cursor;
        if (cursor == order.size()) break;
        const std::size_t port_index = order[cursor];
        const CarProfile& profile = data.cars.entries()[r.car_index].profile;
        const EvseSpec& evse = tree.port(port_index);

        PortState& port = state.ports[port_index];
        port.occupied = true;
        port.i_drawn_a = 0.0;
        CarState& car = port.car;
        car.profile = profile;
        car.r_bar_kw = evse.kind == ChargerKind::AC ? profile.r_max_ac_kw : profile.r_max_dc_kw;
        car.soc = r.user.soc_arrival;
        car.soc_arrival = r.user.soc_arrival;
        car.de_remain_kwh = r.user.energy_requested_kwh;
        car.dt_remain_steps = r.user.stay_steps;
        car.preference = r.user.preference;
        car.r_hat_kw = charge_limit(car.soc, profile.tau, car.r_bar_kw);

        r.admitted = true;
        r.port = port_index;
        ++out.admitted;
    }
    out.declined = out.sampled - out.admitted;
    return out;
}

double compute_profit(const EnergyFlows& flows, const ExogenousFrame& frame, const EnvConfig& config) {
    const double revenue = config.p_sell_eur_per_kwh * flows.net_to_cars;
    const double grid_price = flows.grid_net > 0.0 ? frame.p_buy : frame.p_sell_grid;
    return revenue - grid_price * flows.grid_net - config.fixed_cost_per_step;
}

RewardBreakdown compute_penalties(const PenaltyInputs& in, const ExogenousFrame& frame, const EnvConfig& config) {
    RewardBreakdown r;
    r.profit_eur = in.profit_eur;
    r.c_constraint = std::max(0.0, in.constraint_excess_a);
    for (const auto& d : in.departures) {
        if (d.preference == Preference::TimeSensitive) {
            r.c_sat0 += d.missing_kwh;
        } else {
            r.c_sat1 += static_cast<double>(d.overtime_steps) - config.beta * static_cast<double>(d.early_steps);
        }
    }
    r.c_sustain = frame.moer_kg_per_kwh ? *frame.moer_kg_per_kwh * in.flows.grid_net : 0.0;
    r.c_declined = static_cast<double>(in.declined);
    r.c_degrad_battery = in.flows.battery_net < 0.0 ? -in.flows.battery_net : 0.0;
    r.c_degrad_cars = std::fabs(in.flows.to_grid);
    r.c_grid = frame.grid_demand_kwh ? std::fabs(in.flows.net_to_cars - *frame.grid_demand_kwh) : 0.0;

    const PenaltyWeights& a = config.alpha;
    const double penalty = a.constraint * r.c_constraint + a.sat0 * r.c_sat0 + a.sat1 * r.c_sat1 +
                           a.sustain * r.c_sustain + a.declined * r.c_declined +
                           a.degrad_battery * r.c_degrad_battery + a.degrad_cars * r.c_degrad_cars + a.grid * r.c_grid;
    r.total = r.profit_eur - penalty;
    return r;
}

// ---------------------------------------------------------------------------
// Step and observation

double Environment::step(EnvState& state, std::span<const int> action, StepInfo& info) const {
    if (state.done || state.step >= config_.episode_steps)
        throw EnvError(EnvError::Kind::EpisodeDone, "episode is over; call reset");

    info.step = state.step;
    info.frame = frame(state);
    info.unfinished.clear();

    const std::size_t slots = action_size();
    std::vector<double> delta(slots);
    std::vector<double> requested(slots);
    decode_action(action, state, *this, delta);
    info.constraint_excess_a = apply_actions(state, delta, *this, requested);

    info.flows = charge_phase(state, *this, info.ports, info.battery);
    for (std::size_t i = 0; i < info.ports.size(); ++i) info.ports[i].requested_a = requested[i];
    if (info.battery.present) info.battery.requested_a = requested[num_ports()];

    departure_phase(state, info.departures);

    Stream rng = Stream::keyed(state.seed, state.episode, static_cast<std::uint64_t>(state.step), Phase::Arrival);
    info.arrivals = arrival_phase(state, info.frame, rng, *this, info.arrival_draws);

    const double profit = compute_profit(info.flows, info.frame, config_);
    info.reward = compute_penalties(
        PenaltyInputs{info.flows, profit, info.constraint_excess_a, info.departures, info.arrivals.declined},
        info.frame, config_);

    EpisodeMetrics& m = state.metrics;
    m.profit_eur += profit;
    m.reward += info.reward.total;
    m.energy_sold_kwh += info.flows.net_to_cars;
    for (const auto& d : info.departures) {
        m.missing_kwh += d.missing_kwh;
        ++m.departures;
        if (d.preference == Preference::TimeSensitive) {
            ++m.departures_time_sensitive;
        } else {
            ++m.departures_charge_sensitive;
            m.overtime_steps += d.overtime_steps;
            m.early_steps += d.early_steps;
        }
    }
    m.arrivals += static_cast<std::int64_t>(info.arrivals.sampled);
    m.admitted += static_cast<std::int64_t>(info.arrivals.admitted);
    m.declined += static_cast<std::int64_t>(info.arrivals.declined);

    state.step += 1;
    state.done = state.step >= config_.episode_steps;
    info.done = state.done;
    if (state.done) {
        for (std::size_t i = 0; i < state.ports.size(); ++i)
            if (state.ports[i].occupied) info.unfinished.push_back(departure_record(i, state.ports[i].car));
    }
    return info.reward.total;
}

Environment::StepResult Environment::step(EnvState& state, std::span<const int> action) const {
    StepResult r;
    r.reward = step(state, action, r.info);
    r.done = r.info.done;
    return r;
}

void Environment::observe(const EnvState& state, std::span<double> out) const {
    using L = ObservationLayout;
    if (out.size() != layout_.size()) throw std::invalid_argument("observation buffer has the wrong size");
    std::fill(out.begin(), out.end(), 0.0);

    const double horizon = static_cast<double>(config_.episode_steps);
    for (std::size_t i = 0; i < state.ports.size(); ++i) {
        const PortState& p = state.ports[i];
        if (!p.occupied) continue;
        double* block = out.data() + layout_.port_offset(i);
        const double i_max = station_.port(i).i_max_charge_a;
        block[L::kOccupied] = 1.0;
        block[L::kCurrent] = i_max > 0.0 ? p.i_drawn_a / i_max : 0.0;
        block[L::kSoc] = p.car.soc;
        block[L::kEnergyRemaining] = p.car.de_remain_kwh / p.car.profile.capacity_kwh;
        block[L::kTimeRemaining] = static_cast<double>(p.car.dt_remain_steps) / horizon;
        block[L::kPreference] = p.car.preference == Preference::ChargeSensitive ? 1.0 : 0.0;
    }
    if (state.battery && station_.battery()) {
        double* block = out.data() + layout_.battery_offset();
        const double i_max = station_.battery()->i_max_a();
        block[0] = state.battery->soc;
        block[1] = i_max > 0.0 ? state.battery->i_battery_a / i_max : 0.0;
    }

    // A finished episode reports the prices of its last step.
    const int price_step = std::min(state.step, config_.episode_steps - 1);
    const ExogenousFrame f = frame(state.day_index, price_step);
    double* g = out.data() + layout_.global_offset();
    const int spd = config_.steps_per_day();
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(state.step % spd) / static_cast<double>(spd);
    g[L::kPriceBuy] = f.p_buy;
    g[L::kPriceSellGrid] = f.p_sell_grid;
    g[L::kPriceSell] = config_.p_sell_eur_per_kwh;
    g[L::kTimeSin] = std::sin(angle);
    g[L::kTimeCos] = std::cos(angle);
    g[L::kIsWeekday] = f.is_weekday ? 1.0 : 0.0;
    g[L::kDayIndex] = static_cast<double>(state.day_index) / 365.0;

    const auto& buy = data_->prices.buy;
    for (std::size_t k = 0; k < layout_.price_horizon; ++k) {
        const auto ahead = static_cast<double>(state.step) + static_cast<double>(k + 1);
        auto idx = static_cast<std::size_t>(state.day_index) * 24 +
                   static_cast<std::size_t>(std::floor(ahead * config_.dt_min / 60.0));
        idx = std::min(idx, buy.size() - 1);
        out[layout_.horizon_offset() + k] = buy[idx];
    }
}

std::vector<double> Environment::observe(const EnvState& state) const {
    std::vector<double> out(layout_.size());
    observe(state, out);
    return out;
}

} // namespace chargesim
