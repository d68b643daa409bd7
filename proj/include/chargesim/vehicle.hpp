#pragma once

#include <cstdint>

namespace chargesim {

/// Physical properties of a car model. Rates are in kW, capacity in kWh.
struct CarProfile {
    double capacity_kwh = 0.0;
    double r_max_ac_kw = 0.0;
    double r_max_dc_kw = 0.0;
    /// SoC where the constant-rate bulk stage ends and the taper starts.
    double tau = 0.8;

    friend bool operator==(const CarProfile&, const CarProfile&) = default;
};

enum class Preference : std::uint8_t {
    TimeSensitive = 0,   ///< leaves when its stay is over
    ChargeSensitive = 1, ///< leaves once the requested energy is delivered
};

struct UserProfile {
    int stay_steps = 1;
    double energy_requested_kwh = 0.0;
    double soc_arrival = 0.0;
    Preference preference = Preference::TimeSensitive;

    friend bool operator==(const UserProfile&, const UserProfile&) = default;
};

/// State of a parked car. `dt_remain_steps` goes negative while a
/// charge-sensitive car overstays.
struct CarState {
    double de_remain_kwh = 0.0;
    int dt_remain_steps = 0;
    double soc = 0.0;
    double r_hat_kw = 0.0;
    /// Charger-kind specific maximum rate, fixed for the stay.
    double r_bar_kw = 0.0;
    CarProfile profile;
    Preference preference = Preference::TimeSensitive;
    double soc_arrival = 0.0;

    friend bool operator==(const CarState&, const CarState&) = default;
};

struct BatterySpec {
    double voltage_v = 800.0;
    double capacity_kwh = 200.0;
    double r_max_kw = 100.0;
    double tau = 0.8;
    double eta_charge = 1.0;
    double eta_discharge = 1.0;
    double initial_soc = 0.5;

    /// Current equivalent of r_max_kw at the battery voltage.
    double i_max_a() const noexcept { return 1000.0 * r_max_kw / voltage_v; }
};

struct BatteryState {
    double i_battery_a = 0.0;
    double soc = 0.0;
    double r_hat_kw = 0.0;

    friend bool operator==(const BatteryState&, const BatteryState&) = default;
};

/// Piecewise-linear charge rate: flat at r_bar up to tau, then linear down to
/// zero at full charge. Throws std::domain_error outside soc in [0,1],
/// tau in (0,1) or for negative r_bar.
double charge_limit(double soc, double tau, double r_bar_kw);

/// Discharge rate limit; the charge curve mirrored around SoC 0.5.
double discharge_limit(double soc, double tau, double r_bar_kw);

/// kW to A at the given voltage. Throws std::domain_error for voltage <= 0.
double power_to_current(double p_kw, double voltage_v);

struct ChargeResult {
    CarState car;
    /// Energy moved into the car (negative when discharging), after caps.
    double delivered_kwh = 0.0;
};

/// Constant-current (dis)charge of a car over dt_h hours.
///
/// Delivered energy is truncated so that soc stays in [0,1] and charging
/// never exceeds the remaining request, and always equals C * (soc' - soc).
/// The caller owns the stay clock.
ChargeResult integrate_charge(const CarState& car, double voltage_v, double current_a, double dt_h);

struct BatteryResult {
    BatteryState state;
    /// Grid-side energy: C * dsoc / eta_charge while charging, C * dsoc * eta_discharge while discharging.
    double de_b_net_kwh = 0.0;
};

BatteryResult integrate_battery(const BatteryState& batt, const BatterySpec& spec, double current_a,
                                double dt_h);

/// Fresh battery state at spec.initial_soc.
BatteryState initial_battery_state(const BatterySpec& spec);

} // namespace chargesim
