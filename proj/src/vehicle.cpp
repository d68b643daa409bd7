#include "chargesim/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace chargesim {

double charge_limit(double soc, double tau, double r_bar_kw) {
    if (!(soc >= 0.0 && soc <= 1.0)) throw std::domain_error("soc outside [0, 1]");
    if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("tau outside (0, 1)");
    if (!(r_bar_kw >= 0.0)) throw std::domain_error("negative maximum rate");
    if (soc <= tau) return r_bar_kw;
    return (1.0 - soc) * r_bar_kw / (1.0 - tau);
}

double discharge_limit(double soc, double tau, double r_bar_kw) {
    if (!(soc >= 0.0 && soc <= 1.0)) throw std::domain_error("soc outside [0, 1]");
    return charge_limit(1.0 - soc, tau, r_bar_kw);
}

double power_to_current(double p_kw, double voltage_v) {
    if (!(voltage_v > 0.0)) throw std::domain_error("voltage must be positive");
    return 1000.0 * p_kw / voltage_v;
}

ChargeResult integrate_charge(const CarState& car, double voltage_v, double current_a, double dt_h) {
    ChargeResult out{car, 0.0};
    if (current_a == 0.0) return out;

    const double capacity = car.profile.capacity_kwh;
    const double raw = dt_h * voltage_v * current_a / 1000.0;
    CarState& next = out.car;

    // Delivered energy is the change in stored SoC.
    if (raw > 0.0) {
        const double headroom = capacity * (1.0 - car.soc);
        const double cap = std::min(headroom, car.de_remain_kwh);
        if (raw >= cap) {
            next.soc = (cap == headroom) ? 1.0 : std::min(1.0, car.soc + cap / capacity);
            out.delivered_kwh = capacity * (next.soc - car.soc);
            next.de_remain_kwh =
                (cap == car.de_remain_kwh) ? 0.0 : std::max(0.0, car.de_remain_kwh - out.delivered_kwh);
        } else {
            next.soc = std::min(1.0, car.soc + raw / capacity);
            out.delivered_kwh = capacity * (next.soc - car.soc);
            next.de_remain_kwh = std::max(0.0, car.de_remain_kwh - out.delivered_kwh);
        }
    } else {
        next.soc = raw <= -capacity * car.soc ? 0.0 : std::max(0.0, car.soc + raw / capacity);
        out.delivered_kwh = capacity * (next.soc - car.soc);
        next.de_remain_kwh = car.de_remain_kwh - out.delivered_kwh;
    }
    next.r_hat_kw = charge_limit(next.soc, car.profile.tau, car.r_bar_kw);
    return out;
}

BatteryResult integrate_battery(const BatteryState& batt, const BatterySpec& spec, double current_a,
                                double dt_h) {
    BatteryResult out{batt, 0.0};
    if (current_a == 0.0) return out;

    const double capacity = spec.capacity_kwh;
    const double grid = dt_h * spec.voltage_v * current_a / 1000.0;
    BatteryState& next = out.state;

    if (grid > 0.0) {
        const double stored = grid * spec.eta_charge;
        next.soc = stored >= capacity * (1.0 - batt.soc) ? 1.0 : std::min(1.0, batt.soc + stored / capacity);
    } else {
        const double removed = -grid / spec.eta_discharge;
        next.soc = removed >= capacity * batt.soc ? 0.0 : std::max(0.0, batt.soc - removed / capacity);
    }
    const double stored = capacity * (next.soc - batt.soc);
    out.de_b_net_kwh = stored >= 0.0 ? stored / spec.eta_charge : stored * spec.eta_discharge;
    next.r_hat_kw = charge_limit(next.soc, spec.tau, spec.r_max_kw);
    return out;
}

BatteryState initial_battery_state(const BatterySpec& spec) {
    return BatteryState{0.0, spec.initial_soc, charge_limit(spec.initial_soc, spec.tau, spec.r_max_kw)};
}

} // namespace chargesim
