#pragma once

#include <chrono>
#include <memory>
#include <vector>

#include "chargesim/env.hpp"
#include "chargesim/rng.hpp"
#include "chargesim/topology.hpp"

namespace testsupport {

using namespace chargesim;

inline CarProfile test_car() { return CarProfile{60.0, 11.0, 100.0, 0.8}; }

/// Flat prices, constant arrival rate, one car model.
inline std::shared_ptr<const Datasets> flat_data(double p_buy, double lambda, int days = 3, double p_sell_grid = -1.0) {
    Datasets d;
    d.prices.start_date = std::chrono::sys_days{std::chrono::year{2023} / 1 / 2}; // a Monday
    d.prices.buy.assign(static_cast<std::size_t>(24 * days), p_buy);
    d.prices.sell_grid.assign(d.prices.buy.size(), p_sell_grid < 0 ? p_buy : p_sell_grid);
    d.prices.region = "test";
    d.arrivals.rates_per_step = {lambda};
    d.arrivals.scenario = "test";
    d.cars = CarCatalog({{"car", test_car(), 1.0}}, "test");
    d.users = UserScenarioModel{};
    return std::make_shared<const Datasets>(std::move(d));
}

inline EvseSpec evse(int id, double v, double imax, double eta_c = 1.0, double eta_d = 1.0,
                     ChargerKind kind = ChargerKind::AC) {
    return EvseSpec{id, v, imax, imax, eta_c, eta_d, kind};
}

/// Random tree of depth <= max_depth with at most max_ports ports. Ids of
/// splitters start at 1000 so they never collide with EVSE ids.
inline ArchNode random_tree(Stream& rng, int max_depth, int max_ports) {
    int next_evse = 0;
    int next_node = 1001;
    auto make_leaf = [&]() {
        const bool dc = rng.bernoulli(0.3);
        EvseSpec e;
        e.id = next_evse++;
        e.kind = dc ? ChargerKind::DC : ChargerKind::AC;
        e.voltage_v = dc ? rng.uniform(300.0, 800.0) : rng.uniform(200.0, 700.0);
        e.i_max_charge_a = dc ? rng.uniform(50.0, 300.0) : rng.uniform(10.0, 64.0);
        e.i_max_discharge_a = e.i_max_charge_a * rng.uniform(0.5, 1.0);
        e.eta_charge = rng.uniform(0.85, 1.0);
        e.eta_discharge = rng.uniform(0.85, 1.0);
        return ArchNode::leaf(e);
    };
    auto build = [&](auto&& self, int depth) -> ArchNode {
        ArchNode n;
        n.id = next_node++;
        n.eta = rng.uniform(0.9, 1.0);
        const int kids = static_cast<int>(rng.uniform_int(1, 3));
        double sum = 0.0;
        for (int c = 0; c < kids && next_evse < max_ports; ++c) {
            if (depth < max_depth && rng.bernoulli(0.4)) {
                n.children.push_back(self(self, depth + 1));
            } else {
                n.children.push_back(make_leaf());
            }
        }
        if (n.children.empty()) n.children.push_back(make_leaf());
        for (const auto& c : n.children) sum += c.is_leaf() ? c.evse->i_max_charge_a : c.capacity_a;
        n.capacity_a = rng.bernoulli(0.2) ? std::numeric_limits<double>::infinity() : sum * rng.uniform(0.2, 1.2);
        return n;
    };
    ArchNode root = build(build, 1);
    root.id = 0;
    return root;
}

} // namespace testsupport
