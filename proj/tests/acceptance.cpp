// Acceptance suite. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "chargesim/batch.hpp"
#include "chargesim/config.hpp"
#include "chargesim/env.hpp"
#include "chargesim/harness.hpp"
#include "support.hpp"

using namespace chargesim;
using testsupport::random_tree;

namespace {

// Pinned tolerances and limits.
constexpr double kCurveTol = 1e-12;
constexpr double kCurveLimitS = 1.0;
constexpr int kConservationEpisodes = 1000;
constexpr double kStepEnergyRelTol = 1e-9;
constexpr double kEpisodeEnergyRelTol = 1e-6;
constexpr double kConservationLimitS = 60.0;
constexpr int kConstraintInstances = 10000;
constexpr double kProportionalRelTol = 1e-12;
constexpr double kConstraintLimitS = 30.0;
constexpr int kOracleEpisodes = 200;
constexpr int kOracleMaxSteps = 48;
constexpr int kOracleMaxPorts = 4;
constexpr double kRewardRelTol = 1e-6;
constexpr double kOracleLimitS = 60.0;
constexpr double kDeterminismLimitS = 60.0;
constexpr std::uint64_t kPoissonDraws = 1000000;
constexpr double kPoissonSigmas = 3.0;
constexpr double kPoissonLimitS = 30.0;
constexpr std::uint64_t kThroughputSteps = 100000;
constexpr double kSingleEnvLimitS = 10.0;
constexpr double kBatchMinStepsPerS = 100000.0;
constexpr int kBaselineSeeds = 100;
constexpr double kSignTestAlpha = 0.01;

// Denominator floor for relative comparisons, so exact zeros compare equal.
constexpr double kTiny = 1e-300;

double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), kTiny});
}

struct Outcome {
    bool pass = true;
    std::string detail;
};

int g_failures = 0;

void run(const char* name, double limit_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = limit_s <= 0.0 || s <= limit_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++g_failures;
    char timing[96];
    if (limit_s > 0.0) std::snprintf(timing, sizeof timing, "%.2f s, limit %.0f s", s, limit_s);
    else std::snprintf(timing, sizeof timing, "%.2f s", s);
    std::printf("%s %-22s %s (%s)%s\n", pass ? "PASS" : "FAIL", name, o.detail.c_str(), timing,
                in_time ? "" : " [too slow]");
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// --- random scenarios --------------------------------------------------------

BatterySpec random_battery(Stream& rng) {
    BatterySpec b;
    b.voltage_v = rng.uniform(300.0, 900.0);
    b.capacity_kwh = rng.uniform(20.0, 250.0);
    b.r_max_kw = rng.uniform(10.0, 200.0);
    b.tau = rng.uniform(0.5, 0.95);
    b.eta_charge = rng.uniform(0.85, 1.0);
    b.eta_discharge = rng.uniform(0.85, 1.0);
    b.initial_soc = rng.bernoulli(0.2) ? (rng.bernoulli(0.5) ? 0.0 : 1.0) : rng.uniform();
    return b;
}

struct Scenario {
    std::shared_ptr<const Environment> env;
    int policy_kind = 0; // 0 uniform, 1 extremes, 2 mostly charging
};

Scenario random_scenario(Stream& rng, int max_depth, int max_ports, int max_steps, bool with_aux) {
    const bool battery = rng.bernoulli(0.5);
    std::optional<BatterySpec> bspec;
    if (battery) bspec = random_battery(rng);
    StationTree tree = StationTree::build(random_tree(rng, max_depth, max_ports), {}, bspec);

    EnvConfig c;
    c.dt_min = rng.bernoulli(0.5) ? 5.0 : 15.0;
    c.episode_steps = static_cast<int>(rng.uniform_int(1, max_steps));
    c.discretization_k = static_cast<int>(rng.uniform_int(1, 10));
    c.p_sell_eur_per_kwh = rng.uniform(0.2, 1.0);
    c.fixed_cost_per_step = rng.bernoulli(0.5) ? rng.uniform(0.0, 0.2) : 0.0;
    c.allow_discharge = rng.bernoulli(0.7);
    c.battery_enabled = battery;
    c.beta = rng.uniform(0.0, 1.0);
    auto coef = [&] { return rng.bernoulli(0.7) ? rng.uniform(0.0, 2.0) : 0.0; };
    c.alpha = {coef(), coef(), coef(), coef(), coef(), coef(), coef(), coef()};

    Datasets d;
    const auto region = static_cast<PriceRegion>(rng.uniform_int(0, 2));
    d.prices = synthetic_prices(region, 4, 2023, rng.next_u64());
    d.arrivals.rates_per_step.resize(static_cast<std::size_t>(c.episode_steps));
    for (auto& r : d.arrivals.rates_per_step) r = rng.uniform(0.0, 1.5);
    d.arrivals.weekend_scale = rng.uniform(0.5, 1.5);
    d.cars = synthetic_car_catalog(CarRegion::World);
    d.users.stay_steps_range = {1, static_cast<int>(rng.uniform_int(2, 30))};
    d.users.requested_fraction_range = {0.01, 1.0};
    d.users.soc_arrival_range = {0.0, 0.97};
    d.users.p_charge_sensitive = rng.uniform();
    if (with_aux) {
        AuxSeries aux;
        aux.start_date = d.prices.start_date;
        std::vector<double> moer(d.prices.buy.size()), demand(d.prices.buy.size());
        for (auto& m : moer) m = rng.uniform(0.05, 0.9);
        for (auto& g : demand) g = rng.uniform(0.0, 60.0);
        if (rng.bernoulli(0.8)) aux.moer_kg_per_kwh = std::move(moer);
        if (rng.bernoulli(0.8)) aux.grid_demand_kwh = std::move(demand);
        d.aux = std::move(aux);
    }
    Scenario s;
    s.env = std::make_shared<const Environment>(c, std::move(tree), std::make_shared<const Datasets>(std::move(d)));
    s.policy_kind = static_cast<int>(rng.uniform_int(0, 2));
    return s;
}

void scenario_actions(int kind, const Environment& env, const EnvState& state, std::span<int> out) {
    Stream rng = policy_stream(state);
    const int k = env.config().discretization_k;
    for (auto& a : out) {
        switch (kind) {
        case 0: a = static_cast<int>(rng.uniform_int(0, 2 * k)); break;
        case 1: a = rng.bernoulli(0.5) ? 2 * k : 0; break;
        default: a = rng.bernoulli(0.8) ? 2 * k : static_cast<int>(rng.uniform_int(0, 2 * k)); break;
        }
    }
}

// --- 1. charging curve ---------------------------------------------------------

Outcome charging_curve() {
    double worst = std::fabs(charge_limit(0.9, 0.8, 150.0) - 75.0);
    const double taus[] = {0.5, 0.8, 0.95};
    const double rbars[] = {11.0, 150.0};
    for (double tau : taus) {
        for (double rbar : rbars) {
            for (int i = 0; i <= 1000; ++i) {
                const double s = i * 1e-3;
                const double hand = s <= tau ? rbar : (1.0 - s) * rbar / (1.0 - tau);
                worst = std::max(worst, std::fabs(charge_limit(s, tau, rbar) - hand));
                worst = std::max(worst, std::fabs(discharge_limit(s, tau, rbar) - charge_limit(1.0 - s, tau, rbar)));
            }
        }
    }
    return {worst <= kCurveTol, fmt("max |err| %.3g, tol %.0e", worst, kCurveTol)};
}

// --- 2. energy conservation ----------------------------------------------------

Outcome energy_conservation() {
    Stream rng(0xc0ffee01);
    double worst_step = 0.0, worst_eq1 = 0.0, worst_episode = 0.0;
    std::uint64_t steps = 0, car_steps = 0;
    StepInfo info;
    std::vector<int> action;
    for (int e = 0; e < kConservationEpisodes; ++e) {
        const Scenario sc = random_scenario(rng, 3, 8, 96, false);
        const Environment& env = *sc.env;
        EnvState state = env.reset(rng.next_u64(), static_cast<std::uint64_t>(e));
        action.assign(env.action_size(), 0);
        double sum_net = 0.0, departed = 0.0;
        while (!state.done) {
            scenario_actions(sc.policy_kind, env, state, action);
            env.step(state, action, info);
            ++steps;
            for (const auto& p : info.ports) {
                if (!p.occupied) continue;
                ++car_steps;
                worst_step = std::max(worst_step, rel_err(p.capacity_kwh * (p.soc_after - p.soc_before), p.delivered_kwh));
            }
            if (info.battery.present) {
                const BatterySpec& b = *env.station().battery();
                const double stored = b.capacity_kwh * (info.battery.soc_after - info.battery.soc_before);
                const double grid = info.battery.de_b_net_kwh;
                const double expect = grid > 0.0 ? grid * b.eta_charge : grid / b.eta_discharge;
                worst_step = std::max(worst_step, rel_err(stored, expect));
            }
            const auto& f = info.flows;
            worst_eq1 = std::max(worst_eq1, rel_err(f.grid_net, f.grid_in + f.to_grid + f.battery_net));
            sum_net += f.net_to_cars;
            for (const auto& d : info.departures) departed += d.capacity_kwh * (d.soc_departure - d.soc_arrival);
        }
        double parked = 0.0;
        for (const auto& p : state.ports)
            if (p.occupied) parked += p.car.profile.capacity_kwh * (p.car.soc - p.car.soc_arrival);
        worst_episode = std::max(worst_episode, rel_err(sum_net, departed + parked));
    }
    const bool ok = worst_step <= kStepEnergyRelTol && worst_eq1 <= kStepEnergyRelTol &&
                    worst_episode <= kEpisodeEnergyRelTol;
    return {ok, fmt("%d episodes, %llu steps, %llu car-steps; step rel %.3g (tol %.0e), eq1 rel %.3g, episode rel "
                    "%.3g (tol %.0e)",
                    kConservationEpisodes, static_cast<unsigned long long>(steps),
                    static_cast<unsigned long long>(car_steps), worst_step, kStepEnergyRelTol, worst_eq1,
                    worst_episode, kEpisodeEnergyRelTol)};
}

// --- 3. constraints --------------------------------------------------------------

// Loads straight from the nested tree: (1/eta) * sum of leaf currents below a
// node while drawing, eta * sum while exporting.
struct TreeOracle {
    double worst_excess = 0.0;
    std::size_t next_leaf = 0;
    std::span<const double> currents;
    double battery = 0.0; // joins the root sum only

    double visit(const ArchNode& n, bool is_root) {
        if (n.is_leaf()) return currents[next_leaf++];
        double sum = 0.0;
        for (const auto& c : n.children) sum += visit(c, false);
        if (is_root) sum += battery;
        const double load = sum > 0.0 ? sum / n.eta : sum * n.eta;
        worst_excess = std::max(worst_excess, std::fabs(load) - n.capacity_a);
        return sum;
    }
};

double oracle_excess(const StationTree& tree, std::span<const double> leaf_currents) {
    TreeOracle o;
    o.currents = leaf_currents.first(tree.num_ports());
    if (tree.battery()) o.battery = leaf_currents[tree.num_ports()];
    o.visit(tree.root(), true);
    return std::max(0.0, o.worst_excess);
}

Outcome constraints() {
    Stream rng(0xc0ffee02);
    int violated = 0, nonzero_after = 0, not_idempotent = 0, oracle_mismatch = 0, untouched_changed = 0;
    double worst_prop = 0.0, worst_oracle_after = 0.0;
    for (int inst = 0; inst < kConstraintInstances; ++inst) {
        std::optional<BatterySpec> b;
        if (rng.bernoulli(0.3)) b = random_battery(rng);
        const StationTree tree = StationTree::build(random_tree(rng, 4, 12), {}, b);
        const std::size_t n = tree.num_leaves();
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double imax = i < tree.num_ports() ? tree.port(i).i_max_charge_a : b->i_max_a();
            const double r = rng.uniform();
            x[i] = r < 0.1 ? 0.0 : (r < 0.35 ? -1.0 : 1.0) * imax * rng.uniform(0.0, 1.5);
        }
        const double before = violation_excess(tree, x);
        if (rel_err(before, oracle_excess(tree, x)) > 1e-12) ++oracle_mismatch;
        const std::vector<double> y = enforce_limits(tree, x);
        if (violation_excess(tree, y) > 0.0) ++nonzero_after;
        worst_oracle_after = std::max(worst_oracle_after, oracle_excess(tree, y));
        if (enforce_limits(tree, y) != y) ++not_idempotent;
        if (before <= 0.0) {
            if (y != x) ++untouched_changed;
            continue;
        }
        ++violated;
        // Leaves with the same innermost splitter share one scale factor in [0, 1].
        std::vector<std::size_t> owner(n, tree.nodes().size() - 1);
        std::vector<std::size_t> width(n, n + 1);
        for (std::size_t k = 0; k < tree.nodes().size(); ++k) {
            const NodeInfo& nd = tree.nodes()[k];
            for (std::size_t i = nd.leaf_begin; i < nd.leaf_end; ++i)
                if (nd.leaf_end - nd.leaf_begin < width[i]) width[i] = nd.leaf_end - nd.leaf_begin, owner[i] = k;
        }
        if (tree.battery()) owner[n - 1] = tree.nodes().size() - 1;
        std::vector<double> factor(tree.nodes().size(), -1.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (x[i] == 0.0) continue;
            const double f = y[i] / x[i];
            if (f < 0.0 || f > 1.0) worst_prop = std::max(worst_prop, 1.0);
            double& ref = factor[owner[i]];
            if (ref < 0.0) ref = f;
            else worst_prop = std::max(worst_prop, std::fabs(f - ref) / std::max(ref, 1e-300));
        }
    }
    // Flat tree with one violated node: the result is x * cap / load.
    for (int inst = 0; inst < 200; ++inst) {
        std::vector<ArchNode> leaves;
        const int ports = static_cast<int>(rng.uniform_int(1, 8));
        double sum = 0.0;
        std::vector<double> x;
        for (int p = 0; p < ports; ++p) {
            leaves.push_back(ArchNode::leaf(testsupport::evse(p, 400.0, 64.0)));
            x.push_back(rng.uniform(1.0, 64.0));
            sum += x.back();
        }
        const double eta = rng.uniform(0.9, 1.0);
        const double cap = sum / eta * rng.uniform(0.1, 0.9);
        const StationTree tree = StationTree::build(ArchNode::splitter(1000, cap, eta, std::move(leaves)));
        const std::vector<double> y = enforce_limits(tree, x);
        const double scale = cap * eta / sum;
        for (int p = 0; p < ports; ++p) worst_prop = std::max(worst_prop, rel_err(y[p], x[p] * scale));
    }
    const bool ok = violated > 0 && nonzero_after == 0 && not_idempotent == 0 && oracle_mismatch == 0 &&
                    untouched_changed == 0 && worst_prop <= kProportionalRelTol;
    return {ok, fmt("%d instances (%d violated): excess>0 after %d, non-idempotent %d, feasible changed %d, oracle "
                    "mismatch %d, proportionality rel %.3g (tol %.0e), oracle excess after %.3g A",
                    kConstraintInstances, violated, nonzero_after, not_idempotent, untouched_changed,
                    oracle_mismatch, worst_prop, kProportionalRelTol, worst_oracle_after)};
}

// --- 4. reward oracle --------------------------------------------------------------

double oracle_reward(const Environment& env, const EnvState& before, const StepInfo& info) {
    const EnvConfig& c = env.config();
    const Datasets& d = env.data();
    const int hour = static_cast<int>(std::lround(c.dt_min)) * before.step / 60;
    const std::size_t idx = static_cast<std::size_t>(before.day_index) * 24 + static_cast<std::size_t>(hour);
    const double p_buy = d.prices.buy[idx];
    const double p_sell_grid = d.prices.sell_grid[idx];

    double net = 0.0, grid_in = 0.0, to_grid = 0.0, batt = 0.0;
    for (std::size_t i = 0; i < info.ports.size(); ++i) {
        const PortLog& p = info.ports[i];
        if (!p.occupied) continue;
        const double delivered = p.capacity_kwh * (p.soc_after - p.soc_before);
        const EvseSpec& e = env.station().port(i);
        net += delivered;
        if (p.current_a > 0.0) grid_in += delivered / e.eta_charge;
        else if (p.current_a < 0.0) to_grid += delivered * e.eta_discharge;
    }
    std::vector<double> requested(env.station().num_leaves(), 0.0);
    for (std::size_t i = 0; i < info.ports.size(); ++i) requested[i] = info.ports[i].requested_a;
    if (info.battery.present) {
        const BatterySpec& b = *env.station().battery();
        const double stored = b.capacity_kwh * (info.battery.soc_after - info.battery.soc_before);
        batt = info.battery.current_a > 0.0 ? stored / b.eta_charge : stored * b.eta_discharge;
        requested.back() = info.battery.requested_a;
    }
    const double grid_net = grid_in + to_grid + batt;
    const double profit = grid_net > 0.0 ? c.p_sell_eur_per_kwh * net - p_buy * grid_net - c.fixed_cost_per_step
                                         : c.p_sell_eur_per_kwh * net - p_sell_grid * grid_net - c.fixed_cost_per_step;

    double sat0 = 0.0, sat1 = 0.0;
    for (const auto& dep : info.departures) {
        if (dep.preference == Preference::TimeSensitive) sat0 += dep.missing_kwh;
        else sat1 += dep.overtime_steps - c.beta * dep.early_steps;
    }
    double declined = 0.0;
    for (const auto& a : info.arrival_draws) declined += a.admitted ? 0.0 : 1.0;
    double moer = 0.0, demand = 0.0;
    bool has_demand = false;
    if (d.aux) {
        if (d.aux->moer_kg_per_kwh) moer = (*d.aux->moer_kg_per_kwh)[idx];
        if (d.aux->grid_demand_kwh) demand = (*d.aux->grid_demand_kwh)[idx], has_demand = true;
    }
    const PenaltyWeights& a = c.alpha;
    return profit - a.constraint * oracle_excess(env.station(), requested) - a.sat0 * sat0 - a.sat1 * sat1 -
           a.sustain * moer * grid_net - a.declined * declined - a.degrad_battery * std::max(0.0, -batt) -
           a.degrad_cars * std::fabs(to_grid) - a.grid * (has_demand ? std::fabs(net - demand) : 0.0);
}

Outcome reward_oracle() {
    Stream rng(0xc0ffee03);
    double worst = 0.0;
    std::uint64_t steps = 0, penalized = 0;
    StepInfo info;
    std::vector<int> action;
    for (int e = 0; e < kOracleEpisodes; ++e) {
        const Scenario sc = random_scenario(rng, 3, kOracleMaxPorts, kOracleMaxSteps, true);
        const Environment& env = *sc.env;
        EnvState state = env.reset(rng.next_u64(), static_cast<std::uint64_t>(e));
        action.assign(env.action_size(), 0);
        while (!state.done) {
            scenario_actions(sc.policy_kind, env, state, action);
            const EnvState before = state;
            const double r = env.step(state, action, info);
            const double expect = oracle_reward(env, before, info);
            worst = std::max(worst, rel_err(r, expect));
            if (r != info.reward.profit_eur) ++penalized;
            ++steps;
        }
    }
    return {worst <= kRewardRelTol,
            fmt("%d episodes, %llu steps (%llu with nonzero penalty), max rel %.3g, tol %.0e", kOracleEpisodes,
                static_cast<unsigned long long>(steps), static_cast<unsigned long long>(penalized), worst,
                kRewardRelTol)};
}

// --- 5. exogeneity and determinism --------------------------------------------------

struct Digest {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) h = (h ^ c[i]) * 0x100000001b3ULL;
    }
    void add(double v) { bytes(&v, sizeof v); }
    void add(std::span<const double> v) { bytes(v.data(), v.size_bytes()); }
};

std::uint64_t state_digest(const EnvState& s) {
    Digest d;
    d.add(static_cast<double>(s.step));
    for (const auto& p : s.ports) {
        d.add(p.occupied ? 1.0 : 0.0);
        d.add(p.i_drawn_a);
        d.add(p.car.soc);
        d.add(p.car.de_remain_kwh);
        d.add(static_cast<double>(p.car.dt_remain_steps));
    }
    if (s.battery) d.add(s.battery->soc);
    d.add(s.metrics.reward);
    return d.h;
}

// Digest of one episode: every reward, observation and state.
std::uint64_t run_digest(const Environment& env, std::uint64_t seed, const Policy& policy) {
    EnvState s = env.reset(seed);
    std::vector<int> a(env.action_size());
    std::vector<double> obs(env.observation_size());
    StepInfo info;
    Digest d;
    while (!s.done) {
        Stream prng = policy_stream(s);
        policy.act(env, s, prng, a);
        d.add(env.step(s, a, info));
        env.observe(s, obs);
        d.add(obs);
        const std::uint64_t sd = state_digest(s);
        d.bytes(&sd, sizeof sd);
    }
    return d.h;
}

struct ExoTrace {
    std::vector<double> frames;
    std::vector<std::uint64_t> draws;
};

ExoTrace exo_trace(const Environment& env, std::uint64_t seed, const Policy& policy) {
    ExoTrace t;
    EnvState s = env.reset(seed);
    t.draws.push_back(static_cast<std::uint64_t>(s.day_index));
    std::vector<int> a(env.action_size());
    StepInfo info;
    while (!s.done) {
        Stream prng = policy_stream(s);
        policy.act(env, s, prng, a);
        env.step(s, a, info);
        const auto& f = info.frame;
        t.frames.insert(t.frames.end(), {f.p_buy, f.p_sell_grid, f.lambda_arrivals, f.moer_kg_per_kwh.value_or(-1.0),
                                         f.grid_demand_kwh.value_or(-1.0)});
        t.draws.push_back(info.arrivals.sampled);
        for (const auto& r : info.arrival_draws) {
            t.draws.push_back(r.car_index);
            t.draws.push_back(static_cast<std::uint64_t>(r.user.stay_steps));
            t.draws.push_back(std::bit_cast<std::uint64_t>(r.user.energy_requested_kwh));
            t.draws.push_back(std::bit_cast<std::uint64_t>(r.user.soc_arrival));
            t.draws.push_back(static_cast<std::uint64_t>(r.user.preference));
        }
    }
    return t;
}

bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size_bytes()) == 0;
}

Outcome exogeneity_determinism() {
    RunConfig rc;
    rc.synthetic.days = 30;
    rc.synthetic.with_aux = true;
    rc.station.battery = BatterySpec{};
    rc.env.battery_enabled = true;
    const auto env = build_environment(rc);
    const RandomPolicy random;
    const MaxChargePolicy maxc;
    const IdlePolicy idle;

    int same_seed_fail = 0, exo_fail = 0;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        if (run_digest(*env, seed, random) != run_digest(*env, seed, random)) ++same_seed_fail;
        const ExoTrace a = exo_trace(*env, seed, random);
        const ExoTrace b = exo_trace(*env, seed, maxc);
        const ExoTrace c = exo_trace(*env, seed, idle);
        if (!bitwise_equal(a.frames, b.frames) || a.draws != b.draws) ++exo_fail;
        if (!bitwise_equal(a.frames, c.frames) || a.draws != c.draws) ++exo_fail;
    }

    // Batch of 16 against 16 sequential runs, then across worker counts.
    constexpr std::size_t kB = 16;
    const std::uint64_t master = 77;
    const std::size_t slots = env->action_size();
    auto batch_digest = [&](std::size_t workers, int& mismatches) {
        BatchEnv be(env, kB, master, false, workers);
        std::vector<EnvState> seq;
        for (std::size_t i = 0; i < kB; ++i) seq.push_back(env->reset(env_seed(master, i)));
        std::vector<int> actions(kB * slots);
        std::vector<double> obs(env->observation_size());
        StepInfo info;
        Digest d;
        while (!be.states()[0].done) {
            for (std::size_t i = 0; i < kB; ++i) {
                Stream prng = policy_stream(be.states()[i]);
                random.act(*env, be.states()[i], prng, std::span<int>(actions).subspan(i * slots, slots));
            }
            be.step(actions);
            d.add(be.rewards());
            d.add(be.observations());
            for (std::size_t i = 0; i < kB; ++i) {
                const double r = env->step(seq[i], std::span<const int>(actions).subspan(i * slots, slots), info);
                env->observe(seq[i], obs);
                if (std::bit_cast<std::uint64_t>(r) != std::bit_cast<std::uint64_t>(be.rewards()[i]) ||
                    !bitwise_equal(obs, be.observation(i)) || !(seq[i] == be.states()[i]))
                    ++mismatches;
            }
        }
        return d.h;
    };
    int batch_mismatch = 0;
    const std::uint64_t ref = batch_digest(1, batch_mismatch);
    int worker_fail = 0;
    for (std::size_t w : {2u, 3u, 4u, 8u}) {
        int ignored = 0;
        if (batch_digest(w, ignored) != ref) ++worker_fail;
        batch_mismatch += ignored;
    }
    const bool ok = same_seed_fail == 0 && exo_fail == 0 && batch_mismatch == 0 && worker_fail == 0;
    return {ok, fmt("same-seed mismatches %d/8, exogenous trace mismatches %d/16, batch-vs-sequential step "
                    "mismatches %d, worker-count digests differing %d/4 (tol: bitwise)",
                    same_seed_fail, exo_fail, batch_mismatch, worker_fail)};
}

// --- 6. Poisson ------------------------------------------------------------------------

Outcome poisson() {
    std::string detail;
    bool ok = true;
    for (double lambda : {0.5, 3.0, 10.0}) {
        Stream rng = Stream::keyed(0xa11, static_cast<std::uint64_t>(lambda * 10), 0, Phase::Arrival);
        double sum = 0.0, sum2 = 0.0;
        for (std::uint64_t i = 0; i < kPoissonDraws; ++i) {
            const double k = static_cast<double>(sample_poisson(rng, lambda));
            sum += k;
            sum2 += k * k;
        }
        const double n = static_cast<double>(kPoissonDraws);
        const double mean = sum / n;
        const double var = (sum2 - n * mean * mean) / (n - 1.0);
        // Var of the sample variance: (mu4 - sigma^4) / n with mu4 = lambda (1 + 3 lambda).
        const double z_mean = (mean - lambda) / std::sqrt(lambda / n);
        const double z_var = (var - lambda) / std::sqrt((lambda + 2.0 * lambda * lambda) / n);
        ok = ok && std::fabs(z_mean) <= kPoissonSigmas && std::fabs(z_var) <= kPoissonSigmas;
        detail += fmt("lambda %.1f: z_mean %+.2f z_var %+.2f; ", lambda, z_mean, z_var);
    }
    return {ok, detail + fmt("%llu draws each, tol %.0f sigma", static_cast<unsigned long long>(kPoissonDraws),
                             kPoissonSigmas)};
}

// --- 7. departure rule -------------------------------------------------------------------

Outcome departures() {
    int cases = 0, wrong = 0;
    const double eps_values[] = {0.0, std::numeric_limits<double>::denorm_min(), 1e-12, 5.0};
    for (int u = 0; u <= 1; ++u) {
        for (int dt = -2; dt <= 3; ++dt) {
            for (double de : eps_values) {
                ++cases;
                const bool expect = u == 0 ? dt <= 0 : de == 0.0;
                EnvState s;
                s.ports.resize(2);
                PortState& p = s.ports[1];
                p.occupied = true;
                p.i_drawn_a = 16.0;
                p.car.preference = u == 0 ? Preference::TimeSensitive : Preference::ChargeSensitive;
                p.car.dt_remain_steps = dt;
                p.car.de_remain_kwh = de;
                p.car.soc = 0.4;
                p.car.soc_arrival = 0.2;
                p.car.profile.capacity_kwh = 50.0;
                const PortState orig = p;
                std::vector<Departure> deps;
                departure_phase(s, deps);
                bool good = should_depart(orig.car) == expect;
                good = good && (deps.size() == (expect ? 1u : 0u));
                good = good && (s.ports[1].occupied == !expect);
                if (expect && deps.size() == 1) {
                    const Departure& d = deps[0];
                    good = good && d.port == 1 && d.missing_kwh == std::max(0.0, de) &&
                           d.overtime_steps == std::max(0, -dt) && s.ports[1].i_drawn_a == 0.0 &&
                           d.soc_departure == 0.4 && d.capacity_kwh == 50.0;
                    if (u == 1) good = good && d.early_steps == std::max(0, dt);
                }
                if (!expect) good = good && s.ports[1] == orig;
                if (!good) ++wrong;
            }
        }
    }
    return {wrong == 0, fmt("%d cases, %d mismatches (tol: exact)", cases, wrong)};
}

// --- 8. throughput -------------------------------------------------------------------------

Outcome throughput() {
    const auto env = build_environment(RunConfig{});
    const ThroughputReport single = throughput_probe(env, 1, kThroughputSteps, 1, 1);
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const ThroughputReport batch = throughput_probe(env, 16, 16 * kThroughputSteps / 4, hw, 2);
    const bool ok = single.seconds <= kSingleEnvLimitS && batch.steps_per_second >= kBatchMinStepsPerS;
    return {ok, fmt("single env %llu steps in %.3f s (limit %.0f s), B=16 %.0f steps/s with %zu worker(s) "
                    "(min %.0f); %d ports; %s",
                    static_cast<unsigned long long>(single.total_steps), single.seconds, kSingleEnvLimitS,
                    batch.steps_per_second, batch.workers, kBatchMinStepsPerS, static_cast<int>(env->num_ports()),
                    single.hardware.c_str())};
}

// --- 9. baseline sanity --------------------------------------------------------------------

// P(X >= wins) for X ~ Binomial(n, 1/2).
double sign_test_p(int wins, int n) {
    double p = 0.0;
    for (int k = wins; k <= n; ++k)
        p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - n * std::log(2.0));
    return std::min(1.0, p);
}

Outcome baseline() {
    RunConfig rc;
    rc.synthetic.scenario = UserScenario::Shopping;
    rc.synthetic.traffic = Traffic::Medium;
    rc.env.p_sell_eur_per_kwh = 0.75;
    rc.env.alpha = PenaltyWeights{};
    const auto env = build_environment(rc);
    EvaluateOptions o;
    o.episodes = kBaselineSeeds;
    o.seed = 2024;
    const MetricsReport mc = evaluate(MaxChargePolicy{}, env, o);
    const MetricsReport id = evaluate(IdlePolicy{}, env, o);
    int wins = 0, losses = 0;
    for (int i = 0; i < kBaselineSeeds; ++i) {
        if (mc.per_episode[i].seed != id.per_episode[i].seed) return {false, "episode seeds are not paired"};
        const double d = mc.per_episode[i].profit_eur - id.per_episode[i].profit_eur;
        wins += d > 0.0;
        losses += d < 0.0;
    }
    const double p = sign_test_p(wins, wins + losses);
    return {p < kSignTestAlpha,
            fmt("max-charge %.2f vs idle %.2f EUR/day; %d wins, %d losses, %d ties; sign test p = %.3g (< %.2f)",
                mc.mean_daily_profit_eur, id.mean_daily_profit_eur, wins, losses, kBaselineSeeds - wins - losses, p,
                kSignTestAlpha)};
}

} // namespace

int main() {
    std::printf("hardware: %s\n", hardware_fingerprint().c_str());
    run("charging-curve", kCurveLimitS, charging_curve);
    run("energy-conservation", kConservationLimitS, energy_conservation);
    run("constraints", kConstraintLimitS, constraints);
    run("reward-oracle", kOracleLimitS, reward_oracle);
    run("exogeneity-determinism", kDeterminismLimitS, exogeneity_determinism);
    run("poisson-arrivals", kPoissonLimitS, poisson);
    run("departure-rule", 0.0, departures);
    run("throughput", 0.0, throughput);
    run("baseline-sanity", 0.0, baseline);
    std::printf("%s: %d criteria failed\n", g_failures ? "FAILED" : "OK", g_failures);
    return g_failures ? 1 : 0;
}
