#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <unistd.h>

#include "chargesim/exogenous.hpp"
#include "support.hpp"

using namespace chargesim;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("chargesim_exo_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    fs::path file(const std::string& name, const std::string& text) const {
        std::ofstream(path / name) << text;
        return path / name;
    }
};

std::string price_csv(int hours, int skip_hour = -1, int dup_hour = -1) {
    std::string s = "timestamp,buy_eur_per_kwh,sell_grid_eur_per_kwh\n";
    for (int h = 0; h < hours; ++h) {
        if (h == skip_hour) continue;
        char buf[64];
        std::snprintf(buf, sizeof buf, "2023-03-%02d %02d:00,%.3f,%.3f\n", 1 + h / 24, h % 24, 0.1 + 0.001 * h,
                      0.05);
        s += buf;
        if (h == dup_hour) s += buf;
    }
    return s;
}

DataError::Kind kind_of_load(const fs::path& p) {
    try {
        load_prices(p);
    } catch (const DataError& e) {
        return e.kind();
    }
    FAIL("no DataError");
    return DataError::Kind::Io;
}

} // namespace

TEST_CASE("price loader accepts whole days") {
    TempDir d;
    const auto p = load_prices(d.file("prices.csv", price_csv(48)));
    CHECK(p.days() == 2);
    CHECK(p.buy[0] == doctest::Approx(0.1));
    CHECK(p.buy[47] == doctest::Approx(0.147));
    CHECK(p.sell_grid[5] == doctest::Approx(0.05));
    CHECK(format_date(p.start_date) == "2023-03-01");
}

TEST_CASE("price loader rejects gaps, duplicates, partial days and bad values with line numbers") {
    TempDir d;
    SUBCASE("gap") {
        const auto f = d.file("p.csv", price_csv(48, 10));
        try {
            load_prices(f);
            FAIL("expected error");
        } catch (const DataError& e) {
            CHECK(e.kind() == DataError::Kind::GapAt);
            CHECK(e.line() == 12); // header, hours 0-9, then hour 11
        }
    }
    SUBCASE("duplicate") { CHECK(kind_of_load(d.file("p.csv", price_csv(48, -1, 3))) == DataError::Kind::Duplicate); }
    SUBCASE("partial day") { CHECK(kind_of_load(d.file("p.csv", price_csv(30))) == DataError::Kind::PartialDay); }
    SUBCASE("missing column") {
        CHECK(kind_of_load(d.file("p.csv", "timestamp,price\n2023-01-01 00:00,1\n")) ==
              DataError::Kind::MissingColumn);
    }
    SUBCASE("unparseable number") {
        std::string s = price_csv(24);
        s.replace(s.find("0.100"), 5, "abc");
        CHECK(kind_of_load(d.file("p.csv", s)) == DataError::Kind::Unparseable);
    }
    SUBCASE("missing file") { CHECK(kind_of_load(d.path / "nope.csv") == DataError::Kind::Io); }
    SUBCASE("does not start at midnight") {
        CHECK(kind_of_load(d.file("p.csv", "timestamp,buy_eur_per_kwh\n2023-01-01 01:00,0.1\n")) ==
              DataError::Kind::PartialDay);
    }
}

TEST_CASE("car catalog validation") {
    TempDir d;
    const std::string header = "name,capacity_kwh,r_max_ac_kw,r_max_dc_kw,tau,weight\n";
    auto kind = [&](const std::string& rows) {
        try {
            load_car_catalog(d.file("cars.csv", header + rows));
        } catch (const DataError& e) {
            return e.kind();
        }
        return DataError::Kind::Empty;
    };
    CHECK(kind("a,0,11,50,0.8,1\n") == DataError::Kind::InvalidCapacity);
    CHECK(kind("a,60,11,50,1.2,1\n") == DataError::Kind::InvalidTau);
    CHECK(kind("a,60,11,50,0.8,-1\n") == DataError::Kind::NegativeWeight);
    CHECK(kind("a,60,11,50,0.8,0\nb,40,7,50,0.8,0\n") == DataError::Kind::DegenerateWeights);
    try {
        load_car_catalog(d.file("cars.csv", header + "a,60,11,50,0.8,1\nb,-3,11,50,0.8,1\n"));
        FAIL("expected error");
    } catch (const DataError& e) {
        CHECK(e.line() == 3);
    }
    const auto ok = load_car_catalog(d.file("cars.csv", header + "a,60,11,50,0.8,3\nb,40,7,50,0.8,1\n"));
    CHECK(ok.size() == 2);
    CHECK(ok.cumulative()[0] == doctest::Approx(0.75));
    CHECK(ok.cumulative()[1] == 1.0);
}

TEST_CASE("car sampling follows the weights") {
    const CarCatalog cat({{"a", testsupport::test_car(), 3.0}, {"b", testsupport::test_car(), 1.0}}, "t");
    Stream rng(7);
    const int n = 1000000;
    int a = 0;
    for (int i = 0; i < n; ++i) a += sample_car_index(rng, cat) == 0;
    // sigma = sqrt(0.75 * 0.25 / n) ~ 4.3e-4
    CHECK(std::fabs(static_cast<double>(a) / n - 0.75) < 0.002);
}

TEST_CASE("user sampling stays inside the model ranges") {
    UserScenarioModel m;
    m.stay_steps_range = {3, 9};
    m.soc_arrival_range = {0.2, 0.4};
    m.requested_fraction_range = {0.5, 1.0};
    m.p_charge_sensitive = 0.25;
    Stream rng(9);
    const CarProfile car = testsupport::test_car();
    int cs = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const auto u = sample_user(rng, m, car);
        REQUIRE(u.stay_steps >= 3);
        REQUIRE(u.stay_steps <= 9);
        REQUIRE(u.soc_arrival >= 0.2);
        REQUIRE(u.soc_arrival < 0.4);
        const double free = car.capacity_kwh * (1 - u.soc_arrival);
        REQUIRE(u.energy_requested_kwh >= 0.5 * free - 1e-12);
        REQUIRE(u.energy_requested_kwh <= free + 1e-12);
        cs += u.preference == Preference::ChargeSensitive;
    }
    CHECK(std::fabs(static_cast<double>(cs) / n - 0.25) < 4 * std::sqrt(0.25 * 0.75 / n));
}

TEST_CASE("frame_at holds hourly prices and scales arrivals by weekday") {
    Datasets d;
    d.prices.start_date = std::chrono::sys_days{std::chrono::year{2023} / 1 / 6}; // Friday
    for (int h = 0; h < 48; ++h) d.prices.buy.push_back(h);
    d.prices.sell_grid = d.prices.buy;
    d.arrivals.rates_per_step = {1.0, 2.0, 3.0};
    d.arrivals.weekday_scale = 0.5;
    d.arrivals.weekend_scale = 2.0;

    auto f = frame_at(d, 0, 0, 5.0);
    CHECK(f.p_buy == 0.0);
    CHECK(f.is_weekday);
    CHECK(f.lambda_arrivals == 0.5);
    f = frame_at(d, 0, 11, 5.0);
    CHECK(f.p_buy == 0.0);
    CHECK(f.lambda_arrivals == doctest::Approx(1.5)); // 11 % 3 = 2
    f = frame_at(d, 0, 12, 5.0);
    CHECK(f.p_buy == 1.0);
    f = frame_at(d, 1, 0, 5.0); // Saturday
    CHECK(!f.is_weekday);
    CHECK(f.p_buy == 24.0);
    CHECK(f.lambda_arrivals == 2.0);
    CHECK_THROWS_AS(frame_at(d, 2, 0, 5.0), DataError);
    CHECK_THROWS_AS(frame_at(d, 1, 288, 5.0), DataError);
    CHECK(!f.moer_kg_per_kwh);
}

TEST_CASE("aux series align by calendar hour") {
    Datasets d;
    d.prices.start_date = std::chrono::sys_days{std::chrono::year{2023} / 1 / 2};
    d.prices.buy.assign(24, 0.1);
    d.prices.sell_grid = d.prices.buy;
    d.arrivals.rates_per_step = {0.0};
    AuxSeries aux;
    aux.start_date = std::chrono::sys_days{std::chrono::year{2023} / 1 / 1};
    std::vector<double> moer(48);
    std::iota(moer.begin(), moer.end(), 0.0);
    aux.moer_kg_per_kwh = moer;
    d.aux = aux;
    const auto f = frame_at(d, 0, 12, 5.0);
    REQUIRE(f.moer_kg_per_kwh);
    CHECK(*f.moer_kg_per_kwh == 25.0);
    CHECK(!f.grid_demand_kwh);
}

TEST_CASE("dataset directory round trip is exact") {
    TempDir d;
    SyntheticOptions o;
    o.days = 3;
    o.with_aux = true;
    const Datasets a = generate_synthetic_defaults(o);
    write_dataset_dir(a, d.path / "set");
    const Datasets b = load_dataset_dir(d.path / "set");
    CHECK(b.prices.buy == a.prices.buy);
    CHECK(b.prices.sell_grid == a.prices.sell_grid);
    CHECK(b.prices.start_date == a.prices.start_date);
    CHECK(b.arrivals.rates_per_step == a.arrivals.rates_per_step);
    CHECK(b.arrivals.weekday_scale == a.arrivals.weekday_scale);
    CHECK(b.cars.size() == a.cars.size());
    for (std::size_t i = 0; i < a.cars.size(); ++i) CHECK(b.cars.entries()[i].profile == a.cars.entries()[i].profile);
    CHECK(b.users.stay_steps_range == a.users.stay_steps_range);
    CHECK(b.users.p_charge_sensitive == a.users.p_charge_sensitive);
    REQUIRE(b.aux);
    CHECK(*b.aux->moer_kg_per_kwh == *a.aux->moer_kg_per_kwh);
    CHECK_THROWS_AS(load_dataset_dir(d.path / "missing"), DataError);
}

TEST_CASE("synthetic data is deterministic per seed") {
    SyntheticOptions o;
    o.days = 10;
    const auto a = generate_synthetic_defaults(o);
    const auto b = generate_synthetic_defaults(o);
    CHECK(a.prices.buy == b.prices.buy);
    o.seed = 1;
    const auto c = generate_synthetic_defaults(o);
    CHECK(a.prices.buy != c.prices.buy);
    CHECK(a.arrivals.rates_per_step == c.arrivals.rates_per_step);
}

TEST_CASE("synthetic arrivals: daily totals, traffic scaling and scenario shapes") {
    auto total = [](const ArrivalProfile& a) { return std::accumulate(a.rates_per_step.begin(), a.rates_per_step.end(), 0.0); };
    const auto med = synthetic_arrivals(UserScenario::Shopping, Traffic::Medium, 5.0, 288);
    const auto high = synthetic_arrivals(UserScenario::Shopping, Traffic::High, 5.0, 288);
    const auto low = synthetic_arrivals(UserScenario::Shopping, Traffic::Low, 5.0, 288);
    CHECK(total(med) == doctest::Approx(80.0));
    CHECK(total(high) == doctest::Approx(2 * total(med)));
    CHECK(total(low) == doctest::Approx(0.5 * total(med)));

    // Peak-to-mean ratio: highway traffic is flatter than shopping traffic.
    auto peakiness = [&](const ArrivalProfile& a) {
        return *std::max_element(a.rates_per_step.begin(), a.rates_per_step.end()) / (total(a) / 288.0);
    };
    const auto hw = synthetic_arrivals(UserScenario::Highway, Traffic::Medium, 5.0, 288);
    CHECK(peakiness(hw) < peakiness(med));

    // Two-day episodes tile the daily shape.
    const auto two = synthetic_arrivals(UserScenario::Work, Traffic::Medium, 5.0, 576);
    CHECK(two.rates_per_step[10] == two.rates_per_step[298]);
}

TEST_CASE("enum names round trip") {
    for (auto s : {UserScenario::Highway, UserScenario::Residential, UserScenario::Work, UserScenario::Shopping})
        CHECK(user_scenario_from_string(to_string(s)) == s);
    for (auto t : {Traffic::Low, Traffic::Medium, Traffic::High}) CHECK(traffic_from_string(to_string(t)) == t);
    CHECK_THROWS_AS(traffic_from_string("Extreme"), std::invalid_argument);
}
