#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chargesim/rng.hpp"
#include "chargesim/vehicle.hpp"

namespace chargesim {

/// Dataset loading or lookup failure. `line` is 1-based (0 when not tied to a line).
class DataError : public std::runtime_error {
public:
    enum class Kind {
        Io,
        MissingColumn,
        Unparseable,
        GapAt,
        Duplicate,
        PartialDay,
        InvalidCapacity,
        InvalidTau,
        InvalidValue,
        NegativeWeight,
        DegenerateWeights,
        DayOutOfRange,
        Empty,
    };

    DataError(Kind kind, const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what), kind_(kind), line_(line) {}

    Kind kind() const noexcept { return kind_; }
    std::size_t line() const noexcept { return line_; }

private:
    Kind kind_;
    std::size_t line_;
};

/// Hourly day-ahead prices in EUR/kWh. Always starts at 00:00 of start_date.
struct PriceSeries {
    std::chrono::sys_days start_date{};
    std::vector<double> buy;
    std::vector<double> sell_grid;
    std::string region;

    std::size_t days() const noexcept { return buy.size() / 24; }
};

/// Mean arrivals per step over one episode; indexed modulo its length.
struct ArrivalProfile {
    std::vector<double> rates_per_step;
    double weekday_scale = 1.0;
    double weekend_scale = 1.0;
    std::string scenario;
};

struct CarCatalogEntry {
    std::string name;
    CarProfile profile;
    double weight = 1.0;
};

/// Weighted car distribution. Validated on construction.
class CarCatalog {
public:
    CarCatalog() = default;
    CarCatalog(std::vector<CarCatalogEntry> entries, std::string region);

    const std::vector<CarCatalogEntry>& entries() const noexcept { return entries_; }
    const std::string& region() const noexcept { return region_; }
    /// Normalized cumulative weights, last entry 1.
    const std::vector<double>& cumulative() const noexcept { return cumulative_; }
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::vector<CarCatalogEntry> entries_;
    std::string region_;
    std::vector<double> cumulative_;
};

enum class UserScenario { Highway, Residential, Work, Shopping };
enum class Traffic { Low, Medium, High };
enum class CarRegion { EU, US, World };
enum class PriceRegion { NL, FR, DE };

const char* to_string(UserScenario s) noexcept;
const char* to_string(Traffic t) noexcept;
const char* to_string(CarRegion r) noexcept;
const char* to_string(PriceRegion r) noexcept;
UserScenario user_scenario_from_string(const std::string& s);
Traffic traffic_from_string(const std::string& s);
CarRegion car_region_from_string(const std::string& s);
PriceRegion price_region_from_string(const std::string& s);

/// Uniform ranges from which user profiles are drawn.
struct UserScenarioModel {
    std::pair<int, int> stay_steps_range{6, 30};
    /// Requested energy as a fraction of the car's free capacity at arrival.
    std::pair<double, double> requested_fraction_range{0.3, 1.0};
    std::pair<double, double> soc_arrival_range{0.15, 0.6};
    double p_charge_sensitive = 0.3;
    UserScenario scenario = UserScenario::Shopping;

    void validate() const;
};

/// Optional hourly auxiliary signals aligned with the price series.
struct AuxSeries {
    std::chrono::sys_days start_date{};
    std::optional<std::vector<double>> moer_kg_per_kwh;
    std::optional<std::vector<double>> grid_demand_kwh;
};

/// Agent-independent signals for one timestep.
struct ExogenousFrame {
    double p_buy = 0.0;
    double p_sell_grid = 0.0;
    double lambda_arrivals = 0.0;
    std::optional<double> moer_kg_per_kwh;
    std::optional<double> grid_demand_kwh;
    int day_index = 0;
    bool is_weekday = true;
    int step_of_day = 0;
};

/// Everything exogenous an environment needs. Immutable once built.
struct Datasets {
    PriceSeries prices;
    ArrivalProfile arrivals;
    CarCatalog cars;
    UserScenarioModel users;
    std::optional<AuxSeries> aux;
};

bool is_weekday(std::chrono::sys_days day) noexcept;
std::string format_date(std::chrono::sys_days day);

// Loaders. Every CSV carries a header row; extra columns are ignored.
PriceSeries load_prices(const std::filesystem::path& path);
ArrivalProfile load_arrivals(const std::filesystem::path& path);
CarCatalog load_car_catalog(const std::filesystem::path& path);
AuxSeries load_aux(const std::filesystem::path& path);

void write_prices(const PriceSeries& prices, const std::filesystem::path& path);
void write_arrivals(const ArrivalProfile& arrivals, const std::filesystem::path& path);
void write_car_catalog(const CarCatalog& catalog, const std::filesystem::path& path);
void write_aux(const AuxSeries& aux, const std::filesystem::path& path);

/// Reads prices.csv, arrivals.csv, cars.csv and the optional aux.csv and
/// scenario.json from a dataset directory.
Datasets load_dataset_dir(const std::filesystem::path& dir);
void write_dataset_dir(const Datasets& data, const std::filesystem::path& dir);

std::uint64_t sample_arrival_count(Stream& rng, double lambda);
/// Index into catalog.entries().
std::size_t sample_car_index(Stream& rng, const CarCatalog& catalog);
const CarProfile& sample_car(Stream& rng, const CarCatalog& catalog);
UserProfile sample_user(Stream& rng, const UserScenarioModel& model, const CarProfile& car);

ExogenousFrame frame_at(const PriceSeries& prices, const ArrivalProfile& arrivals, const AuxSeries* aux, int day,
                        int step, double dt_min);
ExogenousFrame frame_at(const Datasets& data, int day, int step, double dt_min);

struct SyntheticOptions {
    UserScenario scenario = UserScenario::Shopping;
    Traffic traffic = Traffic::Medium;
    CarRegion car_region = CarRegion::EU;
    PriceRegion price_region = PriceRegion::NL;
    std::uint64_t seed = 0;
    int days = 365;
    int start_year = 2023;
    double dt_min = 5.0;
    int episode_steps = 288;
    /// Also synthesize MOER and grid-demand series.
    bool with_aux = false;
};

/// Multiplier on the scenario's base daily arrivals.
double traffic_factor(Traffic t) noexcept;

/// Base expected arrivals per day at Medium traffic.
double base_daily_arrivals(UserScenario s) noexcept;

/// Relative arrival intensity at hour-of-day h (unnormalized).
double arrival_shape(UserScenario s, double hour) noexcept;

/// Reproducible synthetic datasets: noisy daily price curve, scenario-shaped
/// arrivals, a small regional car catalog and a scenario user model.
Datasets generate_synthetic_defaults(const SyntheticOptions& opts);

PriceSeries synthetic_prices(PriceRegion region, int days, int start_year, std::uint64_t seed);
ArrivalProfile synthetic_arrivals(UserScenario scenario, Traffic traffic, double dt_min, int episode_steps);
CarCatalog synthetic_car_catalog(CarRegion region);
UserScenarioModel synthetic_user_model(UserScenario scenario, double dt_min);

} // namespace chargesim
