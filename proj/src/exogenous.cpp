#include "chargesim/exogenous.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace chargesim {

namespace fs = std::filesystem;
using std::chrono::sys_days;

namespace {

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

/// Minimal header-driven CSV reader. Blank lines and '#' comments are skipped.
class CsvTable {
public:
    explicit CsvTable(const fs::path& path) : path_(path) {
        std::ifstream in(path);
        if (!in) throw DataError(DataError::Kind::Io, "cannot open " + path.string());
        std::string line;
        std::size_t lineno = 0;
        bool header_seen = false;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string t = trim(line);
            if (t.empty() || t[0] == '#') continue;
            if (!header_seen) {
                auto cols = split_csv(t);
                for (std::size_t i = 0; i < cols.size(); ++i) columns_[cols[i]] = i;
                header_seen = true;
                continue;
            }
            rows_.push_back({lineno, split_csv(t)});
        }
        if (!header_seen) throw DataError(DataError::Kind::Empty, path.string() + ": missing header row");
    }

    bool has(const std::string& col) const { return columns_.count(col) > 0; }

    std::size_t require(const std::string& col) const {
        auto it = columns_.find(col);
        if (it == columns_.end())
            throw DataError(DataError::Kind::MissingColumn, path_.string() + ": missing column '" + col + "'");
        return it->second;
    }

    struct Row {
        std::size_t line;
        std::vector<std::string> fields;
    };
    const std::vector<Row>& rows() const { return rows_; }

    const std::string& field(const Row& row, std::size_t col) const {
        if (col >= row.fields.size())
            throw DataError(DataError::Kind::Unparseable, path_.string() + ": too few fields", row.line);
        return row.fields[col];
    }

    double number(const Row& row, std::size_t col) const {
        const std::string& s = field(row, col);
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
            throw DataError(DataError::Kind::Unparseable, path_.string() + ": bad number '" + s + "'", row.line);
        return v;
    }

    const fs::path& path() const { return path_; }

private:
    fs::path path_;
    std::unordered_map<std::string, std::size_t> columns_;
    std::vector<Row> rows_;
};

/// Hours since the epoch for "YYYY-MM-DD HH:MM[:SS]" (a 'T' separator also works).
std::optional<std::int64_t> parse_hour_stamp(const std::string& s) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0;
    char sep = 0;
    if (std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d", &y, &mo, &d, &sep, &h, &mi) != 6) return std::nullopt;
    if (sep != ' ' && sep != 'T') return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h < 0 || h > 23 || mi != 0) return std::nullopt;
    return static_cast<std::int64_t>(sys_days{ymd}.time_since_epoch().count()) * 24 + h;
}

std::string format_hour_stamp(sys_days start, std::size_t hour_index) {
    const sys_days day = start + std::chrono::days{static_cast<long>(hour_index / 24)};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s %02zu:00", format_date(day).c_str(), hour_index % 24);
    return buf;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(DataError::Kind::Io, "cannot write " + path.string());
    return out;
}

/// Parse the timestamp column of an hourly table, checking continuity.
/// Returns the first day and the hour count.
sys_days read_hourly_index(const CsvTable& table, std::size_t ts_col) {
    const auto& rows = table.rows();
    if (rows.empty()) throw DataError(DataError::Kind::Empty, table.path().string() + ": no data rows");
    std::int64_t prev = 0;
    sys_days start{};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto stamp = parse_hour_stamp(table.field(rows[i], ts_col));
        if (!stamp)
            throw DataError(DataError::Kind::Unparseable, table.path().string() + ": bad timestamp", rows[i].line);
        if (i == 0) {
            if (*stamp % 24 != 0)
                throw DataError(DataError::Kind::PartialDay, table.path().string() + ": series must start at 00:00",
                                rows[i].line);
            start = sys_days{std::chrono::days{*stamp / 24}};
        } else if (*stamp == prev || *stamp < prev) {
            throw DataError(DataError::Kind::Duplicate,
                            table.path().string() + ": duplicate or decreasing timestamp", rows[i].line);
        } else if (*stamp != prev + 1) {
            throw DataError(DataError::Kind::GapAt, table.path().string() + ": missing hour before this row",
                            rows[i].line);
        }
        prev = *stamp;
    }
    if (rows.size() % 24 != 0)
        throw DataError(DataError::Kind::PartialDay, table.path().string() + ": series does not cover whole days");
    return start;
}

double gaussian_bump(double h, double mu, double sigma) {
    const double z = (h - mu) / sigma;
    return std::exp(-0.5 * z * z);
}

} // namespace

// ---------------------------------------------------------------------------
// Enums

const char* to_string(UserScenario s) noexcept {
    switch (s) {
    case UserScenario::Highway: return "Highway";
    case UserScenario::Residential: return "Residential";
    case UserScenario::Work: return "Work";
    case UserScenario::Shopping: return "Shopping";
    }
    return "?";
}

const char* to_string(Traffic t) noexcept {
    switch (t) {
    case Traffic::Low: return "Low";
    case Traffic::Medium: return "Medium";
    case Traffic::High: return "High";
    }
    return "?";
}

const char* to_string(CarRegion r) noexcept {
    switch (r) {
    case CarRegion::EU: return "EU";
    case CarRegion::US: return "US";
    case CarRegion::World: return "World";
    }
    return "?";
}

const char* to_string(PriceRegion r) noexcept {
    switch (r) {
    case PriceRegion::NL: return "NL";
    case PriceRegion::FR: return "FR";
    case PriceRegion::DE: return "DE";
    }
    return "?";
}

UserScenario user_scenario_from_string(const std::string& s) {
    for (auto v : {UserScenario::Highway, UserScenario::Residential, UserScenario::Work, UserScenario::Shopping})
        if (s == to_string(v)) return v;
    throw std::invalid_argument("unknown user scenario '" + s + "'");
}

Traffic traffic_from_string(const std::string& s) {
    for (auto v : {Traffic::Low, Traffic::Medium, Traffic::High})
        if (s == to_string(v)) return v;
    throw std::invalid_argument("unknown traffic level '" + s + "'");
}

CarRegion car_region_from_string(const std::string& s) {
    for (auto v : {CarRegion::EU, CarRegion::US, CarRegion::World})
        if (s == to_string(v)) return v;
    throw std::invalid_argument("unknown car region '" + s + "'");
}

PriceRegion price_region_from_string(const std::string& s) {
    for (auto v : {PriceRegion::NL, PriceRegion::FR, PriceRegion::DE})
        if (s == to_string(v)) return v;
    throw std::invalid_argument("unknown price region '" + s + "'");
}

// ---------------------------------------------------------------------------
// Types

CarCatalog::CarCatalog(std::vector<CarCatalogEntry> entries, std::string region)
    : entries_(std::move(entries)), region_(std::move(region)) {
    if (entries_.empty()) throw DataError(DataError::Kind::Empty, "car catalog is empty");
    double total = 0.0;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (!(e.profile.capacity_kwh > 0.0))
            throw DataError(DataError::Kind::InvalidCapacity, "car '" + e.name + "': capacity must be positive");
        if (!(e.profile.tau > 0.0 && e.profile.tau < 1.0))
            throw DataError(DataError::Kind::InvalidTau, "car '" + e.name + "': tau outside (0, 1)");
        if (!(e.profile.r_max_ac_kw >= 0.0) || !(e.profile.r_max_dc_kw >= 0.0))
            throw DataError(DataError::Kind::InvalidValue, "car '" + e.name + "': negative charge rate");
        if (!(e.weight >= 0.0) || !std::isfinite(e.weight))
            throw DataError(DataError::Kind::NegativeWeight, "car '" + e.name + "': negative weight");
        total += e.weight;
    }
    if (!(total > 0.0)) throw DataError(DataError::Kind::DegenerateWeights, "car catalog weights sum to zero");
    double acc = 0.0;
    cumulative_.reserve(entries_.size());
    for (const auto& e : entries_) {
        acc += e.weight;
        cumulative_.push_back(acc / total);
    }
    cumulative_.back() = 1.0;
}

void UserScenarioModel::validate() const {
    auto ordered = [](auto r) { return r.first <= r.second; };
    const bool ok = ordered(stay_steps_range) && stay_steps_range.first >= 1 && ordered(requested_fraction_range) &&
                    requested_fraction_range.first >= 0.0 && requested_fraction_range.second <= 1.0 &&
                    ordered(soc_arrival_range) && soc_arrival_range.first >= 0.0 && soc_arrival_range.second <= 1.0 &&
                    p_charge_sensitive >= 0.0 && p_charge_sensitive <= 1.0;
    if (!ok) throw DataError(DataError::Kind::InvalidValue, "user scenario model has invalid ranges");
}

bool is_weekday(sys_days day) noexcept {
    const std::chrono::weekday wd{day};
    return wd != std::chrono::Saturday && wd != std::chrono::Sunday;
}

std::string format_date(sys_days day) {
    const std::chrono::year_month_day ymd{day};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

// ---------------------------------------------------------------------------
// Loaders and writers

PriceSeries load_prices(const fs::path& path) {
    CsvTable t(path);
    const auto ts = t.require("timestamp");
    const auto buy = t.require("buy_eur_per_kwh");
    const bool has_sell = t.has("sell_grid_eur_per_kwh");
    const auto sell = has_sell ? t.require("sell_grid_eur_per_kwh") : 0;

    PriceSeries p;
    p.start_date = read_hourly_index(t, ts);
    p.region = path.stem().string();
    for (const auto& row : t.rows()) {
        p.buy.push_back(t.number(row, buy));
        p.sell_grid.push_back(has_sell ? t.number(row, sell) : p.buy.back());
    }
    return p;
}

ArrivalProfile load_arrivals(const fs::path& path) {
    CsvTable t(path);
    const auto step = t.require("step_of_day");
    const auto lambda = t.require("lambda");
    ArrivalProfile a;
    a.scenario = path.stem().string();
    for (const auto& row : t.rows()) {
        const double s = t.number(row, step);
        if (s != static_cast<double>(a.rates_per_step.size()))
            throw DataError(DataError::Kind::GapAt, path.string() + ": step_of_day must count up from 0", row.line);
        const double l = t.number(row, lambda);
        if (l < 0.0) throw DataError(DataError::Kind::InvalidValue, path.string() + ": negative rate", row.line);
        a.rates_per_step.push_back(l);
    }
    if (a.rates_per_step.empty()) throw DataError(DataError::Kind::Empty, path.string() + ": no data rows");
    return a;
}

CarCatalog load_car_catalog(const fs::path& path) {
    CsvTable t(path);
    const auto name = t.require("name");
    const auto cap = t.require("capacity_kwh");
    const auto ac = t.require("r_max_ac_kw");
    const auto dc = t.require("r_max_dc_kw");
    const auto tau = t.require("tau");
    const auto weight = t.require("weight");
    std::vector<CarCatalogEntry> entries;
    for (const auto& row : t.rows()) {
        CarCatalogEntry e;
        e.name = t.field(row, name);
        e.profile.capacity_kwh = t.number(row, cap);
        e.profile.r_max_ac_kw = t.number(row, ac);
        e.profile.r_max_dc_kw = t.number(row, dc);
        e.profile.tau = t.number(row, tau);
        e.weight = t.number(row, weight);
        // Per-row checks here so errors carry the line number.
        if (!(e.profile.capacity_kwh > 0.0))
            throw DataError(DataError::Kind::InvalidCapacity, path.string() + ": capacity must be positive", row.line);
        if (!(e.profile.tau > 0.0 && e.profile.tau < 1.0))
            throw DataError(DataError::Kind::InvalidTau, path.string() + ": tau outside (0, 1)", row.line);
        if (e.weight < 0.0)
            throw DataError(DataError::Kind::NegativeWeight, path.string() + ": negative weight", row.line);
        if (e.profile.r_max_ac_kw < 0.0 || e.profile.r_max_dc_kw < 0.0)
            throw DataError(DataError::Kind::InvalidValue, path.string() + ": negative charge rate", row.line);
        entries.push_back(std::move(e));
    }
    return CarCatalog(std::move(entries), path.stem().string());
}

AuxSeries load_aux(const fs::path& path) {
    CsvTable t(path);
    const auto ts = t.require("timestamp");
    AuxSeries aux;
    aux.start_date = read_hourly_index(t, ts);
    if (t.has("moer_kg_per_kwh")) {
        const auto c = t.require("moer_kg_per_kwh");
        std::vector<double> v;
        for (const auto& row : t.rows()) v.push_back(t.number(row, c));
        aux.moer_kg_per_kwh = std::move(v);
    }
    if (t.has("grid_demand_kwh")) {
        const auto c = t.require("grid_demand_kwh");
        std::vector<double> v;
        for (const auto& row : t.rows()) v.push_back(t.number(row, c));
        aux.grid_demand_kwh = std::move(v);
    }
    return aux;
}

void write_prices(const PriceSeries& prices, const fs::path& path) {
    auto out = open_out(path);
    out << "timestamp,buy_eur_per_kwh,sell_grid_eur_per_kwh\n";
    for (std::size_t i = 0; i < prices.buy.size(); ++i)
        out << format_hour_stamp(prices.start_date, i) << ',' << num(prices.buy[i]) << ','
            << num(prices.sell_grid[i]) << '\n';
}

void write_arrivals(const ArrivalProfile& arrivals, const fs::path& path) {
    auto out = open_out(path);
    out << "step_of_day,lambda\n";
    for (std::size_t i = 0; i < arrivals.rates_per_step.size(); ++i)
        out << i << ',' << num(arrivals.rates_per_step[i]) << '\n';
}

void write_car_catalog(const CarCatalog& catalog, const fs::path& path) {
    auto out = open_out(path);
    out << "name,capacity_kwh,r_max_ac_kw,r_max_dc_kw,tau,weight\n";
    for (const auto& e : catalog.entries())
        out << e.name << ',' << num(e.profile.capacity_kwh) << ',' << num(e.profile.r_max_ac_kw) << ','
            << num(e.profile.r_max_dc_kw) << ',' << num(e.profile.tau) << ',' << num(e.weight) << '\n';
}

void write_aux(const AuxSeries& aux, const fs::path& path) {
    const std::size_t n = aux.moer_kg_per_kwh ? aux.moer_kg_per_kwh->size()
                          : aux.grid_demand_kwh ? aux.grid_demand_kwh->size()
                                                : 0;
    auto out = open_out(path);
    out << "timestamp";
    if (aux.moer_kg_per_kwh) out << ",moer_kg_per_kwh";
    if (aux.grid_demand_kwh) out << ",grid_demand_kwh";
    out << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        out << format_hour_stamp(aux.start_date, i);
        if (aux.moer_kg_per_kwh) out << ',' << num(aux.moer_kg_per_kwh->at(i));
        if (aux.grid_demand_kwh) out << ',' << num(aux.grid_demand_kwh->at(i));
        out << '\n';
    }
}

Datasets load_dataset_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError(DataError::Kind::Io, "not a dataset directory: " + dir.string());
    Datasets d;
    d.prices = load_prices(dir / "prices.csv");
    d.arrivals = load_arrivals(dir / "arrivals.csv");
    d.cars = load_car_catalog(dir / "cars.csv");
    if (fs::exists(dir / "aux.csv")) d.aux = load_aux(dir / "aux.csv");

    const fs::path scenario_file = dir / "scenario.json";
    if (fs::exists(scenario_file)) {
        std::ifstream in(scenario_file);
        nlohmann::json j;
        try {
            in >> j;
            auto& u = d.users;
            u.scenario = user_scenario_from_string(j.value("scenario", std::string("Shopping")));
            u = synthetic_user_model(u.scenario, j.value("dt_min", 5.0));
            if (j.contains("stay_steps_range")) u.stay_steps_range = j["stay_steps_range"].get<std::pair<int, int>>();
            if (j.contains("requested_fraction_range"))
                u.requested_fraction_range = j["requested_fraction_range"].get<std::pair<double, double>>();
            if (j.contains("soc_arrival_range"))
                u.soc_arrival_range = j["soc_arrival_range"].get<std::pair<double, double>>();
            u.p_charge_sensitive = j.value("p_charge_sensitive", u.p_charge_sensitive);
            d.arrivals.weekday_scale = j.value("weekday_scale", 1.0);
            d.arrivals.weekend_scale = j.value("weekend_scale", 1.0);
            if (j.contains("price_region")) d.prices.region = j["price_region"].get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw DataError(DataError::Kind::Unparseable, scenario_file.string() + ": " + e.what());
        } catch (const std::invalid_argument& e) {
            throw DataError(DataError::Kind::InvalidValue, scenario_file.string() + ": " + e.what());
        }
    } else {
        d.users = synthetic_user_model(UserScenario::Shopping, 5.0);
    }
    d.users.validate();
    return d;
}

void write_dataset_dir(const Datasets& data, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError(DataError::Kind::Io, "cannot create " + dir.string());
    write_prices(data.prices, dir / "prices.csv");
    write_arrivals(data.arrivals, dir / "arrivals.csv");
    write_car_catalog(data.cars, dir / "cars.csv");
    if (data.aux) write_aux(*data.aux, dir / "aux.csv");

    nlohmann::json j;
    j["scenario"] = to_string(data.users.scenario);
    j["stay_steps_range"] = data.users.stay_steps_range;
    j["requested_fraction_range"] = data.users.requested_fraction_range;
    j["soc_arrival_range"] = data.users.soc_arrival_range;
    j["p_charge_sensitive"] = data.users.p_charge_sensitive;
    j["weekday_scale"] = data.arrivals.weekday_scale;
    j["weekend_scale"] = data.arrivals.weekend_scale;
    j["price_region"] = data.prices.region;
    auto out = open_out(dir / "scenario.json");
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Sampling

std::uint64_t sample_arrival_count(Stream& rng, double lambda) { return sample_poisson(rng, lambda); }

std::size_t sample_car_index(Stream& rng, const CarCatalog& catalog) {
    const auto& cdf = catalog.cumulative();
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

const CarProfile& sample_car(Stream& rng, const CarCatalog& catalog) {
    return catalog.entries()[sample_car_index(rng, catalog)].profile;
}

UserProfile sample_user(Stream& rng, const UserScenarioModel& model, const CarProfile& car) {
    UserProfile u;
    u.stay_steps = static_cast<int>(rng.uniform_int(model.stay_steps_range.first, model.stay_steps_range.second));
    u.soc_arrival = rng.uniform(model.soc_arrival_range.first, model.soc_arrival_range.second);
    const double fraction = rng.uniform(model.requested_fraction_range.first, model.requested_fraction_range.second);
    u.energy_requested_kwh = fraction * car.capacity_kwh * (1.0 - u.soc_arrival);
    u.preference = rng.bernoulli(model.p_charge_sensitive) ? Preference::ChargeSensitive : Preference::TimeSensitive;
    return u;
}

// ---------------------------------------------------------------------------
// Frames

ExogenousFrame frame_at(const PriceSeries& prices, const ArrivalProfile& arrivals, const AuxSeries* aux, int day,
                        int step, double dt_min) {
    if (day < 0 || static_cast<std::size_t>(day) >= prices.days())
        throw DataError(DataError::Kind::DayOutOfRange, "day " + std::to_string(day) + " outside price data");
    if (step < 0) throw std::invalid_argument("negative step");
    const auto hour = static_cast<std::size_t>(std::floor(step * dt_min / 60.0));
    const std::size_t idx = static_cast<std::size_t>(day) * 24 + hour;
    if (idx >= prices.buy.size())
        throw DataError(DataError::Kind::DayOutOfRange, "step " + std::to_string(step) + " runs past the price data");

    ExogenousFrame f;
    f.p_buy = prices.buy[idx];
    f.p_sell_grid = prices.sell_grid[idx];
    f.day_index = day;
    const sys_days date = prices.start_date + std::chrono::days{day + static_cast<int>(hour / 24)};
    f.is_weekday = is_weekday(date);
    const auto steps_per_day = static_cast<int>(std::lround(1440.0 / dt_min));
    f.step_of_day = steps_per_day > 0 ? step % steps_per_day : step;
    if (!arrivals.rates_per_step.empty()) {
        const double base = arrivals.rates_per_step[static_cast<std::size_t>(step) % arrivals.rates_per_step.size()];
        f.lambda_arrivals = base * (f.is_weekday ? arrivals.weekday_scale : arrivals.weekend_scale);
    }
    if (aux) {
        // Aux series are aligned by calendar hour, not by index.
        const auto offset = (prices.start_date - aux->start_date).count() * 24;
        const auto aux_idx = static_cast<std::int64_t>(idx) + offset;
        auto pick = [&](const std::optional<std::vector<double>>& s) -> std::optional<double> {
            if (!s || aux_idx < 0 || static_cast<std::size_t>(aux_idx) >= s->size()) return std::nullopt;
            return (*s)[static_cast<std::size_t>(aux_idx)];
        };
        f.moer_kg_per_kwh = pick(aux->moer_kg_per_kwh);
        f.grid_demand_kwh = pick(aux->grid_demand_kwh);
    }
    return f;
}

ExogenousFrame frame_at(const Datasets& data, int day, int step, double dt_min) {
    return frame_at(data.prices, data.arrivals, data.aux ? &*data.aux : nullptr, day, step, dt_min);
}

// ---------------------------------------------------------------------------
// Synthetic defaults. Shapes follow the scenario descriptions; the numbers
// are illustrative and not calibrated to any real market or fleet.

double traffic_factor(Traffic t) noexcept {
    switch (t) {
    case Traffic::Low: return 0.5;
    case Traffic::Medium: return 1.0;
    case Traffic::High: return 2.0;
    }
    return 1.0;
}

double base_daily_arrivals(UserScenario s) noexcept {
    switch (s) {
    case UserScenario::Highway: return 120.0;
    case UserScenario::Residential: return 30.0;
    case UserScenario::Work: return 40.0;
    case UserScenario::Shopping: return 80.0;
    }
    return 80.0;
}

double arrival_shape(UserScenario s, double h) noexcept {
    switch (s) {
    case UserScenario::Highway:
        return 0.5 + 0.5 * gaussian_bump(h, 14.0, 5.0);
    case UserScenario::Residential:
        return 0.05 + gaussian_bump(h, 18.5, 2.0) + 0.3 * gaussian_bump(h, 7.0, 1.0);
    case UserScenario::Work:
        return 0.02 + gaussian_bump(h, 8.5, 0.75) + 0.25 * gaussian_bump(h, 13.0, 1.0);
    case UserScenario::Shopping:
        return 0.02 + gaussian_bump(h, 13.0, 2.5) + 0.6 * gaussian_bump(h, 17.5, 1.5);
    }
    return 1.0;
}

PriceSeries synthetic_prices(PriceRegion region, int days, int start_year, std::uint64_t seed) {
    double base = 0.11;
    double evening = 0.05;
    switch (region) {
    case PriceRegion::NL: base = 0.11; evening = 0.05; break;
    case PriceRegion::FR: base = 0.09; evening = 0.03; break;
    case PriceRegion::DE: base = 0.12; evening = 0.06; break;
    }
    PriceSeries p;
    p.region = std::string("synthetic-") + to_string(region);
    p.start_date = sys_days{std::chrono::year{start_year} / std::chrono::January / 1};
    Stream rng = Stream::keyed(seed, static_cast<std::uint64_t>(region), 0, Phase::Synthetic);
    p.buy.reserve(static_cast<std::size_t>(days) * 24);
    for (int d = 0; d < days; ++d) {
        const double seasonal = 0.02 * std::cos(2.0 * std::numbers::pi * d / 365.0);
        for (int h = 0; h < 24; ++h) {
            const double daily = 0.04 * std::sin(2.0 * std::numbers::pi * (h - 9) / 24.0) +
                                 evening * gaussian_bump(h, 19.0, 1.5);
            p.buy.push_back(base + seasonal + daily + 0.01 * rng.normal());
        }
    }
    p.sell_grid = p.buy;
    return p;
}

ArrivalProfile synthetic_arrivals(UserScenario scenario, Traffic traffic, double dt_min, int episode_steps) {
    ArrivalProfile a;
    a.scenario = std::string(to_string(scenario)) + "-" + to_string(traffic);
    const auto steps_per_day = static_cast<int>(std::lround(1440.0 / dt_min));
    std::vector<double> day(static_cast<std::size_t>(steps_per_day));
    double total = 0.0;
    for (int s = 0; s < steps_per_day; ++s) {
        const double mid_hour = (s + 0.5) * dt_min / 60.0;
        day[static_cast<std::size_t>(s)] = arrival_shape(scenario, mid_hour);
        total += day[static_cast<std::size_t>(s)];
    }
    const double daily = base_daily_arrivals(scenario) * traffic_factor(traffic);
    for (auto& v : day) v *= daily / total;
    a.rates_per_step.resize(static_cast<std::size_t>(episode_steps));
    for (int s = 0; s < episode_steps; ++s)
        a.rates_per_step[static_cast<std::size_t>(s)] = day[static_cast<std::size_t>(s % steps_per_day)];

    switch (scenario) {
    case UserScenario::Highway: a.weekday_scale = 1.0; a.weekend_scale = 1.1; break;
    case UserScenario::Residential: a.weekday_scale = 0.9; a.weekend_scale = 1.2; break;
    case UserScenario::Work: a.weekday_scale = 1.0; a.weekend_scale = 0.25; break;
    case UserScenario::Shopping: a.weekday_scale = 0.9; a.weekend_scale = 1.3; break;
    }
    return a;
}

CarCatalog synthetic_car_catalog(CarRegion region) {
    // name, capacity, AC kW, DC kW, tau, weight
    auto car = [](const char* name, double cap, double ac, double dc, double tau, double w) {
        return CarCatalogEntry{name, CarProfile{cap, ac, dc, tau}, w};
    };
    switch (region) {
    case CarRegion::EU:
        return CarCatalog({car("compact_hatch", 42.0, 7.4, 50.0, 0.8, 0.30),
                           car("midsize_crossover", 64.0, 11.0, 100.0, 0.75, 0.30),
                           car("long_range_sedan", 78.0, 11.0, 170.0, 0.8, 0.25),
                           car("premium_fast", 93.0, 22.0, 270.0, 0.7, 0.15)},
                          "synthetic-EU");
    case CarRegion::US:
        return CarCatalog({car("compact", 60.0, 7.2, 55.0, 0.8, 0.15), car("crossover", 75.0, 11.5, 150.0, 0.75, 0.35),
                           car("long_range_sedan", 82.0, 11.5, 250.0, 0.75, 0.30),
                           car("pickup", 130.0, 19.2, 150.0, 0.8, 0.20)},
                          "synthetic-US");
    case CarRegion::World:
        return CarCatalog({car("city_car", 30.0, 6.6, 40.0, 0.85, 0.30), car("compact_hatch", 42.0, 7.4, 50.0, 0.8, 0.25),
                           car("crossover", 70.0, 11.0, 120.0, 0.75, 0.30),
                           car("long_range_sedan", 82.0, 11.5, 250.0, 0.75, 0.15)},
                          "synthetic-World");
    }
    return synthetic_car_catalog(CarRegion::EU);
}

UserScenarioModel synthetic_user_model(UserScenario scenario, double dt_min) {
    auto steps = [dt_min](double hours) { return std::max(1, static_cast<int>(std::ceil(hours * 60.0 / dt_min - 1e-9))); };
    UserScenarioModel m;
    m.scenario = scenario;
    switch (scenario) {
    case UserScenario::Highway:
        m.stay_steps_range = {steps(0.25), steps(1.0)};
        m.requested_fraction_range = {0.6, 1.0};
        m.soc_arrival_range = {0.05, 0.35};
        m.p_charge_sensitive = 0.7;
        break;
    case UserScenario::Residential:
        m.stay_steps_range = {steps(2.0), steps(10.0)};
        m.requested_fraction_range = {0.4, 1.0};
        m.soc_arrival_range = {0.2, 0.6};
        m.p_charge_sensitive = 0.2;
        break;
    case UserScenario::Work:
        m.stay_steps_range = {steps(6.0), steps(9.0)};
        m.requested_fraction_range = {0.3, 1.0};
        m.soc_arrival_range = {0.3, 0.7};
        m.p_charge_sensitive = 0.1;
        break;
    case UserScenario::Shopping:
        m.stay_steps_range = {steps(0.5), steps(2.5)};
        m.requested_fraction_range = {0.3, 1.0};
        m.soc_arrival_range = {0.15, 0.6};
        m.p_charge_sensitive = 0.3;
        break;
    }
    return m;
}

Datasets generate_synthetic_defaults(const SyntheticOptions& opts) {
    Datasets d;
    d.prices = synthetic_prices(opts.price_region, opts.days, opts.start_year, opts.seed);
    d.arrivals = synthetic_arrivals(opts.scenario, opts.traffic, opts.dt_min, opts.episode_steps);
    d.cars = synthetic_car_catalog(opts.car_region);
    d.users = synthetic_user_model(opts.scenario, opts.dt_min);
    if (opts.with_aux) {
        AuxSeries aux;
        aux.start_date = d.prices.start_date;
        Stream rng = Stream::keyed(opts.seed, 100, 0, Phase::Synthetic);
        std::vector<double> moer, demand;
        for (std::size_t i = 0; i < d.prices.buy.size(); ++i) {
            const double h = static_cast<double>(i % 24);
            // Carbon intensity dips at solar noon; demand peaks in the evening.
            moer.push_back(0.35 - 0.12 * gaussian_bump(h, 13.0, 3.0) + 0.02 * rng.normal());
            demand.push_back(20.0 * std::sin(2.0 * std::numbers::pi * (h - 12.0) / 24.0) + 5.0 * rng.normal());
        }
        aux.moer_kg_per_kwh = std::move(moer);
        aux.grid_demand_kwh = std::move(demand);
        d.aux = std::move(aux);
    }
    return d;
}

} // namespace chargesim
