#include "wxd/climate_data.hpp"

#include "wxd/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <stdexcept>
#include <sstream>

namespace wxd {

void Location::validate() const {
    if (!(latitude >= -90.0 && latitude <= 90.0)) {
        throw DataError("latitude out of range: " + std::to_string(latitude));
    }
    if (!(longitude >= -180.0 && longitude <= 180.0)) {
        throw DataError("longitude out of range: " + std::to_string(longitude));
    }
}

Location toronto() { return {"Toronto", 43.6523, -79.3839}; }
Location chicago() { return {"Chicago", 41.4047, -89.6420}; }

std::string_view to_string(Variable v) {
    return v == Variable::temperature_c ? "temperature" : "precipitation";
}

Variable variable_from_string(std::string_view s) {
    if (s == "temperature" || s == "temperature_c" || s == "T2M") return Variable::temperature_c;
    if (s == "precipitation" || s == "precipitation_mm" || s == "PRECTOTCORR") {
        return Variable::precipitation_mm;
    }
    throw DataError("unknown variable '" + std::string(s) + "'");
}

DailySeries::DailySeries(Location location, Variable variable, std::vector<Observation> entries,
                         std::size_t dropped_count)
    : location_(std::move(location)),
      variable_(variable),
      entries_(std::move(entries)),
      dropped_count_(dropped_count) {
    location_.validate();
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (!std::isfinite(e.value)) {
            throw DataError("non-finite value on " + e.date.iso());
        }
        if (variable_ == Variable::precipitation_mm && e.value < 0.0) {
            throw DataError("negative precipitation on " + e.date.iso());
        }
        if (i > 0) {
            if (e.date == entries_[i - 1].date) throw DataError("duplicate date " + e.date.iso());
            if (e.date < entries_[i - 1].date) throw DataError("non-monotone dates at " + e.date.iso());
        }
    }
}

std::size_t DailySeries::gap_count() const {
    if (entries_.size() < 2) return 0;
    const auto span = static_cast<std::size_t>(entries_.back().date - entries_.front().date) + 1;
    return span - entries_.size();
}

std::vector<double> DailySeries::values() const {
    std::vector<double> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.value);
    return out;
}

std::vector<Date> DailySeries::dates() const {
    std::vector<Date> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.date);
    return out;
}

DailySeries DailySeries::slice(Date start, Date end) const {
    auto lo = std::lower_bound(entries_.begin(), entries_.end(), start,
                               [](const Observation& o, Date d) { return o.date < d; });
    auto hi = std::upper_bound(entries_.begin(), entries_.end(), end,
                               [](Date d, const Observation& o) { return d < o.date; });
    if (hi < lo) hi = lo;
    return DailySeries(location_, variable_, std::vector<Observation>(lo, hi));
}

std::optional<double> DailySeries::at(Date d) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), d,
                               [](const Observation& o, Date x) { return o.date < x; });
    if (it == entries_.end() || it->date != d) return std::nullopt;
    return it->value;
}

bool DailySeries::operator==(const DailySeries& other) const {
    if (variable_ != other.variable_ || entries_.size() != other.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].date != other.entries_[i].date ||
            entries_[i].value != other.entries_[i].value) {
            return false;
        }
    }
    return true;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

DailySeries load_csv(const std::filesystem::path& path, Variable variable, Location location) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());

    std::vector<Observation> rows;
    std::size_t dropped = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = trim(line);
        if (view.empty() || view.front() == '#') continue;
        const auto comma = view.find(',');
        if (comma == std::string_view::npos) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 'date,value'");
        }
        const std::string_view date_text = trim(view.substr(0, comma));
        const std::string_view value_text = trim(view.substr(comma + 1));
        if (lineno == 1 && date_text == "date") continue;

        Date date;
        try {
            date = Date::parse(date_text);
        } catch (const DataError& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(value_text.data(), value_text.data() + value_text.size(), value);
        if (ec != std::errc{} || ptr != value_text.data() + value_text.size()) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": unparseable value '" +
                            std::string(value_text) + "'");
        }
        if (value <= kMissingSentinel) {
            ++dropped;
            continue;
        }
        if (!rows.empty()) {
            if (date == rows.back().date) {
                throw DataError(path.string() + ":" + std::to_string(lineno) + ": duplicate date " + date.iso());
            }
            if (date < rows.back().date) {
                throw DataError(path.string() + ":" + std::to_string(lineno) + ": non-monotone dates at " +
                                date.iso());
            }
        }
        rows.push_back({date, value});
    }
    return DailySeries(std::move(location), variable, std::move(rows), dropped);
}

void write_csv(const DailySeries& series, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "date,value\n";
    out << std::setprecision(17);
    for (const auto& e : series.entries()) out << e.date.iso() << ',' << e.value << '\n';
    if (!out) throw DataError("write failed for " + path.string());
}

double missing_fraction(const DailySeries& series, Date start, Date end) {
    if (end < start) throw DataError("invalid range");
    const double span = static_cast<double>(end - start) + 1.0;
    return 1.0 - static_cast<double>(series.slice(start, end).size()) / span;
}

void require_coverage(const DailySeries& series, Date start, Date end, double max_fraction) {
    const double missing = missing_fraction(series, start, end);
    if (missing > max_fraction) {
        std::ostringstream msg;
        msg << "series missing " << 100.0 * missing << "% of " << start.iso() << ".." << end.iso()
            << " (limit " << 100.0 * max_fraction << "%)";
        throw DataError(msg.str());
    }
}

StatsSummary summary_stats(const std::vector<double>& x) {
    if (x.size() < 2) throw DataError("summary statistics need at least 2 values");
    const double n = static_cast<double>(x.size());
    StatsSummary s;
    s.min = *std::min_element(x.begin(), x.end());
    s.max = *std::max_element(x.begin(), x.end());
    double sum = 0.0;
    for (double v : x) sum += v;
    s.mean = sum / n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - s.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    s.std_dev = std::sqrt(m2 / (n - 1.0));
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if (m2 > 0.0) {
        s.skewness = m3 / std::pow(m2, 1.5);
        s.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    }
    return s;
}

double empirical_quantile(std::vector<double> values, double prob) {
    if (values.empty()) throw DataError("quantile of an empty sample");
    if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("quantile probability outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

StatsSummary summary_stats(const DailySeries& series) { return summary_stats(series.values()); }

std::string_view to_string(Season s) {
    switch (s) {
        case Season::winter: return "winter";
        case Season::spring: return "spring";
        case Season::summer: return "summer";
        case Season::fall: return "fall";
        case Season::full_year: return "full_year";
    }
    return "?";
}

Season season_from_string(std::string_view s) {
    if (s == "winter") return Season::winter;
    if (s == "spring") return Season::spring;
    if (s == "summer") return Season::summer;
    if (s == "fall") return Season::fall;
    if (s == "full_year") return Season::full_year;
    throw DataError("unknown season '" + std::string(s) + "'");
}

bool in_season(Season s, int month) {
    switch (s) {
        case Season::winter: return month == 12 || month == 1 || month == 2;
        case Season::spring: return month >= 3 && month <= 5;
        case Season::summer: return month >= 6 && month <= 8;
        case Season::fall: return month >= 9 && month <= 11;
        case Season::full_year: return true;
    }
    return false;
}

DailySeries seasonal_split(const DailySeries& series, Season season) {
    if (season == Season::full_year) return series;
    std::vector<Observation> out;
    for (const auto& e : series.entries()) {
        if (in_season(season, e.date.month())) out.push_back(e);
    }
    return DailySeries(series.location(), series.variable(), std::move(out));
}

double rainy_day_rate(const DailySeries& series, int month, double threshold) {
    if (month < 1 || month > 12) throw DataError("month out of range");
    std::map<int, int> wet_by_year;
    for (const auto& e : series.entries()) {
        if (e.date.month() != month) continue;
        auto& count = wet_by_year[e.date.year()];
        if (e.value >= threshold) ++count;
    }
    if (wet_by_year.empty()) throw DataError("no data for month " + std::to_string(month));
    double total = 0.0;
    for (const auto& [year, count] : wet_by_year) total += count;
    return total / static_cast<double>(wet_by_year.size());
}

}  // namespace wxd
