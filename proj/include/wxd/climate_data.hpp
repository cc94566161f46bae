#pragma once

#include "wxd/date.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wxd {

struct Location {
    std::string name;
    double latitude = 0.0;   // decimal degrees, [-90, 90]
    double longitude = 0.0;  // decimal degrees, [-180, 180]

    /// Throws DataError when coordinates are out of range.
    void validate() const;
};

/// Station coordinates used for the POWER point queries.
Location toronto();
Location chicago();

enum class Variable { temperature_c, precipitation_mm };

std::string_view to_string(Variable v);
Variable variable_from_string(std::string_view s);

struct Observation {
    Date date;
    double value = 0.0;
};

/// A dated sequence of daily values for one variable at one location.
/// Dates are strictly increasing; precipitation is non-negative. Gaps are
/// allowed and reported by gap_count().
class DailySeries {
public:
    DailySeries() = default;
    DailySeries(Location location, Variable variable, std::vector<Observation> entries,
                std::size_t dropped_count = 0);

    const Location& location() const { return location_; }
    Variable variable() const { return variable_; }
    const std::vector<Observation>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const Observation& operator[](std::size_t i) const { return entries_[i]; }

    /// Provider sentinels removed while loading.
    std::size_t dropped_count() const { return dropped_count_; }

    /// Number of calendar days missing between the first and last entry.
    std::size_t gap_count() const;

    std::vector<double> values() const;
    std::vector<Date> dates() const;

    /// Entries with start <= date <= end.
    DailySeries slice(Date start, Date end) const;

    /// Value on a date, if present.
    std::optional<double> at(Date d) const;

    bool operator==(const DailySeries& other) const;

private:
    Location location_;
    Variable variable_ = Variable::temperature_c;
    std::vector<Observation> entries_;
    std::size_t dropped_count_ = 0;
};

/// Provider missing-value marker; values at or below it are dropped on load.
inline constexpr double kMissingSentinel = -999.0;

/// Read a `date,value` CSV (header row optional). Sentinel rows are dropped
/// and counted; duplicate or decreasing dates and unparseable rows throw
/// DataError.
DailySeries load_csv(const std::filesystem::path& path, Variable variable,
                     Location location = {});

void write_csv(const DailySeries& series, const std::filesystem::path& path);

/// Fraction of calendar days in [start, end] with no observation.
double missing_fraction(const DailySeries& series, Date start, Date end);

/// Throws DataError when more than `max_fraction` of [start, end] is missing.
void require_coverage(const DailySeries& series, Date start, Date end,
                      double max_fraction = 0.01);

struct StatsSummary {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double std_dev = 0.0;                   // sample, n-1 denominator
    std::optional<double> skewness;         // empty when std_dev == 0
    std::optional<double> excess_kurtosis;  // empty when std_dev == 0
};

StatsSummary summary_stats(const DailySeries& series);
StatsSummary summary_stats(const std::vector<double>& values);

/// Quantile with linear interpolation between order statistics (h = (n-1)p).
double empirical_quantile(std::vector<double> values, double prob);

enum class Season { winter, spring, summer, fall, full_year };

std::string_view to_string(Season s);
Season season_from_string(std::string_view s);
bool in_season(Season s, int month);

/// Subseries whose dates fall in the season's months (winter = Dec, Jan, Feb).
DailySeries seasonal_split(const DailySeries& series, Season season);

/// Default wet-day threshold in mm.
inline constexpr double kWetDayThreshold = 0.01;

/// Mean over years of the number of days in `month` with value >= threshold.
/// Only years with at least one observation in that month are counted.
double rainy_day_rate(const DailySeries& series, int month,
                      double threshold = kWetDayThreshold);

}  // namespace wxd
