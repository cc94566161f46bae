#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace wxd {

/// Proleptic Gregorian calendar date stored as days since 1970-01-01.
class Date {
public:
    constexpr Date() = default;
    static Date from_ymd(int year, int month, int day);
    static constexpr Date from_days(std::int32_t days) { return Date(days); }

    /// Accepts YYYY-MM-DD and YYYYMMDD. Throws DataError on anything else.
    static Date parse(std::string_view text);

    constexpr std::int32_t days() const { return days_; }
    int year() const;
    int month() const;
    int day() const;

    std::string iso() const;      // YYYY-MM-DD
    std::string compact() const;  // YYYYMMDD

    constexpr Date operator+(std::int32_t n) const { return Date(days_ + n); }
    constexpr Date operator-(std::int32_t n) const { return Date(days_ - n); }
    constexpr std::int32_t operator-(Date other) const { return days_ - other.days_; }
    constexpr auto operator<=>(const Date&) const = default;

private:
    constexpr explicit Date(std::int32_t days) : days_(days) {}
    std::int32_t days_ = 0;
};

bool is_leap_year(int year);
int days_in_month(int year, int month);

}  // namespace wxd
