#include "wxd/date.hpp"
#include "wxd/error.hpp"

#include <doctest.h>

using wxd::Date;

TEST_CASE("epoch and round trips") {
    CHECK(Date::from_ymd(1970, 1, 1).days() == 0);
    CHECK(Date::from_ymd(2000, 3, 1).days() == 11017);
    for (std::int32_t d = -800000; d < 800000; d += 997) {
        const Date x = Date::from_days(d);
        CHECK(Date::from_ymd(x.year(), x.month(), x.day()) == x);
    }
}

TEST_CASE("parsing and formatting") {
    const Date d = Date::parse("2023-12-31");
    CHECK(d.year() == 2023);
    CHECK(d.month() == 12);
    CHECK(d.day() == 31);
    CHECK(Date::parse("20231231") == d);
    CHECK(d.iso() == "2023-12-31");
    CHECK(d.compact() == "20231231");
    CHECK_THROWS_AS(Date::parse("2023-02-30"), wxd::DataError);
    CHECK_THROWS_AS(Date::parse("2023/12/31"), wxd::DataError);
    CHECK_THROWS_AS(Date::parse(""), wxd::DataError);
}

TEST_CASE("calendar rules") {
    CHECK(wxd::is_leap_year(2000));
    CHECK_FALSE(wxd::is_leap_year(1900));
    CHECK(wxd::is_leap_year(2024));
    CHECK(wxd::days_in_month(2023, 2) == 28);
    CHECK(wxd::days_in_month(2024, 2) == 29);
    CHECK(Date::from_ymd(2024, 3, 1) - Date::from_ymd(2024, 2, 1) == 29);
    CHECK(Date::from_ymd(2023, 12, 31) + 1 == Date::from_ymd(2024, 1, 1));
}
