#include "earlywarn/week.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

#include "earlywarn/error.hpp"

namespace earlywarn {
namespace {

using std::chrono::days;
using std::chrono::sys_days;

// Monday of ISO week 1: the week containing January 4th.
sys_days week_one_monday(int year) {
    const sys_days jan4 = std::chrono::year{year} / std::chrono::January / 4;
    const unsigned iso_dow = std::chrono::weekday{jan4}.iso_encoding();  // 1 = Monday
    return jan4 - days{iso_dow - 1};
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

}  // namespace

int weeks_in_iso_year(int year) {
    const auto span = week_one_monday(year + 1) - week_one_monday(year);
    return static_cast<int>(span.count() / 7);
}

IsoWeek IsoWeek::parse(std::string_view text) {
    auto fail = [&] { throw ParseError("malformed ISO week '" + std::string(text) + "' (expected YYYY-Www)"); };
    if (text.size() != 8 || text[4] != '-' || text[5] != 'W') fail();
    IsoWeek w;
    auto r1 = std::from_chars(text.data(), text.data() + 4, w.year);
    auto r2 = std::from_chars(text.data() + 6, text.data() + 8, w.week);
    if (r1.ec != std::errc{} || r1.ptr != text.data() + 4 || r2.ec != std::errc{} || r2.ptr != text.data() + 8) fail();
    if (w.week < 1 || w.week > weeks_in_iso_year(w.year)) fail();
    return w;
}

std::int64_t IsoWeek::serial() const {
    const sys_days monday = week_one_monday(year) + days{7 * (week - 1)};
    // 1970-01-01 was a Thursday; shift so that Mondays divide evenly.
    return floor_div(monday.time_since_epoch().count() + 3, 7);
}

IsoWeek IsoWeek::from_serial(std::int64_t week_serial) {
    const sys_days monday{days{week_serial * 7 - 3}};
    const sys_days thursday = monday + days{3};
    const int year = static_cast<int>(std::chrono::year_month_day{thursday}.year());
    const auto offset = (monday - week_one_monday(year)).count();
    return IsoWeek{year, static_cast<int>(offset / 7) + 1};
}

std::string IsoWeek::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-W%02d", year, week);
    return buf;
}

WeekAxis::WeekAxis(IsoWeek start, int length) : start_(start), length_(length) {
    if (length < 1) throw ValidationError("week axis length must be at least 1");
}

IsoWeek WeekAxis::at(int index) const { return IsoWeek::from_serial(start_.serial() + index); }

int WeekAxis::index_of(IsoWeek week) const {
    const std::int64_t offset = week.serial() - start_.serial();
    if (offset < 0 || offset >= length_) return -1;
    return static_cast<int>(offset);
}

WeekAxis WeekAxis::slice(int first, int length) const {
    if (first < 0 || length < 1 || first + length > length_)
        throw ValidationError("week axis slice out of range");
    return WeekAxis(at(first), length);
}

}  // namespace earlywarn
