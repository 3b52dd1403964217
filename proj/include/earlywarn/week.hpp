#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace earlywarn {

/// ISO-8601 calendar week, written `YYYY-Www` (e.g. `2010-W07`).
struct IsoWeek {
    int year = 1970;
    int week = 1;

    /// Parses `YYYY-Www`. Throws ParseError on malformed text or a week
    /// number the year does not have.
    static IsoWeek parse(std::string_view text);

    /// Week containing the given serial day (days since 1970-01-01).
    static IsoWeek from_serial(std::int64_t week_serial);

    /// Dense week counter: the Monday of this week divided by seven.
    std::int64_t serial() const;

    std::string to_string() const;

    auto operator<=>(const IsoWeek&) const = default;
};

/// 52 or 53.
int weeks_in_iso_year(int year);

/// Consecutive weekly time axis. Index 0 is `start`.
class WeekAxis {
public:
    WeekAxis() = default;
    WeekAxis(IsoWeek start, int length);

    IsoWeek start() const { return start_; }
    int length() const { return length_; }

    IsoWeek at(int index) const;
    /// Index of `week` on this axis, or -1 when it falls outside.
    int index_of(IsoWeek week) const;

    /// The sub-axis covering [first, first + length).
    WeekAxis slice(int first, int length) const;

    bool operator==(const WeekAxis& other) const = default;

private:
    IsoWeek start_{};
    int length_ = 0;
};

}  // namespace earlywarn
