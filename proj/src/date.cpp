#include "sharpefolio/date.hpp"

#include <charconv>
#include <cstdio>

#include "sharpefolio/error.hpp"

namespace sharpefolio {

using namespace std::chrono;

namespace {

template <typename T>
bool parse_field(std::string_view s, T& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

Date parse_date(std::string_view text) {
    // Tolerate a trailing time component ("2020-01-02 00:00:00").
    if (text.size() > 10 && (text[10] == ' ' || text[10] == 'T')) text = text.substr(0, 10);
    if (text.size() != 10 || text[4] != '-' || text[7] != '-')
        throw DataError("invalid ISO-8601 date '" + std::string(text) + "'");
    int y = 0;
    unsigned m = 0, d = 0;
    if (!parse_field(text.substr(0, 4), y) || !parse_field(text.substr(5, 2), m) ||
        !parse_field(text.substr(8, 2), d))
        throw DataError("invalid ISO-8601 date '" + std::string(text) + "'");
    year_month_day ymd{year{y}, month{m}, day{d}};
    if (!ymd.ok()) throw DataError("invalid calendar date '" + std::string(text) + "'");
    return sys_days{ymd};
}

std::string format_date(Date d) {
    const year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

int year_of(Date d) { return static_cast<int>(year_month_day{d}.year()); }

int quarter_of(Date d) { return (static_cast<int>(static_cast<unsigned>(year_month_day{d}.month())) - 1) / 3; }

Date add_years(Date d, int years) {
    year_month_day ymd{d};
    ymd += std::chrono::years{years};
    if (!ymd.ok()) ymd = ymd.year() / ymd.month() / last;  // Feb 29 -> Feb 28
    return sys_days{ymd};
}

Date make_date(int y, unsigned m, unsigned d) {
    const year_month_day ymd{year{y}, month{m}, day{d}};
    if (!ymd.ok()) throw DataError("invalid calendar date");
    return sys_days{ymd};
}

}  // namespace sharpefolio
