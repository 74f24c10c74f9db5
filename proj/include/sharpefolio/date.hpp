#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace sharpefolio {

using Date = std::chrono::sys_days;

// Parses YYYY-MM-DD. Throws DataError on malformed or invalid dates.
Date parse_date(std::string_view text);
std::string format_date(Date d);

int year_of(Date d);
// Calendar quarter index 0..3.
int quarter_of(Date d);
Date add_years(Date d, int years);
Date make_date(int y, unsigned m, unsigned d);

}  // namespace sharpefolio
