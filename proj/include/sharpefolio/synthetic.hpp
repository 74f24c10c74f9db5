#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sharpefolio/date.hpp"
#include "sharpefolio/market_data.hpp"

namespace sharpefolio {

// Deterministic generated data for fixtures and tests.

struct SyntheticAsset {
    std::string name;
    double daily_mean = 0.0;
    double daily_std = 0.01;
    double start_price = 100.0;
};

// Monday-to-Friday dates starting on the first weekday on or after `start`.
std::vector<Date> weekdays(Date start, std::size_t count);

// Prices compounding i.i.d. normal daily returns (clamped above -0.95).
PricePanel synthetic_panel(const std::vector<SyntheticAsset>& assets, Date start, std::size_t days,
                           std::uint64_t seed);

// Four assets: the first with daily mean 0.002 and std 0.005, the rest with
// mean 0 and std 0.02.
PricePanel dominant_asset_panel(std::size_t days, std::uint64_t seed, Date start = make_date(2000, 1, 3));

}  // namespace sharpefolio
