#include "sharpefolio/synthetic.hpp"

#include <algorithm>

#include "sharpefolio/rng.hpp"

namespace sharpefolio {

std::vector<Date> weekdays(Date start, std::size_t count) {
    std::vector<Date> out;
    out.reserve(count);
    for (Date d = start; out.size() < count; d += std::chrono::days{1}) {
        const std::chrono::weekday wd{d};
        if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) out.push_back(d);
    }
    return out;
}

PricePanel synthetic_panel(const std::vector<SyntheticAsset>& assets, Date start, std::size_t days,
                           std::uint64_t seed) {
    const Rng root(seed);
    std::vector<Column> columns;
    for (std::size_t i = 0; i < assets.size(); ++i) {
        const SyntheticAsset& a = assets[i];
        Rng rng = root.split(a.name).split(i);
        Column c{a.name, {}};
        c.values.reserve(days);
        double price = a.start_price;
        for (std::size_t t = 0; t < days; ++t) {
            if (t > 0) price *= 1.0 + std::max(-0.95, a.daily_mean + a.daily_std * rng.normal());
            c.values.push_back(price);
        }
        columns.push_back(std::move(c));
    }
    return PricePanel(weekdays(start, days), std::move(columns));
}

PricePanel dominant_asset_panel(std::size_t days, std::uint64_t seed, Date start) {
    return synthetic_panel({{"A1", 0.002, 0.005}, {"A2", 0.0, 0.02}, {"A3", 0.0, 0.02}, {"A4", 0.0, 0.02}}, start,
                           days, seed);
}

}  // namespace sharpefolio
