// Writes the bundled fixture CSVs. Output is a pure function of the code, so
// rerunning reproduces data/fixtures byte for byte.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sharpefolio/rng.hpp"
#include "sharpefolio/synthetic.hpp"

using namespace sharpefolio;
namespace fs = std::filesystem;

namespace {

void write(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
    if (!f) throw std::runtime_error("failed writing " + path.string());
    std::cout << "wrote " << path.string() << "\n";
}

std::string panel_csv(const PricePanel& p) {
    std::string s = "date";
    for (const auto& c : p.assets()) s += "," + c.name;
    s += "\n";
    for (std::size_t t = 0; t < p.rows(); ++t) {
        s += format_date(p.dates()[t]);
        for (const auto& c : p.assets()) s += fmt::format(",{:.6f}", c.values[t]);
        s += "\n";
    }
    return s;
}

// Hand-picked prices; the balanced portfolio gains on exactly one of the
// four return days.
const char* kFiveDay =
    "date,VTI,AGG,DBC,VIX\n"
    "2020-01-06,100,50,20,15\n"
    "2020-01-07,101,50.5,19.8,14\n"
    "2020-01-08,99,50,20,16\n"
    "2020-01-09,100,50.25,20.2,15.5\n"
    "2020-01-10,102,50.5,19.9,15\n";

// First-of-month macro series: a price index and a rate in percent.
std::string macro_csv(Date start, int months, std::uint64_t seed) {
    Rng rng = Rng(seed).split("macro");
    std::string s = "date,CPI,UNRATE\n";
    double cpi = 200.0, unrate = 5.0;
    const auto ymd = std::chrono::year_month_day(start);
    for (int m = 0; m < months; ++m) {
        const auto ym = std::chrono::year_month(ymd.year(), ymd.month()) + std::chrono::months(m);
        const Date d = std::chrono::sys_days(ym / std::chrono::day(1));
        s += fmt::format("{},{:.3f},{:.2f}\n", format_date(d), cpi, unrate);
        cpi *= 1.0 + 0.002 + 0.002 * rng.normal();
        unrate = std::clamp(unrate + 0.15 * rng.normal(), 2.0, 12.0);
    }
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regenerate the bundled fixture data"};
    std::string out = "data/fixtures";
    app.add_option("--out", out, "Output directory")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    try {
        fs::create_directories(out);
        const fs::path dir(out);
        write(dir / "five_day.csv", kFiveDay);
        // 2008 .. 2012 daily panel in the universe's shape: stock, bond,
        // commodity and volatility index.
        write(dir / "assets.csv", panel_csv(synthetic_panel({{"VTI", 0.0004, 0.012, 60.0},
                                                             {"AGG", 0.0001, 0.003, 100.0},
                                                             {"DBC", 0.0, 0.014, 25.0},
                                                             {"VIX", 0.0, 0.05, 20.0}},
                                                            make_date(2008, 1, 1), 1305, 2024)));
        write(dir / "macro.csv", macro_csv(make_date(2007, 1, 1), 72, 2024));
        // Long-history proxies for pretraining, from 2004.
        write(dir / "proxies.csv", panel_csv(synthetic_panel({{"WILL5000", 0.0003, 0.011, 11000.0},
                                                              {"BAMLCC0A0CMTRIV", 0.0002, 0.004, 1500.0},
                                                              {"GOLD", 0.0003, 0.011, 400.0}},
                                                             make_date(2004, 1, 1), 2350, 2025)));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
