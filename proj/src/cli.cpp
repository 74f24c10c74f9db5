#include "sharpefolio/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "sharpefolio/config.hpp"
#include "sharpefolio/error.hpp"

namespace sharpefolio {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::shared_ptr<spdlog::logger> logger() {
    if (auto l = spdlog::get("sharpefolio")) return l;
    auto l = spdlog::stderr_logger_mt("sharpefolio");
    l->set_pattern("[%l] %v");
    auto level = spdlog::level::info;
    if (const char* env = std::getenv("SHARPEFOLIO_LOG"); env && *env) {
        level = spdlog::level::from_str(env);
        // from_str maps unknown names to off.
        if (level == spdlog::level::off && std::string_view(env) != "off") {
            level = spdlog::level::info;
            l->warn("SHARPEFOLIO_LOG='{}' is not a log level, using info", env);
        }
    }
    l->set_level(level);
    return l;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
    if (!f) throw DataError(fmt::format("failed writing {}", path.string()));
}

std::optional<Date> parse_zoom(const std::string& s) {
    if (s.empty() || s == "none") return std::nullopt;
    try {
        return parse_date(s);
    } catch (const Error&) {
        throw ConfigError(fmt::format("--zoom '{}' is not a YYYY-MM-DD date", s));
    }
}

void print_problems(std::ostream& err, const Error& e) {
    std::istringstream lines(e.what());
    for (std::string line; std::getline(lines, line);) err << "error: " << line << "\n";
}

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::size_t jobs = 1;
    std::string zoom;
    std::string baseline;
};

RunConfig load_with_overrides(const Overrides& o) {
    RunConfig c = load_run_config(o.config);
    if (o.seed) c.seed = o.seed;
    return c;
}

int cmd_validate(const Overrides& o, std::ostream& out) {
    RunConfig c = load_with_overrides(o);
    check_runnable(c);
    out << c.to_json().dump(2) << "\n";
    return 0;
}

struct StrategyOutcome {
    std::string name;
    StrategyKind kind;
    fs::path dir;  // relative to the output root
    BacktestReport report;
    std::optional<ReplicateSummary> replicates;
};

int cmd_backtest(const Overrides& o, std::ostream& out) {
    auto log = logger();
    RunConfig c = load_with_overrides(o);
    check_runnable(c);
    const fs::path root = o.out.empty() ? fs::path(c.output_dir) : fs::path(o.out);
    const std::optional<Date> zoom = parse_zoom(!o.zoom.empty() ? o.zoom
                                                : c.zoom_start     ? format_date(*c.zoom_start)
                                                                   : std::string(kDefaultZoom));

    log->info("loading data for '{}'", c.name);
    const LoadedData data = load_data(c);
    const WalkForwardSchedule schedule = make_schedule(c);
    const auto strategies = build_strategies(c, data);
    log->info("panel {} .. {}, {} rows, {} test segments", format_date(data.panel.dates().front()),
              format_date(data.panel.dates().back()), data.panel.rows(), schedule.segments.size());

    BacktestOptions options;
    options.cost_rate = c.cost_rate;
    options.rolling_window = c.rolling_window;
    options.seed = c.seed.value_or(0);
    options.jobs = o.jobs;
    options.progress = [log](const std::string& msg) { log->info("{}", msg); };

    const bool single = strategies.size() == 1;
    std::vector<StrategyOutcome> outcomes;
    for (const auto& s : strategies) {
        StrategyOutcome r{s.name, s.kind, single ? fs::path() : fs::path(s.name), {}, std::nullopt};
        const bool neural = s.neural.has_value();
        if (neural && c.replicate.runs >= 2) {
            ReplicateConfig rc;
            rc.runs = c.replicate.runs;
            rc.base_seed = options.seed;
            rc.reference_summary = c.replicate.reference;
            rc.reference_sample = c.replicate.reference_sample;
            log->info("{}: {} replicate runs", s.name, rc.runs);
            ReplicateSummary sum = replicate_runs(s, data.panel, schedule, options, rc);
            r.report = sum.runs.front();
            r.report.name = s.name;
            r.replicates = std::move(sum);
        } else {
            log->info("{}: running", s.name);
            r.report = run_strategy(s, data.panel, schedule, options);
        }
        outcomes.push_back(std::move(r));
    }

    fs::create_directories(root);
    for (const auto& r : outcomes) {
        const fs::path dir = root / r.dir;
        if (!r.replicates) {
            write_report(r.report, dir);
            continue;
        }
        fs::create_directories(dir);
        for (std::size_t i = 0; i < r.replicates->runs.size(); ++i)
            write_report(r.replicates->runs[i], dir / fmt::format("run_{:03d}", i + 1));
        write_text(dir / "replicates.json", r.replicates->to_json());
    }
    if (!single) {
        std::vector<BacktestReport> reports;
        for (const auto& r : outcomes) reports.push_back(r.report);
        const std::string baseline = o.baseline.empty() ? reports.back().name : o.baseline;
        const ComparisonReport cmp = compare(reports, baseline, zoom);
        write_text(root / "comparison.json", cmp.to_json());
        write_text(root / "metrics.csv", cmp.metrics_csv());
    }

    // Manifest: everything needed to reproduce the directory.
    Json m;
    m["software"] = "sharpefolio";
    m["version"] = SHARPEFOLIO_VERSION;
    m["config"] = c.config_path.generic_string();
    m["config_sha256"] = sha256_file(c.config_path);
    m["seed"] = c.seed ? Json(*c.seed) : Json(nullptr);
    Json digests = Json::array();
    for (const auto& d : data.digests) digests.push_back({{"path", d.path}, {"sha256", d.sha256}});
    m["data"] = digests;
    m["resolved_config"] = c.to_json();
    Json strat = Json::array();
    for (const auto& r : outcomes) {
        Json e = {{"name", r.name},
                  {"kind", std::string(to_string(r.kind))},
                  {"dir", r.dir.empty() ? "." : r.dir.generic_string()},
                  {"phases", r.report.phases}};
        if (r.replicates) {
            e["replicates"] = r.replicates->runs.size();
            e["seeds"] = r.replicates->seeds;
        }
        strat.push_back(e);
    }
    m["strategies"] = strat;
    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file() && entry.path().filename() != "manifest.json")
            files.push_back(fs::relative(entry.path(), root).generic_string());
    std::sort(files.begin(), files.end());
    m["outputs"] = files;
    write_text(root / "manifest.json", m.dump(2) + "\n");

    for (const auto& r : outcomes) {
        const auto& t = r.report.metrics;
        out << fmt::format("{}: sharpe {} net return {} ({} days)\n", r.name,
                           t.sharpe ? fmt::format("{:.4f}", *t.sharpe) : "undefined",
                           t.cumulative_return ? fmt::format("{:.4f}", *t.cumulative_return) : "undefined",
                           r.report.size());
    }
    out << "wrote " << root.generic_string() << "\n";
    return 0;
}

std::string dir_name(const fs::path& p) {
    fs::path n = p.lexically_normal();
    if (n.filename().empty()) n = n.parent_path();
    return n.filename().string();
}

int cmd_compare(const std::vector<std::string>& dirs, const Overrides& o, std::ostream& out) {
    if (dirs.size() < 2) throw ConfigError("compare needs at least two report directories");
    std::vector<BacktestReport> reports;
    std::set<std::string> names;
    for (const auto& d : dirs) {
        const std::string name = dir_name(d);
        if (!names.insert(name).second) throw ConfigError(fmt::format("two report directories are named '{}'", name));
        reports.push_back(load_report(d, name));
    }
    const std::string baseline = o.baseline.empty() ? reports.front().name : o.baseline;
    const ComparisonReport cmp = compare(reports, baseline, parse_zoom(o.zoom));
    if (o.out.empty()) {
        out << cmp.to_json();
        return 0;
    }
    fs::create_directories(o.out);
    write_text(fs::path(o.out) / "comparison.json", cmp.to_json());
    write_text(fs::path(o.out) / "metrics.csv", cmp.metrics_csv());
    out << "wrote " << fs::path(o.out).generic_string() << "\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sharpe-optimized neural portfolio allocation: backtests and comparisons", "sharpefolio"};
    app.set_version_flag("--version", std::string("sharpefolio ") + SHARPEFOLIO_VERSION);
    app.require_subcommand(1);

    Overrides o;
    std::uint64_t seed = 0;
    std::vector<std::string> dirs;

    auto* validate = app.add_subcommand("validate", "Check a run config and print the resolved settings");
    validate->add_option("--config", o.config, "Run config (TOML)")->required();
    auto* v_seed = validate->add_option("--seed", seed, "Seed, overrides [run] seed");

    auto* backtest = app.add_subcommand("backtest", "Run the configured strategies and write reports");
    backtest->add_option("--config", o.config, "Run config (TOML)")->required();
    backtest->add_option("--out", o.out, "Output directory, overrides [run] output_dir");
    auto* b_seed = backtest->add_option("--seed", seed, "Seed, overrides [run] seed");
    backtest->add_option("--jobs", o.jobs, "Worker threads (0 = all cores)")->capture_default_str();
    backtest->add_option("--zoom", o.zoom, fmt::format("Zoom start for comparisons (default {}, 'none' to skip)", kDefaultZoom));
    backtest->add_option("--baseline", o.baseline, "Baseline strategy for comparisons (default: last listed)");

    auto* cmp = app.add_subcommand("compare", "Compare report directories against a baseline");
    cmp->add_option("dirs", dirs, "Report directories; each is named by its directory name")->required();
    cmp->add_option("--baseline", o.baseline, "Baseline report name (default: the first directory)");
    cmp->add_option("--zoom", o.zoom, "Zoom start date (YYYY-MM-DD)");
    cmp->add_option("--out", o.out, "Write comparison.json and metrics.csv here instead of printing");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }
    if ((v_seed->count() > 0) || (b_seed->count() > 0)) o.seed = seed;
    if (o.jobs == 0) o.jobs = std::max(1u, std::thread::hardware_concurrency());

    try {
        if (validate->parsed()) return cmd_validate(o, out);
        if (backtest->parsed()) return cmd_backtest(o, out);
        return cmd_compare(dirs, o, out);
    } catch (const Error& e) {
        print_problems(err, e);
        return static_cast<int>(e.kind());
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorKind::data);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorKind::data);
    }
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace sharpefolio
