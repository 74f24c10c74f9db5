#include "sharpefolio/backtest_engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "sharpefolio/error.hpp"
#include "sharpefolio/parallel.hpp"
#include "sharpefolio/rng.hpp"

namespace sharpefolio {

namespace {

constexpr std::chrono::days kOneDay{1};

std::string fmt_double(double x) { return fmt::format("{:.17g}", x); }

}  // namespace

// ---- schedule ----

void WalkForwardSchedule::validate() const {
    if (segments.empty()) throw ConfigError("walk-forward schedule has no segments");
    for (std::size_t k = 0; k < segments.size(); ++k) {
        const Segment& s = segments[k];
        if (s.train_start != segments.front().train_start)
            throw ConfigError("walk-forward segments must share the data start");
        if (!(s.train_start <= s.train_end && s.train_end < s.test_start && s.test_start <= s.test_end))
            throw ConfigError(fmt::format("segment {} has inconsistent dates", k + 1));
        if (k > 0 && segments[k - 1].test_end + kOneDay != s.test_start)
            throw ConfigError(fmt::format("segment {} does not start the day after segment {} ends", k + 1, k));
    }
}

WalkForwardSchedule make_schedule(Date data_start, Date first_test, Date end, int retrain_years) {
    if (retrain_years < 1) throw ConfigError("retrain interval must be at least one year");
    if (!(data_start < first_test)) throw ConfigError("schedule: data start must precede the first test date");
    if (!(first_test < end))
        throw ConfigError(fmt::format("schedule: empty test range {} .. {}", format_date(first_test), format_date(end)));
    WalkForwardSchedule s;
    for (int k = 0;; ++k) {
        const Date start = add_years(first_test, k * retrain_years);
        if (start > end) break;
        const Date stop = std::min(add_years(first_test, (k + 1) * retrain_years) - kOneDay, end);
        s.segments.push_back({data_start, start - kOneDay, start, stop});
    }
    s.validate();
    return s;
}

std::string_view to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::lstm: return "lstm";
        case StrategyKind::transformer: return "transformer";
        case StrategyKind::mvo: return "mvo";
        case StrategyKind::balanced: return "balanced";
        case StrategyKind::fixed: return "fixed";
    }
    return "?";
}

StrategyKind parse_strategy_kind(std::string_view s) {
    for (StrategyKind k : {StrategyKind::lstm, StrategyKind::transformer, StrategyKind::mvo, StrategyKind::balanced,
                           StrategyKind::fixed})
        if (to_string(k) == s) return k;
    throw ConfigError(fmt::format("unknown strategy '{}' (expected lstm, transformer, mvo, balanced or fixed)", s));
}

// ---- accounting ----

std::vector<Date> decision_dates(const PricePanel& panel, Date first, Date last) {
    std::vector<Date> out;
    const auto& d = panel.dates();
    for (std::size_t p = 0; p + 1 < d.size(); ++p)
        if (d[p] >= first && d[p] <= last) out.push_back(d[p]);
    return out;
}

std::string BacktestReport::returns_csv() const {
    std::string out = "date,gross,net,cost,turnover\n";
    for (std::size_t t = 0; t < dates.size(); ++t)
        out += fmt::format("{},{},{},{},{}\n", format_date(dates[t]), fmt_double(gross[t]), fmt_double(net[t]),
                           fmt_double(cost[t]), fmt_double(turnover[t]));
    return out;
}

std::string BacktestReport::rolling_csv() const {
    std::string out = "date,rolling_sharpe\n";
    for (std::size_t k = 0; k < rolling.size(); ++k) {
        out += format_date(rolling.dates[k]) + ",";
        if (rolling.values[k]) out += fmt_double(*rolling.values[k]);
        out += "\n";
    }
    return out;
}

namespace {

RollingSharpeSeries rolling_or_empty(const std::vector<double>& net, const std::vector<Date>& dates,
                                     std::size_t window) {
    if (net.size() < window) {
        RollingSharpeSeries empty;
        empty.window = window;
        return empty;
    }
    return rolling_sharpe(net, dates, window);
}

}  // namespace

BacktestReport assemble_report(std::string name, AllocationSeries allocations, const PricePanel& panel,
                               double cost_rate, std::size_t rolling_window) {
    if (!(cost_rate >= 0.0)) throw ConfigError("cost_rate must be >= 0");
    if (rolling_window < 2) throw ConfigError("rolling window must be >= 2");
    allocations.validate();
    const std::size_t n = panel.assets().size();
    if (allocations.assets.empty()) allocations.assets = panel.asset_names();
    if (allocations.assets != panel.asset_names()) throw DataError("allocation assets do not match the panel");
    if (allocations.size() == 0) throw DataError("allocation series is empty");

    const ReturnPanel returns = simple_returns(panel);
    const auto& pd = panel.dates();
    BacktestReport r;
    r.name = std::move(name);
    r.dates = allocations.dates;
    for (std::size_t t = 0; t < r.dates.size(); ++t) {
        const auto it = std::lower_bound(pd.begin(), pd.end(), r.dates[t]);
        if (it == pd.end() || *it != r.dates[t])
            throw DataError(fmt::format("calendar mismatch: {} is not a panel date", format_date(r.dates[t])));
        if (t > 0 && !(r.dates[t - 1] < r.dates[t])) throw DataError("allocation dates must be increasing");
        const auto p = static_cast<std::size_t>(it - pd.begin());
        if (p + 1 >= pd.size())
            throw DataError(fmt::format("no next-day return after {}", format_date(r.dates[t])));
        const auto& w = allocations.weights[t];
        if (w.size() != n) throw DataError("allocation row width != asset count");
        double g = 0.0, turn = 0.0;
        for (std::size_t i = 0; i < n; ++i) g += w[i] * returns.values(p, i);
        if (t > 0)
            for (std::size_t i = 0; i < n; ++i) turn += std::abs(w[i] - allocations.weights[t - 1][i]);
        const double c = cost_rate * turn;
        r.gross.push_back(g);
        r.turnover.push_back(turn);
        r.cost.push_back(c);
        r.net.push_back(g - c);
    }
    r.allocations = std::move(allocations);
    r.metrics = compute_metrics(r.net);
    r.rolling = rolling_or_empty(r.net, r.dates, rolling_window);
    return r;
}

// ---- neural walk-forward ----

namespace {

void report_progress(const BacktestOptions& o, const std::string& msg) {
    if (o.progress) o.progress(msg);
}

// Z-scores every column with the mean and population std of rows [0, rows).
std::shared_ptr<const Tensor> normalized(const Tensor& f, std::size_t rows) {
    auto out = std::make_shared<Tensor>(f);
    const std::size_t cols = f.cols();
    for (std::size_t j = 0; j < cols; ++j) {
        double m = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < rows; ++i) m += f(i, j);
        m /= static_cast<double>(rows);
        for (std::size_t i = 0; i < rows; ++i) ss += (f(i, j) - m) * (f(i, j) - m);
        double sd = std::sqrt(ss / static_cast<double>(rows));
        if (!(sd > 1e-12)) sd = 1.0;
        for (std::size_t i = 0; i < f.rows(); ++i) (*out)(i, j) = (f(i, j) - m) / sd;
    }
    return out;
}

std::uint64_t derived_seed(std::uint64_t seed, std::string_view label, std::size_t index) {
    return Rng(seed).split(label).split(static_cast<std::uint64_t>(index)).next_u64();
}

struct NeuralOutcome {
    AllocationSeries allocations;
    std::vector<SegmentLog> segments;
    std::optional<TrainLog> pretrain_log;
    std::vector<std::string> phases;
};

NeuralOutcome run_neural(const StrategySpec& strategy, const PricePanel& panel, const WalkForwardSchedule& schedule,
                         const BacktestOptions& options, const std::vector<Date>& dates) {
    if (!strategy.neural) throw ConfigError(fmt::format("strategy '{}' has no model settings", strategy.name));
    const NeuralSpec& spec = *strategy.neural;
    const bool is_lstm = std::holds_alternative<LstmAllocatorConfig>(spec.model);
    if (is_lstm != (strategy.kind == StrategyKind::lstm))
        throw ConfigError(fmt::format("strategy '{}' model settings do not match its kind", strategy.name));
    const auto model = make_allocator(spec.model);
    const std::size_t lookback = model->lookback();

    const auto features = std::make_shared<const Tensor>(build_feature_matrix(panel, spec.features));
    const auto targets = std::make_shared<const Tensor>(simple_returns(panel).values);
    if (features->cols() != model->n_features())
        throw DataError(fmt::format("model expects {} input features, the panel provides {}", model->n_features(),
                                    features->cols()));
    if (targets->cols() != model->n_assets())
        throw DataError(fmt::format("model expects {} assets, the panel has {}", model->n_assets(), targets->cols()));

    const auto& pd = panel.dates();
    auto index_of = [&](Date d) { return static_cast<std::size_t>(std::lower_bound(pd.begin(), pd.end(), d) - pd.begin()); };

    NeuralOutcome out;
    std::optional<ParameterSet> seed_params;
    if (spec.pretrain) {
        const PricePanel& proxies = spec.pretrain->panel;
        if (!spec.features.exogenous.empty())
            throw ConfigError("pretraining panels carry no exogenous features; disable them for pretrain runs");
        if (proxies.rows() == 0 || !(proxies.dates().front() < schedule.test_start()))
            throw DataError("pretraining data has no dates before the first test date");
        const PricePanel pre = proxies.with_asset_order(panel.asset_names())
                                   .between(proxies.dates().front(), schedule.test_start() - kOneDay);
        WindowedDataset data = panel_windows(pre, spec.features, lookback);
        if (spec.normalize) {
            const std::size_t used = data.starts().back() + lookback;
            data = WindowedDataset(normalized(data.feature_matrix(), used), data.target_ptr(), lookback, data.starts());
        }
        TrainConfig tc = spec.pretrain->train;
        tc.seed = derived_seed(options.seed, "pretrain", 0);
        report_progress(options, fmt::format("{}: pretraining on {} windows ({} .. {})", strategy.name, data.size(),
                                             format_date(pre.dates().front()), format_date(pre.dates().back())));
        TrainResult phase1 = train(*model, data, tc);
        out.pretrain_log = std::move(phase1.log);
        seed_params = std::move(phase1.params);
        out.phases = {"pretrain", "finetune"};
    } else {
        out.phases = {"train"};
    }

    const std::size_t n_seg = schedule.segments.size();
    std::vector<std::vector<std::size_t>> test_rows(n_seg);
    for (Date d : dates) {
        const std::size_t p = index_of(d);
        if (p < lookback)
            throw DataError(fmt::format("decision date {} has {} days of history, the model needs {}", format_date(d),
                                        p, lookback));
        for (std::size_t k = 0; k < n_seg; ++k)
            if (d >= schedule.segments[k].test_start && d <= schedule.segments[k].test_end) test_rows[k].push_back(p);
    }

    std::vector<SegmentLog> logs(n_seg);
    std::vector<Tensor> weights(n_seg);
    parallel_for(n_seg, options.jobs, [&](std::size_t k) {
        const Segment& seg = schedule.segments[k];
        logs[k].segment = seg;
        logs[k].test_days = test_rows[k].size();
        if (test_rows[k].empty()) return;
        // Window s targets return row s + lookback, realized on panel date s + lookback + 1.
        std::vector<std::size_t> train_starts;
        for (std::size_t s = 0; s + lookback < targets->rows(); ++s)
            if (pd[s + lookback + 1] <= seg.train_end) train_starts.push_back(s);
        if (train_starts.empty())
            throw DataError(fmt::format("segment {} has no training windows before {}", k + 1,
                                        format_date(seg.test_start)));
        auto seg_features = features;
        if (spec.normalize) seg_features = normalized(*features, train_starts.back() + lookback);
        const WindowedDataset train_set(seg_features, targets, lookback, train_starts);
        std::vector<std::size_t> test_starts;
        for (std::size_t p : test_rows[k]) test_starts.push_back(p - lookback);
        const WindowedDataset test_set(seg_features, targets, lookback, test_starts);

        TrainConfig tc = spec.train;
        tc.seed = derived_seed(options.seed, "segment", k);
        report_progress(options, fmt::format("{}: segment {}/{} training on {} windows, testing {} .. {}",
                                             strategy.name, k + 1, n_seg, train_set.size(),
                                             format_date(seg.test_start), format_date(seg.test_end)));
        TrainResult result = seed_params ? fine_tune(*model, train_set, tc, *seed_params) : train(*model, train_set, tc);
        logs[k].train_samples = train_set.size();
        logs[k].log = std::move(result.log);
        weights[k] = predict_all(*model, result.params, test_set);
        logs[k].params = std::move(result.params);
    });

    out.allocations.assets = panel.asset_names();
    for (std::size_t k = 0; k < n_seg; ++k) {
        for (std::size_t i = 0; i < test_rows[k].size(); ++i) {
            out.allocations.dates.push_back(pd[test_rows[k][i]]);
            std::vector<double> row(weights[k].cols());
            for (std::size_t j = 0; j < row.size(); ++j) row[j] = weights[k](i, j);
            out.allocations.weights.push_back(std::move(row));
        }
        if (logs[k].test_days > 0) out.segments.push_back(std::move(logs[k]));
    }
    return out;
}

}  // namespace

BacktestReport run_strategy(const StrategySpec& strategy, const PricePanel& panel,
                            const WalkForwardSchedule& schedule, const BacktestOptions& options) {
    schedule.validate();
    const auto dates = decision_dates(panel, schedule.test_start(), schedule.test_end());
    if (dates.empty())
        throw DataError(fmt::format("panel has no trading days with a next-day return in {} .. {}",
                                    format_date(schedule.test_start()), format_date(schedule.test_end())));
    const auto names = panel.asset_names();
    NeuralOutcome neural;
    AllocationSeries alloc;
    switch (strategy.kind) {
        case StrategyKind::balanced: alloc = balanced_weights(names.size(), dates, names); break;
        case StrategyKind::fixed:
            if (strategy.fixed_weights.size() != names.size())
                throw ConfigError(fmt::format("fixed weights have {} entries for {} assets",
                                              strategy.fixed_weights.size(), names.size()));
            alloc = fixed_weights(strategy.fixed_weights, dates, names);
            break;
        case StrategyKind::mvo: {
            MvoConfig c = strategy.mvo;
            c.seed = options.seed;
            alloc = mvo_schedule(simple_returns(panel), c, dates).allocations;
            break;
        }
        case StrategyKind::lstm:
        case StrategyKind::transformer:
            neural = run_neural(strategy, panel, schedule, options, dates);
            alloc = std::move(neural.allocations);
            break;
    }
    BacktestReport r = assemble_report(strategy.name, std::move(alloc), panel, options.cost_rate, options.rolling_window);
    r.phases = std::move(neural.phases);
    r.pretrain_log = std::move(neural.pretrain_log);
    r.segments = std::move(neural.segments);
    return r;
}

// ---- comparison ----

namespace {

template <typename F>
auto defined_or_empty(F&& f) -> std::optional<decltype(f())> {
    try {
        return f();
    } catch (const DataError&) {
        return std::nullopt;
    } catch (const NumericalError&) {
        return std::nullopt;
    }
}

nlohmann::ordered_json opt_json(const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nullptr; }

nlohmann::ordered_json test_json(const std::optional<TestResult>& t) {
    return t ? nlohmann::ordered_json::parse(t->to_json()) : nlohmann::ordered_json(nullptr);
}

}  // namespace

ComparisonReport compare(const std::vector<BacktestReport>& reports, const std::string& baseline,
                         std::optional<Date> zoom_start) {
    if (reports.empty()) throw ConfigError("compare needs at least one report");
    const auto base_it =
        std::find_if(reports.begin(), reports.end(), [&](const BacktestReport& r) { return r.name == baseline; });
    if (base_it == reports.end()) throw ConfigError(fmt::format("baseline '{}' is not among the reports", baseline));
    for (const auto& r : reports)
        if (r.dates != base_it->dates)
            throw DataError(fmt::format("calendar mismatch between '{}' and baseline '{}'", r.name, baseline));

    ComparisonReport c;
    c.baseline = baseline;
    c.zoom_start = zoom_start;
    const RollingSharpeSeries base_zoom = zoom_start ? base_it->rolling.from(*zoom_start) : RollingSharpeSeries{};
    for (const auto& r : reports) {
        c.names.push_back(r.name);
        c.tables.push_back(r.metrics);
        c.mean_rolling_full.push_back(r.rolling.mean_defined());
        const RollingSharpeSeries zoom = zoom_start ? r.rolling.from(*zoom_start) : RollingSharpeSeries{};
        c.mean_rolling_zoom.push_back(zoom_start ? zoom.mean_defined() : std::nullopt);
        if (&r == &*base_it) continue;
        PairComparison p;
        p.strategy = r.name;
        p.full = defined_or_empty(
            [&] { return mann_whitney_u(r.rolling.defined_values(), base_it->rolling.defined_values()); });
        p.outperformance_full = defined_or_empty([&] { return outperformance_fraction(r.rolling, base_it->rolling); });
        if (zoom_start) {
            p.zoom = defined_or_empty([&] { return mann_whitney_u(zoom.defined_values(), base_zoom.defined_values()); });
            p.outperformance_zoom = defined_or_empty([&] { return outperformance_fraction(zoom, base_zoom); });
        }
        c.pairs.push_back(std::move(p));
    }
    return c;
}

std::string ComparisonReport::metrics_csv() const { return sharpefolio::metrics_csv(names, tables); }

std::string ComparisonReport::to_json() const {
    using J = nlohmann::ordered_json;
    J j;
    j["baseline"] = baseline;
    j["strategies"] = names;
    j["zoom_start"] = zoom_start ? J(format_date(*zoom_start)) : J(nullptr);
    J metrics = J::object();
    for (std::size_t s = 0; s < names.size(); ++s) {
        J m = J::object();
        const auto vals = tables[s].values();
        for (std::size_t i = 0; i < kMetricLabels.size(); ++i) m[std::string(kMetricLabels[i])] = opt_json(vals[i]);
        metrics[names[s]] = m;
    }
    j["metrics"] = metrics;
    J full = J::object(), zoom = J::object();
    for (std::size_t s = 0; s < names.size(); ++s) {
        full[names[s]] = opt_json(mean_rolling_full[s]);
        zoom[names[s]] = opt_json(mean_rolling_zoom[s]);
    }
    j["mean_rolling_sharpe"] = {{"full", full}};
    if (zoom_start) j["mean_rolling_sharpe"]["zoom"] = zoom;
    J tests = J::array();
    for (const auto& p : pairs) {
        J t;
        t["strategy"] = p.strategy;
        t["baseline"] = baseline;
        t["full"] = {{"mann_whitney", test_json(p.full)}, {"outperformance", opt_json(p.outperformance_full)}};
        if (zoom_start)
            t["zoom"] = {{"mann_whitney", test_json(p.zoom)}, {"outperformance", opt_json(p.outperformance_zoom)}};
        tests.push_back(t);
    }
    j["tests"] = tests;
    return j.dump(2) + "\n";
}

// ---- replicates ----

std::uint64_t replicate_seed(std::uint64_t base_seed, std::size_t index) {
    return derived_seed(base_seed, "replicate", index);
}

ReplicateSummary replicate_runs(const StrategySpec& strategy, const PricePanel& panel,
                                const WalkForwardSchedule& schedule, const BacktestOptions& options,
                                const ReplicateConfig& config) {
    if (config.runs < 2) throw ConfigError("replicate runs must be >= 2");
    ReplicateSummary out;
    for (std::size_t i = 0; i < config.runs; ++i)
        out.seeds.push_back(config.same_seed ? config.base_seed : replicate_seed(config.base_seed, i));
    out.runs.resize(config.runs);
    parallel_for(config.runs, options.jobs, [&](std::size_t i) {
        BacktestOptions o = options;
        o.seed = out.seeds[i];
        o.jobs = 1;
        StrategySpec s = strategy;
        s.name = fmt::format("{}_run{:03d}", strategy.name, i + 1);
        out.runs[i] = run_strategy(s, panel, schedule, o);
    });
    for (const auto& r : out.runs) {
        if (!r.metrics.sharpe) throw NumericalError(fmt::format("{}: Sharpe ratio undefined (zero volatility)", r.name));
        out.sharpes.push_back(*r.metrics.sharpe);
    }
    if (!config.reference_sample.empty())
        out.z = z_test_two_sample(out.sharpes, config.reference_sample);
    else if (config.reference_summary)
        out.z = z_test_against_summary(out.sharpes, *config.reference_summary);
    return out;
}

std::string ReplicateSummary::to_json() const {
    using J = nlohmann::ordered_json;
    J j;
    j["runs"] = runs.size();
    j["seeds"] = seeds;
    j["sharpes"] = sharpes;
    const double m = mean(sharpes);
    j["mean_sharpe"] = m;
    double ss = 0.0;
    for (double s : sharpes) ss += (s - m) * (s - m);
    j["std_sharpe"] = sharpes.size() > 1 ? std::sqrt(ss / static_cast<double>(sharpes.size() - 1)) : 0.0;
    j["z_test"] = test_json(z);
    return j.dump(2) + "\n";
}

// ---- files ----

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError(fmt::format("cannot write {}", path.string()));
    f << text;
    if (!f) throw DataError(fmt::format("write failed for {}", path.string()));
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError(fmt::format("cannot read {}", path.string()));
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        rows.push_back(std::move(cells));
    }
    if (rows.empty()) throw DataError(fmt::format("{} is empty", path.string()));
    return rows;
}

double parse_number(const std::string& s, const std::filesystem::path& path) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw DataError(fmt::format("{}: bad number '{}'", path.string(), s));
}

}  // namespace

void write_report(const BacktestReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file(dir / "metrics.csv", metrics_csv(std::vector<std::string>{report.name},
                                                std::vector<MetricTable>{report.metrics}));
    write_file(dir / "returns.csv", report.returns_csv());
    write_file(dir / "weights.csv", report.allocations.to_csv());
    write_file(dir / "rolling_sharpe.csv", report.rolling_csv());
    if (report.pretrain_log) write_file(dir / "train_log_pretrain.csv", report.pretrain_log->to_csv());
    if (!report.segments.empty()) {
        std::string seg = "segment,train_start,train_end,test_start,test_end,train_windows,test_days\n";
        for (std::size_t k = 0; k < report.segments.size(); ++k) {
            const SegmentLog& s = report.segments[k];
            seg += fmt::format("{},{},{},{},{},{},{}\n", k + 1, format_date(s.segment.train_start),
                               format_date(s.segment.train_end), format_date(s.segment.test_start),
                               format_date(s.segment.test_end), s.train_samples, s.test_days);
            write_file(dir / fmt::format("train_log_segment{:02d}.csv", k + 1), s.log.to_csv());
            save_checkpoint((dir / fmt::format("model_segment{:02d}.bin", k + 1)).string(), s.params);
        }
        write_file(dir / "segments.csv", seg);
    }
}

BacktestReport load_report(const std::filesystem::path& dir, std::string name) {
    BacktestReport r;
    r.name = std::move(name);
    const auto ret_path = dir / "returns.csv";
    const auto rows = read_csv(ret_path);
    if (rows.front() != std::vector<std::string>{"date", "gross", "net", "cost", "turnover"})
        throw DataError(fmt::format("{}: unexpected header", ret_path.string()));
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 5) throw DataError(fmt::format("{}: row {} has {} cells", ret_path.string(), i + 1, rows[i].size()));
        r.dates.push_back(parse_date(rows[i][0]));
        r.gross.push_back(parse_number(rows[i][1], ret_path));
        r.net.push_back(parse_number(rows[i][2], ret_path));
        r.cost.push_back(parse_number(rows[i][3], ret_path));
        r.turnover.push_back(parse_number(rows[i][4], ret_path));
    }
    if (r.dates.empty()) throw DataError(fmt::format("{} has no rows", ret_path.string()));

    const auto w_path = dir / "weights.csv";
    const auto wrows = read_csv(w_path);
    r.allocations.assets.assign(wrows.front().begin() + 1, wrows.front().end());
    for (std::size_t i = 1; i < wrows.size(); ++i) {
        if (wrows[i].size() != wrows.front().size())
            throw DataError(fmt::format("{}: row {} has the wrong width", w_path.string(), i + 1));
        r.allocations.dates.push_back(parse_date(wrows[i][0]));
        std::vector<double> w;
        for (std::size_t j = 1; j < wrows[i].size(); ++j) w.push_back(parse_number(wrows[i][j], w_path));
        r.allocations.weights.push_back(std::move(w));
    }
    if (r.allocations.dates != r.dates) throw DataError(fmt::format("{}: dates differ from returns.csv", w_path.string()));

    const auto rs_path = dir / "rolling_sharpe.csv";
    const auto rrows = read_csv(rs_path);
    for (std::size_t i = 1; i < rrows.size(); ++i) {
        r.rolling.dates.push_back(parse_date(rrows[i].at(0)));
        if (rrows[i].size() > 1 && !rrows[i][1].empty())
            r.rolling.values.emplace_back(parse_number(rrows[i][1], rs_path));
        else
            r.rolling.values.emplace_back();
    }
    if (r.rolling.size() > 0) r.rolling.window = r.net.size() - r.rolling.size() + 1;
    r.metrics = compute_metrics(r.net);
    return r;
}

}  // namespace sharpefolio
