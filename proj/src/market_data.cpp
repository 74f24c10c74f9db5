#include "sharpefolio/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "sharpefolio/error.hpp"

namespace sharpefolio {

namespace {

constexpr double kTradingDays = 252.0;

void check_column(const Column& c, std::size_t rows) {
    if (c.values.size() != rows)
        throw DataError("column '" + c.name + "' has " + std::to_string(c.values.size()) + " values for " +
                        std::to_string(rows) + " dates");
    for (double v : c.values)
        if (!std::isfinite(v)) throw DataError("column '" + c.name + "' contains a non-finite value");
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(field));
            field.clear();
        } else {
            field += c;
        }
    }
    out.push_back(trim(field));
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

double population_std(std::span<const double> x) {
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / n);
}

}  // namespace

// ---------------------------------------------------------------------------
// PricePanel
// ---------------------------------------------------------------------------

PricePanel::PricePanel(std::vector<Date> dates, std::vector<Column> assets, std::vector<Column> features)
    : dates_(std::move(dates)), assets_(std::move(assets)), features_(std::move(features)) {
    for (std::size_t i = 1; i < dates_.size(); ++i)
        if (!(dates_[i - 1] < dates_[i]))
            throw DataError("panel dates must be strictly increasing (at " + format_date(dates_[i]) + ")");
    std::set<std::string> names;
    for (const auto* group : {&assets_, &features_})
        for (const auto& c : *group) {
            check_column(c, dates_.size());
            if (!names.insert(c.name).second) throw DataError("duplicate column name '" + c.name + "'");
        }
}

const Column& PricePanel::asset(const std::string& name) const {
    for (const auto& c : assets_)
        if (c.name == name) return c;
    throw DataError("missing asset column '" + name + "'");
}

const Column& PricePanel::feature(const std::string& name) const {
    for (const auto& c : features_)
        if (c.name == name) return c;
    throw DataError("missing feature column '" + name + "'");
}

const Column* PricePanel::find(const std::string& name) const {
    for (const auto* group : {&assets_, &features_})
        for (const auto& c : *group)
            if (c.name == name) return &c;
    return nullptr;
}

std::vector<std::string> PricePanel::asset_names() const {
    std::vector<std::string> out;
    for (const auto& c : assets_) out.push_back(c.name);
    return out;
}

PricePanel PricePanel::between(Date first, Date last) const {
    const auto b = std::lower_bound(dates_.begin(), dates_.end(), first) - dates_.begin();
    const auto e = std::upper_bound(dates_.begin(), dates_.end(), last) - dates_.begin();
    auto cut = [&](const std::vector<Column>& cols) {
        std::vector<Column> out;
        for (const auto& c : cols)
            out.push_back({c.name, std::vector<double>(c.values.begin() + b, c.values.begin() + e)});
        return out;
    };
    return PricePanel(std::vector<Date>(dates_.begin() + b, dates_.begin() + e), cut(assets_), cut(features_));
}

PricePanel PricePanel::with_asset_order(const std::vector<std::string>& names) const {
    std::vector<Column> reordered;
    for (const auto& n : names) reordered.push_back(asset(n));
    return PricePanel(dates_, std::move(reordered), features_);
}

std::vector<double> ReturnPanel::row(std::size_t t) const {
    std::vector<double> out(n_assets());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = values(t, i);
    return out;
}

// ---------------------------------------------------------------------------
// WindowedDataset
// ---------------------------------------------------------------------------

WindowedDataset::WindowedDataset(std::shared_ptr<const Tensor> features, std::shared_ptr<const Tensor> targets,
                                 std::size_t lookback, std::vector<std::size_t> starts)
    : features_(std::move(features)), targets_(std::move(targets)), lookback_(lookback), starts_(std::move(starts)) {
    if (!features_ || !targets_) throw DataError("windowed dataset needs feature and target matrices");
    if (features_->rows() != targets_->rows())
        throw DataError("feature rows (" + std::to_string(features_->rows()) + ") != target rows (" +
                        std::to_string(targets_->rows()) + ")");
    for (auto s : starts_)
        if (s + lookback_ >= targets_->rows()) throw DataError("window start out of range");
}

Tensor WindowedDataset::inputs(std::span<const std::size_t> samples) const {
    const std::size_t f = n_features();
    Tensor out({samples.size(), lookback_, f});
    double* dst = out.data();
    for (auto k : samples) {
        const double* src = features_->data() + starts_.at(k) * f;
        dst = std::copy(src, src + lookback_ * f, dst);
    }
    return out;
}

Tensor WindowedDataset::targets(std::span<const std::size_t> samples) const {
    const std::size_t a = n_assets();
    Tensor out({samples.size(), a});
    for (std::size_t b = 0; b < samples.size(); ++b) {
        const std::size_t row = target_row(samples[b]);
        for (std::size_t i = 0; i < a; ++i) out(b, i) = (*targets_)(row, i);
    }
    return out;
}

Tensor WindowedDataset::all_inputs() const {
    std::vector<std::size_t> idx(size());
    std::iota(idx.begin(), idx.end(), 0);
    return inputs(idx);
}

Tensor WindowedDataset::all_targets() const {
    std::vector<std::size_t> idx(size());
    std::iota(idx.begin(), idx.end(), 0);
    return targets(idx);
}

WindowedDataset WindowedDataset::subset(std::span<const std::size_t> samples) const {
    std::vector<std::size_t> starts;
    starts.reserve(samples.size());
    for (auto k : samples) starts.push_back(starts_.at(k));
    return WindowedDataset(features_, targets_, lookback_, std::move(starts));
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

PricePanel load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("data file '" + path.string() + "' is empty");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
    const auto header = split_csv_line(line);
    auto index_of = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError("'" + path.string() + "': missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t date_idx = index_of(schema.date_column);
    std::vector<std::size_t> value_idx;
    for (const auto& [src, _] : schema.columns) value_idx.push_back(index_of(src));
    if (value_idx.empty()) throw DataError("'" + path.string() + "': schema selects no value columns");

    struct Row {
        Date date;
        std::vector<double> values;
    };
    std::vector<Row> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        const std::string where = "'" + path.string() + "' line " + std::to_string(line_no);
        if (fields.size() != header.size())
            throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        Row r;
        try {
            r.date = parse_date(fields[date_idx]);
        } catch (const DataError& e) {
            throw DataError(where + ": " + e.what());
        }
        for (std::size_t j = 0; j < value_idx.size(); ++j) {
            double v = 0.0;
            const auto& raw = fields[value_idx[j]];
            if (!parse_double(raw, v))
                throw DataError(where + ": unparseable value '" + raw + "' in column '" + schema.columns[j].first +
                                "'");
            if (schema.kind == ColumnKind::asset && v <= 0.0)
                throw DataError(where + ": non-positive price " + raw + " in column '" + schema.columns[j].first +
                                "'");
            r.values.push_back(v);
        }
        rows.push_back(std::move(r));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].date == rows[i - 1].date)
            throw DataError("'" + path.string() + "': duplicate date " + format_date(rows[i].date));

    std::vector<Date> dates;
    std::vector<Column> cols(schema.columns.size());
    for (std::size_t j = 0; j < cols.size(); ++j) cols[j].name = schema.columns[j].second;
    for (const auto& r : rows) {
        dates.push_back(r.date);
        for (std::size_t j = 0; j < cols.size(); ++j) cols[j].values.push_back(r.values[j]);
    }
    if (schema.kind == ColumnKind::asset) return PricePanel(std::move(dates), std::move(cols), {});
    return PricePanel(std::move(dates), {}, std::move(cols));
}

std::vector<Date> union_calendar(std::span<const PricePanel> panels) {
    std::set<Date> all;
    for (const auto& p : panels) all.insert(p.dates().begin(), p.dates().end());
    return {all.begin(), all.end()};
}

PricePanel align_and_fill(std::span<const PricePanel> panels, const std::vector<Date>& calendar) {
    if (panels.empty()) throw DataError("align_and_fill needs at least one panel");
    if (calendar.empty()) throw DataError("master calendar is empty");
    for (std::size_t i = 1; i < calendar.size(); ++i)
        if (!(calendar[i - 1] < calendar[i])) throw DataError("master calendar must be strictly increasing");

    auto reindex = [&](const std::vector<Date>& src_dates, const Column& c) {
        if (src_dates.empty()) throw DataError("column '" + c.name + "' has no observations");
        std::vector<double> out(calendar.size());
        std::size_t j = 0;  // first source index with date > calendar[i]
        for (std::size_t i = 0; i < calendar.size(); ++i) {
            while (j < src_dates.size() && src_dates[j] <= calendar[i]) ++j;
            out[i] = j == 0 ? c.values.front() : c.values[j - 1];
        }
        return Column{c.name, std::move(out)};
    };

    std::vector<Column> assets, features;
    for (const auto& p : panels) {
        if (p.rows() == 0) {
            const Column* first = !p.assets().empty() ? &p.assets().front()
                                  : !p.features().empty() ? &p.features().front()
                                                          : nullptr;
            throw DataError(first ? "column '" + first->name + "' has no observations" : "panel has no observations");
        }
        if (p.dates().back() < calendar.front() || calendar.back() < p.dates().front())
            throw DataError("calendar " + format_date(calendar.front()) + ".." + format_date(calendar.back()) +
                            " is disjoint from panel range " + format_date(p.dates().front()) + ".." +
                            format_date(p.dates().back()));
        for (const auto& c : p.assets()) assets.push_back(reindex(p.dates(), c));
        for (const auto& c : p.features()) features.push_back(reindex(p.dates(), c));
    }
    return PricePanel(calendar, std::move(assets), std::move(features));
}

// ---------------------------------------------------------------------------
// Transforms
// ---------------------------------------------------------------------------

ReturnPanel simple_returns(const PricePanel& panel) {
    if (panel.rows() < 2) throw DataError("simple_returns needs at least 2 rows");
    const std::size_t n = panel.rows() - 1;
    ReturnPanel out;
    out.dates.assign(panel.dates().begin() + 1, panel.dates().end());
    out.values = Tensor({n, panel.assets().size()});
    for (std::size_t i = 0; i < panel.assets().size(); ++i) {
        const auto& c = panel.assets()[i];
        out.assets.push_back(c.name);
        for (std::size_t t = 0; t < n; ++t) {
            if (c.values[t] <= 0.0 || c.values[t + 1] <= 0.0)
                throw DataError("non-positive price in column '" + c.name + "' at " + format_date(panel.dates()[t]));
            out.values(t, i) = c.values[t + 1] / c.values[t] - 1.0;
        }
    }
    return out;
}

std::vector<double> yoy_percent_change(std::span<const double> series, std::size_t period) {
    if (period == 0) throw DataError("yoy period must be positive");
    if (series.size() <= period)
        throw DataError("series of length " + std::to_string(series.size()) + " too short for yoy period " +
                        std::to_string(period));
    for (double v : series)
        if (!(v > 0.0)) throw DataError("yoy_percent_change requires strictly positive values");
    std::vector<double> out(series.size() - period);
    for (std::size_t t = period; t < series.size(); ++t) out[t - period] = (series[t] / series[t - period] - 1.0) * 100.0;
    return out;
}

PricePanel yoy_transform(const PricePanel& panel, const std::string& feature, std::size_t period) {
    const auto transformed = yoy_percent_change(panel.feature(feature).values, period);
    auto drop = [&](const Column& c) {
        return Column{c.name, std::vector<double>(c.values.begin() + static_cast<std::ptrdiff_t>(period), c.values.end())};
    };
    std::vector<Column> assets, features;
    for (const auto& c : panel.assets()) assets.push_back(drop(c));
    for (const auto& c : panel.features())
        features.push_back(c.name == feature ? Column{c.name, transformed} : drop(c));
    return PricePanel(std::vector<Date>(panel.dates().begin() + static_cast<std::ptrdiff_t>(period), panel.dates().end()),
                      std::move(assets), std::move(features));
}

std::vector<double> rolling_volatility(std::span<const double> prices, std::size_t window) {
    if (window == 0) throw DataError("volatility window must be positive");
    if (prices.size() <= window)
        throw DataError("price series of length " + std::to_string(prices.size()) + " too short for window " +
                        std::to_string(window));
    std::vector<double> rets(prices.size() - 1);
    for (std::size_t t = 1; t < prices.size(); ++t) {
        if (prices[t - 1] <= 0.0) throw DataError("rolling_volatility requires strictly positive prices");
        rets[t - 1] = prices[t] / prices[t - 1] - 1.0;
    }
    std::vector<double> out(rets.size() - window + 1);
    for (std::size_t j = 0; j < out.size(); ++j)
        out[j] = population_std(std::span<const double>(rets).subspan(j, window)) * std::sqrt(kTradingDays);
    return out;
}

// ---------------------------------------------------------------------------
// Windowing
// ---------------------------------------------------------------------------

std::pair<WindowedDataset, WindowedDataset> chronological_split(const WindowedDataset& dataset,
                                                                double validation_fraction) {
    if (dataset.empty()) throw DataError("cannot split an empty dataset");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw DataError("validation fraction must lie in (0, 1)");
    const std::size_t n = dataset.size();
    const auto n_val = static_cast<std::size_t>(std::ceil(validation_fraction * static_cast<double>(n) - 1e-9));
    std::vector<std::size_t> train(n - n_val), val(n_val);
    std::iota(train.begin(), train.end(), 0);
    std::iota(val.begin(), val.end(), n - n_val);
    return {dataset.subset(train), dataset.subset(val)};
}

WindowedDataset build_windows(std::shared_ptr<const Tensor> features, std::shared_ptr<const Tensor> targets,
                              std::size_t lookback) {
    if (lookback == 0) throw DataError("lookback must be positive");
    const std::size_t rows = features->rows();
    if (rows <= lookback)
        throw DataError(std::to_string(rows) + " rows is not enough for a " + std::to_string(lookback) +
                        "-day lookback");
    std::vector<std::size_t> starts(rows - lookback);
    std::iota(starts.begin(), starts.end(), 0);
    return WindowedDataset(std::move(features), std::move(targets), lookback, std::move(starts));
}

WindowedDataset build_windows(const Tensor& features, const ReturnPanel& targets, std::size_t lookback) {
    return build_windows(std::make_shared<const Tensor>(features), std::make_shared<const Tensor>(targets.values),
                         lookback);
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

std::vector<std::string> feature_names(const PricePanel& panel, const FeatureSpec& spec) {
    std::vector<std::string> names;
    if (spec.prices)
        for (const auto& c : panel.assets()) names.push_back(c.name + "_price");
    if (spec.returns)
        for (const auto& c : panel.assets()) names.push_back(c.name + "_return");
    for (const auto& f : spec.exogenous) names.push_back(f);
    return names;
}

Tensor build_feature_matrix(const PricePanel& panel, const FeatureSpec& spec) {
    const ReturnPanel rets = simple_returns(panel);
    const std::size_t n = rets.rows();
    const std::size_t n_assets = panel.assets().size();
    std::vector<const Column*> exo;
    for (const auto& name : spec.exogenous) exo.push_back(&panel.feature(name));
    const std::size_t width = (spec.prices ? n_assets : 0) + (spec.returns ? n_assets : 0) + exo.size();
    if (width == 0) throw DataError("feature specification selects no columns");

    Tensor out({n, width});
    for (std::size_t t = 0; t < n; ++t) {
        std::size_t j = 0;
        if (spec.prices)
            for (const auto& c : panel.assets()) out(t, j++) = c.values[t + 1];
        if (spec.returns)
            for (std::size_t i = 0; i < n_assets; ++i) out(t, j++) = rets.values(t, i);
        for (const auto* c : exo) out(t, j++) = c->values[t + 1];
    }
    return out;
}

WindowedDataset panel_windows(const PricePanel& panel, const FeatureSpec& spec, std::size_t lookback) {
    return build_windows(build_feature_matrix(panel, spec), simple_returns(panel), lookback);
}

}  // namespace sharpefolio
