#include "sharpefolio/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <openssl/evp.h>

#include "sharpefolio/error.hpp"
#include "sharpefolio/toml.hpp"

namespace sharpefolio {

namespace {

// Typed access to one config table. Problems are collected rather than
// thrown so a single validate run can report all of them.
class Section {
public:
    Section(const toml::Table* table, std::string name, std::vector<std::string>& problems)
        : table_(table), name_(std::move(name)), problems_(problems) {}

    bool present() const { return table_ != nullptr; }
    bool has(const std::string& key) const { return table_ && table_->find(key); }

    std::optional<std::string> string(const std::string& key) {
        const toml::Value* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_string()) return wrong_type(key, *v, "a string"), std::nullopt;
        return v->as_string();
    }
    std::string string(const std::string& key, const std::string& fallback) { return string(key).value_or(fallback); }

    std::optional<double> number(const std::string& key) {
        const toml::Value* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_number()) return wrong_type(key, *v, "a number"), std::nullopt;
        return v->as_number();
    }
    double number(const std::string& key, double fallback) { return number(key).value_or(fallback); }

    std::optional<std::int64_t> integer(const std::string& key) {
        const toml::Value* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_integer()) return wrong_type(key, *v, "an integer"), std::nullopt;
        return v->as_integer();
    }
    std::size_t count(const std::string& key, std::size_t fallback) {
        const auto v = integer(key);
        if (!v) return fallback;
        if (*v < 0) return problem(key, "must be >= 0"), fallback;
        return static_cast<std::size_t>(*v);
    }

    bool flag(const std::string& key, bool fallback) {
        const toml::Value* v = get(key);
        if (!v) return fallback;
        if (!v->is_bool()) return wrong_type(key, *v, "true or false"), fallback;
        return v->as_bool();
    }

    std::vector<std::string> strings(const std::string& key) {
        std::vector<std::string> out;
        const toml::Value* v = get(key);
        if (!v) return out;
        if (!v->is_array()) return wrong_type(key, *v, "an array of strings"), out;
        for (const auto& item : v->as_array()) {
            if (!item.is_string()) return wrong_type(key, item, "an array of strings"), std::vector<std::string>{};
            out.push_back(item.as_string());
        }
        return out;
    }

    std::vector<double> numbers(const std::string& key) {
        std::vector<double> out;
        const toml::Value* v = get(key);
        if (!v) return out;
        if (!v->is_array()) return wrong_type(key, *v, "an array of numbers"), out;
        for (const auto& item : v->as_array()) {
            if (!item.is_number()) return wrong_type(key, item, "an array of numbers"), std::vector<double>{};
            out.push_back(item.as_number());
        }
        return out;
    }

    std::optional<Date> date(const std::string& key) {
        const auto s = string(key);
        if (!s) return std::nullopt;
        try {
            return parse_date(*s);
        } catch (const Error&) {
            problem(key, fmt::format("'{}' is not a YYYY-MM-DD date", *s));
            return std::nullopt;
        }
    }

    void require(const std::string& key) {
        if (!has(key)) problem(key, "is required");
    }

    void problem(const std::string& key, const std::string& msg) {
        problems_.push_back(fmt::format("[{}] {}: {}", name_, key, msg));
    }

    // Reports keys that were never read.
    void finish() {
        if (!table_) return;
        for (const auto& [key, value] : table_->entries)
            if (!used_.count(key))
                problems_.push_back(fmt::format("[{}] unknown key '{}' (line {})", name_, key, value.line()));
    }

private:
    const toml::Value* get(const std::string& key) {
        used_.insert(key);
        return table_ ? table_->find(key) : nullptr;
    }
    void wrong_type(const std::string& key, const toml::Value& v, const char* expected) {
        problem(key, fmt::format("expected {}, got {} (line {})", expected, v.type_name(), v.line()));
    }

    const toml::Table* table_;
    std::string name_;
    std::vector<std::string>& problems_;
    std::set<std::string> used_;
};

const toml::Table* subtable(const toml::Table& root, const std::string& key, std::vector<std::string>& problems) {
    const toml::Value* v = root.find(key);
    if (!v) return nullptr;
    if (!v->is_table()) {
        problems.push_back(fmt::format("'{}' must be a [{}] table (line {})", key, key, v->line()));
        return nullptr;
    }
    return &v->as_table();
}

template <typename F>
void capture(std::vector<std::string>& problems, const std::string& where, F&& f) {
    try {
        f();
    } catch (const Error& e) {
        problems.push_back(where.empty() ? e.what() : fmt::format("[{}] {}", where, e.what()));
    }
}

void read_train(Section& s, TrainConfig& t) {
    t.batch_size = s.count("batch_size", t.batch_size);
    t.epochs = s.count("epochs", t.epochs);
    t.learning_rate = s.number("learning_rate", t.learning_rate);
    t.validation_fraction = s.number("validation_fraction", t.validation_fraction);
    t.select_best_epoch = s.flag("select_best_epoch", t.select_best_epoch);
}

std::string kind_name(SourceKind k) {
    switch (k) {
        case SourceKind::asset: return "asset";
        case SourceKind::feature: return "feature";
        case SourceKind::proxy: return "proxy";
    }
    return "?";
}

nlohmann::ordered_json train_json(const TrainConfig& t) {
    return {{"batch_size", t.batch_size},
            {"epochs", t.epochs},
            {"learning_rate", t.learning_rate},
            {"l2", t.l2},
            {"validation_fraction", t.validation_fraction},
            {"select_best_epoch", t.select_best_epoch}};
}

}  // namespace

std::string display_name(StrategyKind k) {
    switch (k) {
        case StrategyKind::lstm: return "LSTM";
        case StrategyKind::transformer: return "Transformer";
        case StrategyKind::mvo: return "MVO";
        case StrategyKind::balanced: return "Balanced";
        case StrategyKind::fixed: return "Fixed";
    }
    return "?";
}

bool RunConfig::has_neural() const {
    return std::any_of(strategies.begin(), strategies.end(),
                       [](StrategyKind k) { return k == StrategyKind::lstm || k == StrategyKind::transformer; });
}

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir, const std::string& source) {
    const toml::Table root = toml::parse(text, source);
    std::vector<std::string> problems;
    RunConfig c;

    static const std::set<std::string> known{"run",   "universe", "source", "schedule", "features", "lstm",
                                             "transformer", "pretrain", "mvo", "fixed", "replicate"};
    for (const auto& [key, value] : root.entries)
        if (!known.count(key)) problems.push_back(fmt::format("unknown top-level entry '{}' (line {})", key, value.line()));

    // [run]
    Section run(subtable(root, "run", problems), "run", problems);
    if (!run.present()) problems.push_back("missing [run] table");
    c.name = run.string("name", std::filesystem::path(source).stem().string());
    c.preset = run.string("preset", "");
    run.require("strategies");
    std::set<StrategyKind> seen;
    const std::size_t before = problems.size();
    for (const auto& s : run.strings("strategies")) {
        try {
            const StrategyKind k = parse_strategy_kind(s);
            if (!seen.insert(k).second)
                run.problem("strategies", fmt::format("'{}' listed twice", s));
            else
                c.strategies.push_back(k);
        } catch (const ConfigError& e) {
            run.problem("strategies", e.what());
        }
    }
    if (run.has("strategies") && c.strategies.empty() && problems.size() == before) run.problem("strategies", "is empty");
    if (const auto seed = run.integer("seed")) {
        if (*seed < 0)
            run.problem("seed", "must be >= 0");
        else
            c.seed = static_cast<std::uint64_t>(*seed);
    }
    c.cost_rate = run.number("cost_rate", c.cost_rate);
    if (!(c.cost_rate >= 0.0)) run.problem("cost_rate", "must be >= 0");
    c.rolling_window = run.count("rolling_window", c.rolling_window);
    if (c.rolling_window < 2) run.problem("rolling_window", "must be >= 2");
    c.output_dir = run.string("output_dir", "out/" + c.name);
    c.zoom_start = run.date("zoom_start");
    run.finish();

    // [universe]
    Section uni(subtable(root, "universe", problems), "universe", problems);
    uni.require("assets");
    c.universe = uni.strings("assets");
    if (std::set<std::string>(c.universe.begin(), c.universe.end()).size() != c.universe.size())
        uni.problem("assets", "contains duplicates");
    uni.finish();

    // [source.*]
    if (const toml::Table* sources = subtable(root, "source", problems)) {
        for (const auto& [id, value] : sources->entries) {
            if (!value.is_table()) {
                problems.push_back(fmt::format("source.{} must be a table (line {})", id, value.line()));
                continue;
            }
            Section s(&value.as_table(), "source." + id, problems);
            SourceConfig src;
            src.id = id;
            s.require("path");
            src.path = s.string("path", "");
            src.resolved = (src.path.is_absolute() ? src.path : base_dir / src.path).lexically_normal();
            if (!src.path.empty() && !std::filesystem::is_regular_file(src.resolved))
                s.problem("path", fmt::format("data file not found: {}", src.resolved.string()));
            src.date_column = s.string("date_column", src.date_column);
            s.require("columns");
            src.columns = s.strings("columns");
            src.names = s.strings("names");
            if (src.names.empty()) src.names = src.columns;
            if (src.names.size() != src.columns.size()) s.problem("names", "must have one entry per column");
            const std::string kind = s.string("kind", "asset");
            if (kind == "asset")
                src.kind = SourceKind::asset;
            else if (kind == "feature")
                src.kind = SourceKind::feature;
            else if (kind == "proxy")
                src.kind = SourceKind::proxy;
            else
                s.problem("kind", fmt::format("'{}' is not asset, feature or proxy", kind));
            const std::string transform = s.string("transform", "none");
            if (transform == "yoy")
                src.yoy = true;
            else if (transform != "none")
                s.problem("transform", fmt::format("'{}' is not none or yoy", transform));
            src.yoy_period = s.count("yoy_period", src.yoy_period);
            if (src.yoy && src.kind != SourceKind::feature) s.problem("transform", "yoy applies to feature sources only");
            if (src.yoy_period == 0) s.problem("yoy_period", "must be >= 1");
            s.finish();
            c.sources.push_back(std::move(src));
        }
    }
    if (c.sources.empty()) problems.push_back("no [source.<name>] tables");

    auto provided = [&](SourceKind kind) {
        std::set<std::string> names;
        for (const auto& s : c.sources)
            if (s.kind == kind) names.insert(s.names.begin(), s.names.end());
        return names;
    };
    const auto asset_names = provided(SourceKind::asset);
    for (const auto& a : c.universe)
        if (!asset_names.count(a)) problems.push_back(fmt::format("[universe] asset '{}' is not provided by any asset source", a));

    // [schedule]
    Section sch(subtable(root, "schedule", problems), "schedule", problems);
    for (const char* k : {"data_start", "first_test", "end"}) sch.require(k);
    const auto ds = sch.date("data_start"), ft = sch.date("first_test"), en = sch.date("end");
    const auto years = sch.integer("retrain_years").value_or(2);
    c.retrain_years = static_cast<int>(years);
    sch.finish();
    if (ds && ft && en) {
        c.data_start = *ds;
        c.first_test = *ft;
        c.end = *en;
        capture(problems, "schedule", [&] { (void)make_schedule(c); });
    }

    // [features]
    Section feat(subtable(root, "features", problems), "features", problems);
    c.features.prices = feat.flag("prices", true);
    c.features.returns = feat.flag("returns", true);
    c.features.exogenous = feat.strings("exogenous");
    c.normalize = feat.flag("normalize", false);
    feat.finish();
    if (!c.features.prices && !c.features.returns && c.features.exogenous.empty())
        problems.push_back("[features] selects no inputs");
    const auto feature_names = provided(SourceKind::feature);
    for (const auto& f : c.features.exogenous)
        if (!feature_names.count(f))
            problems.push_back(fmt::format("[features] exogenous '{}' is not provided by any feature source", f));

    const std::size_t n_assets = c.universe.size();
    const std::size_t n_features =
        n_assets * ((c.features.prices ? 1 : 0) + (c.features.returns ? 1 : 0)) + c.features.exogenous.size();
    const auto uses = [&](StrategyKind k) {
        return std::find(c.strategies.begin(), c.strategies.end(), k) != c.strategies.end();
    };

    // [lstm]
    {
        Section s(subtable(root, "lstm", problems), "lstm", problems);
        c.lstm.hidden_units = s.count("hidden_units", c.lstm.hidden_units);
        c.lstm.lookback = s.count("lookback", c.lstm.lookback);
        c.lstm.input_features = n_features;
        c.lstm.n_assets = n_assets;
        c.lstm_train.batch_size = 64;
        c.lstm_train.epochs = 100;
        read_train(s, c.lstm_train);
        c.lstm_train.l2 = s.number("l2", 0.0);
        s.finish();
        if (uses(StrategyKind::lstm)) {
            capture(problems, "lstm", [&] { c.lstm.validate(); });
            capture(problems, "lstm", [&] { c.lstm_train.validate(); });
        }
    }

    // [transformer]
    {
        Section s(subtable(root, "transformer", problems), "transformer", problems);
        auto& t = c.transformer;
        t.embedding_size = s.count("embedding_size", t.embedding_size);
        t.n_heads = s.count("n_heads", t.n_heads);
        t.n_layers = s.count("n_layers", t.n_layers);
        t.dropout = s.number("dropout", t.dropout);
        t.lookback = s.count("lookback", t.lookback);
        t.l2 = s.number("l2", t.l2);
        t.input_features = n_features;
        t.n_assets = n_assets;
        c.transformer_train.batch_size = 128;
        c.transformer_train.epochs = 50;
        read_train(s, c.transformer_train);
        c.transformer_train.l2 = t.l2;
        s.finish();
        if (uses(StrategyKind::transformer)) {
            capture(problems, "transformer", [&] { t.validate(); });
            capture(problems, "transformer", [&] { c.transformer_train.validate(); });
        }
    }

    // [pretrain]
    if (const toml::Table* pt = subtable(root, "pretrain", problems)) {
        Section s(pt, "pretrain", problems);
        PretrainSettings p;
        for (const char* k : {"stock", "bond", "commodity"}) s.require(k);
        p.stock = s.string("stock", "");
        p.bond = s.string("bond", "");
        p.commodity = s.string("commodity", "");
        p.vol_window = s.count("vol_window", p.vol_window);
        p.train = c.transformer_train;
        read_train(s, p.train);
        s.finish();
        if (!uses(StrategyKind::transformer)) problems.push_back("[pretrain] applies to the transformer strategy, which is not listed");
        if (n_assets != 4)
            problems.push_back(fmt::format("[pretrain] maps onto a 4-asset universe, [universe] has {}", n_assets));
        if (!c.features.exogenous.empty()) problems.push_back("[pretrain] cannot be combined with exogenous features");
        const auto proxies = provided(SourceKind::proxy);
        for (const auto& col : {p.stock, p.bond, p.commodity})
            if (!col.empty() && !proxies.count(col))
                problems.push_back(fmt::format("[pretrain] column '{}' is not provided by any proxy source", col));
        if (p.vol_window < 2) s.problem("vol_window", "must be >= 2");
        capture(problems, "pretrain", [&] { p.train.validate(); });
        c.pretrain = std::move(p);
    }

    // [mvo]
    {
        Section s(subtable(root, "mvo", problems), "mvo", problems);
        c.mvo.lookback_days = s.count("lookback_days", c.mvo.lookback_days);
        c.mvo.weight_floor = s.number("floor", c.mvo.weight_floor);
        c.mvo.weight_cap = s.number("cap", c.mvo.weight_cap);
        c.mvo.restarts = s.count("restarts", c.mvo.restarts);
        s.finish();
        if (uses(StrategyKind::mvo) && n_assets > 0) capture(problems, "mvo", [&] { c.mvo.validate(n_assets); });
    }

    // [fixed]
    {
        Section s(subtable(root, "fixed", problems), "fixed", problems);
        c.fixed_weights = s.numbers("weights");
        s.finish();
        if (uses(StrategyKind::fixed)) {
            if (c.fixed_weights.size() != n_assets)
                problems.push_back(fmt::format("[fixed] weights needs {} entries, one per asset", n_assets));
            else
                capture(problems, "fixed", [&] { validate_weights(c.fixed_weights); });
        }
    }

    // [replicate]
    {
        Section s(subtable(root, "replicate", problems), "replicate", problems);
        c.replicate.runs = s.count("runs", 1);
        if (c.replicate.runs == 0) s.problem("runs", "must be >= 1");
        const auto mean = s.number("reference_mean"), sd = s.number("reference_std");
        const auto n = s.count("reference_n", 0);
        c.replicate.reference_sample = s.numbers("reference_sample");
        if (mean || sd || n) {
            if (!mean || !sd || n == 0)
                problems.push_back("[replicate] reference_mean, reference_std and reference_n go together");
            else if (!(*sd >= 0.0) || n < 2)
                problems.push_back("[replicate] reference_std must be >= 0 and reference_n >= 2");
            else
                c.replicate.reference = SampleSummary{*mean, *sd, n};
        }
        if (!c.replicate.reference_sample.empty() && c.replicate.reference_sample.size() < 2)
            s.problem("reference_sample", "needs at least 2 values");
        s.finish();
    }

    if (!problems.empty()) throw ConfigError(fmt::format("{}", fmt::join(problems, "\n")));
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError(fmt::format("cannot read config file {}", path.string()));
    std::stringstream ss;
    ss << f.rdbuf();
    RunConfig c = parse_run_config(ss.str(), path.parent_path(), path.string());
    c.config_path = path;
    return c;
}

void check_runnable(const RunConfig& config) {
    if (config.has_neural() && !config.seed)
        throw ConfigError("a seed is required for neural strategies: set [run] seed or pass --seed");
}

nlohmann::ordered_json RunConfig::to_json() const {
    using J = nlohmann::ordered_json;
    J j;
    J strat = J::array();
    for (auto k : strategies) strat.push_back(std::string(to_string(k)));
    j["run"] = {{"name", name},
                {"preset", preset},
                {"strategies", strat},
                {"seed", seed ? J(*seed) : J(nullptr)},
                {"cost_rate", cost_rate},
                {"rolling_window", rolling_window},
                {"output_dir", output_dir},
                {"zoom_start", zoom_start ? J(format_date(*zoom_start)) : J(nullptr)}};
    j["universe"] = {{"assets", universe}};
    J src = J::object();
    for (const auto& s : sources) {
        J e = {{"path", s.path.generic_string()},
               {"date_column", s.date_column},
               {"columns", s.columns},
               {"names", s.names},
               {"kind", kind_name(s.kind)},
               {"transform", s.yoy ? "yoy" : "none"}};
        if (s.yoy) e["yoy_period"] = s.yoy_period;
        src[s.id] = e;
    }
    j["source"] = src;
    j["schedule"] = {{"data_start", format_date(data_start)},
                     {"first_test", format_date(first_test)},
                     {"end", format_date(end)},
                     {"retrain_years", retrain_years}};
    j["features"] = {{"prices", features.prices},
                     {"returns", features.returns},
                     {"exogenous", features.exogenous},
                     {"normalize", normalize}};
    const auto uses = [&](StrategyKind k) { return std::find(strategies.begin(), strategies.end(), k) != strategies.end(); };
    if (uses(StrategyKind::lstm)) {
        J l = {{"hidden_units", lstm.hidden_units},
               {"lookback", lstm.lookback},
               {"input_features", lstm.input_features},
               {"n_assets", lstm.n_assets}};
        l["train"] = train_json(lstm_train);
        j["lstm"] = l;
    }
    if (uses(StrategyKind::transformer)) {
        J t = {{"embedding_size", transformer.embedding_size},
               {"n_heads", transformer.n_heads},
               {"n_layers", transformer.n_layers},
               {"ff_size", transformer.ff_size()},
               {"dropout", transformer.dropout},
               {"lookback", transformer.lookback},
               {"input_features", transformer.input_features},
               {"n_assets", transformer.n_assets}};
        t["train"] = train_json(transformer_train);
        j["transformer"] = t;
    }
    if (pretrain) {
        J p = {{"stock", pretrain->stock},
               {"bond", pretrain->bond},
               {"commodity", pretrain->commodity},
               {"vol_window", pretrain->vol_window}};
        p["train"] = train_json(pretrain->train);
        j["pretrain"] = p;
    }
    if (uses(StrategyKind::mvo))
        j["mvo"] = {{"lookback_days", mvo.lookback_days},
                    {"floor", mvo.weight_floor},
                    {"cap", mvo.weight_cap},
                    {"restarts", mvo.restarts}};
    if (uses(StrategyKind::fixed)) j["fixed"] = {{"weights", fixed_weights}};
    J rep = {{"runs", replicate.runs}};
    if (replicate.reference)
        rep["reference"] = {{"mean", replicate.reference->mean},
                            {"std", replicate.reference->stddev},
                            {"n", replicate.reference->n}};
    if (!replicate.reference_sample.empty()) rep["reference_sample"] = replicate.reference_sample;
    j["replicate"] = rep;
    return j;
}

// ---- data ----

namespace {

PricePanel load_source(const SourceConfig& s) {
    CsvSchema schema;
    schema.date_column = s.date_column;
    for (std::size_t i = 0; i < s.columns.size(); ++i) schema.columns.emplace_back(s.columns[i], s.names[i]);
    schema.kind = s.kind == SourceKind::feature ? ColumnKind::feature : ColumnKind::asset;
    PricePanel p = load_csv(s.resolved, schema);
    if (!s.yoy) return p;
    if (p.rows() <= s.yoy_period)
        throw DataError(fmt::format("{}: {} rows, year-over-year needs more than {}", s.resolved.string(), p.rows(),
                                    s.yoy_period));
    std::vector<Column> cols;
    for (const auto& c : p.features()) cols.push_back({c.name, yoy_percent_change(c.values, s.yoy_period)});
    std::vector<Date> dates(p.dates().begin() + static_cast<long>(s.yoy_period), p.dates().end());
    return PricePanel(std::move(dates), {}, std::move(cols));
}

}  // namespace

LoadedData load_data(const RunConfig& config) {
    LoadedData out;
    std::vector<PricePanel> assets, features, proxies;
    for (const auto& s : config.sources) {
        out.digests.push_back({s.path.generic_string(), sha256_file(s.resolved)});
        PricePanel p = load_source(s);
        if (s.kind == SourceKind::asset)
            assets.push_back(std::move(p));
        else if (s.kind == SourceKind::feature)
            features.push_back(std::move(p));
        else
            proxies.push_back(std::move(p));
    }
    if (assets.empty()) throw DataError("no asset sources");

    // Trading calendar: asset dates from data_start on.
    std::vector<Date> calendar;
    for (Date d : union_calendar(assets))
        if (d >= config.data_start) calendar.push_back(d);
    if (calendar.size() < 2) throw DataError(fmt::format("fewer than 2 asset dates on or after {}", format_date(config.data_start)));

    // Only the columns the run uses are aligned.
    std::vector<PricePanel> used;
    for (const auto& a : assets) used.push_back(a);
    const std::set<std::string> exo(config.features.exogenous.begin(), config.features.exogenous.end());
    for (const auto& f : features) {
        std::vector<Column> keep;
        for (const auto& c : f.features())
            if (exo.count(c.name)) keep.push_back(c);
        if (!keep.empty()) used.emplace_back(f.dates(), std::vector<Column>{}, std::move(keep));
    }
    PricePanel aligned = align_and_fill(used, calendar).with_asset_order(config.universe);
    std::vector<Column> feature_cols;
    for (const auto& name : config.features.exogenous) feature_cols.push_back(aligned.feature(name));
    out.panel = PricePanel(aligned.dates(), aligned.assets(), std::move(feature_cols));

    if (config.pretrain) {
        if (proxies.empty()) throw DataError("pretraining needs proxy sources");
        const PricePanel merged = align_and_fill(proxies, union_calendar(proxies));
        const PretrainMapping mapping = default_pretrain_mapping(config.universe, config.pretrain->stock,
                                                                 config.pretrain->bond, config.pretrain->commodity,
                                                                 config.pretrain->vol_window);
        out.pretrain_panel = build_pretrain_panel(merged, mapping);
    }
    return out;
}

WalkForwardSchedule make_schedule(const RunConfig& config) {
    return make_schedule(config.data_start, config.first_test, config.end, config.retrain_years);
}

std::vector<StrategySpec> build_strategies(const RunConfig& config, const LoadedData& data) {
    std::vector<StrategySpec> out;
    for (StrategyKind k : config.strategies) {
        StrategySpec s;
        s.kind = k;
        s.name = display_name(k);
        s.mvo = config.mvo;
        s.fixed_weights = config.fixed_weights;
        if (k == StrategyKind::lstm || k == StrategyKind::transformer) {
            NeuralSpec n;
            if (k == StrategyKind::lstm) {
                n.model = config.lstm;
                n.train = config.lstm_train;
            } else {
                n.model = config.transformer;
                n.train = config.transformer_train;
                if (config.pretrain) {
                    if (!data.pretrain_panel) throw DataError("pretraining panel was not loaded");
                    n.pretrain = PretrainSpec{*data.pretrain_panel, config.pretrain->train};
                }
            }
            n.features = config.features;
            n.normalize = config.normalize;
            s.neural = std::move(n);
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw DataError("SHA-256 computation failed");
    std::string hex;
    for (unsigned i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError(fmt::format("cannot read {}", path.string()));
    std::stringstream ss;
    ss << f.rdbuf();
    return sha256_hex(ss.str());
}

}  // namespace sharpefolio
