#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sharpefolio/config.hpp"
#include "sharpefolio/error.hpp"

using namespace sharpefolio;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = SHARPEFOLIO_SOURCE_DIR;
const fs::path kPresets = kSource / "presets";

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string config_error(const std::string& text) {
    try {
        parse_run_config(text, kPresets, "c.toml");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

std::size_t line_count(const std::string& s) {
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')) + (s.empty() ? 0 : 1);
}

const char* kMinimal = R"(
[run]
strategies = ["balanced"]
[universe]
assets = ["VTI", "AGG", "DBC", "VIX"]
[source.prices]
path = "../data/fixtures/assets.csv"
columns = ["VTI", "AGG", "DBC", "VIX"]
[schedule]
data_start = 2008-01-01
first_test = 2011-01-01
end = 2012-12-31
)";

}  // namespace

TEST_SUITE("config") {

TEST_CASE("fixture presets load with derived settings") {
    for (const char* name : {"fixture_balanced", "fixture_lstm", "fixture_compare", "fixture_features",
                             "fixture_transformer"}) {
        CAPTURE(name);
        const RunConfig c = load_run_config(kPresets / (std::string(name) + ".toml"));
        CHECK(c.preset == name);
        CHECK(c.universe == std::vector<std::string>{"VTI", "AGG", "DBC", "VIX"});
        CHECK_NOTHROW(check_runnable(c));
    }
    const RunConfig lstm = load_run_config(kPresets / "fixture_lstm.toml");
    CHECK(lstm.lstm.input_features == 8);
    CHECK(lstm.lstm.hidden_units == 4);
    CHECK(lstm.lstm_train.batch_size == 32);
    CHECK(lstm.lstm_train.learning_rate == 0.001);
    CHECK(lstm.seed == 7u);
    CHECK(lstm.cost_rate == 0.0001);
    CHECK(lstm.retrain_years == 1);
    CHECK(lstm.name == "fixture_lstm");  // file stem

    const RunConfig feat = load_run_config(kPresets / "fixture_features.toml");
    CHECK(feat.lstm.input_features == 10);
    CHECK(feat.normalize);
    const RunConfig tr = load_run_config(kPresets / "fixture_transformer.toml");
    REQUIRE(tr.pretrain.has_value());
    CHECK(tr.pretrain->train.epochs == 1);
    CHECK(tr.pretrain->train.batch_size == 32);  // inherited from [transformer]
    CHECK(tr.transformer.dropout == 0.05);
    CHECK(tr.transformer_train.l2 == 1e-5);
}

TEST_CASE("paper-scale defaults") {
    const RunConfig c = parse_run_config(std::string(kMinimal) + "[lstm]\n[transformer]\n[mvo]\n", kPresets, "config.toml");
    CHECK(c.lstm.hidden_units == 64);
    CHECK(c.lstm.lookback == 50);
    CHECK(c.lstm_train.batch_size == 64);
    CHECK(c.lstm_train.epochs == 100);
    CHECK(c.lstm_train.validation_fraction == 0.1);
    CHECK(c.transformer.embedding_size == 32);
    CHECK(c.transformer.n_heads == 2);
    CHECK(c.transformer.lookback == 504);
    CHECK(c.transformer_train.batch_size == 128);
    CHECK(c.transformer_train.epochs == 50);
    CHECK(c.mvo.lookback_days == 756);
    CHECK(c.mvo.weight_floor == 0.1);
    CHECK(c.mvo.weight_cap == 0.9);
    CHECK(c.rolling_window == 252);
    CHECK(c.output_dir == "out/config");
    CHECK_FALSE(c.seed.has_value());
}

TEST_CASE("real-data presets are well formed") {
    // Stand-in data files: only their existence is checked at validation.
    const fs::path root = fs::temp_directory_path() / "sharpefolio_presets";
    fs::remove_all(root);
    fs::create_directories(root / "presets");
    fs::create_directories(root / "data" / "real");
    for (const char* name : {"verification", "time", "asset", "features", "transformer"}) {
        CAPTURE(name);
        const std::string text = slurp(kPresets / (std::string(name) + ".toml"));
        std::string err = config_error(text);
        // First pass names every missing file.
        CHECK(err.find("data file not found") != std::string::npos);
        std::istringstream lines(text);
        for (std::string line; std::getline(lines, line);)
            if (line.rfind("path = \"../data/real/", 0) == 0) {
                const std::string file = line.substr(21, line.size() - 22);
                std::ofstream(root / "data" / "real" / file) << "";
            }
        const RunConfig c = parse_run_config(text, root / "presets", name);
        CHECK(c.preset == name);
        CHECK(c.seed.has_value());
        CHECK(c.first_test == make_date(2011, 1, 1));
        CHECK(c.data_start == make_date(2006, 2, 7));
    }
    const std::string feat = slurp(kPresets / "features.toml");
    const RunConfig f = parse_run_config(feat, root / "presets", "features");
    CHECK(f.features.exogenous.size() == 20);
    CHECK(f.lstm.input_features == 28);
    std::size_t yoy = 0;
    for (const auto& s : f.sources) yoy += s.yoy;
    CHECK(yoy == 12);
    const RunConfig v = parse_run_config(slurp(kPresets / "verification.toml"), root / "presets", "verification");
    CHECK(v.end == make_date(2020, 4, 30));
    CHECK(v.replicate.runs == 30);
    REQUIRE(v.replicate.reference.has_value());
    CHECK(v.replicate.reference->mean == 1.858);
    const RunConfig t = parse_run_config(slurp(kPresets / "transformer.toml"), root / "presets", "transformer");
    CHECK(t.transformer.lookback == 504);
    CHECK(t.pretrain->vol_window == 30);
    fs::remove_all(root);
}

TEST_CASE("every problem is reported, one per line") {
    const std::string err = config_error(R"(
[run]
strategies = ["lstm", "svm", "lstm"]
colour = "blue"
cost_rate = -1
[universe]
assets = ["VTI", "XYZ"]
[source.prices]
path = "../data/fixtures/nope.csv"
columns = ["VTI"]
kind = "stock"
[schedule]
data_start = 2011-01-01
first_test = 2008-01-01
end = 2012-12-31
[lstm]
batch_size = 1
[fixed]
weights = [0.5, 0.5]
[bogus]
)");
    CAPTURE(err);
    for (const char* needle :
         {"unknown top-level entry 'bogus'", "[run] strategies: unknown strategy", "'lstm' listed twice",
          "unknown key 'colour'", "cost_rate: must be >= 0", "asset 'XYZ' is not provided",
          "data file not found", "nope.csv", "'stock' is not asset, feature or proxy", "[schedule]",
          "Sharpe loss"})
        CHECK(err.find(needle) != std::string::npos);
    CHECK(line_count(err) == 10);
}

TEST_CASE("cross-field checks") {
    const std::string base = kMinimal;
    auto with = [&](const std::string& strategies, const std::string& extra) {
        std::string t = base;
        t.replace(t.find("[\"balanced\"]"), 12, strategies);
        return config_error(t + extra);
    };
    CHECK(with("[\"fixed\"]", "[fixed]\nweights = [0.5, 0.5]\n").find("needs 4 entries") != std::string::npos);
    CHECK(with("[\"fixed\"]", "[fixed]\nweights = [0.5, 0.5, 0.5, -0.5]\n").find("[fixed]") != std::string::npos);
    CHECK(with("[\"fixed\"]", "[fixed]\nweights = [0.25, 0.25, 0.25, 0.25]\n").empty());
    CHECK(with("[\"mvo\"]", "[mvo]\nfloor = 0.3\n").find("[mvo]") != std::string::npos);
    CHECK(with("[\"balanced\"]", "[features]\nexogenous = [\"CPI\"]\n").find("exogenous 'CPI'") != std::string::npos);
    CHECK(with("[\"lstm\"]", "[pretrain]\nstock = \"W\"\nbond = \"B\"\ncommodity = \"G\"\n")
              .find("applies to the transformer") != std::string::npos);
    CHECK(with("[\"transformer\"]", "[transformer]\nembedding_size = 5\n").find("[transformer]") != std::string::npos);
    CHECK(with("[\"balanced\"]", "[replicate]\nreference_mean = 1.0\n").find("go together") != std::string::npos);
    CHECK(with("[\"balanced\"]", "[schedule]\n").find("defined twice") != std::string::npos);
    CHECK(with("[]", "").find("is empty") != std::string::npos);
    CHECK(with("[\"balanced\"]", "[run.extra]\n").find("unknown key 'extra'") != std::string::npos);
    CHECK(config_error("[run]\nstrategies = 3\n").find("expected an array of strings, got integer (line 2)") !=
          std::string::npos);
}

TEST_CASE("seed is mandatory for neural strategies") {
    std::string t = kMinimal;
    t.replace(t.find("[\"balanced\"]"), 12, "[\"lstm\", \"balanced\"]");
    RunConfig c = parse_run_config(t, kPresets);
    CHECK(c.has_neural());
    try {
        check_runnable(c);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("seed") != std::string::npos);
    }
    c.seed = 3;
    CHECK_NOTHROW(check_runnable(c));
    CHECK_NOTHROW(check_runnable(parse_run_config(kMinimal, kPresets)));
}

TEST_CASE("resolved settings as JSON") {
    const RunConfig c = load_run_config(kPresets / "fixture_transformer.toml");
    const auto j = nlohmann::json::parse(c.to_json().dump());
    CHECK(j["run"]["seed"] == 7);
    CHECK(j["run"]["strategies"] == nlohmann::json::array({"transformer"}));
    CHECK(j["transformer"]["ff_size"] == 16);
    CHECK(j["transformer"]["train"]["epochs"] == 2);
    CHECK(j["pretrain"]["train"]["epochs"] == 1);
    CHECK(j["schedule"]["first_test"] == "2011-01-01");
    CHECK(j["source"]["proxies"]["kind"] == "proxy");
    CHECK_FALSE(j.contains("lstm"));
}

TEST_CASE("data loading aligns sources onto the asset calendar") {
    const RunConfig c = load_run_config(kPresets / "fixture_features.toml");
    const LoadedData d = load_data(c);
    CHECK(d.panel.asset_names() == c.universe);
    REQUIRE(d.panel.features().size() == 2);
    CHECK(d.panel.features()[0].name == "CPI");
    CHECK(d.panel.dates().front() == make_date(2008, 1, 1));
    REQUIRE(d.digests.size() == 3);
    CHECK(d.digests[0].sha256.size() == 64);

    // Oracle: monthly CPI year-over-year read straight from the file, then
    // carried forward to each trading day.
    std::vector<std::pair<Date, double>> cpi;
    std::ifstream f(kSource / "data" / "fixtures" / "macro.csv");
    std::string line;
    std::getline(f, line);
    while (std::getline(f, line)) {
        const auto a = line.find(','), b = line.find(',', a + 1);
        cpi.emplace_back(parse_date(line.substr(0, a)), std::stod(line.substr(a + 1, b - a - 1)));
    }
    const Column& got = d.panel.feature("CPI");
    for (std::size_t t = 0; t < d.panel.rows(); t += 37) {
        const Date day = d.panel.dates()[t];
        std::size_t m = 0;
        while (m + 1 < cpi.size() && cpi[m + 1].first <= day) ++m;
        m = std::max<std::size_t>(m, 12);  // leading gap takes the first defined value
        const double expect = (cpi[m].second / cpi[m - 12].second - 1.0) * 100.0;
        CHECK(got.values[t] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("pretrain panel built from proxies") {
    const RunConfig c = load_run_config(kPresets / "fixture_transformer.toml");
    const LoadedData d = load_data(c);
    REQUIRE(d.pretrain_panel.has_value());
    CHECK(d.pretrain_panel->asset_names() == c.universe);
    CHECK(d.pretrain_panel->dates().front() > make_date(2004, 1, 1));
    CHECK(d.pretrain_panel->dates().front() < d.panel.dates().front());
    for (double v : d.pretrain_panel->asset("VIX").values) CHECK(v >= 0.0);
}

TEST_CASE("SHA-256 test vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
    CHECK_THROWS_AS(sha256_file(kSource / "no_such_file"), DataError);
}

}  // TEST_SUITE
