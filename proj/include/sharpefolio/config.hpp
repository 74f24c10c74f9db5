#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sharpefolio/backtest_engine.hpp"

namespace sharpefolio {

enum class SourceKind { asset, feature, proxy };

struct SourceConfig {
    std::string id;
    std::filesystem::path path;      // as written in the config
    std::filesystem::path resolved;  // relative paths are taken from the config's directory
    std::string date_column = "date";
    std::vector<std::string> columns;
    std::vector<std::string> names;  // internal names, defaults to columns
    SourceKind kind = SourceKind::asset;
    bool yoy = false;
    std::size_t yoy_period = 12;
};

struct PretrainSettings {
    std::string stock;
    std::string bond;
    std::string commodity;
    std::size_t vol_window = 30;
    TrainConfig train;
};

struct ReplicateSettings {
    std::size_t runs = 1;
    std::optional<SampleSummary> reference;
    std::vector<double> reference_sample;
};

struct RunConfig {
    std::filesystem::path config_path;
    std::string name;
    std::string preset;
    std::vector<StrategyKind> strategies;
    std::optional<std::uint64_t> seed;
    double cost_rate = kDefaultCostRate;
    std::size_t rolling_window = 252;
    std::string output_dir;
    std::optional<Date> zoom_start;

    std::vector<std::string> universe;
    std::vector<SourceConfig> sources;

    Date data_start{};
    Date first_test{};
    Date end{};
    int retrain_years = 2;

    FeatureSpec features;
    bool normalize = false;

    LstmAllocatorConfig lstm;
    TrainConfig lstm_train;
    TransformerAllocatorConfig transformer;
    TrainConfig transformer_train;
    std::optional<PretrainSettings> pretrain;

    MvoConfig mvo;
    std::vector<double> fixed_weights;
    ReplicateSettings replicate;

    bool has_neural() const;
    nlohmann::ordered_json to_json() const;
};

std::string display_name(StrategyKind k);

// Parses and checks a config. Every problem found is reported, one per line,
// in a single ConfigError.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir,
                           const std::string& source = "<config>");

// Checks that depend on command-line overrides (seed present for neural runs).
void check_runnable(const RunConfig& config);

struct FileDigest {
    std::string path;
    std::string sha256;
};

struct LoadedData {
    PricePanel panel;  // universe assets in order, plus exogenous features
    std::optional<PricePanel> pretrain_panel;
    std::vector<FileDigest> digests;
};

LoadedData load_data(const RunConfig& config);
WalkForwardSchedule make_schedule(const RunConfig& config);
std::vector<StrategySpec> build_strategies(const RunConfig& config, const LoadedData& data);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace sharpefolio
