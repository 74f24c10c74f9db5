#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sharpefolio/date.hpp"
#include "sharpefolio/tensor.hpp"

namespace sharpefolio {

struct Column {
    std::string name;
    std::vector<double> values;
};

// Calendar-aligned daily panel. Asset columns hold close prices, feature
// columns hold exogenous indicators. Dates are strictly increasing and every
// column carries exactly one finite value per date.
class PricePanel {
public:
    PricePanel() = default;
    PricePanel(std::vector<Date> dates, std::vector<Column> assets, std::vector<Column> features = {});

    const std::vector<Date>& dates() const { return dates_; }
    const std::vector<Column>& assets() const { return assets_; }
    const std::vector<Column>& features() const { return features_; }
    std::size_t rows() const { return dates_.size(); }

    const Column& asset(const std::string& name) const;
    const Column& feature(const std::string& name) const;
    // Looks in assets first, then features.
    const Column* find(const std::string& name) const;
    std::vector<std::string> asset_names() const;

    // Rows with first <= date <= last.
    PricePanel between(Date first, Date last) const;
    // Reorders (and subsets) asset columns.
    PricePanel with_asset_order(const std::vector<std::string>& names) const;

private:
    std::vector<Date> dates_;
    std::vector<Column> assets_;
    std::vector<Column> features_;
};

// Simple daily returns; row t holds p_t / p_{t-1} - 1 and is dated t.
struct ReturnPanel {
    std::vector<Date> dates;
    std::vector<std::string> assets;
    Tensor values;  // rows x assets

    std::size_t rows() const { return dates.size(); }
    std::size_t n_assets() const { return assets.size(); }
    std::vector<double> row(std::size_t t) const;
};

// Sliding windows over a shared feature matrix. Sample k reads feature rows
// [start_k, start_k + lookback) and targets the return row start_k + lookback.
class WindowedDataset {
public:
    WindowedDataset() = default;
    WindowedDataset(std::shared_ptr<const Tensor> features, std::shared_ptr<const Tensor> targets,
                    std::size_t lookback, std::vector<std::size_t> starts);

    std::size_t size() const { return starts_.size(); }
    bool empty() const { return starts_.empty(); }
    std::size_t lookback() const { return lookback_; }
    std::size_t n_features() const { return features_ ? features_->cols() : 0; }
    std::size_t n_assets() const { return targets_ ? targets_->cols() : 0; }
    const std::vector<std::size_t>& starts() const { return starts_; }
    std::size_t target_row(std::size_t k) const { return starts_[k] + lookback_; }

    // batch x lookback x features input tensor for the given sample indices.
    Tensor inputs(std::span<const std::size_t> samples) const;
    // batch x assets target returns.
    Tensor targets(std::span<const std::size_t> samples) const;
    Tensor all_inputs() const;
    Tensor all_targets() const;

    WindowedDataset subset(std::span<const std::size_t> samples) const;
    const Tensor& feature_matrix() const { return *features_; }
    const Tensor& target_matrix() const { return *targets_; }
    std::shared_ptr<const Tensor> feature_ptr() const { return features_; }
    std::shared_ptr<const Tensor> target_ptr() const { return targets_; }

private:
    std::shared_ptr<const Tensor> features_;
    std::shared_ptr<const Tensor> targets_;
    std::size_t lookback_ = 0;
    std::vector<std::size_t> starts_;
};

enum class ColumnKind { asset, feature };

struct CsvSchema {
    std::string date_column = "date";
    // (header name, internal name) pairs in output order.
    std::vector<std::pair<std::string, std::string>> columns;
    ColumnKind kind = ColumnKind::asset;
};

PricePanel load_csv(const std::filesystem::path& path, const CsvSchema& schema);

// Sorted union of all dates appearing in the panels.
std::vector<Date> union_calendar(std::span<const PricePanel> panels);

// Reindexes every column onto the calendar: forward-fill from the last
// observation on or before each date, then backfill leading gaps with the
// first observation.
PricePanel align_and_fill(std::span<const PricePanel> panels, const std::vector<Date>& calendar);

ReturnPanel simple_returns(const PricePanel& panel);

// (x_t / x_{t-period} - 1) * 100; output is `period` entries shorter.
std::vector<double> yoy_percent_change(std::span<const double> series, std::size_t period);
// Applies the transform to a feature column, dropping the first `period` rows
// of the whole panel.
PricePanel yoy_transform(const PricePanel& panel, const std::string& feature, std::size_t period);

// Annualized population std of the trailing `window` daily returns, times
// sqrt(252). Entry j corresponds to price index j + window.
std::vector<double> rolling_volatility(std::span<const double> prices, std::size_t window = 30);

std::pair<WindowedDataset, WindowedDataset> chronological_split(const WindowedDataset& dataset,
                                                                double validation_fraction = 0.10);

WindowedDataset build_windows(const Tensor& features, const ReturnPanel& targets, std::size_t lookback);
WindowedDataset build_windows(std::shared_ptr<const Tensor> features, std::shared_ptr<const Tensor> targets,
                              std::size_t lookback);

struct FeatureSpec {
    bool prices = true;
    bool returns = true;
    // Exogenous feature column names; empty means none.
    std::vector<std::string> exogenous;
};

// Feature matrix aligned row-for-row with simple_returns(panel): row t holds
// the selected prices, returns and exogenous values observed on return date t.
Tensor build_feature_matrix(const PricePanel& panel, const FeatureSpec& spec);
std::vector<std::string> feature_names(const PricePanel& panel, const FeatureSpec& spec);

// Windows over build_feature_matrix(panel) targeting simple_returns(panel).
WindowedDataset panel_windows(const PricePanel& panel, const FeatureSpec& spec, std::size_t lookback);

}  // namespace sharpefolio
