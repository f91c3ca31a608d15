#pragma once

#include <optional>
#include <string>
#include <vector>

#include "clstm/backtest.hpp"

namespace clstm {

// Operator configuration: plain key=value file, '#' comments, unknown keys
// rejected. Every default matches the reference configuration (time window
// 30, policy hidden 512, $1M initial capital, 0.1% cost).
struct RunConfig {
    // data / panel
    std::string data_csv;       // combined multi-ticker CSV
    std::string data_dir;       // or: directory of per-ticker CSVs
    Date min_start = Date::from_ymd(2009, 1, 1);
    std::string panel_path;     // default <out>/panel.csv
    int indicator_warmup = 63;
    size_t turbulence_lookback = 252;

    // environment
    EnvConfig env;              // threshold field unused; policy below
    std::string turbulence_policy = "liquidate";  // liquidate | freeze | off

    // networks
    int64_t extractor_window = 30;
    int64_t extractor_hidden = 128;
    int64_t policy_hidden = 512;

    // ppo
    Hyperparams hyper;

    // train command range
    std::optional<Date> train_start;
    std::optional<Date> train_end;

    // backtest
    Date backtest_train_end_initial = Date::from_ymd(2016, 1, 1);
    int backtest_stride_months = 3;
    std::string backtest_agent = "ppo";  // ppo | random | hold

    // metrics
    double risk_free_annual = 0.0;
    double periods_per_year = 252.0;

    // run
    std::optional<uint64_t> seed;
    std::string out_dir = "out";

    void apply_file(const std::string& path);
    void apply_kv(const std::string& key, const std::string& value);
    // Full resolved-value echo, written into the output directory for
    // provenance.
    std::string echo() const;

    TurbulencePolicy turbulence_policy_enum() const;
    bool turbulence_enabled() const { return turbulence_policy != "off"; }
    AgentKind agent_kind() const;
    std::string resolved_panel_path() const {
        return panel_path.empty() ? out_dir + "/panel.csv" : panel_path;
    }
};

}  // namespace clstm
