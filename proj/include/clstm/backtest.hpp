#pragma once

#include <optional>
#include <string>
#include <vector>

#include "clstm/metrics.hpp"
#include "clstm/ppo.hpp"

namespace clstm {

struct ScheduleWindow {
    Date train_start;
    Date train_end;
    Date trade_start;
    Date trade_end;
};
using Schedule = std::vector<ScheduleWindow>;

// Growing-window quarterly protocol: every window trains from the global
// calendar start; trade windows tile the out-of-sample period, final partial
// stride included.
Schedule make_schedule(const std::vector<Date>& calendar, Date train_end_initial,
                       int stride_months = 3);

enum class AgentKind { ppo, random, hold };

struct BacktestConfig {
    EnvConfig env;  // turbulence_threshold here is ignored; thresholds are frozen per window
    Hyperparams hyper;
    int64_t extractor_window = 30;
    int64_t extractor_hidden = 128;
    int64_t policy_hidden = 512;
    size_t turbulence_lookback = 252;
    bool turbulence_enabled = true;
    AgentKind agent = AgentKind::ppo;
    uint64_t seed = 0;
    double risk_free_annual = 0.0;
    double periods_per_year = 252.0;
};

// Provenance for the look-ahead audit: everything that served a trade window
// must carry a data timestamp strictly before trade_start.
struct WindowReport {
    size_t index = 0;
    Date train_start;
    Date train_end;
    Date trade_start;
    Date trade_end;
    std::optional<double> threshold;
    Date threshold_data_end;  // last date whose turbulence fed the threshold
    Date trained_through;     // last date whose bars fed the checkpoint
    std::string checkpoint_file;
};

struct BacktestReport {
    EquityCurve equity;
    TradeLog trades;
    std::vector<WindowReport> windows;
    MetricsReport metrics;
    std::vector<std::vector<TrainLogRow>> train_logs;
    std::optional<size_t> aborted_window;  // set when training diverged
    std::string abort_diagnostic;
};

// Runs the full rolling backtest and writes the report directory:
// equity.csv, trades.csv, metrics.csv, windows.csv,
// checkpoints/window_<k>.ckpt, train_log_<k>.csv.
BacktestReport run_backtest(const Panel& panel, const Schedule& schedule,
                            const BacktestConfig& config, const std::string& report_dir);

// Replays an executed trade log through fresh accounting; used as the
// independent check of the stored equity curve.
EquityCurve replay_trades(const Panel& panel, const TradeLog& trades, Date first, Date last,
                          double initial_balance, double cost_rate);

void save_windows(const std::vector<WindowReport>& windows, const std::string& path);
std::vector<WindowReport> load_windows(const std::string& path);

}  // namespace clstm
