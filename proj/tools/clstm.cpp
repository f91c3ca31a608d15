#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "clstm/backtest.hpp"
#include "clstm/config.hpp"
#include "clstm/csv.hpp"
#include "clstm/kernels.hpp"

namespace fs = std::filesystem;
using namespace clstm;

namespace {

void write_echo(const RunConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    std::ofstream out(cfg.out_dir + "/config_echo.txt");
    out << cfg.echo();
}

Panel load_panel_checked(const RunConfig& cfg) {
    const std::string path = cfg.resolved_panel_path();
    if (!fs::exists(path)) {
        throw DataError("panel file not found: " + path + " (run `clstm ingest` first)");
    }
    Panel panel = load_panel(path);
    if (cfg.env.n_stocks != 0 && cfg.env.n_stocks != panel.n_tickers()) {
        throw DataError("config expects " + std::to_string(cfg.env.n_stocks) +
                        " stocks but the panel has " + std::to_string(panel.n_tickers()) +
                        "; set env.n_stocks accordingly");
    }
    return panel;
}

StateScales scales_for(const Panel& panel, const RunConfig& cfg, size_t base_index) {
    StateScales s;
    s.capital = cfg.env.initial_capital;
    s.h_max = static_cast<double>(cfg.env.h_max);
    const size_t n = panel.n_tickers();
    s.base_prices.resize(n);
    for (size_t k = 0; k < n; ++k) s.base_prices[k] = panel.adjclose[base_index * n + k];
    return s;
}

int cmd_ingest(RunConfig& cfg) {
    if (cfg.data_csv.empty() && cfg.data_dir.empty()) {
        throw DataError("ingest needs data.csv or data.dir in the config");
    }
    size_t rejected = 0;
    std::vector<BarSeries> series;
    if (!cfg.data_csv.empty()) {
        size_t r = 0;
        series = load_ohlcv_multi(cfg.data_csv, &r);
        rejected += r;
    }
    if (!cfg.data_dir.empty()) {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(cfg.data_dir)) {
            if (entry.path().extension() == ".csv") files.push_back(entry.path().string());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw DataError("no .csv files in " + cfg.data_dir);
        for (const auto& f : files) {
            size_t r = 0;
            for (auto& s : load_ohlcv_multi(f, &r)) series.push_back(std::move(s));
            rejected += r;
        }
    }

    AlignResult aligned = align_panel(series, cfg.min_start);
    IndicatorParams ip;
    ip.warmup = cfg.indicator_warmup;
    Panel panel = compute_indicators(aligned.panel, ip);
    fill_turbulence(panel, cfg.turbulence_lookback);

    fs::create_directories(fs::path(cfg.resolved_panel_path()).parent_path().empty()
                               ? "."
                               : fs::path(cfg.resolved_panel_path()).parent_path().string());
    save_panel(panel, cfg.resolved_panel_path());
    write_echo(cfg);

    std::printf("panel: %s\n", cfg.resolved_panel_path().c_str());
    std::printf("tickers kept: %zu\n", panel.n_tickers());
    for (const auto& t : panel.tickers) std::printf("  %s\n", t.c_str());
    std::printf("dropped: %zu\n", aligned.dropped.size());
    for (const auto& d : aligned.dropped) std::printf("  %s\n", d.c_str());
    std::printf("rejected rows: %zu\n", rejected);
    std::printf("calendar: %s .. %s (%zu days after warm-up of %d)\n",
                panel.dates.front().to_string().c_str(),
                panel.dates.back().to_string().c_str(), panel.n_dates(), cfg.indicator_warmup);
    const size_t first_turb = cfg.turbulence_lookback + 1;
    if (first_turb < panel.n_dates()) {
        std::printf("turbulence valid from %s\n", panel.dates[first_turb].to_string().c_str());
    } else {
        std::printf("turbulence: calendar shorter than lookback, all zero\n");
    }
    return 0;
}

int cmd_train(RunConfig& cfg) {
    Panel panel = load_panel_checked(cfg);
    const Date start = cfg.train_start.value_or(panel.dates.front());
    const Date end = cfg.train_end.value_or(panel.dates.back());
    const size_t b = panel.date_index_at_or_after(start);
    const size_t e = panel.date_index_at_or_before(end);

    EnvConfig env_cfg = cfg.env;
    env_cfg.n_stocks = panel.n_tickers();
    env_cfg.turbulence_threshold.reset();
    TradingEnv env(panel, b, e, env_cfg);

    ExtractorConfig ext;
    ext.state_dim = static_cast<int64_t>(1 + 6 * panel.n_tickers());
    ext.hidden = cfg.extractor_hidden;
    ext.window = cfg.extractor_window;
    PolicyConfig pol;
    pol.feature_dim = cfg.extractor_hidden;
    pol.hidden = cfg.policy_hidden;
    pol.n_actions = static_cast<int64_t>(panel.n_tickers());

    PpoAgent agent(ext, pol, cfg.hyper);
    agent.init_params(*cfg.seed);
    Rng rng(*cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    const StateScales scales = scales_for(panel, cfg, b);

    fs::create_directories(cfg.out_dir);
    write_echo(cfg);
    const TrainResult result = agent.train(env, scales, cfg.hyper.total_steps, rng);
    save_train_log(result.log, cfg.out_dir + "/train_log.csv");

    nn::Tensor meta({1});
    meta.v[0] = static_cast<double>(panel.dates[e].serial());
    nn::ParamList plist = agent.params();
    plist.push_back({"meta.trained_through", &meta});
    nn::save_checkpoint(cfg.out_dir + "/checkpoint.ckpt", plist);

    std::printf("trained %zu steps, %zu episodes, %zu updates on %s .. %s\n", result.steps,
                result.episodes, result.log.size(), panel.dates[b].to_string().c_str(),
                panel.dates[e].to_string().c_str());
    if (!result.log.empty()) {
        const auto& last = result.log.back();
        std::printf("last update: policy_loss=%.6g value_loss=%.6g entropy=%.6g mean_reward=%.6g\n",
                    last.policy_loss, last.value_loss, last.entropy, last.mean_reward);
    }
    std::printf("checkpoint: %s/checkpoint.ckpt\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_backtest(RunConfig& cfg) {
    Panel panel = load_panel_checked(cfg);
    const Schedule schedule =
        make_schedule(panel.dates, cfg.backtest_train_end_initial, cfg.backtest_stride_months);

    BacktestConfig bt;
    bt.env = cfg.env;
    bt.env.n_stocks = panel.n_tickers();
    bt.env.turbulence_policy = cfg.turbulence_policy_enum();
    bt.hyper = cfg.hyper;
    bt.extractor_window = cfg.extractor_window;
    bt.extractor_hidden = cfg.extractor_hidden;
    bt.policy_hidden = cfg.policy_hidden;
    bt.turbulence_lookback = cfg.turbulence_lookback;
    bt.turbulence_enabled = cfg.turbulence_enabled();
    bt.agent = cfg.agent_kind();
    bt.seed = *cfg.seed;
    bt.risk_free_annual = cfg.risk_free_annual;
    bt.periods_per_year = cfg.periods_per_year;

    write_echo(cfg);
    const std::string report_dir = cfg.out_dir + "/report";
    const BacktestReport report = run_backtest(panel, schedule, bt, report_dir);

    std::printf("windows: %zu\n", report.windows.size());
    for (const auto& w : report.windows) {
        std::printf("  [%zu] train %s..%s  trade %s..%s  threshold %s\n", w.index,
                    w.train_start.to_string().c_str(), w.train_end.to_string().c_str(),
                    w.trade_start.to_string().c_str(), w.trade_end.to_string().c_str(),
                    w.threshold ? csv::format_double(*w.threshold).c_str() : "off");
    }
    if (report.aborted_window) {
        std::fprintf(stderr, "window %zu aborted: %s\n", *report.aborted_window,
                     report.abort_diagnostic.c_str());
        std::fprintf(stderr, "partial report written to %s\n", report_dir.c_str());
        return 3;
    }
    std::printf("report: %s\n", report_dir.c_str());
    std::printf("CR=%.4f%% trades=%zu\n", report.metrics.cr * 100.0, report.metrics.nt);
    return 0;
}

void print_metrics(const MetricsReport& m) {
    std::printf("metric  value\n");
    std::printf("CR      %.4f%%\n", m.cr * 100.0);
    std::printf("MER     %.4f%%\n", m.mer * 100.0);
    std::printf("MPB     %.4f%%\n", m.mpb * 100.0);
    if (m.appt) std::printf("APPT    %.4f\n", *m.appt);
    else std::printf("APPT    NA\n");
    if (m.sharpe) std::printf("SR      %.4f\n", *m.sharpe);
    else std::printf("SR      NA\n");
    std::printf("NT      %zu\n", m.nt);
}

int cmd_report(RunConfig& cfg, const std::string& report_dir) {
    const std::string equity_path = report_dir + "/equity.csv";
    const std::string trades_path = report_dir + "/trades.csv";
    if (!fs::exists(equity_path)) throw DataError("missing " + equity_path);
    if (!fs::exists(trades_path)) throw DataError("missing " + trades_path);

    const EquityCurve equity = load_equity(equity_path);
    const TradeLog trades = load_trades(trades_path);
    if (equity.empty()) throw DataError("report: empty equity curve");
    const MetricsReport recomputed = compute_metrics(
        equity_values(equity), trades.size(), cfg.risk_free_annual, cfg.periods_per_year);
    print_metrics(recomputed);

    // Optional buy-and-hold comparison column when the panel is reachable.
    std::optional<Panel> panel;
    if (fs::exists(cfg.resolved_panel_path())) panel = load_panel(cfg.resolved_panel_path());

    const std::string plot_path = report_dir + "/equity_plot.csv";
    std::ofstream out(plot_path);
    if (!out) throw DataError("cannot write file: " + plot_path);
    size_t base_idx = 0;
    if (panel) base_idx = panel->date_index_at_or_after(equity.front().date);
    out << (panel ? "date,cumulative_return,buy_hold_index\n" : "date,cumulative_return\n");
    const double v0 = equity.front().portfolio_value;
    for (const auto& p : equity) {
        out << p.date.to_string() << ',' << csv::format_double(p.portfolio_value / v0 - 1.0);
        if (panel) {
            const size_t d = panel->date_index_at_or_after(p.date);
            const size_t n = panel->n_tickers();
            double acc = 0.0;
            for (size_t k = 0; k < n; ++k) {
                acc += panel->adjclose[d * n + k] / panel->adjclose[base_idx * n + k];
            }
            out << ',' << csv::format_double(acc / static_cast<double>(n) - 1.0);
        }
        out << '\n';
    }
    std::printf("plot data: %s\n", plot_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cascaded-LSTM PPO trading research engine"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<uint64_t> seed;
    app.add_option("--config", config_path, "key=value configuration file")->expected(1);
    app.add_option("--seed", seed, "RNG seed (required for train/backtest)");
    app.add_option("--out", out_dir, "output directory");

    auto* ingest = app.add_subcommand("ingest", "build the aligned indicator panel from raw CSVs");
    auto* train = app.add_subcommand("train", "train the agent on the configured range");
    auto* backtest = app.add_subcommand("backtest", "rolling retrain backtest");
    auto* report = app.add_subcommand("report", "print metrics and emit plot data");
    std::string report_dir;
    report->add_option("report_dir", report_dir, "report directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg.apply_file(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (seed) cfg.seed = seed;

        if ((train->parsed() || backtest->parsed()) && !cfg.seed) {
            std::fprintf(stderr, "error: --seed is required for train/backtest\n");
            return 1;
        }
        if (ingest->parsed()) return cmd_ingest(cfg);
        if (train->parsed()) return cmd_train(cfg);
        if (backtest->parsed()) return cmd_backtest(cfg);
        if (report->parsed()) return cmd_report(cfg, report_dir);
        return 1;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
