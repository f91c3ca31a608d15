#include "clstm/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "clstm/csv.hpp"

namespace clstm {

namespace fs = std::filesystem;

Schedule make_schedule(const std::vector<Date>& calendar, Date train_end_initial,
                       int stride_months) {
    if (calendar.empty()) throw DataError("make_schedule: empty calendar");
    if (stride_months < 1) throw DataError("make_schedule: stride must be >= 1 month");
    if (!(calendar.front() <= train_end_initial)) {
        throw DataError("make_schedule: initial train end precedes the calendar start");
    }

    auto last_at_or_before = [&](Date d) -> std::optional<Date> {
        auto it = std::upper_bound(calendar.begin(), calendar.end(), d);
        if (it == calendar.begin()) return std::nullopt;
        return *(it - 1);
    };
    auto first_after = [&](Date d) -> std::optional<Date> {
        auto it = std::upper_bound(calendar.begin(), calendar.end(), d);
        if (it == calendar.end()) return std::nullopt;
        return *it;
    };

    Schedule schedule;
    const Date global_start = calendar.front();
    for (int k = 0;; ++k) {
        const Date boundary = train_end_initial.add_months(k * stride_months);
        const auto trade_start = first_after(boundary);
        if (!trade_start) break;
        const auto train_end = last_at_or_before(boundary);
        if (!train_end) throw DataError("make_schedule: no training data before " +
                                        boundary.to_string());
        const Date next_boundary = train_end_initial.add_months((k + 1) * stride_months);
        Date trade_end = calendar.back();
        if (const auto e = last_at_or_before(next_boundary); e && *e >= *trade_start) {
            trade_end = *e;
        }
        schedule.push_back({global_start, *train_end, *trade_start, trade_end});
        if (trade_end == calendar.back()) break;
    }
    if (schedule.empty()) throw DataError("make_schedule: no out-of-sample dates");
    return schedule;
}

namespace {

ActionVector random_action(size_t n, Rng& rng) {
    ActionVector a(n);
    for (double& x : a) x = rng.uniform(-1.0, 1.0);
    return a;
}

}  // namespace

BacktestReport run_backtest(const Panel& panel, const Schedule& schedule,
                            const BacktestConfig& config, const std::string& report_dir) {
    if (schedule.empty()) throw DataError("run_backtest: empty schedule");
    if (panel.dates.front() > schedule.front().train_start ||
        panel.dates.back() < schedule.back().trade_end) {
        throw DataError("run_backtest: panel does not cover the schedule");
    }
    fs::create_directories(report_dir);
    fs::create_directories(report_dir + "/checkpoints");

    const size_t N = panel.n_tickers();
    const size_t global_start_idx = panel.date_index_at_or_after(schedule.front().train_start);

    ExtractorConfig ext_cfg;
    ext_cfg.state_dim = static_cast<int64_t>(1 + 6 * N);
    ext_cfg.hidden = config.extractor_hidden;
    ext_cfg.window = config.extractor_window;
    PolicyConfig pol_cfg;
    pol_cfg.feature_dim = config.extractor_hidden;
    pol_cfg.hidden = config.policy_hidden;
    pol_cfg.n_actions = static_cast<int64_t>(N);

    PpoAgent agent(ext_cfg, pol_cfg, config.hyper);
    agent.init_params(config.seed);
    Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

    // One transform for the whole backtest, anchored at the global training
    // start, so train and trade phases see the same scaling.
    StateScales scales;
    scales.capital = config.env.initial_capital;
    scales.h_max = static_cast<double>(config.env.h_max);
    scales.base_prices.resize(N);
    for (size_t k = 0; k < N; ++k) {
        scales.base_prices[k] = panel.adjclose[global_start_idx * N + k];
    }

    BacktestReport report;
    double carried_balance = config.env.initial_capital;
    std::vector<int64_t> carried_holdings(N, 0);

    for (size_t k = 0; k < schedule.size(); ++k) {
        const ScheduleWindow& w = schedule[k];
        const size_t train_b = panel.date_index_at_or_after(w.train_start);
        const size_t train_e = panel.date_index_at_or_before(w.train_end);

        WindowReport wr;
        wr.index = k;
        wr.train_start = w.train_start;
        wr.train_end = w.train_end;
        wr.trade_start = w.trade_start;
        wr.trade_end = w.trade_end;
        wr.trained_through = panel.dates[train_e];
        wr.threshold_data_end = panel.dates[train_e];

        if (config.turbulence_enabled) {
            const size_t first_valid = config.turbulence_lookback + 1;
            if (train_e < first_valid) {
                throw DataError("run_backtest: training range ends before any turbulence value "
                                "is computable; shrink turbulence_lookback");
            }
            const std::vector<double> history(panel.turbulence.begin() + first_valid,
                                              panel.turbulence.begin() + train_e + 1);
            wr.threshold = turbulence_threshold(history);
        }

        // Train on the growing in-sample window (warm-started from the
        // previous window's parameters). The gate is a trading-time safety
        // valve, so the training environment runs ungated.
        if (config.agent == AgentKind::ppo && config.hyper.total_steps > 0) {
            EnvConfig train_env_cfg = config.env;
            train_env_cfg.turbulence_threshold.reset();
            TradingEnv train_env(panel, train_b, train_e, train_env_cfg);
            try {
                const TrainResult tr =
                    agent.train(train_env, scales, config.hyper.total_steps, rng);
                report.train_logs.push_back(tr.log);
                save_train_log(tr.log,
                               report_dir + "/train_log_" + std::to_string(k) + ".csv");
            } catch (const NumericError& e) {
                report.aborted_window = k;
                report.abort_diagnostic = e.what();
                break;
            }
        }

        wr.checkpoint_file = "checkpoints/window_" + std::to_string(k) + ".ckpt";
        {
            nn::Tensor meta({1});
            meta.v[0] = static_cast<double>(wr.trained_through.serial());
            nn::ParamList plist = agent.params();
            plist.push_back({"meta.trained_through", &meta});
            nn::save_checkpoint(report_dir + "/" + wr.checkpoint_file, plist);
        }

        // Trade the window with the frozen deterministic policy, carrying
        // the portfolio across windows.
        EnvConfig trade_env_cfg = config.env;
        trade_env_cfg.turbulence_threshold = wr.threshold;
        TradingEnv env(panel, w.trade_start, w.trade_end, trade_env_cfg);
        MarketState state = env.reset(carried_balance, carried_holdings);

        auto equity_point = [&](const MarketState& s, double value) {
            EquityPoint p;
            p.date = panel.dates[s.date_index];
            p.portfolio_value = value;
            p.balance = s.balance;
            p.turbulence = panel.turbulence[s.date_index];
            p.halted = wr.threshold && p.turbulence > *wr.threshold;
            return p;
        };
        report.equity.push_back(equity_point(state, env.portfolio_value()));

        std::vector<std::vector<double>> history;
        history.push_back(normalize_state(state.as_vector(), scales));
        RecurrentState rec = agent.policy().initial_state();
        const size_t T = static_cast<size_t>(ext_cfg.window);

        while (!env.done()) {
            ActionVector act;
            if (config.agent == AgentKind::random) {
                act = random_action(N, rng);
            } else if (config.agent == AgentKind::hold) {
                act.assign(N, 0.0);
            } else {
                const StateWindow win = warm_pad(history, T);
                const std::vector<double> f = agent.extractor().extract(win);
                std::vector<double> mean;
                double value = 0.0;
                RecurrentState rec_out;
                agent.policy().forward(f.data(), rec, mean, value, rec_out);
                rec = rec_out;
                act = sample_action(mean, agent.policy().log_std().v, rng, true).clamped;
            }
            const Date order_date = panel.dates[env.state().date_index];
            const std::vector<double> prices = env.state().prices;
            const StepResult sr = env.step(act);
            for (size_t i = 0; i < N; ++i) {
                if (sr.info.executed[i] == 0) continue;
                TradeRecord rec_row;
                rec_row.date = order_date;
                rec_row.ticker = panel.tickers[i];
                rec_row.side = sr.info.executed[i] > 0 ? "buy" : "sell";
                rec_row.shares = std::abs(sr.info.executed[i]);
                rec_row.price = prices[i];
                rec_row.cost = config.env.cost_rate * prices[i] *
                               static_cast<double>(rec_row.shares);
                report.trades.push_back(std::move(rec_row));
            }
            report.equity.push_back(equity_point(sr.next_state, env.portfolio_value()));
            history.push_back(normalize_state(sr.next_state.as_vector(), scales));
            if (history.size() > T) history.erase(history.begin());
        }
        carried_balance = env.state().balance;
        carried_holdings = env.state().holdings;
        report.windows.push_back(std::move(wr));
    }

    if (!report.equity.empty()) {
        report.metrics = compute_metrics(equity_values(report.equity), report.trades.size(),
                                         config.risk_free_annual, config.periods_per_year);
        save_metrics(report.metrics, report_dir + "/metrics.csv");
    }
    save_equity(report.equity, report_dir + "/equity.csv");
    save_trades(report.trades, report_dir + "/trades.csv");
    save_windows(report.windows, report_dir + "/windows.csv");
    return report;
}

EquityCurve replay_trades(const Panel& panel, const TradeLog& trades, Date first, Date last,
                          double initial_balance, double cost_rate) {
    const size_t N = panel.n_tickers();
    std::map<std::string, size_t> ticker_index;
    for (size_t k = 0; k < N; ++k) ticker_index[panel.tickers[k]] = k;

    std::map<int64_t, std::vector<const TradeRecord*>> by_date;
    for (const auto& t : trades) by_date[t.date.serial()].push_back(&t);

    const size_t b = panel.date_index_at_or_after(first);
    const size_t e = panel.date_index_at_or_before(last);
    double balance = initial_balance;
    std::vector<int64_t> holdings(N, 0);
    EquityCurve curve;

    for (size_t d = b; d <= e; ++d) {
        // The environment marks each date before that date's orders execute
        // (orders dated d surface in the d+1 row), so: mark, then apply.
        EquityPoint p;
        p.date = panel.dates[d];
        p.balance = balance;
        p.turbulence = panel.turbulence[d];
        double value = balance;
        for (size_t k = 0; k < N; ++k) {
            value += panel.adjclose[d * N + k] * static_cast<double>(holdings[k]);
        }
        p.portfolio_value = value;
        curve.push_back(p);

        if (auto it = by_date.find(panel.dates[d].serial()); it != by_date.end()) {
            double sell_value = 0.0, buy_value = 0.0;
            for (const TradeRecord* t : it->second) {
                auto ti = ticker_index.find(t->ticker);
                if (ti == ticker_index.end()) {
                    throw DataError("replay_trades: unknown ticker " + t->ticker);
                }
                const double v = t->price * static_cast<double>(t->shares);
                if (t->side == "sell") {
                    sell_value += v;
                    holdings[ti->second] -= t->shares;
                    if (holdings[ti->second] < 0) {
                        throw DataError("replay_trades: trade log oversells " + t->ticker);
                    }
                } else {
                    buy_value += v;
                    holdings[ti->second] += t->shares;
                }
            }
            balance += sell_value - buy_value - cost_rate * (sell_value + buy_value);
            if (balance < 0.0) {
                if (balance < -1e-6) throw DataError("replay_trades: balance went negative");
                balance = 0.0;
            }
        }
    }
    return curve;
}

void save_windows(const std::vector<WindowReport>& windows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "window,train_start,train_end,trade_start,trade_end,threshold,"
           "threshold_data_end,trained_through,checkpoint\n";
    for (const auto& w : windows) {
        out << w.index << ',' << w.train_start.to_string() << ',' << w.train_end.to_string()
            << ',' << w.trade_start.to_string() << ',' << w.trade_end.to_string() << ','
            << (w.threshold ? csv::format_double(*w.threshold) : std::string("NA")) << ','
            << w.threshold_data_end.to_string() << ',' << w.trained_through.to_string() << ','
            << w.checkpoint_file << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

std::vector<WindowReport> load_windows(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty() ||
        !csv::header_matches(lines[0],
                             "window,train_start,train_end,trade_start,trade_end,threshold,"
                             "threshold_data_end,trained_through,checkpoint")) {
        throw DataError(path + ": bad windows header");
    }
    std::vector<WindowReport> windows;
    for (size_t i = 1; i < lines.size(); ++i) {
        const std::string_view line = csv::trim(lines[i]);
        if (line.empty()) continue;
        const auto f = csv::split(line);
        if (f.size() != 9) throw DataError(path + ":" + std::to_string(i + 1) + ": expected 9 fields");
        WindowReport w;
        int64_t idx = 0;
        if (!csv::parse_i64(f[0], idx)) throw DataError(path + ": malformed window index");
        w.index = static_cast<size_t>(idx);
        w.train_start = Date::parse(csv::trim(f[1]));
        w.train_end = Date::parse(csv::trim(f[2]));
        w.trade_start = Date::parse(csv::trim(f[3]));
        w.trade_end = Date::parse(csv::trim(f[4]));
        if (csv::trim(f[5]) != "NA") {
            double thr = 0.0;
            if (!csv::parse_double(f[5], thr)) throw DataError(path + ": malformed threshold");
            w.threshold = thr;
        }
        w.threshold_data_end = Date::parse(csv::trim(f[6]));
        w.trained_through = Date::parse(csv::trim(f[7]));
        w.checkpoint_file = std::string(csv::trim(f[8]));
        windows.push_back(std::move(w));
    }
    return windows;
}

}  // namespace clstm
