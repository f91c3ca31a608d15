#include "clstm/trading_env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "clstm/csv.hpp"

namespace clstm {

void EnvConfig::validate() const {
    if (!(initial_capital > 0.0)) throw DataError("initial_capital must be > 0");
    if (h_max < 1) throw DataError("h_max must be >= 1");
    if (!(cost_rate >= 0.0 && cost_rate < 1.0)) throw DataError("cost_rate must be in [0,1)");
    if (!(reward_scale > 0.0)) throw DataError("reward_scale must be > 0");
}

std::vector<double> MarketState::as_vector() const {
    const size_t n = prices.size();
    std::vector<double> v;
    v.reserve(1 + 6 * n);
    v.push_back(balance);
    v.insert(v.end(), prices.begin(), prices.end());
    for (int64_t h : holdings) v.push_back(static_cast<double>(h));
    v.insert(v.end(), macd.begin(), macd.end());
    v.insert(v.end(), rsi.begin(), rsi.end());
    v.insert(v.end(), cci.begin(), cci.end());
    v.insert(v.end(), adx.begin(), adx.end());
    return v;
}

TradingEnv::TradingEnv(const Panel& panel, Date range_begin, Date range_end, EnvConfig config)
    : TradingEnv(panel, panel.date_index_at_or_after(range_begin),
                 panel.date_index_at_or_before(range_end), std::move(config)) {}

TradingEnv::TradingEnv(const Panel& panel, size_t begin_index, size_t end_index, EnvConfig config)
    : panel_(&panel), cfg_(std::move(config)), begin_(begin_index), end_(end_index) {
    cfg_.validate();
    if (!panel_->has_indicators) throw DataError("TradingEnv: panel lacks indicators");
    if (end_ >= panel_->n_dates() || begin_ >= end_) {
        throw DataError("TradingEnv: date range must lie in the panel and span at least 2 dates");
    }
    if (cfg_.n_stocks != 0 && cfg_.n_stocks != panel_->n_tickers()) {
        throw DataError("TradingEnv: config expects " + std::to_string(cfg_.n_stocks) +
                        " stocks, panel has " + std::to_string(panel_->n_tickers()));
    }
}

MarketState TradingEnv::build_state(size_t d, double balance,
                                    const std::vector<int64_t>& holdings) const {
    const size_t n = panel_->n_tickers();
    MarketState s;
    s.date_index = d;
    s.balance = balance;
    s.holdings = holdings;
    s.prices.resize(n);
    s.macd.resize(n);
    s.rsi.resize(n);
    s.cci.resize(n);
    s.adx.resize(n);
    for (size_t k = 0; k < n; ++k) {
        s.prices[k] = panel_->adjclose[d * n + k];
        s.macd[k] = panel_->macd[d * n + k];
        s.rsi[k] = panel_->rsi[d * n + k];
        s.cci[k] = panel_->cci[d * n + k];
        s.adx[k] = panel_->adx[d * n + k];
    }
    return s;
}

MarketState TradingEnv::reset() {
    return reset(cfg_.initial_capital, std::vector<int64_t>(panel_->n_tickers(), 0));
}

MarketState TradingEnv::reset(double balance, const std::vector<int64_t>& holdings) {
    if (holdings.size() != panel_->n_tickers()) {
        throw DataError("TradingEnv::reset: holdings size mismatch");
    }
    state_ = build_state(begin_, balance, holdings);
    done_ = false;
    started_ = true;
    return state_;
}

bool TradingEnv::gate_active() const {
    return cfg_.turbulence_threshold &&
           panel_->turbulence[state_.date_index] > *cfg_.turbulence_threshold;
}

double TradingEnv::portfolio_value() const {
    double v = state_.balance;
    for (size_t k = 0; k < state_.prices.size(); ++k) {
        v += state_.prices[k] * static_cast<double>(state_.holdings[k]);
    }
    return v;
}

StepResult TradingEnv::step(const ActionVector& action) {
    if (!started_) throw std::logic_error("TradingEnv: step before reset");
    if (done_) throw std::logic_error("TradingEnv: step after episode end");
    const size_t n = panel_->n_tickers();
    if (action.size() != n) throw DataError("TradingEnv: action size mismatch");

    const size_t t = state_.date_index;
    const double turb = panel_->turbulence[t];
    const bool gated = gate_active();

    // Intent in integer shares; round half away from zero.
    std::vector<int64_t> desired(n);
    for (size_t k = 0; k < n; ++k) {
        const double a = std::clamp(action[k], -1.0, 1.0);
        desired[k] = std::llround(a * static_cast<double>(cfg_.h_max));
    }
    if (gated) {
        if (cfg_.turbulence_policy == TurbulencePolicy::liquidate) {
            for (size_t k = 0; k < n; ++k) desired[k] = -state_.holdings[k];
        } else {
            std::fill(desired.begin(), desired.end(), 0);
        }
    }

    std::vector<int64_t> executed(n, 0);
    std::vector<int64_t> holdings = state_.holdings;

    // Sells first (ascending index), clipped to current holdings.
    double sell_value = 0.0;
    for (size_t k = 0; k < n; ++k) {
        if (desired[k] >= 0) continue;
        const int64_t qty = std::min(-desired[k], holdings[k]);
        if (qty == 0) continue;
        executed[k] = -qty;
        holdings[k] -= qty;
        sell_value += state_.prices[k] * static_cast<double>(qty);
    }

    // Buys greedily in index order against the cash freed by the sells,
    // each clipped to the largest affordable count including its fee.
    double avail = state_.balance + sell_value - cfg_.cost_rate * sell_value;
    double buy_value = 0.0;
    if (!(gated && cfg_.turbulence_policy == TurbulencePolicy::liquidate)) {
        const double unit_rate = 1.0 + cfg_.cost_rate;
        for (size_t k = 0; k < n; ++k) {
            if (desired[k] <= 0) continue;
            const double price = state_.prices[k];
            int64_t qty = std::min<int64_t>(
                desired[k], static_cast<int64_t>(std::floor(avail / (price * unit_rate))));
            while (qty > 0 && price * static_cast<double>(qty) * unit_rate > avail) --qty;
            if (qty <= 0) continue;
            executed[k] = qty;
            holdings[k] += qty;
            const double v = price * static_cast<double>(qty);
            buy_value += v;
            avail -= v * unit_rate;
        }
    }

    const double cost = cfg_.cost_rate * (sell_value + buy_value);
    double new_balance = state_.balance + sell_value - buy_value - cost;
    if (new_balance < 0.0) {
        if (new_balance < -1e-6) throw std::logic_error("TradingEnv: balance went negative");
        new_balance = 0.0;  // last-bit rounding of the grouped sum
    }

    const double value_before = portfolio_value();
    MarketState next = build_state(t + 1, new_balance, holdings);
    double value_after = next.balance;
    for (size_t k = 0; k < n; ++k) {
        value_after += next.prices[k] * static_cast<double>(next.holdings[k]);
    }

    StepResult r;
    r.reward = cfg_.reward_scale * (value_after - value_before);
    r.done = (t + 1 == end_);
    r.info.executed = std::move(executed);
    r.info.cost = cost;
    r.info.turbulence = turb;
    r.info.halted = gated;
    state_ = std::move(next);
    done_ = r.done;
    r.next_state = state_;
    return r;
}

void save_trades(const TradeLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "date,ticker,side,shares,price,cost\n";
    for (const auto& t : log) {
        out << t.date.to_string() << ',' << t.ticker << ',' << t.side << ',' << t.shares << ','
            << csv::format_double(t.price) << ',' << csv::format_double(t.cost) << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

TradeLog load_trades(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty() || !csv::header_matches(lines[0], "date,ticker,side,shares,price,cost")) {
        throw DataError(path + ": bad trade log header");
    }
    TradeLog log;
    for (size_t i = 1; i < lines.size(); ++i) {
        const std::string_view line = csv::trim(lines[i]);
        if (line.empty()) continue;
        const auto f = csv::split(line);
        if (f.size() != 6) throw DataError(path + ":" + std::to_string(i + 1) + ": expected 6 fields");
        TradeRecord t;
        t.date = Date::parse(csv::trim(f[0]));
        t.ticker = std::string(csv::trim(f[1]));
        t.side = std::string(csv::trim(f[2]));
        if (!csv::parse_i64(f[3], t.shares) || !csv::parse_double(f[4], t.price) ||
            !csv::parse_double(f[5], t.cost)) {
            throw DataError(path + ":" + std::to_string(i + 1) + ": malformed numeric field");
        }
        log.push_back(std::move(t));
    }
    return log;
}

void save_equity(const EquityCurve& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "date,portfolio_value,balance,turbulence,halted\n";
    for (const auto& p : curve) {
        out << p.date.to_string() << ',' << csv::format_double(p.portfolio_value) << ','
            << csv::format_double(p.balance) << ',' << csv::format_double(p.turbulence) << ','
            << (p.halted ? 1 : 0) << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

EquityCurve load_equity(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty() ||
        !csv::header_matches(lines[0], "date,portfolio_value,balance,turbulence,halted")) {
        throw DataError(path + ": bad equity curve header");
    }
    EquityCurve curve;
    for (size_t i = 1; i < lines.size(); ++i) {
        const std::string_view line = csv::trim(lines[i]);
        if (line.empty()) continue;
        const auto f = csv::split(line);
        if (f.size() != 5) throw DataError(path + ":" + std::to_string(i + 1) + ": expected 5 fields");
        EquityPoint p;
        p.date = Date::parse(csv::trim(f[0]));
        int64_t halted = 0;
        if (!csv::parse_double(f[1], p.portfolio_value) || !csv::parse_double(f[2], p.balance) ||
            !csv::parse_double(f[3], p.turbulence) || !csv::parse_i64(f[4], halted)) {
            throw DataError(path + ":" + std::to_string(i + 1) + ": malformed numeric field");
        }
        p.halted = halted != 0;
        curve.push_back(p);
    }
    return curve;
}

}  // namespace clstm
