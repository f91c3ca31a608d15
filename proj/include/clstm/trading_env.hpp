#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clstm/market_data.hpp"

namespace clstm {

enum class TurbulencePolicy { liquidate, freeze };

struct EnvConfig {
    double initial_capital = 1'000'000.0;
    int64_t h_max = 100;           // max shares per stock per step
    double cost_rate = 0.001;      // per-transaction, both sides
    double reward_scale = 1e-4;
    std::optional<double> turbulence_threshold;  // gate disabled when absent
    TurbulencePolicy turbulence_policy = TurbulencePolicy::liquidate;
    size_t n_stocks = 30;          // 0 = infer from the panel

    void validate() const;
};

// Normalized trade intents, one per stock, clamped into [-1,1] before
// execution.
using ActionVector = std::vector<double>;

struct MarketState {
    size_t date_index = 0;
    double balance = 0.0;
    std::vector<double> prices;
    std::vector<int64_t> holdings;
    std::vector<double> macd;
    std::vector<double> rsi;
    std::vector<double> cci;
    std::vector<double> adx;

    // Fixed-order concatenation [b, p, h, M, R, C, X]; length 1 + 6N.
    std::vector<double> as_vector() const;
};

struct StepInfo {
    std::vector<int64_t> executed;  // signed shares per stock, + = buy
    double cost = 0.0;
    double turbulence = 0.0;
    bool halted = false;
};

struct StepResult {
    MarketState next_state;
    double reward = 0.0;  // already scaled by reward_scale
    bool done = false;
    StepInfo info;
};

struct TradeRecord {
    Date date;
    std::string ticker;
    std::string side;  // "buy" or "sell"
    int64_t shares = 0;
    double price = 0.0;
    double cost = 0.0;
};
using TradeLog = std::vector<TradeRecord>;

struct EquityPoint {
    Date date;
    double portfolio_value = 0.0;
    double balance = 0.0;
    double turbulence = 0.0;
    bool halted = false;
};
using EquityCurve = std::vector<EquityPoint>;

// Multi-stock daily trading MDP over a date slice of a panel. Orders execute
// at the state's same-day adjusted close; sells run before buys; the balance
// can never go negative and shorting is impossible by construction.
class TradingEnv {
public:
    TradingEnv(const Panel& panel, Date range_begin, Date range_end, EnvConfig config);
    TradingEnv(const Panel& panel, size_t begin_index, size_t end_index, EnvConfig config);

    MarketState reset();
    // Carried portfolio (rolling backtests hand balance/holdings across
    // windows).
    MarketState reset(double balance, const std::vector<int64_t>& holdings);

    StepResult step(const ActionVector& action);

    const MarketState& state() const { return state_; }
    std::vector<double> state_vector() const { return state_.as_vector(); }
    bool done() const { return done_; }
    double portfolio_value() const;
    double turbulence_now() const { return panel_->turbulence[state_.date_index]; }
    bool gate_active() const;

    size_t n_stocks() const { return panel_->n_tickers(); }
    size_t begin_index() const { return begin_; }
    size_t end_index() const { return end_; }
    const Panel& panel() const { return *panel_; }
    const EnvConfig& config() const { return cfg_; }

private:
    MarketState build_state(size_t date_index, double balance,
                            const std::vector<int64_t>& holdings) const;

    const Panel* panel_;
    EnvConfig cfg_;
    size_t begin_ = 0;
    size_t end_ = 0;  // index of the final date (inclusive)
    MarketState state_;
    bool done_ = false;
    bool started_ = false;
};

void save_trades(const TradeLog& log, const std::string& path);
TradeLog load_trades(const std::string& path);
void save_equity(const EquityCurve& curve, const std::string& path);
EquityCurve load_equity(const std::string& path);

}  // namespace clstm
