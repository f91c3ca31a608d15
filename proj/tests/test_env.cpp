#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "clstm/trading_env.hpp"
#include "support/synthetic.hpp"

using namespace clstm;

namespace {

EnvConfig toy_config(size_t n_stocks) {
    EnvConfig cfg;
    cfg.n_stocks = n_stocks;
    return cfg;
}

double value_of(const MarketState& s) {
    double v = s.balance;
    for (size_t k = 0; k < s.prices.size(); ++k) {
        v += s.prices[k] * static_cast<double>(s.holdings[k]);
    }
    return v;
}

}  // namespace

TEST_CASE("reset starts with $1M, empty holdings and the full state vector") {
    const Panel p = testing::make_panel(
        {{"A", 100, 0.0, 0.01}, {"B", 50, 0.0, 0.01}}, 60, 9, 20);
    TradingEnv env(p, size_t{0}, p.n_dates() - 1, toy_config(2));
    const MarketState s = env.reset();
    CHECK(s.balance == 1'000'000.0);
    for (int64_t h : s.holdings) CHECK(h == 0);
    CHECK(s.as_vector().size() == 13);  // 1 + 6*2

    const MarketState s2 = env.reset();
    CHECK(s.as_vector() == s2.as_vector());
}

TEST_CASE("the 30-stock state vector is 181-dimensional") {
    std::vector<testing::SyntheticSpec> specs;
    for (int k = 0; k < 30; ++k) {
        specs.push_back({"S" + std::to_string(k), 50.0 + k, 0.0, 0.01});
    }
    const Panel p = testing::make_panel(specs, 40, 17, 15);
    TradingEnv env(p, size_t{0}, p.n_dates() - 1, toy_config(30));
    CHECK(env.reset().as_vector().size() == 181);
}

TEST_CASE("zero action with an empty portfolio earns exactly zero") {
    const Panel p = testing::make_panel({{"A", 100, 0.002, 0.03}}, 50, 11, 15);
    TradingEnv env(p, size_t{0}, p.n_dates() - 1, toy_config(1));
    env.reset();
    while (!env.done()) {
        const StepResult r = env.step({0.0});
        CHECK(r.reward == 0.0);
    }
    CHECK(env.state().balance == 1'000'000.0);
}

TEST_CASE("hand-accounted single-stock buy: costs, balance and reward") {
    // price exactly 100 on day 0 and 110 on day 1
    const Panel p = testing::panel_from_prices({{100.0, 110.0, 120.0}});
    TradingEnv env(p, size_t{0}, size_t{2}, toy_config(1));
    env.reset();
    const StepResult r = env.step({0.1});  // round(0.1 * 100) = 10 shares

    CHECK(r.info.executed[0] == 10);
    // spreadsheet recomputation: buy cost 10*100*1.001
    CHECK(env.state().balance == doctest::Approx(1'000'000.0 - 1001.0).epsilon(1e-12));
    CHECK(r.info.cost == doctest::Approx(1.0).epsilon(1e-12));
    // reward = 1e-4 * (10*110 - 10*100 - 1.0)
    CHECK(r.reward == doctest::Approx(1e-4 * 99.0).epsilon(1e-12));
}

TEST_CASE("sell requests clip to current holdings") {
    const Panel p = testing::panel_from_prices({{100.0, 100.0, 100.0, 100.0}});
    EnvConfig cfg = toy_config(1);
    cfg.cost_rate = 0.0;
    TradingEnv env(p, size_t{0}, size_t{3}, cfg);
    env.reset();
    env.step({0.3});  // buy 30
    CHECK(env.state().holdings[0] == 30);
    const StepResult r = env.step({-0.5});  // ask to sell 50
    CHECK(r.info.executed[0] == -30);
    CHECK(env.state().holdings[0] == 0);
}

TEST_CASE("stepping a finished episode is a contract violation") {
    const Panel p = testing::panel_from_prices({{100.0, 101.0}});
    TradingEnv env(p, size_t{0}, size_t{1}, toy_config(1));
    env.reset();
    const StepResult r = env.step({0.0});
    CHECK(r.done);
    CHECK_THROWS_AS(env.step({0.0}), std::logic_error);
}

TEST_CASE("state_vector is stable between steps and tracks executed orders") {
    const Panel p = testing::panel_from_prices({{100.0, 100.0, 100.0}, {50.0, 50.0, 50.0}});
    EnvConfig cfg = toy_config(2);
    TradingEnv env(p, size_t{0}, size_t{2}, cfg);
    env.reset();
    CHECK(env.state_vector() == env.state_vector());
    env.step({0.05, -1.0});
    const auto v = env.state_vector();
    CHECK(v[1 + 2 + 0] == 5.0);  // holdings block starts after balance + prices
    CHECK(v[1 + 2 + 1] == 0.0);
}

TEST_CASE("random-action fuzz: solvency, no shorting, accounting identity") {
    const Panel p = testing::make_panel({{"A", 100, 0.0005, 0.02},
                                         {"B", 60, -0.0003, 0.015},
                                         {"C", 20, 0.0, 0.03}},
                                        220, 321, 20);
    EnvConfig cfg = toy_config(3);
    cfg.initial_capital = 50'000.0;  // tight cash so buys regularly clip
    TradingEnv env(p, size_t{0}, p.n_dates() - 1, cfg);
    Rng rng(555);

    MarketState state = env.reset();
    for (int episode = 0; episode < 4; ++episode) {
        while (!env.done()) {
            ActionVector a(3);
            for (double& x : a) x = rng.uniform(-1.5, 1.5);  // pre-clamp range
            const MarketState before = state;
            const StepResult r = env.step(a);
            state = r.next_state;

            double sells = 0.0, buys = 0.0;
            for (size_t k = 0; k < 3; ++k) {
                CHECK(std::abs(r.info.executed[k]) <= cfg.h_max);
                const double v = before.prices[k] * static_cast<double>(std::abs(r.info.executed[k]));
                (r.info.executed[k] < 0 ? sells : buys) += v;
            }
            const double cost = cfg.cost_rate * (sells + buys);
            CHECK(std::abs(state.balance - (before.balance + sells - buys - cost)) <= 1e-9);
            CHECK(state.balance >= 0.0);
            for (int64_t h : state.holdings) CHECK(h >= 0);
            // gross value change minus cost equals the raw reward
            const double gross =
                (before.balance + sells - buys) +
                [&] {
                    double hv = 0.0;
                    for (size_t k = 0; k < 3; ++k) {
                        hv += state.prices[k] * static_cast<double>(state.holdings[k]);
                    }
                    return hv;
                }() -
                value_of(before);
            CHECK(std::abs(r.reward / cfg.reward_scale - (gross - cost)) <= 1e-9);
        }
        state = env.reset();
    }
}

TEST_CASE("zero cost and zero action preserve capital exactly") {
    const Panel p = testing::make_panel({{"A", 100, 0.001, 0.02}}, 90, 77, 20);
    EnvConfig cfg = toy_config(1);
    cfg.cost_rate = 0.0;
    TradingEnv env(p, size_t{0}, p.n_dates() - 1, cfg);
    env.reset();
    while (!env.done()) env.step({0.0});
    CHECK(value_of(env.state()) == cfg.initial_capital);
}

TEST_CASE("replaying an action sequence reproduces the equity curve bitwise") {
    const Panel p = testing::make_panel({{"A", 100, 0.0004, 0.02}, {"B", 70, 0.0, 0.01}}, 100,
                                        2024, 20);
    EnvConfig cfg = toy_config(2);
    Rng rng(31337);
    std::vector<ActionVector> actions;
    for (size_t i = 0; i + 1 < p.n_dates(); ++i) {
        actions.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
    }
    auto run = [&]() {
        TradingEnv env(p, size_t{0}, p.n_dates() - 1, cfg);
        env.reset();
        std::vector<double> curve{env.portfolio_value()};
        for (const auto& a : actions) {
            env.step(a);
            curve.push_back(env.portfolio_value());
        }
        return curve;
    };
    CHECK(run() == run());
}

TEST_CASE("turbulence gate: liquidate flattens the book, freeze holds it") {
    Panel p = testing::panel_from_prices(
        {{100, 100, 100, 100, 100, 100}, {50, 50, 50, 50, 50, 50}});
    p.turbulence = {0.0, 0.0, 9.0, 9.0, 0.5, 0.0};

    EnvConfig cfg = toy_config(2);
    cfg.turbulence_threshold = 2.0;
    cfg.turbulence_policy = TurbulencePolicy::liquidate;
    TradingEnv env(p, size_t{0}, size_t{5}, cfg);
    env.reset();
    env.step({1.0, 1.0});  // day 0: buy 100 + 100
    CHECK(env.state().holdings[0] == 100);
    CHECK(env.state().holdings[1] == 100);

    StepResult r = env.step({1.0, 1.0});  // day 1 calm: buys execute
    CHECK(!r.info.halted);

    r = env.step({1.0, 1.0});  // day 2 turbulent: forced liquidation, buys ignored
    CHECK(r.info.halted);
    CHECK(env.state().holdings == std::vector<int64_t>{0, 0});

    r = env.step({1.0, -1.0});  // day 3 still turbulent: nothing to sell, no buys
    CHECK(r.info.halted);
    CHECK(env.state().holdings == std::vector<int64_t>{0, 0});

    r = env.step({0.2, 0.0});  // day 4 back under threshold: trading resumes
    CHECK(!r.info.halted);
    CHECK(env.state().holdings[0] == 20);

    // freeze policy: orders suppressed, holdings untouched
    TradingEnv frozen(p, size_t{0}, size_t{5}, [&] {
        EnvConfig c = cfg;
        c.turbulence_policy = TurbulencePolicy::freeze;
        return c;
    }());
    frozen.reset();
    frozen.step({1.0, 0.0});
    const auto held = frozen.state().holdings;
    frozen.step({0.5, 0.5});
    StepResult fr = frozen.step({-1.0, 1.0});  // turbulent day: freeze
    CHECK(fr.info.halted);
    CHECK(fr.info.executed == std::vector<int64_t>{0, 0});
}

TEST_CASE("ranges outside the calendar are rejected") {
    const Panel p = testing::make_panel({{"A", 100, 0.0, 0.01}}, 30, 3, 10);
    CHECK_THROWS_AS(TradingEnv(p, p.dates.back(), Date(p.dates.back().serial() + 400),
                               toy_config(1)),
                    DataError);
    CHECK_THROWS_AS(TradingEnv(p, size_t{5}, size_t{5}, toy_config(1)), DataError);
}
