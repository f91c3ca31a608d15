#include "clstm/config.hpp"

#include <sstream>

#include "clstm/csv.hpp"

namespace clstm {

namespace {

double to_double(const std::string& key, const std::string& v) {
    double d = 0.0;
    if (!csv::parse_double(v, d)) throw DataError("config: " + key + ": bad number '" + v + "'");
    return d;
}

int64_t to_i64(const std::string& key, const std::string& v) {
    int64_t i = 0;
    if (!csv::parse_i64(v, i)) throw DataError("config: " + key + ": bad integer '" + v + "'");
    return i;
}

uint64_t to_u64(const std::string& key, const std::string& v) {
    const int64_t i = to_i64(key, v);
    if (i < 0) throw DataError("config: " + key + ": must be non-negative");
    return static_cast<uint64_t>(i);
}

}  // namespace

void RunConfig::apply_kv(const std::string& key, const std::string& value) {
    if (key == "data.csv") data_csv = value;
    else if (key == "data.dir") data_dir = value;
    else if (key == "data.min_start") min_start = Date::parse(value);
    else if (key == "panel.path") panel_path = value;
    else if (key == "indicators.warmup") indicator_warmup = static_cast<int>(to_i64(key, value));
    else if (key == "turbulence.lookback") turbulence_lookback = static_cast<size_t>(to_i64(key, value));
    else if (key == "env.initial_capital") env.initial_capital = to_double(key, value);
    else if (key == "env.h_max") env.h_max = to_i64(key, value);
    else if (key == "env.cost_rate") env.cost_rate = to_double(key, value);
    else if (key == "env.reward_scale") env.reward_scale = to_double(key, value);
    else if (key == "env.n_stocks") env.n_stocks = static_cast<size_t>(to_i64(key, value));
    else if (key == "env.turbulence_policy") {
        if (value != "liquidate" && value != "freeze" && value != "off") {
            throw DataError("config: env.turbulence_policy must be liquidate, freeze or off");
        }
        turbulence_policy = value;
    } else if (key == "extractor.window") extractor_window = to_i64(key, value);
    else if (key == "extractor.hidden") extractor_hidden = to_i64(key, value);
    else if (key == "policy.hidden") policy_hidden = to_i64(key, value);
    else if (key == "ppo.gamma") hyper.gamma = to_double(key, value);
    else if (key == "ppo.update_frequency") hyper.update_frequency = static_cast<size_t>(to_i64(key, value));
    else if (key == "ppo.value_weight") hyper.value_weight = to_double(key, value);
    else if (key == "ppo.entropy_weight") hyper.entropy_weight = to_double(key, value);
    else if (key == "ppo.clip_range") hyper.clip_range = to_double(key, value);
    else if (key == "ppo.max_grad_norm") hyper.max_grad_norm = to_double(key, value);
    else if (key == "ppo.learning_rate") hyper.learning_rate = to_double(key, value);
    else if (key == "ppo.epochs") hyper.epochs = static_cast<size_t>(to_i64(key, value));
    else if (key == "ppo.minibatches") hyper.minibatches = static_cast<size_t>(to_i64(key, value));
    else if (key == "ppo.total_steps") hyper.total_steps = static_cast<size_t>(to_i64(key, value));
    else if (key == "train.start") train_start = Date::parse(value);
    else if (key == "train.end") train_end = Date::parse(value);
    else if (key == "backtest.train_end_initial") backtest_train_end_initial = Date::parse(value);
    else if (key == "backtest.stride_months") backtest_stride_months = static_cast<int>(to_i64(key, value));
    else if (key == "backtest.agent") {
        if (value != "ppo" && value != "random" && value != "hold") {
            throw DataError("config: backtest.agent must be ppo, random or hold");
        }
        backtest_agent = value;
    } else if (key == "metrics.risk_free") risk_free_annual = to_double(key, value);
    else if (key == "metrics.periods_per_year") periods_per_year = to_double(key, value);
    else if (key == "seed") seed = to_u64(key, value);
    else if (key == "out") out_dir = value;
    else throw DataError("config: unknown key '" + key + "'");
}

void RunConfig::apply_file(const std::string& path) {
    const auto lines = csv::read_lines(path);
    for (size_t i = 0; i < lines.size(); ++i) {
        std::string_view line = csv::trim(lines[i]);
        if (line.empty() || line.front() == '#') continue;
        const size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw DataError(path + ":" + std::to_string(i + 1) + ": expected key=value");
        }
        const std::string key(csv::trim(line.substr(0, eq)));
        const std::string value(csv::trim(line.substr(eq + 1)));
        try {
            apply_kv(key, value);
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
}

std::string RunConfig::echo() const {
    std::ostringstream out;
    out << "data.csv=" << data_csv << '\n';
    out << "data.dir=" << data_dir << '\n';
    out << "data.min_start=" << min_start.to_string() << '\n';
    out << "panel.path=" << resolved_panel_path() << '\n';
    out << "indicators.warmup=" << indicator_warmup << '\n';
    out << "turbulence.lookback=" << turbulence_lookback << '\n';
    out << "env.initial_capital=" << csv::format_double(env.initial_capital) << '\n';
    out << "env.h_max=" << env.h_max << '\n';
    out << "env.cost_rate=" << csv::format_double(env.cost_rate) << '\n';
    out << "env.reward_scale=" << csv::format_double(env.reward_scale) << '\n';
    out << "env.n_stocks=" << env.n_stocks << '\n';
    out << "env.turbulence_policy=" << turbulence_policy << '\n';
    out << "extractor.window=" << extractor_window << '\n';
    out << "extractor.hidden=" << extractor_hidden << '\n';
    out << "policy.hidden=" << policy_hidden << '\n';
    out << "ppo.gamma=" << csv::format_double(hyper.gamma) << '\n';
    out << "ppo.update_frequency=" << hyper.update_frequency << '\n';
    out << "ppo.value_weight=" << csv::format_double(hyper.value_weight) << '\n';
    out << "ppo.entropy_weight=" << csv::format_double(hyper.entropy_weight) << '\n';
    out << "ppo.clip_range=" << csv::format_double(hyper.clip_range) << '\n';
    out << "ppo.max_grad_norm=" << csv::format_double(hyper.max_grad_norm) << '\n';
    out << "ppo.learning_rate=" << csv::format_double(hyper.learning_rate) << '\n';
    out << "ppo.epochs=" << hyper.epochs << '\n';
    out << "ppo.minibatches=" << hyper.minibatches << '\n';
    out << "ppo.total_steps=" << hyper.total_steps << '\n';
    if (train_start) out << "train.start=" << train_start->to_string() << '\n';
    if (train_end) out << "train.end=" << train_end->to_string() << '\n';
    out << "backtest.train_end_initial=" << backtest_train_end_initial.to_string() << '\n';
    out << "backtest.stride_months=" << backtest_stride_months << '\n';
    out << "backtest.agent=" << backtest_agent << '\n';
    out << "metrics.risk_free=" << csv::format_double(risk_free_annual) << '\n';
    out << "metrics.periods_per_year=" << csv::format_double(periods_per_year) << '\n';
    if (seed) out << "seed=" << *seed << '\n';
    out << "out=" << out_dir << '\n';
    return out.str();
}

TurbulencePolicy RunConfig::turbulence_policy_enum() const {
    return turbulence_policy == "freeze" ? TurbulencePolicy::freeze : TurbulencePolicy::liquidate;
}

AgentKind RunConfig::agent_kind() const {
    if (backtest_agent == "random") return AgentKind::random;
    if (backtest_agent == "hold") return AgentKind::hold;
    return AgentKind::ppo;
}

}  // namespace clstm
