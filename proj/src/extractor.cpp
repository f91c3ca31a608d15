#include "clstm/extractor.hpp"

#include <cmath>

namespace clstm {

std::vector<double> normalize_state(const std::vector<double>& raw, const StateScales& scales) {
    const size_t n = scales.base_prices.size();
    if (raw.size() != 1 + 6 * n) {
        throw DataError("normalize_state: state length " + std::to_string(raw.size()) +
                        " does not match " + std::to_string(n) + " tickers");
    }
    std::vector<double> out(raw.size());
    out[0] = raw[0] / scales.capital;
    for (size_t k = 0; k < n; ++k) {
        out[1 + k] = raw[1 + k] / scales.base_prices[k];
        out[1 + n + k] = raw[1 + n + k] / scales.h_max;
    }
    for (size_t i = 1 + 2 * n; i < raw.size(); ++i) out[i] = raw[i] / scales.indicator_scale;
    return out;
}

StateWindow warm_pad(const std::vector<std::vector<double>>& history, size_t window) {
    if (history.empty()) throw DataError("warm_pad: empty state history");
    StateWindow w;
    w.states.reserve(window);
    if (history.size() >= window) {
        w.states.assign(history.end() - static_cast<ptrdiff_t>(window), history.end());
        return w;
    }
    for (size_t i = history.size(); i < window; ++i) w.states.push_back(history.front());
    w.states.insert(w.states.end(), history.begin(), history.end());
    return w;
}

void FeatureExtractor::init(const ExtractorConfig& cfg, Rng& rng) {
    cfg_ = cfg;
    lstm_.init(cfg.state_dim, cfg.hidden, rng);
    const double gain = std::sqrt(2.0);  // tanh follows each linear layer
    lin1_.init(cfg.hidden, cfg.hidden, rng, gain);
    lin2_.init(cfg.hidden, cfg.hidden, rng, gain);
    lin3_.init(cfg.hidden, cfg.hidden, rng, gain);
}

nn::ParamList FeatureExtractor::params() {
    return {
        {"extractor.lstm.wx", &lstm_.wx}, {"extractor.lstm.wh", &lstm_.wh},
        {"extractor.lstm.b", &lstm_.b},   {"extractor.lin1.w", &lin1_.w},
        {"extractor.lin1.b", &lin1_.b},   {"extractor.lin2.w", &lin2_.w},
        {"extractor.lin2.b", &lin2_.b},   {"extractor.lin3.w", &lin3_.w},
        {"extractor.lin3.b", &lin3_.b},
    };
}

std::vector<double> FeatureExtractor::run(const StateWindow& window, ExtractorTrace* trace) const {
    const size_t H = static_cast<size_t>(cfg_.hidden);
    if (window.states.size() != static_cast<size_t>(cfg_.window)) {
        throw DataError("extract: window holds " + std::to_string(window.states.size()) +
                        " states, expected " + std::to_string(cfg_.window));
    }
    std::vector<double> h(H, 0.0), c(H, 0.0), h_next(H), c_next(H);
    if (trace) trace->steps.resize(window.states.size());
    for (size_t t = 0; t < window.states.size(); ++t) {
        const auto& s = window.states[t];
        if (s.size() != static_cast<size_t>(cfg_.state_dim)) {
            throw DataError("extract: state dimension " + std::to_string(s.size()) +
                            ", expected " + std::to_string(cfg_.state_dim));
        }
        lstm_.forward(s.data(), h.data(), c.data(), h_next.data(), c_next.data(),
                      trace ? &trace->steps[t] : nullptr);
        h.swap(h_next);
        c.swap(c_next);
    }

    std::vector<double> z1(H), z2(H), z3(H), y(H);
    lin1_.forward(h.data(), y.data());
    for (size_t i = 0; i < H; ++i) z1[i] = std::tanh(y[i]);
    lin2_.forward(z1.data(), y.data());
    for (size_t i = 0; i < H; ++i) z2[i] = std::tanh(y[i]);
    lin3_.forward(z2.data(), y.data());
    for (size_t i = 0; i < H; ++i) z3[i] = std::tanh(y[i]);

    if (trace) {
        trace->h_last = h;
        trace->z1 = z1;
        trace->z2 = z2;
        trace->z3 = z3;
    }
    return z3;
}

std::vector<double> FeatureExtractor::extract(const StateWindow& window) const {
    return run(window, nullptr);
}

std::vector<double> FeatureExtractor::extract(const StateWindow& window,
                                              ExtractorTrace& trace) const {
    return run(window, &trace);
}

void FeatureExtractor::backward(const ExtractorTrace& trace, const double* dfeature) {
    const size_t H = static_cast<size_t>(cfg_.hidden);
    if (trace.steps.size() != static_cast<size_t>(cfg_.window) || trace.z3.size() != H) {
        throw std::logic_error("FeatureExtractor: backward without a recorded forward pass");
    }
    std::vector<double> dy(H), dz(H, 0.0);

    for (size_t i = 0; i < H; ++i) dy[i] = dfeature[i] * (1.0 - trace.z3[i] * trace.z3[i]);
    lin3_.backward(trace.z2.data(), dy.data(), dz.data());
    for (size_t i = 0; i < H; ++i) dy[i] = dz[i] * (1.0 - trace.z2[i] * trace.z2[i]);
    std::fill(dz.begin(), dz.end(), 0.0);
    lin2_.backward(trace.z1.data(), dy.data(), dz.data());
    for (size_t i = 0; i < H; ++i) dy[i] = dz[i] * (1.0 - trace.z1[i] * trace.z1[i]);
    std::vector<double> dh(H, 0.0), dc(H, 0.0);
    lin1_.backward(trace.h_last.data(), dy.data(), dh.data());

    std::vector<double> dh_prev(H), dc_prev(H);
    for (size_t t = trace.steps.size(); t-- > 0;) {
        std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
        std::fill(dc_prev.begin(), dc_prev.end(), 0.0);
        lstm_.backward(trace.steps[t], dh.data(), dc.data(), dh_prev.data(), dc_prev.data(),
                       nullptr);
        dh.swap(dh_prev);
        dc.swap(dc_prev);
    }
}

}  // namespace clstm
