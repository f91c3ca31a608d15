#pragma once

#include <vector>

#include "clstm/neural.hpp"

namespace clstm {

// Block scale constants for the raw state vector [b, p, h, M, R, C, X].
// Raw balances near 1e6 sitting next to indicator values near 50 make the
// optimization hopeless; block-wise fixed scaling keeps the transform
// stationary and invertible.
struct StateScales {
    double capital = 1.0;
    std::vector<double> base_prices;  // first-day price per ticker
    double h_max = 1.0;
    double indicator_scale = 100.0;
};

std::vector<double> normalize_state(const std::vector<double>& raw, const StateScales& scales);

// Last T (normalized) state vectors, oldest first.
struct StateWindow {
    std::vector<std::vector<double>> states;
};

// Left-pads by replicating the earliest available state until the window
// holds exactly T entries.
StateWindow warm_pad(const std::vector<std::vector<double>>& history, size_t window);

struct ExtractorConfig {
    int64_t state_dim = 181;
    int64_t hidden = 128;  // also the output feature size
    int64_t window = 30;
};

struct ExtractorTrace {
    std::vector<nn::LstmStepCache> steps;
    std::vector<double> h_last;
    std::vector<double> z1, z2, z3;  // post-tanh activations; z3 is the feature
};

// LSTM over the state window followed by three square linear layers, tanh
// after each; the final hidden state carries the time-series feature.
class FeatureExtractor {
public:
    void init(const ExtractorConfig& cfg, Rng& rng);

    const ExtractorConfig& config() const { return cfg_; }
    nn::ParamList params();

    std::vector<double> extract(const StateWindow& window) const;
    std::vector<double> extract(const StateWindow& window, ExtractorTrace& trace) const;
    // Accumulates parameter gradients for one traced extraction.
    void backward(const ExtractorTrace& trace, const double* dfeature);

private:
    std::vector<double> run(const StateWindow& window, ExtractorTrace* trace) const;

    ExtractorConfig cfg_;
    nn::LstmCell lstm_;
    nn::Linear lin1_, lin2_, lin3_;
};

}  // namespace clstm
