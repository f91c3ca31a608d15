#pragma once

#include <cstdint>
#include <vector>

#include "clstm/extractor.hpp"
#include "clstm/neural.hpp"
#include "clstm/trading_env.hpp"

namespace clstm {

struct Hyperparams {
    double gamma = 0.99;
    size_t update_frequency = 128;
    double value_weight = 0.5;
    double entropy_weight = 0.01;
    double clip_range = 0.2;
    double max_grad_norm = 0.5;
    double learning_rate = 3e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    size_t epochs = 10;
    size_t minibatches = 4;
    bool normalize_advantages = true;
    double ratio_log_cap = 20.0;  // exp() argument cap for the probability ratio
    size_t total_steps = 30000;

    void validate() const;
};

struct PolicyConfig {
    int64_t feature_dim = 128;
    int64_t hidden = 512;
    int64_t n_actions = 30;
};

struct RecurrentState {
    std::vector<double> h;
    std::vector<double> c;
};

struct PolicyTrace {
    nn::LstmStepCache cell;
    std::vector<double> h;  // hidden after the cell
    std::vector<double> mean;
    double value = 0.0;
};

// Recurrent actor-critic head: one LSTM cell threaded across decision steps,
// a linear actor emitting diagonal-Gaussian action means with a learned
// state-independent log-std, and a linear critic.
class PolicyNet {
public:
    void init(const PolicyConfig& cfg, Rng& rng);

    const PolicyConfig& config() const { return cfg_; }
    nn::ParamList params();

    RecurrentState initial_state() const;

    void forward(const double* feature, const RecurrentState& rec_in, std::vector<double>& mean,
                 double& value, RecurrentState& rec_out, PolicyTrace* trace = nullptr) const;

    // Accumulates parameter gradients for one traced forward; adds the
    // feature gradient into dfeature_acc. Gradients do not flow into the
    // incoming recurrent state (one-step truncation across decision steps).
    void backward(const PolicyTrace& trace, const double* dmean, double dvalue,
                  double* dfeature_acc);

    const nn::Tensor& log_std() const { return log_std_; }
    nn::Tensor& log_std() { return log_std_; }

private:
    PolicyConfig cfg_;
    nn::LstmCell lstm_;
    nn::Linear actor_;
    nn::Linear critic_;
    nn::Tensor log_std_;
};

struct ActionSample {
    std::vector<double> raw;      // pre-clamp Gaussian draw (or mean)
    std::vector<double> clamped;  // what the environment executes
    double log_prob = 0.0;        // of the pre-clamp draw
};

double gaussian_log_prob(const std::vector<double>& mean, const std::vector<double>& log_std,
                         const std::vector<double>& action_raw);
double gaussian_entropy(const std::vector<double>& log_std);

ActionSample sample_action(const std::vector<double>& mean, const std::vector<double>& log_std,
                           Rng& rng, bool deterministic);

// exp(lp_new - lp_old), capped at exp(log_cap); bumps *cap_hits when capped.
double ratio(double log_prob_new, double log_prob_old, double log_cap = 20.0,
             size_t* cap_hits = nullptr);

// min(r*adv, clip(r, 1-eps, 1+eps)*adv) — the maximized surrogate.
double clipped_objective(double r, double adv, double eps);

// One-step advantage: R + gamma * v_next * (1 - done) - v.
double advantage(double reward, double value, double next_value, bool done, double gamma);

// Standardizes the batch to mean 0 / population stdev 1; no-op for a
// single-element batch or zero variance.
void normalize_advantages_inplace(std::vector<double>& adv);

// One environment step as stored in the rollout buffer. The normalized state
// window and the entering recurrent state are kept so the update pass can
// re-run extraction and the policy cell under current parameters.
struct Transition {
    StateWindow window;
    std::vector<double> feature;
    std::vector<double> action_raw;
    double log_prob = 0.0;
    double reward = 0.0;
    double value = 0.0;
    bool done = false;
    double next_value = 0.0;
    bool next_value_set = false;
    RecurrentState rec;
};

struct UpdateStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double mean_reward = 0.0;
    double grad_norm = 0.0;   // mean pre-clip global norm
    double mean_ratio = 0.0;
    size_t ratio_cap_hits = 0;
};

struct TrainLogRow {
    size_t update_index = 0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double mean_reward = 0.0;
    double grad_norm = 0.0;
};

void save_train_log(const std::vector<TrainLogRow>& rows, const std::string& path);

struct TrainResult {
    std::vector<TrainLogRow> log;
    size_t steps = 0;
    size_t episodes = 0;
};

// Extractor + policy trained with the clipped-surrogate objective on
// fixed-length rollouts.
class PpoAgent {
public:
    PpoAgent(const ExtractorConfig& ext_cfg, const PolicyConfig& pol_cfg, const Hyperparams& hp);

    // Seeds parameter initialization; must be called before use unless a
    // checkpoint is applied.
    void init_params(uint64_t seed);

    FeatureExtractor& extractor() { return extractor_; }
    PolicyNet& policy() { return policy_; }
    const Hyperparams& hyper() const { return hp_; }
    nn::ParamList params();

    // One PPO update over the buffer; clears it.
    UpdateStats update(std::vector<Transition>& buffer, Rng& rng);

    // Alg style rollout-update loop: episodes restart at the range start
    // until total_steps are consumed. Fresh portfolio every episode.
    TrainResult train(TradingEnv& env, const StateScales& scales, size_t total_steps, Rng& rng);

private:
    ExtractorConfig ext_cfg_;
    PolicyConfig pol_cfg_;
    Hyperparams hp_;
    FeatureExtractor extractor_;
    PolicyNet policy_;
    nn::Adam adam_;
    bool adam_ready_ = false;

    void ensure_adam();
};

}  // namespace clstm
