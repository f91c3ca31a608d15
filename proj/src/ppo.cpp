#include "clstm/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "clstm/csv.hpp"

namespace clstm {

namespace {
constexpr double kLogSqrt2Pi = 0.9189385332046727;  // 0.5 * ln(2*pi)
}

void Hyperparams::validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw DataError("gamma must be in (0,1]");
    if (!(clip_range > 0.0)) throw DataError("clip_range must be > 0");
    if (update_frequency == 0) throw DataError("update_frequency must be >= 1");
    if (epochs == 0 || minibatches == 0) throw DataError("epochs and minibatches must be >= 1");
}

void PolicyNet::init(const PolicyConfig& cfg, Rng& rng) {
    cfg_ = cfg;
    lstm_.init(cfg.feature_dim, cfg.hidden, rng);
    actor_.init(cfg.n_actions, cfg.hidden, rng);
    critic_.init(1, cfg.hidden, rng);
    log_std_.reshape({cfg.n_actions});  // std = 1 at init
}

nn::ParamList PolicyNet::params() {
    return {
        {"policy.lstm.wx", &lstm_.wx}, {"policy.lstm.wh", &lstm_.wh},
        {"policy.lstm.b", &lstm_.b},   {"policy.actor.w", &actor_.w},
        {"policy.actor.b", &actor_.b}, {"policy.critic.w", &critic_.w},
        {"policy.critic.b", &critic_.b}, {"policy.log_std", &log_std_},
    };
}

RecurrentState PolicyNet::initial_state() const {
    return {std::vector<double>(cfg_.hidden, 0.0), std::vector<double>(cfg_.hidden, 0.0)};
}

void PolicyNet::forward(const double* feature, const RecurrentState& rec_in,
                        std::vector<double>& mean, double& value, RecurrentState& rec_out,
                        PolicyTrace* trace) const {
    const size_t H = static_cast<size_t>(cfg_.hidden);
    std::vector<double> h(H), c(H);
    lstm_.forward(feature, rec_in.h.data(), rec_in.c.data(), h.data(), c.data(),
                  trace ? &trace->cell : nullptr);
    mean.resize(cfg_.n_actions);
    actor_.forward(h.data(), mean.data());
    critic_.forward(h.data(), &value);
    if (!std::isfinite(value)) throw NumericError("policy critic produced a non-finite value");
    for (double m : mean) {
        if (!std::isfinite(m)) throw NumericError("policy actor produced a non-finite mean");
    }
    if (trace) {
        trace->h = h;
        trace->mean = mean;
        trace->value = value;
    }
    rec_out.h = std::move(h);
    rec_out.c = std::move(c);
}

void PolicyNet::backward(const PolicyTrace& trace, const double* dmean, double dvalue,
                         double* dfeature_acc) {
    const size_t H = static_cast<size_t>(cfg_.hidden);
    std::vector<double> dh(H, 0.0);
    actor_.backward(trace.h.data(), dmean, dh.data());
    critic_.backward(trace.h.data(), &dvalue, dh.data());
    std::vector<double> dh_in(H, 0.0), dc_in(H, 0.0), dc(H, 0.0);
    lstm_.backward(trace.cell, dh.data(), dc.data(), dh_in.data(), dc_in.data(), dfeature_acc);
}

double gaussian_log_prob(const std::vector<double>& mean, const std::vector<double>& log_std,
                         const std::vector<double>& action_raw) {
    double lp = 0.0;
    for (size_t i = 0; i < mean.size(); ++i) {
        const double z = (action_raw[i] - mean[i]) / std::exp(log_std[i]);
        lp += -0.5 * z * z - log_std[i] - kLogSqrt2Pi;
    }
    return lp;
}

double gaussian_entropy(const std::vector<double>& log_std) {
    double e = 0.0;
    for (double ls : log_std) e += ls + 0.5 + kLogSqrt2Pi;
    return e;
}

ActionSample sample_action(const std::vector<double>& mean, const std::vector<double>& log_std,
                           Rng& rng, bool deterministic) {
    ActionSample s;
    s.raw.resize(mean.size());
    s.clamped.resize(mean.size());
    for (size_t i = 0; i < mean.size(); ++i) {
        s.raw[i] = deterministic ? mean[i] : mean[i] + std::exp(log_std[i]) * rng.normal();
        s.clamped[i] = std::clamp(s.raw[i], -1.0, 1.0);
    }
    s.log_prob = gaussian_log_prob(mean, log_std, s.raw);
    return s;
}

double ratio(double log_prob_new, double log_prob_old, double log_cap, size_t* cap_hits) {
    double d = log_prob_new - log_prob_old;
    if (d > log_cap) {
        d = log_cap;
        if (cap_hits) ++*cap_hits;
    }
    return std::exp(d);
}

double clipped_objective(double r, double adv, double eps) {
    const double clipped = std::clamp(r, 1.0 - eps, 1.0 + eps);
    return std::min(r * adv, clipped * adv);
}

double advantage(double reward, double value, double next_value, bool done, double gamma) {
    return reward + gamma * next_value * (done ? 0.0 : 1.0) - value;
}

void normalize_advantages_inplace(std::vector<double>& adv) {
    const size_t n = adv.size();
    if (n < 2) return;
    double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    var /= static_cast<double>(n);
    if (var <= 0.0) return;
    const double sd = std::sqrt(var);
    for (double& a : adv) a = (a - mean) / sd;
}

void save_train_log(const std::vector<TrainLogRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "update_index,policy_loss,value_loss,entropy,mean_reward,grad_norm\n";
    for (const auto& r : rows) {
        out << r.update_index << ',' << csv::format_double(r.policy_loss) << ','
            << csv::format_double(r.value_loss) << ',' << csv::format_double(r.entropy) << ','
            << csv::format_double(r.mean_reward) << ',' << csv::format_double(r.grad_norm)
            << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

PpoAgent::PpoAgent(const ExtractorConfig& ext_cfg, const PolicyConfig& pol_cfg,
                   const Hyperparams& hp)
    : ext_cfg_(ext_cfg), pol_cfg_(pol_cfg), hp_(hp) {
    hp_.validate();
    if (pol_cfg_.feature_dim != ext_cfg_.hidden) {
        throw DataError("policy feature_dim must equal extractor hidden size");
    }
}

void PpoAgent::init_params(uint64_t seed) {
    Rng rng(seed);
    extractor_.init(ext_cfg_, rng);
    policy_.init(pol_cfg_, rng);
    adam_ready_ = false;
}

nn::ParamList PpoAgent::params() {
    nn::ParamList all = extractor_.params();
    for (auto& p : policy_.params()) all.push_back(p);
    return all;
}

void PpoAgent::ensure_adam() {
    if (adam_ready_) return;
    auto plist = params();
    adam_.lr = hp_.learning_rate;
    adam_.beta1 = hp_.adam_beta1;
    adam_.beta2 = hp_.adam_beta2;
    adam_.eps = hp_.adam_eps;
    adam_.attach(plist);
    adam_ready_ = true;
}

UpdateStats PpoAgent::update(std::vector<Transition>& buffer, Rng& rng) {
    if (buffer.empty()) throw std::logic_error("PpoAgent::update: empty buffer");
    ensure_adam();
    auto plist = params();

    const size_t n = buffer.size();
    std::vector<double> adv(n), target(n);
    double reward_sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const Transition& t = buffer[i];
        adv[i] = advantage(t.reward, t.value, t.next_value, t.done, hp_.gamma);
        target[i] = adv[i] + t.value;  // = R + gamma * v_next * (1-d)
        reward_sum += t.reward;
    }
    if (hp_.normalize_advantages) normalize_advantages_inplace(adv);

    UpdateStats stats;
    stats.mean_reward = reward_sum / static_cast<double>(n);
    const size_t mb_count = std::min(hp_.minibatches, n);
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    size_t batches_done = 0;
    double ratio_sum = 0.0;
    size_t ratio_count = 0;

    std::vector<double> dmean(pol_cfg_.n_actions);
    std::vector<double> dfeature(ext_cfg_.hidden);
    const auto& log_std = policy_.log_std().v;

    for (size_t epoch = 0; epoch < hp_.epochs; ++epoch) {
        rng.shuffle(order);
        for (size_t mb = 0; mb < mb_count; ++mb) {
            const size_t lo = mb * n / mb_count;
            const size_t hi = (mb + 1) * n / mb_count;
            const size_t m = hi - lo;
            if (m == 0) continue;
            const double inv_m = 1.0 / static_cast<double>(m);

            nn::zero_grads(plist);
            double mb_policy = 0.0, mb_value = 0.0, mb_entropy = 0.0;

            for (size_t ii = lo; ii < hi; ++ii) {
                const Transition& t = buffer[order[ii]];
                const double a_hat = adv[order[ii]];
                const double tgt = target[order[ii]];

                ExtractorTrace etrace;
                const std::vector<double> feat = extractor_.extract(t.window, etrace);
                PolicyTrace ptrace;
                std::vector<double> mean;
                double value = 0.0;
                RecurrentState rec_out;
                policy_.forward(feat.data(), t.rec, mean, value, rec_out, &ptrace);

                const double lp_new = gaussian_log_prob(mean, log_std, t.action_raw);
                const bool capped = (lp_new - t.log_prob) > hp_.ratio_log_cap;
                const double r = ratio(lp_new, t.log_prob, hp_.ratio_log_cap,
                                       &stats.ratio_cap_hits);
                ratio_sum += r;
                ratio_count++;

                const double unclipped = r * a_hat;
                const double rc = std::clamp(r, 1.0 - hp_.clip_range, 1.0 + hp_.clip_range);
                const double clipped = rc * a_hat;
                const double obj = std::min(unclipped, clipped);
                const double entropy = gaussian_entropy(log_std);
                const double vdiff = value - tgt;

                mb_policy += -obj * inv_m;
                mb_value += vdiff * vdiff * inv_m;
                mb_entropy += entropy * inv_m;

                // dL/dr for L = -obj/m: zero when the clipped branch is
                // active and r sits outside the clip band, or when the
                // ratio cap kicked in.
                double dobj_dr;
                if (unclipped <= clipped) {
                    dobj_dr = a_hat;
                } else {
                    dobj_dr = (r > 1.0 - hp_.clip_range && r < 1.0 + hp_.clip_range) ? a_hat : 0.0;
                }
                const double dlp = capped ? 0.0 : -inv_m * dobj_dr * r;

                auto& ls_grad = policy_.log_std().g;
                for (int64_t k = 0; k < pol_cfg_.n_actions; ++k) {
                    const double sd = std::exp(log_std[k]);
                    const double z = (t.action_raw[k] - mean[k]) / sd;
                    dmean[k] = dlp * z / sd;
                    ls_grad[k] += dlp * (z * z - 1.0);
                    ls_grad[k] += -hp_.entropy_weight * inv_m;  // entropy bonus
                }
                const double dvalue = hp_.value_weight * inv_m * 2.0 * vdiff;

                std::fill(dfeature.begin(), dfeature.end(), 0.0);
                policy_.backward(ptrace, dmean.data(), dvalue, dfeature.data());
                extractor_.backward(etrace, dfeature.data());
            }

            const double mb_loss =
                mb_policy + hp_.value_weight * mb_value - hp_.entropy_weight * mb_entropy;
            if (!std::isfinite(mb_loss)) {
                throw NumericError("PPO update aborted: non-finite loss (policy=" +
                                   std::to_string(mb_policy) + " value=" +
                                   std::to_string(mb_value) + " entropy=" +
                                   std::to_string(mb_entropy) + ")");
            }

            stats.grad_norm += nn::clip_grad_norm(plist, hp_.max_grad_norm);
            adam_.step(plist);
            stats.policy_loss += mb_policy;
            stats.value_loss += mb_value;
            stats.entropy += mb_entropy;
            batches_done++;
        }
    }

    const double inv_b = 1.0 / static_cast<double>(batches_done);
    stats.policy_loss *= inv_b;
    stats.value_loss *= inv_b;
    stats.entropy *= inv_b;
    stats.grad_norm *= inv_b;
    stats.mean_ratio = ratio_count ? ratio_sum / static_cast<double>(ratio_count) : 1.0;

    if (!nn::params_finite(plist)) {
        throw NumericError("PPO update produced non-finite parameters");
    }
    buffer.clear();
    return stats;
}

TrainResult PpoAgent::train(TradingEnv& env, const StateScales& scales, size_t total_steps,
                            Rng& rng) {
    TrainResult result;
    if (total_steps == 0) return result;

    const size_t T = static_cast<size_t>(ext_cfg_.window);
    std::vector<Transition> buffer;
    buffer.reserve(hp_.update_frequency);

    std::vector<std::vector<double>> history;
    history.push_back(normalize_state(env.reset().as_vector(), scales));
    RecurrentState rec = policy_.initial_state();
    result.episodes = 1;

    auto value_of_current = [&]() {
        const StateWindow w = warm_pad(history, T);
        const std::vector<double> f = extractor_.extract(w);
        std::vector<double> mean;
        double value = 0.0;
        RecurrentState rec_out;
        policy_.forward(f.data(), rec, mean, value, rec_out, nullptr);
        return value;
    };

    for (size_t step = 0; step < total_steps; ++step) {
        Transition tr;
        tr.window = warm_pad(history, T);
        tr.feature = extractor_.extract(tr.window);
        tr.rec = rec;

        std::vector<double> mean;
        double value = 0.0;
        RecurrentState rec_out;
        policy_.forward(tr.feature.data(), rec, mean, value, rec_out, nullptr);
        const ActionSample action = sample_action(mean, policy_.log_std().v, rng, false);

        // The value estimate of this state is the previous transition's
        // bootstrap target.
        if (!buffer.empty() && !buffer.back().done && !buffer.back().next_value_set) {
            buffer.back().next_value = value;
            buffer.back().next_value_set = true;
        }

        const StepResult sr = env.step(action.clamped);
        tr.action_raw = action.raw;
        tr.log_prob = action.log_prob;
        tr.value = value;
        tr.reward = sr.reward;
        tr.done = sr.done;
        if (sr.done) {
            tr.next_value = 0.0;
            tr.next_value_set = true;
        }
        buffer.push_back(std::move(tr));
        rec = rec_out;

        if (sr.done) {
            history.clear();
            history.push_back(normalize_state(env.reset().as_vector(), scales));
            rec = policy_.initial_state();
            result.episodes++;
        } else {
            history.push_back(normalize_state(sr.next_state.as_vector(), scales));
            if (history.size() > T) history.erase(history.begin());
        }

        if (buffer.size() == hp_.update_frequency) {
            if (!buffer.back().next_value_set) {
                buffer.back().next_value = value_of_current();
                buffer.back().next_value_set = true;
            }
            const UpdateStats st = update(buffer, rng);
            result.log.push_back({result.log.size() + 1, st.policy_loss, st.value_loss,
                                  st.entropy, st.mean_reward, st.grad_norm});
        }
        result.steps++;
    }
    return result;
}

}  // namespace clstm
