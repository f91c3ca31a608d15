#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "clstm/extractor.hpp"
#include "support/oracles.hpp"

using namespace clstm;

namespace {

StateWindow random_window(size_t T, size_t dim, Rng& rng) {
    StateWindow w;
    for (size_t t = 0; t < T; ++t) {
        std::vector<double> s(dim);
        for (double& v : s) v = rng.normal();
        w.states.push_back(std::move(s));
    }
    return w;
}

// Independent scalar replay of the whole extractor pipeline.
std::vector<double> replay_extractor(FeatureExtractor& fx, const StateWindow& window) {
    const auto plist = fx.params();
    auto tensor = [&](const std::string& name) -> const nn::Tensor& {
        for (const auto& p : plist) {
            if (p.name == name) return *p.tensor;
        }
        throw std::logic_error("missing tensor " + name);
    };
    const nn::Tensor& wx = tensor("extractor.lstm.wx");
    const nn::Tensor& wh = tensor("extractor.lstm.wh");
    const nn::Tensor& b = tensor("extractor.lstm.b");
    const size_t H = static_cast<size_t>(fx.config().hidden);
    const size_t I = static_cast<size_t>(fx.config().state_dim);

    std::vector<double> h(H, 0.0), c(H, 0.0);
    for (const auto& x : window.states) {
        std::vector<double> hn(H), cn(H);
        for (size_t j = 0; j < H; ++j) {
            auto pre = [&](size_t block) {
                double a = b.v[block * H + j];
                for (size_t k = 0; k < I; ++k) a += wx.v[(block * H + j) * I + k] * x[k];
                for (size_t k = 0; k < H; ++k) a += wh.v[(block * H + j) * H + k] * h[k];
                return a;
            };
            const double gi = nn::sigmoid(pre(0));
            const double gf = nn::sigmoid(pre(1));
            const double gg = std::tanh(pre(2));
            const double go = nn::sigmoid(pre(3));
            cn[j] = gf * c[j] + gi * gg;
            hn[j] = go * std::tanh(cn[j]);
        }
        h = hn;
        c = cn;
    }
    auto dense_tanh = [&](const std::vector<double>& in, const std::string& prefix) {
        const nn::Tensor& w = tensor(prefix + ".w");
        const nn::Tensor& bias = tensor(prefix + ".b");
        std::vector<double> out(H);
        for (size_t r = 0; r < H; ++r) {
            double acc = bias.v[r];
            for (size_t cix = 0; cix < H; ++cix) acc += w.v[r * H + cix] * in[cix];
            out[r] = std::tanh(acc);
        }
        return out;
    };
    return dense_tanh(dense_tanh(dense_tanh(h, "extractor.lin1"), "extractor.lin2"),
                      "extractor.lin3");
}

}  // namespace

TEST_CASE("normalize_state scales each block by its constant") {
    StateScales scales;
    scales.capital = 1'000'000.0;
    scales.base_prices = {100.0, 50.0};
    scales.h_max = 100.0;

    // [b, p0 p1, h0 h1, M.., R.., C.., X..]
    std::vector<double> raw = {1'000'000.0, 100.0, 25.0, 100.0, 40.0,
                               12.0, -3.0, 55.0, 60.0, 80.0, -120.0, 20.0, 35.0};
    const auto norm = normalize_state(raw, scales);
    CHECK(norm[0] == 1.0);              // initial balance slot
    CHECK(norm[1] == 1.0);              // price at its base
    CHECK(norm[2] == doctest::Approx(0.5));
    CHECK(norm[3] == 1.0);              // holdings at h_max
    CHECK(norm[5] == doctest::Approx(0.12));  // macd / 100
    CHECK(norm[7] == doctest::Approx(0.55));  // rsi / 100

    StateScales identity;
    identity.base_prices = {1.0, 1.0};
    identity.indicator_scale = 1.0;
    const auto once = normalize_state(raw, identity);
    const auto twice = normalize_state(once, identity);
    CHECK(once == raw);
    CHECK(twice == once);
}

TEST_CASE("warm_pad replicates the earliest state") {
    const std::vector<double> s0 = {1.0}, s1 = {2.0}, s2 = {3.0};
    const auto one = warm_pad({s0}, 4);
    REQUIRE(one.states.size() == 4);
    for (const auto& s : one.states) CHECK(s == s0);

    const auto full = warm_pad({s0, s1, s2}, 3);
    CHECK(full.states == std::vector<std::vector<double>>{s0, s1, s2});

    const auto padded = warm_pad({s0, s1, s2}, 5);
    CHECK(padded.states == std::vector<std::vector<double>>{s0, s0, s0, s1, s2});

    CHECK_THROWS_AS(warm_pad({}, 3), DataError);
}

TEST_CASE("zero-weight extractor maps any window to the zero vector") {
    Rng rng(21);
    ExtractorConfig cfg{6, 8, 4};
    FeatureExtractor fx;
    fx.init(cfg, rng);
    for (auto& p : fx.params()) std::fill(p.tensor->v.begin(), p.tensor->v.end(), 0.0);
    StateWindow w;
    std::vector<double> s(6, 3.7);
    for (int t = 0; t < 4; ++t) w.states.push_back(s);
    for (double v : fx.extract(w)) CHECK(v == 0.0);
}

TEST_CASE("feature vector has 128 components inside (-1, 1)") {
    Rng rng(22);
    ExtractorConfig cfg{181, 128, 5};
    FeatureExtractor fx;
    fx.init(cfg, rng);
    const auto out = fx.extract(random_window(5, 181, rng));
    CHECK(out.size() == 128);
    for (double v : out) {
        CHECK(v > -1.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("extraction equals the unrolled scalar replay") {
    Rng rng(23);
    ExtractorConfig cfg{7, 5, 6};
    FeatureExtractor fx;
    fx.init(cfg, rng);
    const StateWindow w = random_window(6, 7, rng);
    const auto fast = fx.extract(w);
    const auto slow = replay_extractor(fx, w);
    REQUIRE(fast.size() == slow.size());
    for (size_t i = 0; i < fast.size(); ++i) CHECK(std::abs(fast[i] - slow[i]) <= 1e-10);
}

TEST_CASE("extraction is deterministic and sensitive to every window slot") {
    Rng rng(24);
    ExtractorConfig cfg{5, 6, 4};
    FeatureExtractor fx;
    fx.init(cfg, rng);
    const StateWindow w = random_window(4, 5, rng);
    CHECK(fx.extract(w) == fx.extract(w));

    const auto base = fx.extract(w);
    for (size_t t = 0; t < w.states.size(); ++t) {
        StateWindow tweaked = w;
        tweaked.states[t][2] += 0.25;
        CHECK(fx.extract(tweaked) != base);
    }
}

TEST_CASE("bad window shapes are rejected") {
    Rng rng(25);
    ExtractorConfig cfg{5, 6, 4};
    FeatureExtractor fx;
    fx.init(cfg, rng);
    CHECK_THROWS_AS(fx.extract(random_window(3, 5, rng)), DataError);     // short window
    CHECK_THROWS_AS(fx.extract(random_window(4, 6, rng)), DataError);     // wrong state dim
    ExtractorTrace empty;
    std::vector<double> dout(6, 1.0);
    CHECK_THROWS_AS(fx.backward(empty, dout.data()), std::logic_error);
}

TEST_CASE("extractor gradients pass central finite differences at toy size") {
    Rng rng(26);
    for (int draw = 0; draw < 10; ++draw) {
        ExtractorConfig cfg{4, 4, 3};
        FeatureExtractor fx;
        fx.init(cfg, rng);
        const StateWindow w = random_window(3, 4, rng);
        std::vector<double> weights(4);
        for (double& v : weights) v = rng.normal();

        auto loss = [&]() {
            const auto out = fx.extract(w);
            double acc = 0.0;
            for (size_t i = 0; i < out.size(); ++i) acc += weights[i] * out[i];
            return acc;
        };

        auto params = fx.params();
        nn::zero_grads(params);
        ExtractorTrace trace;
        fx.extract(w, trace);
        fx.backward(trace, weights.data());
        const auto rep = oracle::fd_check(params, loss);
        CHECK(rep.max_rel < 1e-6);
    }
}
