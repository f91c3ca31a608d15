#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "clstm/metrics.hpp"
#include "support/oracles.hpp"

using namespace clstm;
namespace fs = std::filesystem;

namespace {

std::vector<double> random_curve(size_t len, Rng& rng) {
    std::vector<double> c{1'000'000.0 * (0.5 + rng.uniform())};
    for (size_t i = 1; i < len; ++i) {
        c.push_back(c.back() * std::exp(0.002 * rng.normal()));
    }
    return c;
}

bool close(double a, double b, double rel = 1e-9) {
    return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1.0});
}

}  // namespace

TEST_CASE("cumulative return: the reported headline spot value") {
    // curve ending at 1.9081x its start
    const std::vector<double> curve = {1'000'000.0, 1'450'000.0, 1'908'100.0};
    CHECK(cumulative_return(curve) == doctest::Approx(0.9081).epsilon(1e-12));
    CHECK(cumulative_return({5.0, 5.0, 5.0}) == 0.0);
    CHECK(cumulative_return({3.0, 6.0}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(cumulative_return({}), DataError);
}

TEST_CASE("max earning rate: falling curve, trough-to-peak, doubling") {
    CHECK(max_earning_rate({100.0, 90.0, 80.0, 70.0}) == 0.0);
    CHECK(max_earning_rate({100.0, 50.0, 120.0}) == doctest::Approx(1.4).epsilon(1e-12));
    CHECK(max_earning_rate({100.0, 200.0}) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("max pullback: rising curve, peak-to-trough, halving") {
    CHECK(max_pullback({100.0, 110.0, 120.0}) == 0.0);
    CHECK(max_pullback({100.0, 150.0, 75.0}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(max_pullback({100.0, 50.0}) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("fast MER/MPB equal the O(n^2) pair scan on random curves") {
    Rng rng(77);
    for (int i = 0; i < 40; ++i) {
        const auto curve = random_curve(2 + rng.below(499), rng);
        CHECK(close(max_earning_rate(curve), oracle::mer_brute(curve)));
        CHECK(close(max_pullback(curve), oracle::mpb_brute(curve)));
        const double mpb = max_pullback(curve);
        CHECK(mpb >= 0.0);
        CHECK(mpb < 1.0);  // positive curves cannot lose more than everything
    }
}

TEST_CASE("CR/MER/MPB are invariant under uniform positive scaling") {
    Rng rng(78);
    const auto curve = random_curve(120, rng);
    for (double s : {0.001, 3.0, 1e4}) {
        auto scaled = curve;
        for (double& v : scaled) v *= s;
        CHECK(close(cumulative_return(scaled), cumulative_return(curve)));
        CHECK(close(max_earning_rate(scaled), max_earning_rate(curve)));
        CHECK(close(max_pullback(scaled), max_pullback(curve)));
    }
}

TEST_CASE("appending a new running maximum never decreases MER") {
    Rng rng(79);
    for (int i = 0; i < 20; ++i) {
        auto curve = random_curve(60, rng);
        const double before = max_earning_rate(curve);
        curve.push_back(*std::max_element(curve.begin(), curve.end()));
        CHECK(max_earning_rate(curve) >= before - 1e-15);
    }
}

TEST_CASE("appt divides profit by the executed-order count") {
    std::vector<double> curve = {10'000.0, 11'000.0};
    CHECK(*appt(curve, 10) == doctest::Approx(100.0));
    CHECK(*appt({5'000.0, 5'000.0}, 7) == 0.0);
    CHECK(!appt(curve, 0).has_value());
    const double expected = 908.1 / 37.0;
    CHECK(*appt({1'000'000.0, 1'000'908.1}, 37) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("sharpe: degenerate and analytic cases") {
    // constant daily return: zero variance -> undefined
    std::vector<double> steady = {100.0};
    for (int i = 0; i < 20; ++i) steady.push_back(steady.back() * 1.001);
    CHECK(!sharpe(steady, 0.0).has_value());

    // risk-free equal to the annualized mean return -> 0
    Rng rng(80);
    const auto curve = random_curve(100, rng);
    std::vector<double> rets;
    for (size_t i = 1; i < curve.size(); ++i) rets.push_back(curve[i] / curve[i - 1] - 1.0);
    double mean = 0.0;
    for (double r : rets) mean += r;
    mean /= static_cast<double>(rets.size());
    const auto sr0 = sharpe(curve, mean * 252.0);
    REQUIRE(sr0.has_value());
    CHECK(std::abs(*sr0) <= 1e-9);

    // seeded Gaussian returns against the direct mean/stdev oracle
    Rng rng2(81);
    std::vector<double> g = {1'000'000.0};
    for (int i = 0; i < 252; ++i) g.push_back(g.back() * (1.0 + 0.0005 + 0.01 * rng2.normal()));
    const auto sr = sharpe(g, 0.01);
    REQUIRE(sr.has_value());
    CHECK(close(*sr, oracle::sharpe_brute(g, 0.01, 252.0)));
}

TEST_CASE("metrics.csv writes NA markers and round-trips") {
    MetricsReport r;
    r.cr = 0.9081;
    r.mer = 1.135;
    r.mpb = 0.4651;
    r.appt = std::nullopt;
    r.sharpe = 1.154;
    r.nt = 37;
    const fs::path path = fs::temp_directory_path() / "metrics_na.csv";
    save_metrics(r, path.string());
    const MetricsReport q = load_metrics(path.string());
    CHECK(q.cr == doctest::Approx(r.cr));
    CHECK(q.mer == doctest::Approx(r.mer));
    CHECK(q.mpb == doctest::Approx(r.mpb));
    CHECK(!q.appt.has_value());
    CHECK(q.sharpe.has_value());
    CHECK(*q.sharpe == doctest::Approx(1.154));
    CHECK(q.nt == 37);
    fs::remove(path);
}

TEST_CASE("compute_metrics assembles the five measures") {
    const std::vector<double> curve = {1'000'000.0, 1'100'000.0, 900'000.0, 1'908'100.0};
    const MetricsReport m = compute_metrics(curve, 10);
    CHECK(m.cr == doctest::Approx(0.9081));
    CHECK(m.mer == doctest::Approx((1'908'100.0 - 900'000.0) / 900'000.0));
    CHECK(m.mpb == doctest::Approx(200'000.0 / 1'100'000.0));
    CHECK(*m.appt == doctest::Approx(908'100.0 / 10.0));
    CHECK(m.sharpe.has_value());
    CHECK(m.nt == 10);
}
