#include "clstm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "clstm/csv.hpp"

namespace clstm {

double cumulative_return(const std::vector<double>& curve) {
    if (curve.empty()) throw DataError("cumulative_return: empty curve");
    if (!(curve.front() > 0.0)) throw DataError("cumulative_return: initial value must be > 0");
    return (curve.back() - curve.front()) / curve.front();
}

double max_earning_rate(const std::vector<double>& curve) {
    if (curve.size() < 2) throw DataError("max_earning_rate: need at least 2 points");
    double best = 0.0;
    double trough = curve[0];
    for (size_t x = 1; x < curve.size(); ++x) {
        if (curve[x] > trough) best = std::max(best, (curve[x] - trough) / trough);
        trough = std::min(trough, curve[x]);
    }
    return best;
}

double max_pullback(const std::vector<double>& curve) {
    if (curve.size() < 2) throw DataError("max_pullback: need at least 2 points");
    double best = 0.0;
    double peak = curve[0];
    for (size_t x = 1; x < curve.size(); ++x) {
        if (curve[x] < peak) best = std::max(best, (peak - curve[x]) / peak);
        peak = std::max(peak, curve[x]);
    }
    return best;
}

std::optional<double> appt(const std::vector<double>& curve, size_t n_trades) {
    if (curve.empty()) throw DataError("appt: empty curve");
    if (n_trades == 0) return std::nullopt;
    return (curve.back() - curve.front()) / static_cast<double>(n_trades);
}

std::optional<double> sharpe(const std::vector<double>& curve, double risk_free_annual,
                             double periods_per_year) {
    if (curve.size() < 2) throw DataError("sharpe: need at least 2 points");
    std::vector<double> rets(curve.size() - 1);
    for (size_t i = 1; i < curve.size(); ++i) rets[i - 1] = curve[i] / curve[i - 1] - 1.0;
    double mean = 0.0;
    for (double r : rets) mean += r;
    mean /= static_cast<double>(rets.size());
    if (rets.size() < 2) return std::nullopt;
    double ss = 0.0;
    for (double r : rets) ss += (r - mean) * (r - mean);
    const double sd = std::sqrt(ss / static_cast<double>(rets.size() - 1));
    if (sd == 0.0) return std::nullopt;
    return (mean * periods_per_year - risk_free_annual) / (sd * std::sqrt(periods_per_year));
}

std::vector<double> equity_values(const EquityCurve& curve) {
    std::vector<double> v;
    v.reserve(curve.size());
    for (const auto& p : curve) v.push_back(p.portfolio_value);
    return v;
}

MetricsReport compute_metrics(const std::vector<double>& curve, size_t n_trades,
                              double risk_free_annual, double periods_per_year) {
    MetricsReport r;
    r.cr = cumulative_return(curve);
    r.mer = max_earning_rate(curve);
    r.mpb = max_pullback(curve);
    r.appt = appt(curve, n_trades);
    r.sharpe = sharpe(curve, risk_free_annual, periods_per_year);
    r.nt = n_trades;
    return r;
}

void save_metrics(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    auto opt = [](const std::optional<double>& v) {
        return v ? csv::format_double(*v) : std::string("NA");
    };
    out << "metric,value\n";
    out << "CR," << csv::format_double(report.cr) << '\n';
    out << "MER," << csv::format_double(report.mer) << '\n';
    out << "MPB," << csv::format_double(report.mpb) << '\n';
    out << "APPT," << opt(report.appt) << '\n';
    out << "SR," << opt(report.sharpe) << '\n';
    out << "NT," << report.nt << '\n';
    if (!out) throw DataError("write failed: " + path);
}

MetricsReport load_metrics(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty() || !csv::header_matches(lines[0], "metric,value")) {
        throw DataError(path + ": bad metrics header");
    }
    MetricsReport r;
    for (size_t i = 1; i < lines.size(); ++i) {
        const std::string_view line = csv::trim(lines[i]);
        if (line.empty()) continue;
        const auto f = csv::split(line);
        if (f.size() != 2) throw DataError(path + ":" + std::to_string(i + 1) + ": expected 2 fields");
        const std::string_view key = csv::trim(f[0]);
        const std::string_view val = csv::trim(f[1]);
        auto opt_val = [&]() -> std::optional<double> {
            if (val == "NA") return std::nullopt;
            double d = 0.0;
            if (!csv::parse_double(val, d)) {
                throw DataError(path + ":" + std::to_string(i + 1) + ": malformed value");
            }
            return d;
        };
        if (key == "CR") r.cr = opt_val().value_or(0.0);
        else if (key == "MER") r.mer = opt_val().value_or(0.0);
        else if (key == "MPB") r.mpb = opt_val().value_or(0.0);
        else if (key == "APPT") r.appt = opt_val();
        else if (key == "SR") r.sharpe = opt_val();
        else if (key == "NT") {
            int64_t n = 0;
            if (!csv::parse_i64(val, n)) {
                throw DataError(path + ":" + std::to_string(i + 1) + ": malformed trade count");
            }
            r.nt = static_cast<size_t>(n);
        } else {
            throw DataError(path + ":" + std::to_string(i + 1) + ": unknown metric '" +
                            std::string(key) + "'");
        }
    }
    return r;
}

}  // namespace clstm
