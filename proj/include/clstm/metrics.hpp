#pragma once

#include <optional>
#include <string>
#include <vector>

#include "clstm/trading_env.hpp"

namespace clstm {

// The five evaluation measures. APPT and SR carry an undefined marker
// (emitted as NA) when the trade count or the return variance is zero.
struct MetricsReport {
    double cr = 0.0;
    double mer = 0.0;
    double mpb = 0.0;
    std::optional<double> appt;
    std::optional<double> sharpe;
    size_t nt = 0;
};

// (P_end - P_0) / P_0
double cumulative_return(const std::vector<double>& curve);

// Largest trough-to-peak gain: max over y < x with A_y < A_x of
// (A_x - A_y) / A_y; 0 for a curve with no rising pair.
double max_earning_rate(const std::vector<double>& curve);

// Largest peak-to-trough loss as a positive magnitude: max over y < x with
// A_y > A_x of (A_y - A_x) / A_y; 0 for a monotonically rising curve.
double max_pullback(const std::vector<double>& curve);

// (P_end - P_0) / NT; undefined when NT == 0.
std::optional<double> appt(const std::vector<double>& curve, size_t n_trades);

// Annualized (mean*P - rf) / (stdev*sqrt(P)) on simple daily returns, sample
// standard deviation; undefined at zero variance.
std::optional<double> sharpe(const std::vector<double>& curve, double risk_free_annual,
                             double periods_per_year = 252.0);

MetricsReport compute_metrics(const std::vector<double>& curve, size_t n_trades,
                              double risk_free_annual = 0.0, double periods_per_year = 252.0);

std::vector<double> equity_values(const EquityCurve& curve);

// metrics.csv: metric,value rows for CR, MER, MPB, APPT, SR, NT.
void save_metrics(const MetricsReport& report, const std::string& path);
MetricsReport load_metrics(const std::string& path);

}  // namespace clstm
