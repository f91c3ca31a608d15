#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clstm/date.hpp"

namespace clstm {

struct Bar {
    Date date;
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0;
    double adjclose = 0.0;
    double volume = 0.0;
};

struct BarSeries {
    std::string ticker;
    std::vector<Bar> bars;  // strictly increasing dates
};

struct IndicatorParams {
    int macd_fast = 12;
    int macd_slow = 26;
    int rsi_period = 14;
    int cci_period = 14;
    double cci_scale = 0.015;
    int adx_period = 14;
    // Leading dates trimmed after indicator computation so downstream
    // consumers never see a partially initialized value.
    int warmup = 63;
};

// Date-aligned multi-ticker table. Matrices are row-major (dates x tickers).
// Raw high/low/close are present when built from bar data and absent when
// reloaded from an exported feature panel.
struct Panel {
    std::vector<std::string> tickers;
    std::vector<Date> dates;
    std::vector<double> adjclose;
    std::vector<double> high;
    std::vector<double> low;
    std::vector<double> close;
    std::vector<double> macd;
    std::vector<double> rsi;
    std::vector<double> cci;
    std::vector<double> adx;
    std::vector<double> turbulence;  // one scalar per date
    bool has_raw = false;
    bool has_indicators = false;

    size_t n_tickers() const { return tickers.size(); }
    size_t n_dates() const { return dates.size(); }
    double at(const std::vector<double>& m, size_t d, size_t k) const {
        return m[d * tickers.size() + k];
    }
    // Index of the first date >= d; throws if none.
    size_t date_index_at_or_after(Date d) const;
    // Index of the last date <= d; throws if none.
    size_t date_index_at_or_before(Date d) const;
};

struct AlignResult {
    Panel panel;
    std::vector<std::string> dropped;  // tickers with holes, with reason
};

// Single-ticker CSV load. Schema: date,open,high,low,close,adjclose,volume,ticker.
// Rows are re-sorted by date; duplicate dates are an error; rows with
// non-positive prices or inconsistent high/low are rejected (counted in
// *rejected_rows when given).
BarSeries load_ohlcv(const std::string& path, size_t* rejected_rows = nullptr);

// Same schema, but the file may interleave multiple tickers; returns one
// series per ticker, ordered by first appearance.
std::vector<BarSeries> load_ohlcv_multi(const std::string& path, size_t* rejected_rows = nullptr);

// Builds the shared calendar from min_start onward and drops tickers that
// have holes on it. The calendar window is [latest first date, earliest last
// date]; a date belongs to the reference calendar when at least half of the
// series trade on it, so a stray extra date in one file does not evict
// everyone else.
AlignResult align_panel(const std::vector<BarSeries>& series, Date min_start);

// Fills MACD/RSI/CCI/ADX and trims the first params.warmup dates.
Panel compute_indicators(const Panel& panel, const IndicatorParams& params);

// Mahalanobis distance of the day's cross-sectional return vector from the
// mean/covariance of the preceding `lookback` daily returns (date excluded).
// Requires date_index >= lookback + 1 so every return in the window exists.
double compute_turbulence(const Panel& panel, size_t date_index, size_t lookback);

// Fills panel.turbulence: zero before lookback+1, computed after.
void fill_turbulence(Panel& panel, size_t lookback);

// 90th percentile by default, linear interpolation between order statistics.
double turbulence_threshold(const std::vector<double>& history, double quantile = 0.9);

// Feature-panel export/import. Columns:
// date,ticker,adjclose,macd,rsi,cci,adx,turbulence
void save_panel(const Panel& panel, const std::string& path);
Panel load_panel(const std::string& path);

}  // namespace clstm
