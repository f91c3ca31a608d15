#include "clstm/market_data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "clstm/csv.hpp"
#include "clstm/linalg.hpp"

namespace clstm {

namespace {

constexpr const char* kOhlcvHeader = "date,open,high,low,close,adjclose,volume,ticker";

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool bar_is_valid(const Bar& b) {
    if (!(b.open > 0.0 && b.high > 0.0 && b.low > 0.0 && b.close > 0.0 && b.adjclose > 0.0))
        return false;
    if (b.volume < 0.0) return false;
    if (b.low > std::min(b.open, b.close)) return false;
    if (b.high < std::max(b.open, b.close)) return false;
    return true;
}

}  // namespace

std::vector<BarSeries> load_ohlcv_multi(const std::string& path, size_t* rejected_rows) {
    const auto lines = csv::read_lines(path);
    if (lines.empty()) throw DataError(path + ": empty input");
    if (lower(std::string(csv::trim(lines[0]))) != kOhlcvHeader) {
        throw DataError(path + ":1: bad header, expected '" + kOhlcvHeader + "'");
    }

    std::vector<BarSeries> series;
    std::map<std::string, size_t> index;
    size_t rejected = 0;
    size_t data_rows = 0;

    for (size_t i = 1; i < lines.size(); ++i) {
        const std::string_view line = csv::trim(lines[i]);
        if (line.empty()) continue;
        const auto fields = csv::split(line);
        const std::string where = path + ":" + std::to_string(i + 1);
        if (fields.size() != 8) {
            throw DataError(where + ": expected 8 fields, got " + std::to_string(fields.size()));
        }
        Bar bar;
        try {
            bar.date = Date::parse(csv::trim(fields[0]));
        } catch (const DataError& e) {
            throw DataError(where + ": " + e.what());
        }
        if (!csv::parse_double(fields[1], bar.open) || !csv::parse_double(fields[2], bar.high) ||
            !csv::parse_double(fields[3], bar.low) || !csv::parse_double(fields[4], bar.close) ||
            !csv::parse_double(fields[5], bar.adjclose) ||
            !csv::parse_double(fields[6], bar.volume)) {
            throw DataError(where + ": malformed numeric field");
        }
        const std::string ticker(csv::trim(fields[7]));
        if (ticker.empty()) throw DataError(where + ": empty ticker");
        data_rows++;
        if (!bar_is_valid(bar)) {
            rejected++;
            continue;
        }
        auto [it, inserted] = index.try_emplace(ticker, series.size());
        if (inserted) series.push_back(BarSeries{ticker, {}});
        series[it->second].bars.push_back(bar);
    }
    if (data_rows == 0) throw DataError(path + ": empty input (no data rows)");

    for (auto& s : series) {
        std::stable_sort(s.bars.begin(), s.bars.end(),
                         [](const Bar& a, const Bar& b) { return a.date < b.date; });
        for (size_t i = 1; i < s.bars.size(); ++i) {
            if (s.bars[i].date == s.bars[i - 1].date) {
                throw DataError(path + ": duplicate date " + s.bars[i].date.to_string() +
                                " for ticker " + s.ticker);
            }
        }
    }
    if (rejected_rows) *rejected_rows = rejected;
    return series;
}

BarSeries load_ohlcv(const std::string& path, size_t* rejected_rows) {
    auto all = load_ohlcv_multi(path, rejected_rows);
    if (all.size() != 1) {
        throw DataError(path + ": expected a single ticker, found " + std::to_string(all.size()));
    }
    return std::move(all[0]);
}

size_t Panel::date_index_at_or_after(Date d) const {
    auto it = std::lower_bound(dates.begin(), dates.end(), d);
    if (it == dates.end()) throw DataError("date " + d.to_string() + " is after the panel calendar");
    return static_cast<size_t>(it - dates.begin());
}

size_t Panel::date_index_at_or_before(Date d) const {
    auto it = std::upper_bound(dates.begin(), dates.end(), d);
    if (it == dates.begin()) throw DataError("date " + d.to_string() + " is before the panel calendar");
    return static_cast<size_t>(it - dates.begin()) - 1;
}

AlignResult align_panel(const std::vector<BarSeries>& input, Date min_start) {
    if (input.empty()) throw DataError("align_panel: no input series");

    AlignResult result;
    struct Clipped {
        const BarSeries* src;
        size_t begin;  // first bar with date >= min_start
    };
    std::vector<Clipped> live;
    for (const auto& s : input) {
        auto it = std::lower_bound(s.bars.begin(), s.bars.end(), min_start,
                                   [](const Bar& b, Date d) { return b.date < d; });
        if (it == s.bars.end()) {
            result.dropped.push_back(s.ticker + ": no data at or after " + min_start.to_string());
            continue;
        }
        live.push_back({&s, static_cast<size_t>(it - s.bars.begin())});
    }
    if (live.empty()) throw DataError("align_panel: empty date intersection");

    Date window_start = live[0].src->bars[live[0].begin].date;
    Date window_end = live[0].src->bars.back().date;
    for (const auto& c : live) {
        window_start = std::max(window_start, c.src->bars[c.begin].date);
        window_end = std::min(window_end, c.src->bars.back().date);
    }
    if (window_start > window_end) throw DataError("align_panel: empty date intersection");

    // Reference calendar: dates inside the window traded by at least half of
    // the series. A holed ticker gets dropped instead of shrinking the
    // calendar for everyone; a stray extra date in one file is ignored.
    std::map<Date, size_t> counts;
    for (const auto& c : live) {
        for (size_t i = c.begin; i < c.src->bars.size(); ++i) {
            const Date d = c.src->bars[i].date;
            if (d < window_start || d > window_end) continue;
            counts[d]++;
        }
    }
    std::vector<Date> calendar;
    for (const auto& [d, n] : counts) {
        if (n * 2 >= live.size()) calendar.push_back(d);
    }
    if (calendar.empty()) throw DataError("align_panel: empty date intersection");

    struct Kept {
        const BarSeries* src;
        std::vector<size_t> bar_index;  // per calendar date
    };
    std::vector<Kept> kept;
    for (const auto& c : live) {
        std::map<Date, size_t> by_date;
        for (size_t i = c.begin; i < c.src->bars.size(); ++i) by_date[c.src->bars[i].date] = i;
        Kept k{c.src, {}};
        k.bar_index.reserve(calendar.size());
        bool dense = true;
        for (const Date d : calendar) {
            auto it = by_date.find(d);
            if (it == by_date.end()) {
                result.dropped.push_back(c.src->ticker + ": missing " + d.to_string());
                dense = false;
                break;
            }
            k.bar_index.push_back(it->second);
        }
        if (dense) kept.push_back(std::move(k));
    }
    if (kept.empty()) throw DataError("align_panel: all tickers dropped during alignment");

    Panel& p = result.panel;
    p.dates = calendar;
    const size_t D = calendar.size();
    const size_t N = kept.size();
    p.tickers.reserve(N);
    for (const auto& k : kept) p.tickers.push_back(k.src->ticker);
    p.adjclose.resize(D * N);
    p.high.resize(D * N);
    p.low.resize(D * N);
    p.close.resize(D * N);
    p.turbulence.assign(D, 0.0);
    for (size_t k = 0; k < N; ++k) {
        for (size_t d = 0; d < D; ++d) {
            const Bar& b = kept[k].src->bars[kept[k].bar_index[d]];
            p.adjclose[d * N + k] = b.adjclose;
            p.high[d * N + k] = b.high;
            p.low[d * N + k] = b.low;
            p.close[d * N + k] = b.close;
        }
    }
    p.has_raw = true;
    return result;
}

namespace {

// ema[0] = x[0]; ema[t] = alpha*x[t] + (1-alpha)*ema[t-1], alpha = 2/(p+1)
std::vector<double> ema(const std::vector<double>& x, int period) {
    std::vector<double> out(x.size());
    const double alpha = 2.0 / (period + 1.0);
    double m = x.empty() ? 0.0 : x[0];
    for (size_t t = 0; t < x.size(); ++t) {
        m = (t == 0) ? x[0] : alpha * x[t] + (1.0 - alpha) * m;
        out[t] = m;
    }
    return out;
}

void macd_column(const std::vector<double>& close, const IndicatorParams& p,
                 std::vector<double>& out) {
    const auto fast = ema(close, p.macd_fast);
    const auto slow = ema(close, p.macd_slow);
    out.resize(close.size());
    for (size_t t = 0; t < close.size(); ++t) out[t] = fast[t] - slow[t];
}

// Wilder RSI. Flat window (zero gain and zero loss) is defined as 50.
void rsi_column(const std::vector<double>& close, const IndicatorParams& p,
                std::vector<double>& out) {
    const size_t n = close.size();
    const size_t period = static_cast<size_t>(p.rsi_period);
    out.assign(n, 50.0);
    if (n <= period) return;
    double avg_gain = 0.0, avg_loss = 0.0;
    for (size_t t = 1; t <= period; ++t) {
        const double d = close[t] - close[t - 1];
        avg_gain += std::max(d, 0.0);
        avg_loss += std::max(-d, 0.0);
    }
    avg_gain /= static_cast<double>(period);
    avg_loss /= static_cast<double>(period);
    auto rsi_of = [](double g, double l) {
        if (g == 0.0 && l == 0.0) return 50.0;
        if (l == 0.0) return 100.0;
        return 100.0 - 100.0 / (1.0 + g / l);
    };
    out[period] = rsi_of(avg_gain, avg_loss);
    for (size_t t = period + 1; t < n; ++t) {
        const double d = close[t] - close[t - 1];
        avg_gain = (avg_gain * (period - 1) + std::max(d, 0.0)) / period;
        avg_loss = (avg_loss * (period - 1) + std::max(-d, 0.0)) / period;
        out[t] = rsi_of(avg_gain, avg_loss);
    }
}

void cci_column(const std::vector<double>& high, const std::vector<double>& low,
                const std::vector<double>& close, const IndicatorParams& p,
                std::vector<double>& out) {
    const size_t n = close.size();
    const size_t period = static_cast<size_t>(p.cci_period);
    std::vector<double> tp(n);
    for (size_t t = 0; t < n; ++t) tp[t] = (high[t] + low[t] + close[t]) / 3.0;
    out.assign(n, 0.0);
    for (size_t t = period - 1; t < n; ++t) {
        double sma = 0.0;
        for (size_t k = t + 1 - period; k <= t; ++k) sma += tp[k];
        sma /= static_cast<double>(period);
        double md = 0.0;
        for (size_t k = t + 1 - period; k <= t; ++k) md += std::abs(tp[k] - sma);
        md /= static_cast<double>(period);
        out[t] = md == 0.0 ? 0.0 : (tp[t] - sma) / (p.cci_scale * md);
    }
}

// Wilder ADX. Zero denominators (flat series) resolve to 0.
void adx_column(const std::vector<double>& high, const std::vector<double>& low,
                const std::vector<double>& close, const IndicatorParams& p,
                std::vector<double>& out) {
    const size_t n = close.size();
    const size_t period = static_cast<size_t>(p.adx_period);
    out.assign(n, 0.0);
    if (n < 2 * period) return;
    std::vector<double> tr(n, 0.0), pdm(n, 0.0), ndm(n, 0.0);
    for (size_t t = 1; t < n; ++t) {
        tr[t] = std::max({high[t] - low[t], std::abs(high[t] - close[t - 1]),
                          std::abs(low[t] - close[t - 1])});
        const double up = high[t] - high[t - 1];
        const double dn = low[t - 1] - low[t];
        pdm[t] = (up > dn && up > 0.0) ? up : 0.0;
        ndm[t] = (dn > up && dn > 0.0) ? dn : 0.0;
    }
    std::vector<double> dx(n, 0.0);
    double str = 0.0, spdm = 0.0, sndm = 0.0;
    for (size_t t = 1; t <= period; ++t) {
        str += tr[t];
        spdm += pdm[t];
        sndm += ndm[t];
    }
    auto dx_of = [](double str_v, double sp, double sn) {
        if (str_v == 0.0) return 0.0;
        const double pdi = 100.0 * sp / str_v;
        const double ndi = 100.0 * sn / str_v;
        const double denom = pdi + ndi;
        return denom == 0.0 ? 0.0 : 100.0 * std::abs(pdi - ndi) / denom;
    };
    dx[period] = dx_of(str, spdm, sndm);
    for (size_t t = period + 1; t < n; ++t) {
        str = str - str / period + tr[t];
        spdm = spdm - spdm / period + pdm[t];
        sndm = sndm - sndm / period + ndm[t];
        dx[t] = dx_of(str, spdm, sndm);
    }
    double adx = 0.0;
    for (size_t t = period; t < 2 * period; ++t) adx += dx[t];
    adx /= static_cast<double>(period);
    out[2 * period - 1] = adx;
    for (size_t t = 2 * period; t < n; ++t) {
        adx = (adx * (period - 1) + dx[t]) / period;
        out[t] = adx;
    }
}

}  // namespace

Panel compute_indicators(const Panel& panel, const IndicatorParams& params) {
    if (!panel.has_raw) throw DataError("compute_indicators: panel lacks raw high/low/close data");
    const size_t D = panel.n_dates();
    const size_t N = panel.n_tickers();
    const size_t warmup = static_cast<size_t>(params.warmup);
    if (D <= warmup) {
        throw DataError("compute_indicators: " + std::to_string(D) +
                        " dates, need more than warm-up of " + std::to_string(warmup));
    }

    std::vector<double> macd(D * N), rsi(D * N), cci(D * N), adx(D * N);
    std::vector<double> h(D), l(D), c(D), col(D);
    for (size_t k = 0; k < N; ++k) {
        for (size_t d = 0; d < D; ++d) {
            h[d] = panel.high[d * N + k];
            l[d] = panel.low[d * N + k];
            c[d] = panel.close[d * N + k];
        }
        macd_column(c, params, col);
        for (size_t d = 0; d < D; ++d) macd[d * N + k] = col[d];
        rsi_column(c, params, col);
        for (size_t d = 0; d < D; ++d) rsi[d * N + k] = col[d];
        cci_column(h, l, c, params, col);
        for (size_t d = 0; d < D; ++d) cci[d * N + k] = col[d];
        adx_column(h, l, c, params, col);
        for (size_t d = 0; d < D; ++d) adx[d * N + k] = col[d];
    }

    // Trim the warm-up prefix so no partially initialized indicator escapes.
    Panel out;
    out.tickers = panel.tickers;
    const size_t DD = D - warmup;
    out.dates.assign(panel.dates.begin() + warmup, panel.dates.end());
    auto slice = [&](const std::vector<double>& m) {
        return std::vector<double>(m.begin() + warmup * N, m.end());
    };
    out.adjclose = slice(panel.adjclose);
    out.high = slice(panel.high);
    out.low = slice(panel.low);
    out.close = slice(panel.close);
    out.macd = slice(macd);
    out.rsi = slice(rsi);
    out.cci = slice(cci);
    out.adx = slice(adx);
    out.turbulence.assign(DD, 0.0);
    out.has_raw = true;
    out.has_indicators = true;
    return out;
}

double compute_turbulence(const Panel& panel, size_t date_index, size_t lookback) {
    const size_t N = panel.n_tickers();
    if (lookback < N + 2) {
        throw DataError("compute_turbulence: lookback " + std::to_string(lookback) +
                        " too short for " + std::to_string(N) + " tickers (need >= N+2)");
    }
    if (date_index < lookback + 1 || date_index >= panel.n_dates()) {
        throw DataError("compute_turbulence: date index " + std::to_string(date_index) +
                        " outside the computable range");
    }
    auto day_return = [&](size_t d, size_t k) {
        return panel.adjclose[d * N + k] / panel.adjclose[(d - 1) * N + k] - 1.0;
    };

    std::vector<double> mu(N, 0.0);
    for (size_t d = date_index - lookback; d < date_index; ++d) {
        for (size_t k = 0; k < N; ++k) mu[k] += day_return(d, k);
    }
    for (double& v : mu) v /= static_cast<double>(lookback);

    // Sample covariance (divisor lookback-1) of the window returns.
    std::vector<double> cov(N * N, 0.0);
    std::vector<double> dev(N);
    for (size_t d = date_index - lookback; d < date_index; ++d) {
        for (size_t k = 0; k < N; ++k) dev[k] = day_return(d, k) - mu[k];
        for (size_t i = 0; i < N; ++i) {
            for (size_t j = i; j < N; ++j) cov[i * N + j] += dev[i] * dev[j];
        }
    }
    const double denom = static_cast<double>(lookback - 1);
    for (size_t i = 0; i < N; ++i) {
        for (size_t j = i; j < N; ++j) {
            cov[i * N + j] /= denom;
            cov[j * N + i] = cov[i * N + j];
        }
    }
    double trace = 0.0;
    for (size_t i = 0; i < N; ++i) trace += cov[i * N + i];
    const double ridge = 1e-8 * trace / static_cast<double>(N);
    for (size_t i = 0; i < N; ++i) cov[i * N + i] += ridge;

    std::vector<double> y(N);
    for (size_t k = 0; k < N; ++k) y[k] = day_return(date_index, k) - mu[k];
    if (trace == 0.0) {
        // Degenerate window (all returns identical). Zero deviation has zero
        // distance; anything else is not measurable against a rank-0 history.
        double norm = 0.0;
        for (double v : y) norm += v * v;
        if (norm == 0.0) return 0.0;
        throw NumericError("compute_turbulence: covariance is singular after regularization");
    }
    std::vector<double> x;
    try {
        x = spd_solve(cov, y, N);
    } catch (const NumericError&) {
        throw NumericError("compute_turbulence: covariance is singular after regularization");
    }
    double dist = 0.0;
    for (size_t k = 0; k < N; ++k) dist += y[k] * x[k];
    return std::max(dist, 0.0);
}

void fill_turbulence(Panel& panel, size_t lookback) {
    const size_t D = panel.n_dates();
    panel.turbulence.assign(D, 0.0);
    for (size_t d = lookback + 1; d < D; ++d) {
        panel.turbulence[d] = compute_turbulence(panel, d, lookback);
    }
}

double turbulence_threshold(const std::vector<double>& history, double quantile) {
    if (history.empty()) throw DataError("turbulence_threshold: empty history");
    std::vector<double> sorted(history);
    std::sort(sorted.begin(), sorted.end());
    const double pos = quantile * static_cast<double>(sorted.size() - 1);
    const size_t idx = static_cast<size_t>(pos);
    const double frac = pos - static_cast<double>(idx);
    if (idx + 1 >= sorted.size()) return sorted.back();
    return sorted[idx] + frac * (sorted[idx + 1] - sorted[idx]);
}

void save_panel(const Panel& panel, const std::string& path) {
    if (!panel.has_indicators) throw DataError("save_panel: indicators not computed");
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "date,ticker,adjclose,macd,rsi,cci,adx,turbulence\n";
    const size_t N = panel.n_tickers();
    for (size_t d = 0; d < panel.n_dates(); ++d) {
        const std::string date = panel.dates[d].to_string();
        const std::string turb = csv::format_double(panel.turbulence[d]);
        for (size_t k = 0; k < N; ++k) {
            out << date << ',' << panel.tickers[k] << ','
                << csv::format_double(panel.adjclose[d * N + k]) << ','
                << csv::format_double(panel.macd[d * N + k]) << ','
                << csv::format_double(panel.rsi[d * N + k]) << ','
                << csv::format_double(panel.cci[d * N + k]) << ','
                << csv::format_double(panel.adx[d * N + k]) << ',' << turb << '\n';
        }
    }
    if (!out) throw DataError("write failed: " + path);
}

Panel load_panel(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty()) throw DataError(path + ": empty input");
    if (lower(std::string(csv::trim(lines[0]))) != "date,ticker,adjclose,macd,rsi,cci,adx,turbulence") {
        throw DataError(path + ":1: bad panel header");
    }
    Panel p;
    std::map<std::string, size_t> ticker_index;
    struct Row {
        Date date;
        size_t ticker;
        double adj, macd, rsi, cci, adx, turb;
    };
    std::vector<Row> rows;
    for (size_t i = 1; i < lines.size(); ++i) {
        const std::string_view line = csv::trim(lines[i]);
        if (line.empty()) continue;
        const auto f = csv::split(line);
        const std::string where = path + ":" + std::to_string(i + 1);
        if (f.size() != 8) throw DataError(where + ": expected 8 fields");
        Row r;
        try {
            r.date = Date::parse(csv::trim(f[0]));
        } catch (const DataError& e) {
            throw DataError(where + ": " + e.what());
        }
        const std::string ticker(csv::trim(f[1]));
        auto [it, inserted] = ticker_index.try_emplace(ticker, ticker_index.size());
        if (inserted) p.tickers.push_back(ticker);
        r.ticker = it->second;
        if (!csv::parse_double(f[2], r.adj) || !csv::parse_double(f[3], r.macd) ||
            !csv::parse_double(f[4], r.rsi) || !csv::parse_double(f[5], r.cci) ||
            !csv::parse_double(f[6], r.adx) || !csv::parse_double(f[7], r.turb)) {
            throw DataError(where + ": malformed numeric field");
        }
        rows.push_back(r);
    }
    if (rows.empty()) throw DataError(path + ": empty input (no data rows)");

    const size_t N = p.tickers.size();
    std::map<Date, size_t> date_index;
    for (const Row& r : rows) date_index.try_emplace(r.date, 0);
    size_t di = 0;
    for (auto& [d, idx] : date_index) {
        idx = di++;
        p.dates.push_back(d);
    }
    const size_t D = p.dates.size();
    const double nan = std::nan("");
    p.adjclose.assign(D * N, nan);
    p.macd.assign(D * N, nan);
    p.rsi.assign(D * N, nan);
    p.cci.assign(D * N, nan);
    p.adx.assign(D * N, nan);
    p.turbulence.assign(D, 0.0);
    for (const Row& r : rows) {
        const size_t d = date_index[r.date];
        p.adjclose[d * N + r.ticker] = r.adj;
        p.macd[d * N + r.ticker] = r.macd;
        p.rsi[d * N + r.ticker] = r.rsi;
        p.cci[d * N + r.ticker] = r.cci;
        p.adx[d * N + r.ticker] = r.adx;
        p.turbulence[d] = r.turb;
    }
    for (double v : p.adjclose) {
        if (std::isnan(v)) throw DataError(path + ": panel has (date,ticker) gaps");
    }
    p.has_raw = false;
    p.has_indicators = true;
    return p;
}

}  // namespace clstm
