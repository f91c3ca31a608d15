#pragma once

#include <charconv>
#include <compare>
#include <cstdint>
#include <string>

#include "clstm/common.hpp"

namespace clstm {

// Calendar day stored as a serial day number (days since 1970-01-01).
// Cheap to compare and hash; converts to/from ISO-8601 strings at the edges.
class Date {
public:
    Date() : serial_(0) {}
    explicit Date(int64_t serial) : serial_(serial) {}

    static Date from_ymd(int y, int m, int d) { return Date(days_from_civil(y, m, d)); }

    // Parses strict "YYYY-MM-DD".
    static Date parse(std::string_view s) {
        int y = 0, m = 0, d = 0;
        if (s.size() != 10 || s[4] != '-' || s[7] != '-' ||
            !parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), m) ||
            !parse_int(s.substr(8, 2), d)) {
            throw DataError("invalid date '" + std::string(s) + "' (expected YYYY-MM-DD)");
        }
        if (m < 1 || m > 12 || d < 1 || d > days_in_month(y, m)) {
            throw DataError("invalid calendar date '" + std::string(s) + "'");
        }
        return from_ymd(y, m, d);
    }

    int64_t serial() const { return serial_; }

    void ymd(int& y, int& m, int& d) const { civil_from_days(serial_, y, m, d); }

    std::string to_string() const {
        int y, m, d;
        ymd(y, m, d);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
        return buf;
    }

    // Calendar-month shift with day-of-month clamping (Jan 31 + 1m -> Feb 28/29).
    Date add_months(int n) const {
        int y, m, d;
        ymd(y, m, d);
        int total = (y * 12 + (m - 1)) + n;
        int ny = total / 12;
        int nm = total % 12;
        if (nm < 0) {
            nm += 12;
            ny -= 1;
        }
        nm += 1;
        int nd = d;
        int dim = days_in_month(ny, nm);
        if (nd > dim) nd = dim;
        return from_ymd(ny, nm, nd);
    }

    auto operator<=>(const Date&) const = default;

private:
    int64_t serial_;

    static bool parse_int(std::string_view s, int& out) {
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
        return ec == std::errc() && p == s.data() + s.size();
    }

    static bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

    static int days_in_month(int y, int m) {
        static constexpr int dim[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        return (m == 2 && is_leap(y)) ? 29 : dim[m - 1];
    }

    // Howard Hinnant's civil-days algorithms.
    static int64_t days_from_civil(int y, int m, int d) {
        y -= m <= 2;
        const int64_t era = (y >= 0 ? y : y - 399) / 400;
        const unsigned yoe = static_cast<unsigned>(y - era * 400);
        const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
        const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        return era * 146097 + static_cast<int64_t>(doe) - 719468;
    }

    static void civil_from_days(int64_t z, int& y, int& m, int& d) {
        z += 719468;
        const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
        const unsigned doe = static_cast<unsigned>(z - era * 146097);
        const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
        const int64_t yr = static_cast<int64_t>(yoe) + era * 400;
        const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        const unsigned mp = (5 * doy + 2) / 153;
        d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
        m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
        y = static_cast<int>(yr + (m <= 2));
    }
};

}  // namespace clstm
