#pragma once

#include <cmath>
#include <vector>

#include "clstm/common.hpp"

namespace clstm {

// Cholesky factorization of a symmetric positive-definite matrix (row-major
// n x n), in place into the lower triangle. Throws NumericError when a pivot
// is not strictly positive.
inline void cholesky(std::vector<double>& a, size_t n) {
    for (size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
        if (!(d > 0.0)) throw NumericError("cholesky: matrix not positive definite");
        const double ljj = std::sqrt(d);
        a[j * n + j] = ljj;
        for (size_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / ljj;
        }
    }
}

// Solves A x = b for SPD A via Cholesky; returns x. A is copied.
inline std::vector<double> spd_solve(std::vector<double> a, std::vector<double> b, size_t n) {
    cholesky(a, n);
    // forward: L y = b
    for (size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
        b[i] = s / a[i * n + i];
    }
    // backward: L^T x = y
    for (size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (size_t k = ii + 1; k < n; ++k) s -= a[k * n + ii] * b[k];
        b[ii] = s / a[ii * n + ii];
    }
    return b;
}

}  // namespace clstm
