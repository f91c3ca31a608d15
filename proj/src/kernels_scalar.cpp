#include <cmath>
#include <cstring>

#include "clstm/kernels.hpp"

// Reference kernels. Plain loops, no reassociation tricks: these define the
// semantics the SIMD variants are tested against.

namespace clstm::kern {
namespace {

double dot_scalar(const double* a, const double* b, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(const double* w, const double* x, const double* bias, double* y,
                 size_t rows, size_t cols) {
    for (size_t r = 0; r < rows; ++r) {
        double acc = bias ? bias[r] : 0.0;
        const double* row = w + r * cols;
        for (size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
}

void gemv_t_acc_scalar(const double* w, const double* dy, double* dx,
                       size_t rows, size_t cols) {
    for (size_t r = 0; r < rows; ++r) {
        const double g = dy[r];
        if (g == 0.0) continue;
        const double* row = w + r * cols;
        for (size_t c = 0; c < cols; ++c) dx[c] += g * row[c];
    }
}

void ger_acc_scalar(const double* dy, const double* x, double* dw,
                    size_t rows, size_t cols) {
    for (size_t r = 0; r < rows; ++r) {
        const double g = dy[r];
        if (g == 0.0) continue;
        double* row = dw + r * cols;
        for (size_t c = 0; c < cols; ++c) row[c] += g * x[c];
    }
}

double sumsq_scalar(const double* x, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

void scale_scalar(double* x, double alpha, size_t n) {
    for (size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void adam_update_scalar(double* p, double* m, double* v, const double* g, size_t n,
                        double lr, double beta1, double beta2, double eps,
                        double bc1, double bc2) {
    for (size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i]);
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops table = {
        dot_scalar,   axpy_scalar,  gemv_scalar,  gemv_t_acc_scalar,
        ger_acc_scalar, sumsq_scalar, scale_scalar, adam_update_scalar,
    };
    return table;
}

}  // namespace clstm::kern
