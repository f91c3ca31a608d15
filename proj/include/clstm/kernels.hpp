#pragma once

#include <cstddef>
#include <string>

namespace clstm::kern {

// Dense double-precision primitives behind the network layers. Each entry
// has a scalar reference implementation and, on x86-64, an AVX2/FMA variant
// selected at runtime; the two are equivalence-tested against each other.
//
// Reductions (dot, sumsq, gemv) may differ from the scalar path in the last
// bits because of reassociation; elementwise kernels (axpy, scale, adam) are
// bit-identical. Dispatch is fixed per process, so repeated runs on the same
// machine produce identical results.
struct Ops {
    // sum_i a[i] * b[i]
    double (*dot)(const double* a, const double* b, size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, size_t n);
    // y = W x + bias; W row-major (rows x cols); bias may be null
    void (*gemv)(const double* w, const double* x, const double* bias, double* y,
                 size_t rows, size_t cols);
    // dx += W^T dy
    void (*gemv_t_acc)(const double* w, const double* dy, double* dx,
                       size_t rows, size_t cols);
    // dW += dy (outer) x
    void (*ger_acc)(const double* dy, const double* x, double* dw,
                    size_t rows, size_t cols);
    // sum_i x[i]^2
    double (*sumsq)(const double* x, size_t n);
    // x *= alpha
    void (*scale)(double* x, double alpha, size_t n);
    // Bias-corrected Adam. bc1 = 1 - beta1^t, bc2 = 1 - beta2^t.
    void (*adam_update)(double* p, double* m, double* v, const double* g, size_t n,
                        double lr, double beta1, double beta2, double eps,
                        double bc1, double bc2);
};

enum class Backend { scalar, avx2 };

// Active kernel table. First call probes the CPU; the CLSTM_KERNEL
// environment variable ("scalar" or "avx2") overrides the probe.
const Ops& ops();

Backend active_backend();
std::string backend_name();

// Reference table, always available.
const Ops& scalar_ops();

// AVX2 table, or nullptr when the build or the CPU lacks support.
const Ops* avx2_ops();

// Force a backend (tests). Throws if the backend is unavailable.
void set_backend(Backend b);

}  // namespace clstm::kern
