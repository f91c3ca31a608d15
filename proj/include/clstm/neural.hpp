#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "clstm/common.hpp"
#include "clstm/rng.hpp"

namespace clstm::nn {

// Dense 64-bit parameter tensor with a same-shape gradient accumulator.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<double> v;
    std::vector<double> g;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> s) { reshape(std::move(s)); }

    void reshape(std::vector<int64_t> s) {
        shape = std::move(s);
        size_t n = 1;
        for (int64_t d : shape) n *= static_cast<size_t>(d);
        v.assign(n, 0.0);
        g.assign(n, 0.0);
    }

    size_t size() const { return v.size(); }
    int64_t rows() const { return shape.empty() ? 0 : shape[0]; }
    int64_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }
};

struct NamedParam {
    std::string name;
    Tensor* tensor;
};
using ParamList = std::vector<NamedParam>;

void zero_grads(ParamList& params);
bool params_finite(const ParamList& params);
double grad_norm(const ParamList& params);
// Scales all gradients so the global L2 norm is at most max_norm; returns
// the pre-clip norm.
double clip_grad_norm(ParamList& params, double max_norm);

// Orthogonal init (columns orthonormal when rows >= cols, rows otherwise),
// scaled by gain. Vectors (1-d tensors) are zero-filled.
void orthogonal_init(Tensor& t, Rng& rng, double gain = 1.0);

// Bias-corrected Adam over a parameter list. Moments are keyed by position,
// so the list must be stable across steps.
class Adam {
public:
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void attach(const ParamList& params);
    // Applies one update from the accumulated gradients. Throws NumericError
    // naming the parameter on any non-finite gradient.
    void step(ParamList& params);
    int64_t step_count() const { return step_count_; }

private:
    int64_t step_count_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

// y = W x + b
struct Linear {
    Tensor w;  // (out, in)
    Tensor b;  // (out)

    void init(int64_t out, int64_t in, Rng& rng, double gain = 1.0);
    int64_t in_dim() const { return w.cols(); }
    int64_t out_dim() const { return w.rows(); }

    void forward(const double* x, double* y) const;
    // Accumulates dW and db from dy; adds W^T dy into dx_acc when non-null.
    void backward(const double* x, const double* dy, double* dx_acc);
};

// Per-step context recorded by the LSTM forward pass for BPTT.
struct LstmStepCache {
    std::vector<double> x;
    std::vector<double> h_prev;
    std::vector<double> c_prev;
    std::vector<double> gates;   // [i f g o] post-activation, 4H
    std::vector<double> tanh_c;  // tanh(c_new), H
};

// Standard LSTM cell: sigmoid input/forget/output gates, tanh candidate and
// output squashing. Gate blocks are stacked [i f g o] in the weight rows.
struct LstmCell {
    Tensor wx;  // (4H, I)
    Tensor wh;  // (4H, H)
    Tensor b;   // (4H); forget block initialized to 1
    int64_t input_dim = 0;
    int64_t hidden_dim = 0;

    void init(int64_t input, int64_t hidden, Rng& rng);

    void forward(const double* x, const double* h_in, const double* c_in, double* h_out,
                 double* c_out, LstmStepCache* cache = nullptr) const;

    // Backward through one step. dh_out/dc_out are the incoming gradients;
    // dh_in_acc/dc_in_acc receive the gradients w.r.t. the previous step's
    // state, dx_acc (optional) w.r.t. the input.
    void backward(const LstmStepCache& cache, const double* dh_out, const double* dc_out,
                  double* dh_in_acc, double* dc_in_acc, double* dx_acc);
};

// Checkpoint container: magic "CLSTMPPO", u32 format version, u32 record
// count, then (name, shape, row-major f64 values) records, little-endian.
void save_checkpoint(const std::string& path, const ParamList& params);
std::map<std::string, Tensor> load_checkpoint(const std::string& path);
// Copies matching records into the list; throws on a missing name or a
// shape mismatch.
void apply_checkpoint(const std::map<std::string, Tensor>& records, ParamList& params);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace clstm::nn
