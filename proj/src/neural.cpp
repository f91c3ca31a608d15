#include "clstm/neural.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "clstm/kernels.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace clstm::nn {

void zero_grads(ParamList& params) {
    for (auto& p : params) p.tensor->zero_grad();
}

bool params_finite(const ParamList& params) {
    for (const auto& p : params) {
        for (double x : p.tensor->v) {
            if (!std::isfinite(x)) return false;
        }
    }
    return true;
}

double grad_norm(const ParamList& params) {
    double ss = 0.0;
    for (const auto& p : params) {
        ss += kern::ops().sumsq(p.tensor->g.data(), p.tensor->g.size());
    }
    return std::sqrt(ss);
}

double clip_grad_norm(ParamList& params, double max_norm) {
    const double norm = grad_norm(params);
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (auto& p : params) kern::ops().scale(p.tensor->g.data(), s, p.tensor->g.size());
    }
    return norm;
}

void orthogonal_init(Tensor& t, Rng& rng, double gain) {
    if (t.shape.size() < 2) {
        std::fill(t.v.begin(), t.v.end(), 0.0);
        return;
    }
    const size_t rows = static_cast<size_t>(t.rows());
    const size_t cols = static_cast<size_t>(t.cols());
    const bool tall = rows >= cols;
    const size_t r = tall ? rows : cols;  // work on the tall orientation
    const size_t c = tall ? cols : rows;

    // Modified Gram-Schmidt over Gaussian columns.
    std::vector<double> a(r * c);
    for (double& x : a) x = rng.normal();
    for (size_t j = 0; j < c; ++j) {
        for (size_t k = 0; k < j; ++k) {
            double dot = 0.0;
            for (size_t i = 0; i < r; ++i) dot += a[i * c + k] * a[i * c + j];
            for (size_t i = 0; i < r; ++i) a[i * c + j] -= dot * a[i * c + k];
        }
        double nrm = 0.0;
        for (size_t i = 0; i < r; ++i) nrm += a[i * c + j] * a[i * c + j];
        nrm = std::sqrt(nrm);
        for (size_t i = 0; i < r; ++i) a[i * c + j] /= nrm;
    }
    for (size_t i = 0; i < rows; ++i) {
        for (size_t j = 0; j < cols; ++j) {
            t.v[i * cols + j] = gain * (tall ? a[i * c + j] : a[j * c + i]);
        }
    }
}

void Adam::attach(const ParamList& params) {
    m_.clear();
    v_.clear();
    for (const auto& p : params) {
        m_.emplace_back(p.tensor->size(), 0.0);
        v_.emplace_back(p.tensor->size(), 0.0);
    }
    step_count_ = 0;
}

void Adam::step(ParamList& params) {
    if (m_.size() != params.size()) throw std::logic_error("Adam: attach() before step()");
    for (const auto& p : params) {
        for (double g : p.tensor->g) {
            if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + p.name);
        }
    }
    step_count_++;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count_));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& t = *params[i].tensor;
        kern::ops().adam_update(t.v.data(), m_[i].data(), v_[i].data(), t.g.data(), t.size(),
                                lr, beta1, beta2, eps, bc1, bc2);
    }
}

void Linear::init(int64_t out, int64_t in, Rng& rng, double gain) {
    w.reshape({out, in});
    b.reshape({out});
    orthogonal_init(w, rng, gain);
}

void Linear::forward(const double* x, double* y) const {
    kern::ops().gemv(w.v.data(), x, b.v.data(), y, static_cast<size_t>(w.rows()),
                     static_cast<size_t>(w.cols()));
}

void Linear::backward(const double* x, const double* dy, double* dx_acc) {
    const size_t rows = static_cast<size_t>(w.rows());
    const size_t cols = static_cast<size_t>(w.cols());
    kern::ops().ger_acc(dy, x, w.g.data(), rows, cols);
    for (size_t r = 0; r < rows; ++r) b.g[r] += dy[r];
    if (dx_acc) kern::ops().gemv_t_acc(w.v.data(), dy, dx_acc, rows, cols);
}

void LstmCell::init(int64_t input, int64_t hidden, Rng& rng) {
    input_dim = input;
    hidden_dim = hidden;
    wx.reshape({4 * hidden, input});
    wh.reshape({4 * hidden, hidden});
    b.reshape({4 * hidden});
    orthogonal_init(wx, rng);
    orthogonal_init(wh, rng);
    // forget-gate bias 1: keeps the cell path open early in training
    for (int64_t i = hidden; i < 2 * hidden; ++i) b.v[i] = 1.0;
}

void LstmCell::forward(const double* x, const double* h_in, const double* c_in, double* h_out,
                       double* c_out, LstmStepCache* cache) const {
    const size_t H = static_cast<size_t>(hidden_dim);
    std::vector<double> a(4 * H);
    kern::ops().gemv(wx.v.data(), x, b.v.data(), a.data(), 4 * H, static_cast<size_t>(input_dim));
    std::vector<double> ah(4 * H);
    kern::ops().gemv(wh.v.data(), h_in, nullptr, ah.data(), 4 * H, H);
    for (size_t i = 0; i < 4 * H; ++i) a[i] += ah[i];

    for (size_t i = 0; i < H; ++i) a[i] = sigmoid(a[i]);                    // input gate
    for (size_t i = H; i < 2 * H; ++i) a[i] = sigmoid(a[i]);                // forget gate
    for (size_t i = 2 * H; i < 3 * H; ++i) a[i] = std::tanh(a[i]);          // candidate
    for (size_t i = 3 * H; i < 4 * H; ++i) a[i] = sigmoid(a[i]);            // output gate

    for (size_t i = 0; i < H; ++i) {
        c_out[i] = a[H + i] * c_in[i] + a[i] * a[2 * H + i];
    }
    if (cache) {
        cache->x.assign(x, x + input_dim);
        cache->h_prev.assign(h_in, h_in + H);
        cache->c_prev.assign(c_in, c_in + H);
        cache->tanh_c.resize(H);
    }
    for (size_t i = 0; i < H; ++i) {
        const double tc = std::tanh(c_out[i]);
        h_out[i] = a[3 * H + i] * tc;
        if (cache) cache->tanh_c[i] = tc;
    }
    if (cache) cache->gates = std::move(a);
}

void LstmCell::backward(const LstmStepCache& cache, const double* dh_out, const double* dc_out,
                        double* dh_in_acc, double* dc_in_acc, double* dx_acc) {
    const size_t H = static_cast<size_t>(hidden_dim);
    if (cache.gates.size() != 4 * H) {
        throw std::logic_error("LstmCell: backward without a recorded forward pass");
    }
    const double* gi = cache.gates.data();
    const double* gf = gi + H;
    const double* gg = gi + 2 * H;
    const double* go = gi + 3 * H;

    std::vector<double> da(4 * H);
    for (size_t i = 0; i < H; ++i) {
        const double tc = cache.tanh_c[i];
        const double d_o = dh_out[i] * tc;
        const double dc = dc_out[i] + dh_out[i] * go[i] * (1.0 - tc * tc);
        const double d_i = dc * gg[i];
        const double d_f = dc * cache.c_prev[i];
        const double d_g = dc * gi[i];
        dc_in_acc[i] += dc * gf[i];
        da[i] = d_i * gi[i] * (1.0 - gi[i]);
        da[H + i] = d_f * gf[i] * (1.0 - gf[i]);
        da[2 * H + i] = d_g * (1.0 - gg[i] * gg[i]);
        da[3 * H + i] = d_o * go[i] * (1.0 - go[i]);
    }

    kern::ops().ger_acc(da.data(), cache.x.data(), wx.g.data(), 4 * H,
                        static_cast<size_t>(input_dim));
    kern::ops().ger_acc(da.data(), cache.h_prev.data(), wh.g.data(), 4 * H, H);
    for (size_t i = 0; i < 4 * H; ++i) b.g[i] += da[i];
    kern::ops().gemv_t_acc(wh.v.data(), da.data(), dh_in_acc, 4 * H, H);
    if (dx_acc) {
        kern::ops().gemv_t_acc(wx.v.data(), da.data(), dx_acc, 4 * H,
                               static_cast<size_t>(input_dim));
    }
}

namespace {

constexpr char kMagic[8] = {'C', 'L', 'S', 'T', 'M', 'P', 'P', 'O'};
constexpr uint32_t kFormatVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamList& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kFormatVersion);
    write_pod(out, static_cast<uint32_t>(params.size()));
    for (const auto& p : params) {
        write_pod(out, static_cast<uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        write_pod(out, static_cast<uint32_t>(p.tensor->shape.size()));
        for (int64_t d : p.tensor->shape) write_pod(out, d);
        out.write(reinterpret_cast<const char*>(p.tensor->v.data()),
                  static_cast<std::streamsize>(p.tensor->v.size() * sizeof(double)));
    }
    if (!out) throw DataError("checkpoint write failed: " + path);
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError(path + ": not a checkpoint file (bad magic)");
    }
    uint32_t version = 0, count = 0;
    read_pod(in, version);
    if (version != kFormatVersion) {
        throw DataError(path + ": unsupported checkpoint version " + std::to_string(version));
    }
    read_pod(in, count);
    std::map<std::string, Tensor> records;
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t name_len = 0;
        read_pod(in, name_len);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        uint32_t ndim = 0;
        read_pod(in, ndim);
        std::vector<int64_t> shape(ndim);
        for (auto& d : shape) read_pod(in, d);
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.v.data()),
                static_cast<std::streamsize>(t.v.size() * sizeof(double)));
        if (!in) throw DataError(path + ": truncated checkpoint");
        records.emplace(std::move(name), std::move(t));
    }
    return records;
}

void apply_checkpoint(const std::map<std::string, Tensor>& records, ParamList& params) {
    for (auto& p : params) {
        auto it = records.find(p.name);
        if (it == records.end()) throw DataError("checkpoint is missing record '" + p.name + "'");
        if (it->second.shape != p.tensor->shape) {
            throw DataError("checkpoint shape mismatch for '" + p.name + "'");
        }
        p.tensor->v = it->second.v;
    }
}

}  // namespace clstm::nn
