#include <cstdlib>
#include <stdexcept>
#include <string>

#include "clstm/kernels.hpp"

namespace clstm::kern {

#if defined(CLSTM_BUILD_AVX2)
const Ops* avx2_ops_impl();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(CLSTM_BUILD_AVX2) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

struct Dispatch {
    const Ops* table;
    Backend backend;

    Dispatch() {
        const Ops* avx2 = avx2_ops();
        bool want_avx2 = avx2 != nullptr;
        if (const char* env = std::getenv("CLSTM_KERNEL")) {
            const std::string v(env);
            if (v == "scalar") {
                want_avx2 = false;
            } else if (v == "avx2") {
                if (!avx2) throw std::runtime_error("CLSTM_KERNEL=avx2 but AVX2 is unavailable");
                want_avx2 = true;
            }
        }
        if (want_avx2) {
            table = avx2;
            backend = Backend::avx2;
        } else {
            table = &scalar_ops();
            backend = Backend::scalar;
        }
    }
};

Dispatch& dispatch() {
    static Dispatch d;
    return d;
}

}  // namespace

const Ops* avx2_ops() {
#if defined(CLSTM_BUILD_AVX2)
    return cpu_has_avx2() ? avx2_ops_impl() : nullptr;
#else
    return nullptr;
#endif
}

const Ops& ops() { return *dispatch().table; }

Backend active_backend() { return dispatch().backend; }

std::string backend_name() {
    return active_backend() == Backend::avx2 ? "avx2" : "scalar";
}

void set_backend(Backend b) {
    if (b == Backend::avx2) {
        const Ops* avx2 = avx2_ops();
        if (!avx2) throw std::runtime_error("AVX2 backend unavailable on this machine");
        dispatch().table = avx2;
    } else {
        dispatch().table = &scalar_ops();
    }
    dispatch().backend = b;
}

}  // namespace clstm::kern
