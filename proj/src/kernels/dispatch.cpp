#include <atomic>
#include <cstdlib>
#include <string>

#include "ardiff/kernels.hpp"

namespace ardiff::kernels {

#ifndef ARDIFF_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif
#ifndef ARDIFF_HAVE_NEON
const KernelTable* neon_table() { return nullptr; }
#endif

bool cpu_supports(Backend backend) {
    switch (backend) {
        case Backend::Scalar:
            return true;
        case Backend::Avx2:
#if defined(ARDIFF_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Backend::Neon:
#ifdef ARDIFF_HAVE_NEON
            return true;
#else
            return false;
#endif
    }
    return false;
}

namespace {

const KernelTable* table_for(Backend backend) {
    if (!cpu_supports(backend)) {
        return nullptr;
    }
    switch (backend) {
        case Backend::Scalar:
            return &scalar_table();
        case Backend::Avx2:
            return avx2_table();
        case Backend::Neon:
            return neon_table();
    }
    return nullptr;
}

const KernelTable* initial_table() {
    if (const char* forced = std::getenv("ARDIFF_KERNELS")) {
        const std::string name(forced);
        for (Backend b : {Backend::Scalar, Backend::Avx2, Backend::Neon}) {
            if (name == backend_name(b)) {
                if (const KernelTable* t = table_for(b)) {
                    return t;
                }
            }
        }
    }
    for (Backend b : {Backend::Avx2, Backend::Neon}) {
        if (const KernelTable* t = table_for(b)) {
            return t;
        }
    }
    return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> table{initial_table()};
    return table;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

bool select_backend(Backend backend) {
    const KernelTable* t = table_for(backend);
    if (t == nullptr) {
        return false;
    }
    current().store(t, std::memory_order_release);
    return true;
}

std::string_view backend_name(Backend backend) {
    switch (backend) {
        case Backend::Scalar:
            return "scalar";
        case Backend::Avx2:
            return "avx2";
        case Backend::Neon:
            return "neon";
    }
    return "unknown";
}

}  // namespace ardiff::kernels
