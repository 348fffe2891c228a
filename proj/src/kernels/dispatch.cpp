#include <cstdlib>
#include <string>

#include "slicewise/kernels.hpp"

namespace slicewise::kernels {

#if defined(SLICEWISE_HAVE_AVX2)
const KernelTable& avx2_table_impl();
#endif

namespace {

bool cpu_has_avx2()
{
#if defined(SLICEWISE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const KernelTable& detect()
{
    if (const char* env = std::getenv("SLICEWISE_SIMD")) {
        if (const KernelTable* t = table_by_name(env)) return *t;
    }
    if (const KernelTable* t = avx2_table()) return *t;
    return scalar_table();
}

}  // namespace

const KernelTable* avx2_table()
{
#if defined(SLICEWISE_HAVE_AVX2)
    if (cpu_has_avx2()) return &avx2_table_impl();
#endif
    return nullptr;
}

const KernelTable* table_by_name(std::string_view name)
{
    if (name == "scalar") return &scalar_table();
    if (name == "avx2") return avx2_table();
    return nullptr;
}

const KernelTable& active()
{
    static const KernelTable& table = detect();
    return table;
}

}  // namespace slicewise::kernels
