#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace slicewise::kernels {

/// Exact integer moments of 8-bit samples under a mask.
struct Moments {
    std::uint64_t count = 0;
    std::uint64_t sum = 0;
    std::uint64_t sum_sq = 0;
};

/// One implementation of every data-parallel inner loop.
///
/// All variants must produce bit-identical results: integer kernels are
/// exact, and floating kernels perform the same IEEE operations in the
/// same order (no FMA contraction).
struct KernelTable {
    const char* name;

    /// Bytes != 0.
    std::size_t (*count_nonzero)(const std::uint8_t* a, std::size_t n);

    /// Positions where both a and b are nonzero.
    std::size_t (*count_both)(const std::uint8_t* a, const std::uint8_t* b, std::size_t n);

    /// min_i (x - xs[i])^2 + (y - ys[i])^2 + (z - zs[i])^2, or +inf when n == 0.
    double (*min_sq_distance)(double x, double y, double z, const double* xs, const double* ys,
                              const double* zs, std::size_t n);

    /// dst[i] = floor((clamp(src[i], lo, hi) - lo) * 255 / (hi - lo) + 0.5). Requires lo < hi.
    void (*window_to_u8)(const float* src, std::size_t n, double lo, double hi, std::uint8_t* dst);

    /// Count, sum and sum of squares of values[i] where mask[i] != 0.
    Moments (*masked_moments)(const std::uint8_t* values, const std::uint8_t* mask, std::size_t n);
};

const KernelTable& scalar_table();

/// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2.
const KernelTable* avx2_table();

/// Table selected at first use. SLICEWISE_SIMD=scalar|avx2 overrides detection.
const KernelTable& active();

/// Looks a table up by name ("scalar", "avx2"); nullptr when unavailable.
const KernelTable* table_by_name(std::string_view name);

}  // namespace slicewise::kernels
