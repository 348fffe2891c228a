// Compiled with -mavx2 only; never called unless the CPU reports AVX2.

#include <immintrin.h>

#include <cmath>
#include <limits>

#include "slicewise/kernels.hpp"

namespace slicewise::kernels {
namespace {

inline std::size_t popcount32(std::uint32_t v)
{
    return static_cast<std::size_t>(__builtin_popcount(v));
}

std::size_t count_nonzero_avx2(const std::uint8_t* a, std::size_t n)
{
    const __m256i zero = _mm256_setzero_si256();
    std::size_t count = 0;
    std::size_t i = 0;
    for (; i + 32 <= n; i += 32) {
        const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
        const auto is_zero = static_cast<std::uint32_t>(_mm256_movemask_epi8(_mm256_cmpeq_epi8(va, zero)));
        count += 32 - popcount32(is_zero);
    }
    for (; i < n; ++i) count += a[i] != 0;
    return count;
}

std::size_t count_both_avx2(const std::uint8_t* a, const std::uint8_t* b, std::size_t n)
{
    const __m256i zero = _mm256_setzero_si256();
    std::size_t count = 0;
    std::size_t i = 0;
    for (; i + 32 <= n; i += 32) {
        const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
        const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
        // Lane is zero in either input -> bit set.
        const __m256i either_zero = _mm256_or_si256(_mm256_cmpeq_epi8(va, zero), _mm256_cmpeq_epi8(vb, zero));
        count += 32 - popcount32(static_cast<std::uint32_t>(_mm256_movemask_epi8(either_zero)));
    }
    for (; i < n; ++i) count += (a[i] != 0) & (b[i] != 0);
    return count;
}

double min_sq_distance_avx2(double x, double y, double z, const double* xs, const double* ys,
                            const double* zs, std::size_t n)
{
    const double inf = std::numeric_limits<double>::infinity();
    const __m256d px = _mm256_set1_pd(x);
    const __m256d py = _mm256_set1_pd(y);
    const __m256d pz = _mm256_set1_pd(z);
    __m256d best0 = _mm256_set1_pd(inf);
    __m256d best1 = _mm256_set1_pd(inf);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256d dx0 = _mm256_sub_pd(_mm256_loadu_pd(xs + i), px);
        const __m256d dy0 = _mm256_sub_pd(_mm256_loadu_pd(ys + i), py);
        const __m256d dz0 = _mm256_sub_pd(_mm256_loadu_pd(zs + i), pz);
        const __m256d dx1 = _mm256_sub_pd(_mm256_loadu_pd(xs + i + 4), px);
        const __m256d dy1 = _mm256_sub_pd(_mm256_loadu_pd(ys + i + 4), py);
        const __m256d dz1 = _mm256_sub_pd(_mm256_loadu_pd(zs + i + 4), pz);
        const __m256d d0 = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(dx0, dx0), _mm256_mul_pd(dy0, dy0)),
                                         _mm256_mul_pd(dz0, dz0));
        const __m256d d1 = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(dx1, dx1), _mm256_mul_pd(dy1, dy1)),
                                         _mm256_mul_pd(dz1, dz1));
        best0 = _mm256_min_pd(best0, d0);
        best1 = _mm256_min_pd(best1, d1);
    }
    for (; i + 4 <= n; i += 4) {
        const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(xs + i), px);
        const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ys + i), py);
        const __m256d dz = _mm256_sub_pd(_mm256_loadu_pd(zs + i), pz);
        const __m256d d = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)),
                                        _mm256_mul_pd(dz, dz));
        best0 = _mm256_min_pd(best0, d);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, _mm256_min_pd(best0, best1));
    double best = inf;
    for (double v : lanes) best = v < best ? v : best;
    for (; i < n; ++i) {
        const double dx = xs[i] - x;
        const double dy = ys[i] - y;
        const double dz = zs[i] - z;
        const double d = (dx * dx + dy * dy) + dz * dz;
        best = d < best ? d : best;
    }
    return best;
}

void window_to_u8_avx2(const float* src, std::size_t n, double lo, double hi, std::uint8_t* dst)
{
    const double range = hi - lo;
    const __m256d vlo = _mm256_set1_pd(lo);
    const __m256d vhi = _mm256_set1_pd(hi);
    const __m256d vrange = _mm256_set1_pd(range);
    const __m256d v255 = _mm256_set1_pd(255.0);
    const __m256d half = _mm256_set1_pd(0.5);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_cvtps_pd(_mm_loadu_ps(src + i));
        // maxpd returns the second operand when the first is NaN.
        v = _mm256_max_pd(v, vlo);
        v = _mm256_min_pd(v, vhi);
        const __m256d t = _mm256_div_pd(_mm256_mul_pd(_mm256_sub_pd(v, vlo), v255), vrange);
        const __m256d r = _mm256_floor_pd(_mm256_add_pd(t, half));
        alignas(16) std::int32_t out[4];
        _mm_store_si128(reinterpret_cast<__m128i*>(out), _mm256_cvtpd_epi32(r));
        for (int k = 0; k < 4; ++k) dst[i + k] = static_cast<std::uint8_t>(out[k]);
    }
    for (; i < n; ++i) {
        double v = static_cast<double>(src[i]);
        v = v > lo ? v : lo;
        v = v < hi ? v : hi;
        const double t = (v - lo) * 255.0 / range;
        dst[i] = static_cast<std::uint8_t>(static_cast<int>(std::floor(t + 0.5)));
    }
}

Moments masked_moments_avx2(const std::uint8_t* values, const std::uint8_t* mask, std::size_t n)
{
    const __m256i zero = _mm256_setzero_si256();
    __m256i sum = _mm256_setzero_si256();     // 4 x u64 from sad
    __m256i sum_sq = _mm256_setzero_si256();  // 4 x u64
    std::size_t count = 0;
    std::size_t i = 0;
    for (; i + 32 <= n; i += 32) {
        const __m256i vm = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(mask + i));
        const __m256i off = _mm256_cmpeq_epi8(vm, zero);
        count += 32 - popcount32(static_cast<std::uint32_t>(_mm256_movemask_epi8(off)));
        const __m256i vv = _mm256_andnot_si256(off, _mm256_loadu_si256(reinterpret_cast<const __m256i*>(values + i)));
        sum = _mm256_add_epi64(sum, _mm256_sad_epu8(vv, zero));

        // Squares: widen to 16 bits, madd pairs into 32 bits (max 2*255^2 fits),
        // then widen to 64 bits before accumulating.
        const __m256i lo16 = _mm256_unpacklo_epi8(vv, zero);
        const __m256i hi16 = _mm256_unpackhi_epi8(vv, zero);
        const __m256i sq32 = _mm256_add_epi32(_mm256_madd_epi16(lo16, lo16), _mm256_madd_epi16(hi16, hi16));
        sum_sq = _mm256_add_epi64(sum_sq, _mm256_unpacklo_epi32(sq32, zero));
        sum_sq = _mm256_add_epi64(sum_sq, _mm256_unpackhi_epi32(sq32, zero));
    }
    alignas(32) std::uint64_t s[4];
    alignas(32) std::uint64_t q[4];
    _mm256_store_si256(reinterpret_cast<__m256i*>(s), sum);
    _mm256_store_si256(reinterpret_cast<__m256i*>(q), sum_sq);
    Moments m;
    m.count = count;
    m.sum = s[0] + s[1] + s[2] + s[3];
    m.sum_sq = q[0] + q[1] + q[2] + q[3];
    for (; i < n; ++i) {
        if (mask[i] == 0) continue;
        const std::uint64_t v = values[i];
        ++m.count;
        m.sum += v;
        m.sum_sq += v * v;
    }
    return m;
}

}  // namespace

const KernelTable& avx2_table_impl()
{
    static const KernelTable table{
        "avx2",
        &count_nonzero_avx2,
        &count_both_avx2,
        &min_sq_distance_avx2,
        &window_to_u8_avx2,
        &masked_moments_avx2,
    };
    return table;
}

}  // namespace slicewise::kernels
