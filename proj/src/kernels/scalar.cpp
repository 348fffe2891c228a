#include <cmath>
#include <limits>

#include "slicewise/kernels.hpp"

namespace slicewise::kernels {
namespace {

std::size_t count_nonzero_scalar(const std::uint8_t* a, std::size_t n)
{
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) count += a[i] != 0;
    return count;
}

std::size_t count_both_scalar(const std::uint8_t* a, const std::uint8_t* b, std::size_t n)
{
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) count += (a[i] != 0) & (b[i] != 0);
    return count;
}

double min_sq_distance_scalar(double x, double y, double z, const double* xs, const double* ys,
                              const double* zs, std::size_t n)
{
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - x;
        const double dy = ys[i] - y;
        const double dz = zs[i] - z;
        const double d = (dx * dx + dy * dy) + dz * dz;
        best = d < best ? d : best;
    }
    return best;
}

void window_to_u8_scalar(const float* src, std::size_t n, double lo, double hi, std::uint8_t* dst)
{
    const double range = hi - lo;
    for (std::size_t i = 0; i < n; ++i) {
        double v = static_cast<double>(src[i]);
        // Same selection semantics as maxpd/minpd, so NaN maps to lo.
        v = v > lo ? v : lo;
        v = v < hi ? v : hi;
        const double t = (v - lo) * 255.0 / range;
        dst[i] = static_cast<std::uint8_t>(static_cast<int>(std::floor(t + 0.5)));
    }
}

Moments masked_moments_scalar(const std::uint8_t* values, const std::uint8_t* mask, std::size_t n)
{
    Moments m;
    for (std::size_t i = 0; i < n; ++i) {
        if (mask[i] == 0) continue;
        const std::uint64_t v = values[i];
        ++m.count;
        m.sum += v;
        m.sum_sq += v * v;
    }
    return m;
}

}  // namespace

const KernelTable& scalar_table()
{
    static const KernelTable table{
        "scalar",
        &count_nonzero_scalar,
        &count_both_scalar,
        &min_sq_distance_scalar,
        &window_to_u8_scalar,
        &masked_moments_scalar,
    };
    return table;
}

}  // namespace slicewise::kernels
