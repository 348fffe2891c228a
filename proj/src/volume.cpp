#include "slicewise/volume.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "slicewise/kernels.hpp"

namespace slicewise {

namespace {

double det3(const Affine& a)
{
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
           a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

void check_axis(int axis)
{
    if (axis < 0 || axis > 2) throw contract_error("axis must be 0, 1 or 2");
}

std::size_t product(const Dims& d) { return d[0] * d[1] * d[2]; }

void check_dims(const Dims& dims)
{
    for (std::size_t d : dims) {
        if (d < 1) throw contract_error("volume dims must all be >= 1");
    }
}

/// Calls fn(plane_row, plane_col, linear_voxel_index) for every voxel of slice idx.
template <typename Fn>
void for_each_in_slice(const Dims& dims, int axis, std::size_t idx, Fn&& fn)
{
    const PlaneAxes pa = plane_axes(axis);
    const std::size_t rows = dims[pa.row_axis];
    const std::size_t cols = dims[pa.col_axis];
    const std::array<std::size_t, 3> stride{1, dims[0], dims[0] * dims[1]};
    const std::size_t base = idx * stride[axis];
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t row_base = base + r * stride[pa.row_axis];
        for (std::size_t c = 0; c < cols; ++c) {
            fn(r, c, row_base + c * stride[pa.col_axis]);
        }
    }
}

}  // namespace

std::size_t count_foreground(const MaskSlice& mask)
{
    return kernels::active().count_nonzero(mask.pixels().data(), mask.size());
}

Affine diagonal_affine(const Spacing& spacing)
{
    Affine a{};
    for (int i = 0; i < 3; ++i) a[i][i] = spacing[i];
    a[3][3] = 1.0;
    return a;
}

// ----------------------------------------------------------------------------
// Volume / MaskVolume

Volume::Volume(Dims dims, Spacing spacing, std::vector<float> data, std::string modality_tag)
    : Volume(dims, spacing, std::move(data), std::move(modality_tag), diagonal_affine(spacing))
{
}

Volume::Volume(Dims dims, Spacing spacing, std::vector<float> data, std::string modality_tag,
               Affine affine)
    : dims_(dims), spacing_(spacing), data_(std::move(data)), modality_tag_(std::move(modality_tag)),
      affine_(affine)
{
    check_dims(dims_);
    for (double s : spacing_) {
        if (!(s > 0.0) || !std::isfinite(s)) throw contract_error("voxel spacing must be positive");
    }
    if (data_.size() != product(dims_)) throw contract_error("volume data length != nx*ny*nz");
    if (det3(affine_) == 0.0) throw contract_error("affine 3x3 block is singular");
}

MaskVolume::MaskVolume(Dims dims) : dims_(dims), labels_(product(dims), 0) { check_dims(dims_); }

MaskVolume::MaskVolume(Dims dims, std::vector<std::uint8_t> labels)
    : dims_(dims), labels_(std::move(labels))
{
    check_dims(dims_);
    if (labels_.size() != product(dims_)) throw contract_error("mask label length != nx*ny*nz");
    for (auto& v : labels_) {
        if (v > 1) throw contract_error("mask labels must be 0 or 1");
    }
}

std::size_t MaskVolume::count() const
{
    return kernels::active().count_nonzero(labels_.data(), labels_.size());
}

// ----------------------------------------------------------------------------
// Windowing

WindowSpec WindowSpec::percentile(double lo, double hi)
{
    WindowSpec w;
    w.mode = Mode::percentile;
    w.lo = lo;
    w.hi = hi;
    w.validate();
    return w;
}

WindowSpec WindowSpec::hounsfield(double center, double width)
{
    WindowSpec w;
    w.mode = Mode::hounsfield;
    w.center = center;
    w.width = width;
    w.validate();
    return w;
}

WindowSpec WindowSpec::default_for(const std::string& modality_tag)
{
    std::string upper = modality_tag;
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (upper.rfind("CT", 0) == 0) return hounsfield(40.0, 400.0);
    return percentile(0.5, 99.5);
}

void WindowSpec::validate() const
{
    if (mode == Mode::percentile) {
        if (!(lo >= 0.0 && hi <= 100.0)) throw contract_error("percentile ranks must lie in [0, 100]");
        if (!(lo < hi)) throw contract_error("percentile window needs lo < hi");
    } else {
        if (!(width > 0.0) || !std::isfinite(center)) {
            throw contract_error("hounsfield window needs a finite center and width > 0");
        }
    }
}

double nearest_rank_percentile(std::span<const float> values, double p)
{
    if (values.empty()) throw contract_error("percentile of an empty set");
    if (!(p >= 0.0 && p <= 100.0)) throw contract_error("percentile rank must lie in [0, 100]");
    const std::size_t n = values.size();
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    std::vector<float> copy(values.begin(), values.end());
    std::nth_element(copy.begin(), copy.begin() + static_cast<std::ptrdiff_t>(rank - 1), copy.end());
    return copy[rank - 1];
}

PlaneAxes plane_axes(int axis)
{
    check_axis(axis);
    return PlaneAxes{(axis + 2) % 3, (axis + 1) % 3};
}

FrameStack to_frames(const Volume& vol, int axis, const WindowSpec& window)
{
    check_axis(axis);
    window.validate();

    FrameStack stack;
    stack.axis = axis;
    stack.source_dims = vol.dims();
    stack.window = window;

    double lo = 0.0;
    double hi = 0.0;
    if (window.mode == WindowSpec::Mode::percentile) {
        lo = nearest_rank_percentile(vol.data(), window.lo);
        hi = nearest_rank_percentile(vol.data(), window.hi);
    } else {
        lo = window.center - window.width / 2.0;
        hi = window.center + window.width / 2.0;
    }
    stack.degenerate_window = !(lo < hi);

    // Window the whole volume once, then gather planes.
    std::vector<std::uint8_t> mapped(vol.voxel_count(), 0);
    if (!stack.degenerate_window) {
        kernels::active().window_to_u8(vol.data().data(), vol.voxel_count(), lo, hi, mapped.data());
    }

    const PlaneAxes pa = plane_axes(axis);
    const Dims& d = vol.dims();
    stack.frames.reserve(d[axis]);
    for (std::size_t idx = 0; idx < d[axis]; ++idx) {
        Frame frame(d[pa.row_axis], d[pa.col_axis]);
        for_each_in_slice(d, axis, idx, [&](std::size_t r, std::size_t c, std::size_t v) {
            frame(r, c) = mapped[v];
        });
        stack.frames.push_back(std::move(frame));
    }
    return stack;
}

Image2D<float> slice_of(const Volume& vol, int axis, std::size_t idx)
{
    check_axis(axis);
    if (idx >= vol.dims()[axis]) throw bounds_error("slice index out of range");
    const PlaneAxes pa = plane_axes(axis);
    Image2D<float> plane(vol.dims()[pa.row_axis], vol.dims()[pa.col_axis]);
    const auto data = vol.data();
    for_each_in_slice(vol.dims(), axis, idx,
                      [&](std::size_t r, std::size_t c, std::size_t v) { plane(r, c) = data[v]; });
    return plane;
}

MaskSlice slice_of(const MaskVolume& mask, int axis, std::size_t idx)
{
    check_axis(axis);
    if (idx >= mask.dims()[axis]) throw bounds_error("slice index out of range");
    const PlaneAxes pa = plane_axes(axis);
    MaskSlice plane(mask.dims()[pa.row_axis], mask.dims()[pa.col_axis]);
    const auto labels = mask.labels();
    for_each_in_slice(mask.dims(), axis, idx,
                      [&](std::size_t r, std::size_t c, std::size_t v) { plane(r, c) = labels[v]; });
    return plane;
}

void assign_slice(MaskVolume& mask, int axis, std::size_t idx, const MaskSlice& plane)
{
    check_axis(axis);
    if (idx >= mask.dims()[axis]) throw bounds_error("slice index out of range");
    const PlaneAxes pa = plane_axes(axis);
    if (plane.rows() != mask.dims()[pa.row_axis] || plane.cols() != mask.dims()[pa.col_axis]) {
        throw contract_error("slice shape does not match mask plane");
    }
    const Dims d = mask.dims();
    for_each_in_slice(d, axis, idx, [&](std::size_t r, std::size_t c, std::size_t v) {
        const std::size_t x = v % d[0];
        const std::size_t y = (v / d[0]) % d[1];
        const std::size_t z = v / (d[0] * d[1]);
        mask.set(x, y, z, plane(r, c) != 0);
    });
}

std::vector<std::size_t> slice_counts(const MaskVolume& mask, int axis)
{
    check_axis(axis);
    const Dims& d = mask.dims();
    std::vector<std::size_t> counts(d[axis], 0);
    const auto labels = mask.labels();
    for (std::size_t z = 0; z < d[2]; ++z) {
        for (std::size_t y = 0; y < d[1]; ++y) {
            for (std::size_t x = 0; x < d[0]; ++x) {
                if (labels[x + d[0] * (y + d[1] * z)] == 0) continue;
                const std::size_t coord[3] = {x, y, z};
                ++counts[coord[axis]];
            }
        }
    }
    return counts;
}

// ----------------------------------------------------------------------------
// Phantoms

void PhantomSpec::validate() const
{
    check_dims(dims);
    for (int i = 0; i < 3; ++i) {
        if (!(semi_axes[i] > 0.0)) throw contract_error("phantom semi-axes must be positive");
        if (center[i] - semi_axes[i] < 0.0 ||
            center[i] + semi_axes[i] > static_cast<double>(dims[i] - 1)) {
            throw contract_error("phantom ellipsoid does not fit inside dims");
        }
    }
    if (!(noise_sigma >= 0.0)) throw contract_error("noise sigma must be non-negative");
}

namespace {

/// Uniform double in (0, 1]: top 53 bits of one mt19937_64 draw, shifted off zero.
double uniform_open0(std::mt19937_64& rng)
{
    return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

/// Box-Muller, both outputs used in order (cos branch first).
class NormalSource {
public:
    explicit NormalSource(std::uint64_t seed) : rng_(seed) {}

    double next()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open0(rng_);
        const double u2 = uniform_open0(rng_);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(theta);
        has_spare_ = true;
        return radius * std::cos(theta);
    }

private:
    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace

Phantom make_phantom(const PhantomSpec& spec)
{
    spec.validate();
    const Dims& d = spec.dims;
    MaskVolume mask(d);
    std::vector<float> data(product(d));
    NormalSource noise(spec.rng_seed);
    std::size_t i = 0;
    for (std::size_t z = 0; z < d[2]; ++z) {
        for (std::size_t y = 0; y < d[1]; ++y) {
            for (std::size_t x = 0; x < d[0]; ++x, ++i) {
                const double ex = (static_cast<double>(x) - spec.center[0]) / spec.semi_axes[0];
                const double ey = (static_cast<double>(y) - spec.center[1]) / spec.semi_axes[1];
                const double ez = (static_cast<double>(z) - spec.center[2]) / spec.semi_axes[2];
                const bool inside = ex * ex + ey * ey + ez * ez <= 1.0;
                mask.set(x, y, z, inside);
                double v = inside ? spec.fg_intensity : spec.bg_intensity;
                if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise.next();
                data[i] = static_cast<float>(v);
            }
        }
    }
    Volume vol(d, {1.0, 1.0, 1.0}, std::move(data), "PHANTOM");
    return Phantom{std::move(vol), std::move(mask)};
}

}  // namespace slicewise
