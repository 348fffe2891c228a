#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "slicewise/image.hpp"

namespace slicewise {

using Dims = std::array<std::size_t, 3>;
using Spacing = std::array<double, 3>;
using Affine = std::array<std::array<double, 4>, 4>;

Affine diagonal_affine(const Spacing& spacing);

// ============================================================================
// Volume / MaskVolume
// ============================================================================

/// 3D scalar grid. Voxel (x, y, z) is stored at x + nx * (y + ny * z).
class Volume {
public:
    Volume() = default;
    Volume(Dims dims, Spacing spacing, std::vector<float> data, std::string modality_tag = {});
    Volume(Dims dims, Spacing spacing, std::vector<float> data, std::string modality_tag,
           Affine affine);

    const Dims& dims() const noexcept { return dims_; }
    const Spacing& spacing() const noexcept { return spacing_; }
    const Affine& affine() const noexcept { return affine_; }
    const std::string& modality_tag() const noexcept { return modality_tag_; }
    std::span<const float> data() const noexcept { return data_; }
    std::size_t voxel_count() const noexcept { return data_.size(); }

    float operator()(std::size_t x, std::size_t y, std::size_t z) const noexcept
    {
        return data_[x + dims_[0] * (y + dims_[1] * z)];
    }

private:
    Dims dims_{};
    Spacing spacing_{1.0, 1.0, 1.0};
    std::vector<float> data_;
    std::string modality_tag_;
    Affine affine_ = diagonal_affine({1.0, 1.0, 1.0});
};

/// Binary label grid with the same layout as Volume.
class MaskVolume {
public:
    MaskVolume() = default;
    explicit MaskVolume(Dims dims);
    MaskVolume(Dims dims, std::vector<std::uint8_t> labels);

    const Dims& dims() const noexcept { return dims_; }
    std::span<const std::uint8_t> labels() const noexcept { return labels_; }
    std::size_t voxel_count() const noexcept { return labels_.size(); }

    std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept
    {
        return x + dims_[0] * (y + dims_[1] * z);
    }
    std::uint8_t operator()(std::size_t x, std::size_t y, std::size_t z) const noexcept
    {
        return labels_[index(x, y, z)];
    }
    void set(std::size_t x, std::size_t y, std::size_t z, bool value) noexcept
    {
        labels_[index(x, y, z)] = value ? 1 : 0;
    }

    std::size_t count() const;
    bool matches(const Volume& vol) const noexcept { return dims_ == vol.dims(); }

    friend bool operator==(const MaskVolume&, const MaskVolume&) = default;

private:
    Dims dims_{};
    std::vector<std::uint8_t> labels_;
};

// ============================================================================
// Windowing and frames
// ============================================================================

/// Intensity window used to map scan values into 8-bit frames.
///
/// Percentile mode clips at the nearest-rank percentiles `lo`/`hi` (0-100)
/// of the whole volume. Hounsfield mode clips at center -/+ width/2.
struct WindowSpec {
    enum class Mode { percentile, hounsfield };

    Mode mode = Mode::percentile;
    double lo = 0.5;
    double hi = 99.5;
    double center = 40.0;
    double width = 400.0;

    static WindowSpec percentile(double lo, double hi);
    static WindowSpec hounsfield(double center, double width);

    /// MR -> percentile(0.5, 99.5); anything tagged CT -> hounsfield(40, 400).
    static WindowSpec default_for(const std::string& modality_tag);

    void validate() const;
    friend bool operator==(const WindowSpec&, const WindowSpec&) = default;
};

/// Ordered 8-bit frames, one per slice along `axis`.
struct FrameStack {
    int axis = 2;
    std::vector<Frame> frames;
    Dims source_dims{};
    WindowSpec window;
    /// Set when the window collapsed (lower bound == upper bound); all frames are zero.
    bool degenerate_window = false;

    std::size_t size() const noexcept { return frames.size(); }
};

/// Nearest-rank percentile (p in [0, 100]) over all values.
double nearest_rank_percentile(std::span<const float> values, double p);

FrameStack to_frames(const Volume& vol, int axis, const WindowSpec& window);

/// In-plane axes for slicing along `axis`: rows follow (axis + 2) % 3,
/// columns follow (axis + 1) % 3, both ascending. For axis 2 that is
/// row = y, col = x.
struct PlaneAxes {
    int row_axis;
    int col_axis;
};
PlaneAxes plane_axes(int axis);

Image2D<float> slice_of(const Volume& vol, int axis, std::size_t idx);
MaskSlice slice_of(const MaskVolume& mask, int axis, std::size_t idx);

/// Writes `plane` into slice `idx` of `mask` using the slice_of orientation.
void assign_slice(MaskVolume& mask, int axis, std::size_t idx, const MaskSlice& plane);

/// Foreground count per slice index along `axis`.
std::vector<std::size_t> slice_counts(const MaskVolume& mask, int axis);

// ============================================================================
// Synthetic phantoms
// ============================================================================

struct PhantomSpec {
    Dims dims{64, 64, 64};
    std::array<double, 3> center{32.0, 32.0, 32.0};
    std::array<double, 3> semi_axes{20.0, 16.0, 12.0};
    double fg_intensity = 200.0;
    double bg_intensity = 50.0;
    double noise_sigma = 10.0;
    std::uint64_t rng_seed = 42;

    void validate() const;
};

struct Phantom {
    Volume volume;
    MaskVolume mask;
};

/// Ellipsoid phantom. Voxel v is foreground when sum(((v - c) / a)^2) <= 1.
/// Noise is N(0, sigma^2) drawn from std::mt19937_64 seeded with rng_seed,
/// converted to normals with the Box-Muller transform (see README).
Phantom make_phantom(const PhantomSpec& spec);

}  // namespace slicewise
