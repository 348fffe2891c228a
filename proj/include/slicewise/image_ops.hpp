#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "slicewise/image.hpp"

namespace slicewise {

struct Pixel {
    std::size_t row = 0;
    std::size_t col = 0;
    friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// 4-connected component of a binary mask. `pixels` are in row-major order,
/// so pixels.front() is the lexicographically smallest member.
struct Component {
    std::vector<Pixel> pixels;
    std::size_t size() const noexcept { return pixels.size(); }
};

/// Components of the nonzero pixels, ordered by their first pixel (row-major).
std::vector<Component> connected_components_4(const MaskSlice& mask);

/// Squared Euclidean distance from each nonzero pixel to the nearest zero
/// pixel; pixels outside the image count as zero. Zero pixels map to 0.
/// Exact (separable lower-envelope transform over integer squared distances).
Image2D<std::uint64_t> squared_distance_transform(const MaskSlice& mask);

/// Pixel of maximal distance-transform value; ties go to the smallest
/// (row, col). Throws contract_error for an empty mask.
Pixel deepest_pixel(const MaskSlice& mask);

MaskSlice component_mask(const Component& component, std::size_t rows, std::size_t cols);

/// 3x3 square structuring element. Dilation treats outside pixels as 0,
/// erosion as 1, so closing never loses pixels at the image border.
MaskSlice dilate3x3(const MaskSlice& mask);
MaskSlice erode3x3(const MaskSlice& mask);
MaskSlice close3x3(const MaskSlice& mask);

}  // namespace slicewise
