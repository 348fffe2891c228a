#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slicewise/image.hpp"

namespace slicewise::codec {

/// Row-major run lengths, alternating background / foreground, starting with
/// a (possibly zero) background run. Runs sum to rows * cols. The encoder
/// emits no other zero-length runs.
std::vector<std::uint64_t> rle_encode(const MaskSlice& mask);

/// Throws format_error (field "mask_rle") when the runs do not sum to rows * cols.
MaskSlice rle_decode(std::span<const std::uint64_t> runs, std::size_t rows, std::size_t cols);

std::string base64_encode(std::span<const std::uint8_t> bytes);

/// Throws format_error (field "pixels") on characters outside the standard alphabet.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// 8-bit grayscale PNG (no filtering, zlib-compressed IDAT).
std::vector<std::uint8_t> encode_png(const Frame& frame);

}  // namespace slicewise::codec
