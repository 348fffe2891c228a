#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include "slicewise/volume.hpp"

namespace slicewise::nifti {

/// NIfTI-1 datatype codes handled by the reader.
enum class Datatype : std::int16_t {
    uint8 = 2,
    int16 = 4,
    int32 = 8,
    float32 = 16,
    float64 = 64,
};

/// Parses a single-file NIfTI-1 image ("n+1" magic), optionally gzipped.
///
/// Either byte order is accepted. Intensities are scaled by scl_slope /
/// scl_inter when slope is nonzero. The affine comes from the sform when
/// sform_code > 0, else the qform when qform_code > 0, else diag(spacing).
/// Throws format_error naming the bad field, or unsupported_error.
Volume parse_volume(std::span<const std::uint8_t> bytes);

Volume load_volume(const std::filesystem::path& path);

/// Loads a label image; any nonzero voxel becomes 1.
MaskVolume load_mask(const std::filesystem::path& path);

/// Writes a uint8 little-endian NIfTI-1 file with the reference geometry.
/// A ".gz" suffix selects gzip output.
void save_mask(const MaskVolume& mask, const Volume& reference, const std::filesystem::path& path);

/// Writes a float32 little-endian NIfTI-1 file.
void save_volume(const Volume& vol, const std::filesystem::path& path);

/// Encodes without touching the filesystem (uncompressed).
std::vector<std::uint8_t> encode_mask(const MaskVolume& mask, const Volume& reference);
std::vector<std::uint8_t> encode_volume(const Volume& vol);

/// Inflates a gzip stream; returns the input unchanged when it has no gzip magic.
std::vector<std::uint8_t> maybe_gunzip(std::span<const std::uint8_t> bytes);

}  // namespace slicewise::nifti
