#include "slicewise/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace slicewise::nifti {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kDataOffset = 352;  // header + 4-byte extension flag

// Field offsets within the 348-byte header.
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffQuatern = 256;
constexpr std::size_t kOffSrow = 280;
constexpr std::size_t kOffMagic = 344;

/// Reads header fields honoring the file's byte order.
class HeaderReader {
public:
    HeaderReader(std::span<const std::uint8_t> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

    template <typename T>
    T get(std::size_t offset) const
    {
        std::array<std::uint8_t, sizeof(T)> raw{};
        std::memcpy(raw.data(), bytes_.data() + offset, sizeof(T));
        if (swap_) std::reverse(raw.begin(), raw.end());
        T value;
        std::memcpy(&value, raw.data(), sizeof(T));
        return value;
    }

private:
    std::span<const std::uint8_t> bytes_;
    bool swap_;
};

std::size_t bytes_per_voxel(std::int16_t datatype)
{
    switch (static_cast<Datatype>(datatype)) {
        case Datatype::uint8: return 1;
        case Datatype::int16: return 2;
        case Datatype::int32: return 4;
        case Datatype::float32: return 4;
        case Datatype::float64: return 8;
    }
    return 0;
}

template <typename T>
void convert_samples(const std::uint8_t* src, std::size_t n, bool swap, std::vector<float>& out)
{
    for (std::size_t i = 0; i < n; ++i) {
        std::array<std::uint8_t, sizeof(T)> raw{};
        std::memcpy(raw.data(), src + i * sizeof(T), sizeof(T));
        if (swap) std::reverse(raw.begin(), raw.end());
        T value;
        std::memcpy(&value, raw.data(), sizeof(T));
        out[i] = static_cast<float>(value);
    }
}

Affine qform_affine(const HeaderReader& h, const Spacing& spacing, float qfac_raw)
{
    double b = h.get<float>(kOffQuatern);
    double c = h.get<float>(kOffQuatern + 4);
    double d = h.get<float>(kOffQuatern + 8);
    double a = 1.0 - (b * b + c * c + d * d);
    if (a < 1.0e-7) {
        // Quaternion given with a == 0; renormalize b, c, d.
        const double norm = 1.0 / std::sqrt(b * b + c * c + d * d);
        b *= norm;
        c *= norm;
        d *= norm;
        a = 0.0;
    } else {
        a = std::sqrt(a);
    }
    const double qfac = qfac_raw < 0.0f ? -1.0 : 1.0;
    const double r[3][3] = {
        {a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)},
        {2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)},
        {2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - c * c - b * b},
    };
    const double scale[3] = {spacing[0], spacing[1], spacing[2] * qfac};
    Affine out{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) out[i][j] = r[i][j] * scale[j];
        out[i][3] = h.get<float>(kOffQuatern + 12 + 4 * static_cast<std::size_t>(i));
    }
    out[3][3] = 1.0;
    return out;
}

double det3(const Affine& a)
{
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
           a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw io_error("read failed: " + path.string());
    return bytes;
}

std::vector<std::uint8_t> gzip(std::span<const std::uint8_t> bytes)
{
    z_stream zs{};
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 16 + MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
        throw io_error("deflateInit2 failed");
    }
    std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(bytes.size())) + 32);
    zs.next_in = const_cast<Bytef*>(bytes.data());
    zs.avail_in = static_cast<uInt>(bytes.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) throw io_error("gzip compression failed");
    out.resize(zs.total_out);
    return out;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error("write failed: " + path.string());
}

bool has_gz_suffix(const std::filesystem::path& path) { return path.extension() == ".gz"; }

template <typename T>
void put(std::vector<std::uint8_t>& buf, std::size_t offset, T value)
{
    static_assert(std::endian::native == std::endian::little, "writer assumes a little-endian host");
    std::memcpy(buf.data() + offset, &value, sizeof(T));
}

std::vector<std::uint8_t> make_header(const Dims& dims, const Spacing& spacing, const Affine& affine,
                                      Datatype datatype, std::int16_t bitpix)
{
    std::vector<std::uint8_t> buf(kDataOffset, 0);
    put<std::int32_t>(buf, 0, static_cast<std::int32_t>(kHeaderSize));
    buf[38] = 'r';
    put<std::int16_t>(buf, kOffDim, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        if (dims[i] > 32767) throw contract_error("dimension too large for NIfTI-1");
        put<std::int16_t>(buf, kOffDim + 2 * (i + 1), static_cast<std::int16_t>(dims[i]));
    }
    for (std::size_t i = 4; i < 8; ++i) put<std::int16_t>(buf, kOffDim + 2 * i, 1);
    put<std::int16_t>(buf, kOffDatatype, static_cast<std::int16_t>(datatype));
    put<std::int16_t>(buf, kOffBitpix, bitpix);
    put<float>(buf, kOffPixdim, 1.0f);
    for (std::size_t i = 0; i < 3; ++i) put<float>(buf, kOffPixdim + 4 * (i + 1), static_cast<float>(spacing[i]));
    put<float>(buf, kOffVoxOffset, static_cast<float>(kDataOffset));
    put<float>(buf, kOffSclSlope, 1.0f);
    put<float>(buf, kOffSclInter, 0.0f);
    buf[kOffXyztUnits] = 2;  // millimetres
    put<std::int16_t>(buf, kOffQformCode, 0);
    put<std::int16_t>(buf, kOffSformCode, 1);
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 4; ++c) {
            put<float>(buf, kOffSrow + 16 * r + 4 * c, static_cast<float>(affine[r][c]));
        }
    }
    std::memcpy(buf.data() + kOffMagic, "n+1\0", 4);
    return buf;
}

}  // namespace

std::vector<std::uint8_t> maybe_gunzip(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 2 || bytes[0] != 0x1F || bytes[1] != 0x8B) {
        return {bytes.begin(), bytes.end()};
    }
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw io_error("inflateInit2 failed");
    zs.next_in = const_cast<Bytef*>(bytes.data());
    zs.avail_in = static_cast<uInt>(bytes.size());
    std::vector<std::uint8_t> out;
    std::array<std::uint8_t, 1 << 16> chunk{};
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = chunk.data();
        zs.avail_out = static_cast<uInt>(chunk.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw format_error("gzip", "corrupt or truncated gzip stream");
        }
        out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            throw format_error("gzip", "truncated gzip stream");
        }
    }
    inflateEnd(&zs);
    return out;
}

Volume parse_volume(std::span<const std::uint8_t> input)
{
    const std::vector<std::uint8_t> bytes = maybe_gunzip(input);
    if (bytes.size() < kHeaderSize) {
        throw format_error("sizeof_hdr", "file shorter than the 348-byte header");
    }

    std::int32_t sizeof_hdr = 0;
    std::memcpy(&sizeof_hdr, bytes.data(), 4);
    bool swap = false;
    if (sizeof_hdr != static_cast<std::int32_t>(kHeaderSize)) {
        if (static_cast<std::int32_t>(__builtin_bswap32(static_cast<std::uint32_t>(sizeof_hdr))) != static_cast<std::int32_t>(kHeaderSize)) {
            throw format_error("sizeof_hdr", "expected 348, got " + std::to_string(sizeof_hdr));
        }
        swap = true;
    }
    const HeaderReader h(bytes, swap);

    if (std::memcmp(bytes.data() + kOffMagic, "n+1\0", 4) != 0) {
        if (std::memcmp(bytes.data() + kOffMagic, "ni1\0", 4) == 0) {
            throw unsupported_error("two-file NIfTI (.hdr/.img) is not supported");
        }
        throw format_error("magic", "expected \"n+1\"");
    }

    const auto ndim = h.get<std::int16_t>(kOffDim);
    if (ndim < 1 || ndim > 7) throw format_error("dim", "dim[0] must be in 1..7, got " + std::to_string(ndim));
    Dims dims{1, 1, 1};
    for (std::size_t i = 1; i <= static_cast<std::size_t>(ndim); ++i) {
        const auto extent = h.get<std::int16_t>(kOffDim + 2 * i);
        if (extent < 1) throw format_error("dim", "dim[" + std::to_string(i) + "] must be >= 1");
        if (i <= 3) {
            dims[i - 1] = static_cast<std::size_t>(extent);
        } else if (extent > 1) {
            throw unsupported_error("only 3D volumes are supported (dim[" + std::to_string(i) +
                                    "] = " + std::to_string(extent) + ")");
        }
    }

    const auto datatype = h.get<std::int16_t>(kOffDatatype);
    const std::size_t bpv = bytes_per_voxel(datatype);
    if (bpv == 0) throw unsupported_error("unsupported NIfTI datatype " + std::to_string(datatype));
    const auto bitpix = h.get<std::int16_t>(kOffBitpix);
    if (bitpix != static_cast<std::int16_t>(8 * bpv)) {
        throw format_error("bitpix", "does not match datatype " + std::to_string(datatype));
    }

    Spacing spacing{};
    for (std::size_t i = 0; i < 3; ++i) {
        const float p = h.get<float>(kOffPixdim + 4 * (i + 1));
        if (!std::isfinite(p) || p == 0.0f) {
            throw format_error("pixdim", "pixdim[" + std::to_string(i + 1) + "] must be nonzero and finite");
        }
        spacing[i] = std::fabs(static_cast<double>(p));
    }

    const float vox_offset = h.get<float>(kOffVoxOffset);
    if (!std::isfinite(vox_offset) || vox_offset < static_cast<float>(kHeaderSize)) {
        throw format_error("vox_offset", "must be >= 348");
    }
    const auto offset = static_cast<std::size_t>(vox_offset);
    const std::size_t n = dims[0] * dims[1] * dims[2];
    if (bytes.size() < offset + n * bpv) {
        throw format_error("data", "file truncated: need " + std::to_string(offset + n * bpv) + " bytes, have " +
                                       std::to_string(bytes.size()));
    }

    std::vector<float> data(n);
    const std::uint8_t* src = bytes.data() + offset;
    switch (static_cast<Datatype>(datatype)) {
        case Datatype::uint8: convert_samples<std::uint8_t>(src, n, false, data); break;
        case Datatype::int16: convert_samples<std::int16_t>(src, n, swap, data); break;
        case Datatype::int32: convert_samples<std::int32_t>(src, n, swap, data); break;
        case Datatype::float32: convert_samples<float>(src, n, swap, data); break;
        case Datatype::float64: convert_samples<double>(src, n, swap, data); break;
    }

    const float slope = h.get<float>(kOffSclSlope);
    const float inter = h.get<float>(kOffSclInter);
    if (std::isfinite(slope) && slope != 0.0f && !(slope == 1.0f && inter == 0.0f)) {
        const double s = slope;
        const double b = std::isfinite(inter) ? inter : 0.0f;
        for (float& v : data) v = static_cast<float>(v * s + b);
    }

    Affine affine = diagonal_affine(spacing);
    const auto sform_code = h.get<std::int16_t>(kOffSformCode);
    const auto qform_code = h.get<std::int16_t>(kOffQformCode);
    if (sform_code > 0) {
        for (std::size_t r = 0; r < 3; ++r) {
            for (std::size_t c = 0; c < 4; ++c) affine[r][c] = h.get<float>(kOffSrow + 16 * r + 4 * c);
        }
        affine[3] = {0.0, 0.0, 0.0, 1.0};
        if (det3(affine) == 0.0) throw format_error("srow", "sform rotation block is singular");
    } else if (qform_code > 0) {
        affine = qform_affine(h, spacing, h.get<float>(kOffPixdim));
    }

    return Volume(dims, spacing, std::move(data), std::string{}, affine);
}

Volume load_volume(const std::filesystem::path& path) { return parse_volume(read_file(path)); }

MaskVolume load_mask(const std::filesystem::path& path)
{
    const Volume vol = load_volume(path);
    std::vector<std::uint8_t> labels(vol.voxel_count());
    const auto data = vol.data();
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = data[i] != 0.0f ? 1 : 0;
    return MaskVolume(vol.dims(), std::move(labels));
}

std::vector<std::uint8_t> encode_mask(const MaskVolume& mask, const Volume& reference)
{
    if (!mask.matches(reference)) throw contract_error("mask dims do not match the reference volume");
    std::vector<std::uint8_t> buf =
        make_header(reference.dims(), reference.spacing(), reference.affine(), Datatype::uint8, 8);
    const auto labels = mask.labels();
    buf.insert(buf.end(), labels.begin(), labels.end());
    return buf;
}

std::vector<std::uint8_t> encode_volume(const Volume& vol)
{
    std::vector<std::uint8_t> buf = make_header(vol.dims(), vol.spacing(), vol.affine(), Datatype::float32, 32);
    const auto data = vol.data();
    const std::size_t start = buf.size();
    buf.resize(start + data.size() * sizeof(float));
    std::memcpy(buf.data() + start, data.data(), data.size() * sizeof(float));
    return buf;
}

void save_mask(const MaskVolume& mask, const Volume& reference, const std::filesystem::path& path)
{
    const auto bytes = encode_mask(mask, reference);
    write_file(path, has_gz_suffix(path) ? gzip(bytes) : bytes);
}

void save_volume(const Volume& vol, const std::filesystem::path& path)
{
    const auto bytes = encode_volume(vol);
    write_file(path, has_gz_suffix(path) ? gzip(bytes) : bytes);
}

}  // namespace slicewise::nifti
