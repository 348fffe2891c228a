#include "slicewise/codec.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>

namespace slicewise::codec {

std::vector<std::uint64_t> rle_encode(const MaskSlice& mask)
{
    std::vector<std::uint64_t> runs;
    std::uint8_t current = 0;
    std::uint64_t length = 0;
    for (std::uint8_t v : mask.pixels()) {
        const std::uint8_t bit = v != 0 ? 1 : 0;
        if (bit == current) {
            ++length;
        } else {
            runs.push_back(length);
            current = bit;
            length = 1;
        }
    }
    runs.push_back(length);
    return runs;
}

MaskSlice rle_decode(std::span<const std::uint64_t> runs, std::size_t rows, std::size_t cols)
{
    const std::uint64_t total = static_cast<std::uint64_t>(rows) * cols;
    std::uint64_t sum = 0;
    for (std::uint64_t r : runs) {
        if (r > total || sum + r > total) {
            throw format_error("mask_rle", "runs exceed width*height = " + std::to_string(total));
        }
        sum += r;
    }
    if (sum != total) {
        throw format_error("mask_rle",
                           "runs sum to " + std::to_string(sum) + ", expected width*height = " + std::to_string(total));
    }
    MaskSlice out(rows, cols, 0);
    auto pixels = out.pixels();
    std::size_t pos = 0;
    std::uint8_t value = 0;
    for (std::uint64_t r : runs) {
        if (value != 0) std::fill_n(pixels.begin() + static_cast<std::ptrdiff_t>(pos), r, std::uint8_t{1});
        pos += static_cast<std::size_t>(r);
        value ^= 1;
    }
    return out;
}

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c)
{
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes)
{
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += kAlphabet[v & 63];
    }
    const std::size_t rest = bytes.size() - i;
    if (rest == 1) {
        const std::uint32_t v = bytes[i] << 16;
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += "==";
    } else if (rest == 2) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text)
{
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    std::uint32_t acc = 0;
    int bits = 0;
    std::size_t padding = 0;
    for (char c : text) {
        if (c == '=') {
            ++padding;
            continue;
        }
        if (c == '\n' || c == '\r') continue;
        const int v = decode_char(c);
        if (v < 0 || padding > 0) throw format_error("pixels", "invalid base64 input");
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
        }
    }
    if (padding > 2) throw format_error("pixels", "invalid base64 padding");
    return out;
}

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char* type, const std::vector<std::uint8_t>& data)
{
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const uLong crc = crc32(0L, out.data() + type_at, static_cast<uInt>(4 + data.size()));
    put_be32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Frame& frame)
{
    std::vector<std::uint8_t> out{0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

    std::vector<std::uint8_t> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(frame.cols()));
    put_be32(ihdr, static_cast<std::uint32_t>(frame.rows()));
    ihdr.insert(ihdr.end(), {8, 0, 0, 0, 0});  // depth 8, grayscale, deflate, no filter, no interlace
    put_chunk(out, "IHDR", ihdr);

    std::vector<std::uint8_t> raw;
    raw.reserve(frame.rows() * (frame.cols() + 1));
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        raw.push_back(0);
        for (std::size_t c = 0; c < frame.cols(); ++c) raw.push_back(frame(r, c));
    }
    uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> packed(packed_size);
    if (compress(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size())) != Z_OK) {
        throw io_error("PNG compression failed");
    }
    packed.resize(packed_size);
    put_chunk(out, "IDAT", packed);
    put_chunk(out, "IEND", {});
    return out;
}

}  // namespace slicewise::codec
