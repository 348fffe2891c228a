#include <gtest/gtest.h>

#include <random>
#include <zlib.h>

#include "slicewise/codec.hpp"
#include "support/oracles.hpp"

using namespace slicewise;
using namespace slicewise::codec;

TEST(Rle, KnownRuns)
{
    MaskSlice m(2, 3, 0);
    m(0, 1) = 1;
    m(0, 2) = 1;
    m(1, 2) = 1;
    EXPECT_EQ(rle_encode(m), (std::vector<std::uint64_t>{1, 2, 2, 1}));
    MaskSlice starts_fg(1, 3, 1);
    EXPECT_EQ(rle_encode(starts_fg), (std::vector<std::uint64_t>{0, 3}));
    EXPECT_EQ(rle_encode(MaskSlice(2, 2, 0)), (std::vector<std::uint64_t>{4}));
}

TEST(Rle, Checkerboard)
{
    // Odd width: values alternate across row boundaries too.
    MaskSlice m(3, 3, 0);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) m(r, c) = (r + c) % 2;
    const auto runs = rle_encode(m);
    EXPECT_EQ(runs, std::vector<std::uint64_t>(9, 1));
    EXPECT_EQ(rle_decode(runs, 3, 3), m);
}

TEST(Rle, RoundTripRandom)
{
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        const MaskSlice m = oracle::random_slice(rng, 1 + rng() % 30, 1 + rng() % 30, 3, 0.1);
        const auto runs = rle_encode(m);
        std::uint64_t total = 0;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            if (i > 0) EXPECT_GT(runs[i], 0u);
            total += runs[i];
        }
        EXPECT_EQ(total, m.size());
        EXPECT_EQ(rle_decode(runs, m.rows(), m.cols()), m);
    }
}

TEST(Rle, SumMismatchRejected)
{
    const std::vector<std::uint64_t> runs{1, 2};
    try {
        rle_decode(runs, 2, 2);
        FAIL();
    } catch (const format_error& e) {
        EXPECT_EQ(e.field(), "mask_rle");
    }
    const std::vector<std::uint64_t> over{3, 3};
    EXPECT_THROW(rle_decode(over, 2, 2), format_error);
}

TEST(Base64, KnownVectors)
{
    auto enc = [](std::string s) {
        return base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    };
    EXPECT_EQ(enc(""), "");
    EXPECT_EQ(enc("f"), "Zg==");
    EXPECT_EQ(enc("fo"), "Zm8=");
    EXPECT_EQ(enc("foo"), "Zm9v");
    EXPECT_EQ(enc("foobar"), "Zm9vYmFy");
    const auto dec = base64_decode("Zm9vYmE=");
    EXPECT_EQ(std::string(dec.begin(), dec.end()), "fooba");
    EXPECT_THROW(base64_decode("Zm9v!"), format_error);
}

TEST(Base64, RoundTripBinary)
{
    std::vector<std::uint8_t> bytes(1000);
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<std::uint8_t>(i * 37 + 11);
    for (std::size_t n : {0, 1, 2, 3, 4, 999, 1000}) {
        std::span<const std::uint8_t> view(bytes.data(), n);
        const auto back = base64_decode(base64_encode(view));
        EXPECT_TRUE(std::equal(back.begin(), back.end(), view.begin(), view.end())) << n;
    }
}

TEST(Png, StructureAndPayload)
{
    Frame f(3, 5, 0);
    for (std::size_t i = 0; i < f.size(); ++i) f.pixels()[i] = static_cast<std::uint8_t>(i * 17);
    const auto png = encode_png(f);
    const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    ASSERT_GT(png.size(), 8u);
    EXPECT_TRUE(std::equal(sig, sig + 8, png.begin()));

    // Walk the chunks, checking CRCs, and inflate IDAT.
    std::size_t pos = 8;
    std::vector<std::uint8_t> idat;
    std::vector<std::string> names;
    auto be32 = [&](std::size_t at) {
        return (std::uint32_t(png[at]) << 24) | (std::uint32_t(png[at + 1]) << 16) | (std::uint32_t(png[at + 2]) << 8) |
               std::uint32_t(png[at + 3]);
    };
    while (pos + 12 <= png.size()) {
        const std::uint32_t len = be32(pos);
        const std::string name(png.begin() + pos + 4, png.begin() + pos + 8);
        names.push_back(name);
        const std::uint32_t crc = be32(pos + 8 + len);
        EXPECT_EQ(crc, ::crc32(0, png.data() + pos + 4, len + 4)) << name;
        if (name == "IHDR") {
            EXPECT_EQ(be32(pos + 8), 5u);
            EXPECT_EQ(be32(pos + 12), 3u);
            EXPECT_EQ(png[pos + 16], 8);  // bit depth
            EXPECT_EQ(png[pos + 17], 0);  // grayscale
        }
        if (name == "IDAT") idat.insert(idat.end(), png.begin() + pos + 8, png.begin() + pos + 8 + len);
        pos += 12 + len;
    }
    EXPECT_EQ(pos, png.size());
    EXPECT_EQ(names.front(), "IHDR");
    EXPECT_EQ(names.back(), "IEND");
    std::vector<std::uint8_t> raw(3 * 6);
    uLongf raw_len = raw.size();
    ASSERT_EQ(::uncompress(raw.data(), &raw_len, idat.data(), idat.size()), Z_OK);
    ASSERT_EQ(raw_len, raw.size());
    for (std::size_t r = 0; r < 3; ++r) {
        EXPECT_EQ(raw[r * 6], 0);  // filter type none
        for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(raw[r * 6 + 1 + c], f(r, c));
    }
}
