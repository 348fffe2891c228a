#pragma once

// Brute-force reference implementations used as test oracles. Written for
// clarity over speed and kept independent of the library's algorithms.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "slicewise/image.hpp"
#include "slicewise/prompt.hpp"
#include "slicewise/volume.hpp"

namespace oracle {

using slicewise::Dims;
using slicewise::MaskSlice;
using slicewise::MaskVolume;
using slicewise::Spacing;

// ----------------------------------------------------------------------------
// Random inputs

inline MaskVolume random_mask(std::mt19937_64& rng, Dims d, double density)
{
    std::bernoulli_distribution fg(density);
    MaskVolume m(d);
    for (std::size_t z = 0; z < d[2]; ++z)
        for (std::size_t y = 0; y < d[1]; ++y)
            for (std::size_t x = 0; x < d[0]; ++x) m.set(x, y, z, fg(rng));
    return m;
}

/// Union of a few random boxes: produces masks with real surfaces.
inline MaskVolume random_blobs(std::mt19937_64& rng, Dims d, int boxes)
{
    MaskVolume m(d);
    for (int b = 0; b < boxes; ++b) {
        std::array<std::size_t, 3> lo{}, hi{};
        for (int a = 0; a < 3; ++a) {
            std::uniform_int_distribution<std::size_t> pick(0, d[a] - 1);
            std::size_t p = pick(rng), q = pick(rng);
            lo[a] = std::min(p, q);
            hi[a] = std::max(p, q);
        }
        for (std::size_t z = lo[2]; z <= hi[2]; ++z)
            for (std::size_t y = lo[1]; y <= hi[1]; ++y)
                for (std::size_t x = lo[0]; x <= hi[0]; ++x) m.set(x, y, z, true);
    }
    return m;
}

inline MaskSlice random_slice(std::mt19937_64& rng, std::size_t rows, std::size_t cols, int boxes, double speckle)
{
    MaskSlice m(rows, cols, 0);
    for (int b = 0; b < boxes; ++b) {
        std::uniform_int_distribution<std::size_t> pr(0, rows - 1), pc(0, cols - 1);
        std::size_t r0 = pr(rng), r1 = pr(rng), c0 = pc(rng), c1 = pc(rng);
        if (r0 > r1) std::swap(r0, r1);
        if (c0 > c1) std::swap(c0, c1);
        for (std::size_t r = r0; r <= r1; ++r)
            for (std::size_t c = c0; c <= c1; ++c) m(r, c) = 1;
    }
    std::bernoulli_distribution flip(speckle);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            if (flip(rng)) m(r, c) ^= 1;
    return m;
}

// ----------------------------------------------------------------------------
// Volume metrics

inline double dice(const MaskVolume& x, const MaskVolume& y)
{
    long long both = 0, nx = 0, ny = 0;
    for (std::size_t i = 0; i < x.voxel_count(); ++i) {
        nx += x.labels()[i] != 0;
        ny += y.labels()[i] != 0;
        both += x.labels()[i] != 0 && y.labels()[i] != 0;
    }
    if (nx + ny == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(nx + ny);
}

struct Point {
    double x, y, z;
};

inline std::vector<Point> surface(const MaskVolume& m, const Spacing& s)
{
    const Dims d = m.dims();
    auto at = [&](long long x, long long y, long long z) -> int {
        if (x < 0 || y < 0 || z < 0 || x >= (long long)d[0] || y >= (long long)d[1] || z >= (long long)d[2]) return 0;
        return m(x, y, z);
    };
    std::vector<Point> out;
    for (long long z = 0; z < (long long)d[2]; ++z)
        for (long long y = 0; y < (long long)d[1]; ++y)
            for (long long x = 0; x < (long long)d[0]; ++x) {
                if (!at(x, y, z)) continue;
                const bool edge = !at(x - 1, y, z) || !at(x + 1, y, z) || !at(x, y - 1, z) || !at(x, y + 1, z) ||
                                  !at(x, y, z - 1) || !at(x, y, z + 1);
                if (edge) out.push_back({x * s[0], y * s[1], z * s[2]});
            }
    return out;
}

inline std::vector<double> directed(const std::vector<Point>& from, const std::vector<Point>& to)
{
    std::vector<double> out;
    for (const Point& p : from) {
        double best = std::numeric_limits<double>::infinity();
        for (const Point& q : to) {
            const double dx = p.x - q.x, dy = p.y - q.y, dz = p.z - q.z;
            best = std::min(best, std::sqrt(dx * dx + dy * dy + dz * dz));
        }
        out.push_back(best);
    }
    return out;
}

inline double nsd(const MaskVolume& x, const MaskVolume& y, const Spacing& s, double delta)
{
    const auto sx = surface(x, s), sy = surface(y, s);
    if (sx.empty() && sy.empty()) return 1.0;
    if (sx.empty() || sy.empty()) return 0.0;
    std::size_t hits = 0;
    for (double d : directed(sx, sy)) hits += d <= delta;
    for (double d : directed(sy, sx)) hits += d <= delta;
    return static_cast<double>(hits) / static_cast<double>(sx.size() + sy.size());
}

inline std::optional<double> hd95(const MaskVolume& x, const MaskVolume& y, const Spacing& s)
{
    const auto sx = surface(x, s), sy = surface(y, s);
    if (sx.empty() || sy.empty()) return std::nullopt;
    auto all = directed(sx, sy);
    const auto back = directed(sy, sx);
    all.insert(all.end(), back.begin(), back.end());
    std::sort(all.begin(), all.end());
    // Smallest value with at least 95% of the sample at or below it.
    for (std::size_t k = 1; k <= all.size(); ++k) {
        if (100 * k >= 95 * all.size()) return all[k - 1];
    }
    return all.back();
}

// ----------------------------------------------------------------------------
// 2D helpers

/// Component labels (0 = background) by repeated min-label relaxation.
inline std::vector<int> component_labels(const MaskSlice& m)
{
    const std::size_t rows = m.rows(), cols = m.cols();
    std::vector<int> label(rows * cols, 0);
    for (std::size_t i = 0; i < rows * cols; ++i) label[i] = m.pixels()[i] ? static_cast<int>(i) + 1 : 0;
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                int& l = label[r * cols + c];
                if (!l) continue;
                const int before = l;
                if (r > 0 && label[(r - 1) * cols + c]) l = std::min(l, label[(r - 1) * cols + c]);
                if (r + 1 < rows && label[(r + 1) * cols + c]) l = std::min(l, label[(r + 1) * cols + c]);
                if (c > 0 && label[r * cols + c - 1]) l = std::min(l, label[r * cols + c - 1]);
                if (c + 1 < cols && label[r * cols + c + 1]) l = std::min(l, label[r * cols + c + 1]);
                changed = changed || l != before;
            }
    }
    return label;
}

/// Squared distance to the nearest background pixel; outside counts as background.
inline std::vector<std::uint64_t> sq_edt(const MaskSlice& m)
{
    const long long rows = m.rows(), cols = m.cols();
    std::vector<std::uint64_t> out(rows * cols, 0);
    for (long long r = 0; r < rows; ++r)
        for (long long c = 0; c < cols; ++c) {
            if (!m(r, c)) continue;
            const long long border = std::min({r + 1, rows - r, c + 1, cols - c});
            std::uint64_t best = static_cast<std::uint64_t>(border * border);
            for (long long rr = 0; rr < rows; ++rr)
                for (long long cc = 0; cc < cols; ++cc) {
                    if (m(rr, cc)) continue;
                    const auto d = static_cast<std::uint64_t>((r - rr) * (r - rr) + (c - cc) * (c - cc));
                    best = std::min(best, d);
                }
            out[r * cols + c] = best;
        }
    return out;
}

/// The robot user's next click, recomputed from scratch.
inline std::optional<slicewise::prompt::Click> next_click(const MaskSlice& pred, const MaskSlice& gt)
{
    const std::size_t rows = gt.rows(), cols = gt.cols();
    MaskSlice fn(rows, cols, 0), fp(rows, cols, 0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            fn(r, c) = gt(r, c) && !pred(r, c);
            fp(r, c) = !gt(r, c) && pred(r, c);
        }

    struct Candidate {
        std::size_t size = 0;
        std::size_t first = 0;  // row-major index of the smallest pixel
        bool false_negative = false;
        int label = 0;
    };
    std::optional<Candidate> best;
    for (int pass = 0; pass < 2; ++pass) {
        const MaskSlice& err = pass == 0 ? fn : fp;
        const auto labels = component_labels(err);
        std::vector<std::size_t> sizes(rows * cols + 1, 0);
        for (int l : labels)
            if (l) ++sizes[l];
        for (std::size_t l = 1; l <= rows * cols; ++l) {
            if (!sizes[l]) continue;
            // Labels equal their smallest member's index + 1.
            Candidate c{sizes[l], l - 1, pass == 0, static_cast<int>(l)};
            if (!best || c.size > best->size || (c.size == best->size && c.first < best->first)) best = c;
        }
    }
    if (!best) return std::nullopt;

    const MaskSlice& err = best->false_negative ? fn : fp;
    const auto labels = component_labels(err);
    MaskSlice comp(rows, cols, 0);
    for (std::size_t i = 0; i < rows * cols; ++i) comp.pixels()[i] = labels[i] == best->label;
    const auto dist = sq_edt(comp);
    std::size_t arg = 0;
    for (std::size_t i = 0; i < rows * cols; ++i)
        if (dist[i] > dist[arg]) arg = i;
    slicewise::prompt::Click click;
    click.row = arg / cols;
    click.col = arg % cols;
    click.label =
        best->false_negative ? slicewise::prompt::ClickLabel::foreground : slicewise::prompt::ClickLabel::background;
    return click;
}

}  // namespace oracle
