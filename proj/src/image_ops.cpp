#include "slicewise/image_ops.hpp"

#include <algorithm>
#include <limits>

namespace slicewise {

std::vector<Component> connected_components_4(const MaskSlice& mask)
{
    const std::size_t rows = mask.rows();
    const std::size_t cols = mask.cols();
    std::vector<std::uint8_t> seen(mask.size(), 0);
    std::vector<Component> out;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < mask.size(); ++start) {
        if (mask.pixels()[start] == 0 || seen[start]) continue;
        std::vector<std::size_t> members;
        seen[start] = 1;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            members.push_back(i);
            const std::size_t r = i / cols;
            const std::size_t c = i % cols;
            auto visit = [&](std::size_t j) {
                if (mask.pixels()[j] != 0 && !seen[j]) {
                    seen[j] = 1;
                    stack.push_back(j);
                }
            };
            if (r > 0) visit(i - cols);
            if (r + 1 < rows) visit(i + cols);
            if (c > 0) visit(i - 1);
            if (c + 1 < cols) visit(i + 1);
        }
        std::sort(members.begin(), members.end());
        Component comp;
        comp.pixels.reserve(members.size());
        for (std::size_t i : members) comp.pixels.push_back(Pixel{i / cols, i % cols});
        out.push_back(std::move(comp));
    }
    return out;
}

namespace {

constexpr std::uint64_t kInf = std::numeric_limits<std::uint64_t>::max() / 4;

/// 1D squared distance transform (lower envelope of parabolas) over f[0..n).
/// f holds kInf for feature-free samples.
void edt_1d(const std::vector<std::uint64_t>& f, std::vector<std::uint64_t>& d, std::vector<long long>& v,
            std::vector<double>& z)
{
    const auto n = static_cast<long long>(f.size());
    // Only sites with finite f take part in the envelope.
    long long k = -1;
    for (long long q = 0; q < n; ++q) {
        if (f[q] >= kInf) continue;
        double s = 0.0;
        while (k >= 0) {
            const long long p = v[k];
            s = (static_cast<double>(f[q]) + static_cast<double>(q * q) - static_cast<double>(f[p]) -
                 static_cast<double>(p * p)) /
                (2.0 * static_cast<double>(q - p));
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = k == 0 ? -std::numeric_limits<double>::infinity() : s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    if (k < 0) {
        std::fill(d.begin(), d.end(), kInf);
        return;
    }
    long long j = 0;
    for (long long q = 0; q < n; ++q) {
        while (z[j + 1] < static_cast<double>(q)) ++j;
        const long long p = v[j];
        d[q] = static_cast<std::uint64_t>((q - p) * (q - p)) + f[p];
    }
}

}  // namespace

Image2D<std::uint64_t> squared_distance_transform(const MaskSlice& mask)
{
    // Pad by one ring of background so outside pixels act as zeros.
    const std::size_t rows = mask.rows() + 2;
    const std::size_t cols = mask.cols() + 2;
    Image2D<std::uint64_t> work(rows, cols, 0);
    for (std::size_t r = 0; r < mask.rows(); ++r) {
        for (std::size_t c = 0; c < mask.cols(); ++c) {
            work(r + 1, c + 1) = mask(r, c) != 0 ? kInf : 0;
        }
    }

    const std::size_t longest = std::max(rows, cols);
    std::vector<std::uint64_t> f(longest), d(longest);
    std::vector<long long> v(longest);
    std::vector<double> z(longest + 1);

    // Columns.
    f.resize(rows);
    d.resize(rows);
    for (std::size_t c = 0; c < cols; ++c) {
        for (std::size_t r = 0; r < rows; ++r) f[r] = work(r, c);
        edt_1d(f, d, v, z);
        for (std::size_t r = 0; r < rows; ++r) work(r, c) = d[r];
    }
    // Rows.
    f.resize(cols);
    d.resize(cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) f[c] = work(r, c);
        edt_1d(f, d, v, z);
        for (std::size_t c = 0; c < cols; ++c) work(r, c) = d[c];
    }

    Image2D<std::uint64_t> out(mask.rows(), mask.cols(), 0);
    for (std::size_t r = 0; r < mask.rows(); ++r) {
        for (std::size_t c = 0; c < mask.cols(); ++c) out(r, c) = work(r + 1, c + 1);
    }
    return out;
}

Pixel deepest_pixel(const MaskSlice& mask)
{
    const auto dt = squared_distance_transform(mask);
    bool found = false;
    Pixel best;
    std::uint64_t best_value = 0;
    for (std::size_t r = 0; r < mask.rows(); ++r) {
        for (std::size_t c = 0; c < mask.cols(); ++c) {
            if (mask(r, c) == 0) continue;
            if (!found || dt(r, c) > best_value) {
                found = true;
                best_value = dt(r, c);
                best = Pixel{r, c};
            }
        }
    }
    if (!found) throw contract_error("deepest_pixel: mask is empty");
    return best;
}

MaskSlice component_mask(const Component& component, std::size_t rows, std::size_t cols)
{
    MaskSlice out(rows, cols, 0);
    for (const Pixel& p : component.pixels) out(p.row, p.col) = 1;
    return out;
}

namespace {

template <bool kDilate>
MaskSlice morph3x3(const MaskSlice& mask)
{
    const auto rows = static_cast<long long>(mask.rows());
    const auto cols = static_cast<long long>(mask.cols());
    MaskSlice out(mask.rows(), mask.cols(), 0);
    for (long long r = 0; r < rows; ++r) {
        for (long long c = 0; c < cols; ++c) {
            bool value = !kDilate;
            for (long long dr = -1; dr <= 1; ++dr) {
                for (long long dc = -1; dc <= 1; ++dc) {
                    const long long rr = r + dr;
                    const long long cc = c + dc;
                    const bool inside = rr >= 0 && cc >= 0 && rr < rows && cc < cols;
                    const bool on = inside ? mask(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc)) != 0
                                           : !kDilate;
                    if (kDilate && on) value = true;
                    if (!kDilate && !on) value = false;
                }
            }
            out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = value ? 1 : 0;
        }
    }
    return out;
}

}  // namespace

MaskSlice dilate3x3(const MaskSlice& mask) { return morph3x3<true>(mask); }
MaskSlice erode3x3(const MaskSlice& mask) { return morph3x3<false>(mask); }
MaskSlice close3x3(const MaskSlice& mask) { return erode3x3(dilate3x3(mask)); }

}  // namespace slicewise
