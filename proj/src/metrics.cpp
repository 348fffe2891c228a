#include "slicewise/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "slicewise/kernels.hpp"

namespace slicewise::metrics {

namespace {

void require_same_shape(const Dims& a, const Dims& b)
{
    if (a != b) throw contract_error("mask shapes differ");
}

double dice_from_counts(std::size_t both, std::size_t nx, std::size_t ny)
{
    if (nx + ny == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(nx + ny);
}

double dice_raw(const std::uint8_t* x, const std::uint8_t* y, std::size_t n)
{
    const auto& k = kernels::active();
    return dice_from_counts(k.count_both(x, y, n), k.count_nonzero(x, n), k.count_nonzero(y, n));
}

std::size_t count_within(const std::vector<double>& distances, double tol)
{
    return static_cast<std::size_t>(
        std::count_if(distances.begin(), distances.end(), [tol](double d) { return d <= tol; }));
}

}  // namespace

Tolerance::Tolerance(double mm) : mm_(mm)
{
    if (!std::isfinite(mm) || mm < 0.0) throw contract_error("tolerance must be finite and >= 0");
}

double dice(const MaskVolume& x, const MaskVolume& y)
{
    require_same_shape(x.dims(), y.dims());
    return dice_raw(x.labels().data(), y.labels().data(), x.voxel_count());
}

double dice(const MaskSlice& x, const MaskSlice& y)
{
    if (!x.same_shape(y)) throw contract_error("mask shapes differ");
    return dice_raw(x.pixels().data(), y.pixels().data(), x.size());
}

SurfacePointSet extract_surface(const MaskVolume& mask, const Spacing& spacing)
{
    SurfacePointSet out;
    out.source_dims = mask.dims();
    const Dims& d = mask.dims();
    const auto labels = mask.labels();
    const std::size_t sy = d[0];
    const std::size_t sz = d[0] * d[1];
    std::size_t i = 0;
    for (std::size_t z = 0; z < d[2]; ++z) {
        for (std::size_t y = 0; y < d[1]; ++y) {
            for (std::size_t x = 0; x < d[0]; ++x, ++i) {
                if (labels[i] == 0) continue;
                const bool boundary = x == 0 || x + 1 == d[0] || y == 0 || y + 1 == d[1] || z == 0 ||
                                      z + 1 == d[2] || labels[i - 1] == 0 || labels[i + 1] == 0 ||
                                      labels[i - sy] == 0 || labels[i + sy] == 0 || labels[i - sz] == 0 ||
                                      labels[i + sz] == 0;
                if (!boundary) continue;
                out.xs.push_back(static_cast<double>(x) * spacing[0]);
                out.ys.push_back(static_cast<double>(y) * spacing[1]);
                out.zs.push_back(static_cast<double>(z) * spacing[2]);
            }
        }
    }
    return out;
}

std::vector<double> directed_distances(const SurfacePointSet& from, const SurfacePointSet& to)
{
    const auto& k = kernels::active();
    std::vector<double> out(from.size());
    for (std::size_t i = 0; i < from.size(); ++i) {
        out[i] = std::sqrt(k.min_sq_distance(from.xs[i], from.ys[i], from.zs[i], to.xs.data(), to.ys.data(),
                                             to.zs.data(), to.size()));
    }
    return out;
}

double nsd(const MaskVolume& x, const MaskVolume& y, const Spacing& spacing, Tolerance tol)
{
    require_same_shape(x.dims(), y.dims());
    const SurfacePointSet sx = extract_surface(x, spacing);
    const SurfacePointSet sy = extract_surface(y, spacing);
    if (sx.empty() && sy.empty()) return 1.0;
    if (sx.empty() || sy.empty()) return 0.0;
    const std::size_t hits =
        count_within(directed_distances(sx, sy), tol.mm()) + count_within(directed_distances(sy, sx), tol.mm());
    return static_cast<double>(hits) / static_cast<double>(sx.size() + sy.size());
}

double hd95(const MaskVolume& x, const MaskVolume& y, const Spacing& spacing)
{
    require_same_shape(x.dims(), y.dims());
    const SurfacePointSet sx = extract_surface(x, spacing);
    const SurfacePointSet sy = extract_surface(y, spacing);
    if (sx.empty() || sy.empty()) throw undefined_metric_error("hd95 is undefined when a mask is empty");
    std::vector<double> pooled = directed_distances(sx, sy);
    const std::vector<double> back = directed_distances(sy, sx);
    pooled.insert(pooled.end(), back.begin(), back.end());
    const std::size_t n = pooled.size();
    const std::size_t rank = (95 * n + 99) / 100;  // ceil(0.95 n), n >= 2
    std::nth_element(pooled.begin(), pooled.begin() + static_cast<std::ptrdiff_t>(rank - 1), pooled.end());
    return pooled[rank - 1];
}

std::vector<std::size_t> salient_slices(const MaskVolume& gt, int axis, std::size_t threshold)
{
    const std::vector<std::size_t> counts = slice_counts(gt, axis);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] > threshold) out.push_back(i);
    }
    return out;
}

MaskVolume stack_slices(const MaskVolume& mask, int axis, const std::vector<std::size_t>& indices)
{
    if (axis < 0 || axis > 2) throw contract_error("axis must be 0, 1 or 2");
    const Dims& d = mask.dims();
    for (std::size_t idx : indices) {
        if (idx >= d[axis]) throw bounds_error("slice index out of range");
    }
    if (indices.empty()) throw undefined_metric_error("no slices selected");
    Dims sub = d;
    sub[axis] = indices.size();
    MaskVolume out(sub);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        assign_slice(out, axis, k, slice_of(mask, axis, indices[k]));
    }
    return out;
}

SubsetMetrics masked_metrics(const MaskVolume& pred, const MaskVolume& gt, const Spacing& spacing, int axis,
                             const std::vector<std::size_t>& indices, Tolerance tol)
{
    require_same_shape(pred.dims(), gt.dims());
    if (indices.empty()) throw undefined_metric_error("masked metrics need at least one slice");
    const MaskVolume p = stack_slices(pred, axis, indices);
    const MaskVolume g = stack_slices(gt, axis, indices);
    return SubsetMetrics{dice(p, g), nsd(p, g, spacing, tol)};
}

std::vector<double> dice_growth_per_point(const RoundLog& log, double baseline_dice)
{
    std::vector<double> out;
    out.reserve(log.size());
    double previous = baseline_dice;
    for (const RoundEntry& round : log) {
        if (round.points_added == 0) throw contract_error("a round with zero new points has no growth per point");
        out.push_back((round.dice_after - previous) / static_cast<double>(round.points_added));
        previous = round.dice_after;
    }
    return out;
}

namespace {

MetricSummary summarize(const std::vector<double>& values, std::size_t excluded)
{
    MetricSummary s;
    s.count = values.size();
    s.excluded = excluded;
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(values.size()));
    return s;
}

}  // namespace

AggregateSummary aggregate(const std::vector<CaseMetrics>& cases)
{
    if (cases.empty()) throw contract_error("aggregate needs at least one case");
    std::vector<double> dices, nsds, hds, sdice, snsd;
    std::size_t hd_excluded = 0;
    for (const CaseMetrics& c : cases) {
        dices.push_back(c.dice);
        nsds.push_back(c.nsd);
        if (c.hd95) {
            hds.push_back(*c.hd95);
        } else {
            ++hd_excluded;
        }
        if (c.salient_dice) sdice.push_back(*c.salient_dice);
        if (c.salient_nsd) snsd.push_back(*c.salient_nsd);
    }
    AggregateSummary out;
    out.dice = summarize(dices, 0);
    out.nsd = summarize(nsds, 0);
    out.hd95 = summarize(hds, hd_excluded);
    if (!sdice.empty()) out.salient_dice = summarize(sdice, cases.size() - sdice.size());
    if (!snsd.empty()) out.salient_nsd = summarize(snsd, cases.size() - snsd.size());
    return out;
}

}  // namespace slicewise::metrics
