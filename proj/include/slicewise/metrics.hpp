#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "slicewise/volume.hpp"

namespace slicewise::metrics {

/// Surface voxels of a mask, in millimetres, stored as structure-of-arrays
/// for the distance kernels.
struct SurfacePointSet {
    std::vector<double> xs;
    std::vector<double> ys;
    std::vector<double> zs;
    Dims source_dims{};

    std::size_t size() const noexcept { return xs.size(); }
    bool empty() const noexcept { return xs.empty(); }
};

/// Distance tolerance (millimetres) for the normalized surface dice.
class Tolerance {
public:
    constexpr Tolerance() = default;
    explicit Tolerance(double mm);
    double mm() const noexcept { return mm_; }

private:
    double mm_ = 1.0;
};

struct CaseMetrics {
    std::string case_id;
    double dice = 0.0;
    double nsd = 0.0;
    std::optional<double> hd95;  // empty: undefined (one mask empty)
    std::optional<double> salient_dice;
    std::optional<double> salient_nsd;
    /// Salient filtering was requested but no slice qualified.
    bool salient_empty = false;
};

struct RoundEntry {
    std::size_t points_added = 0;
    double dice_after = 0.0;
};
using RoundLog = std::vector<RoundEntry>;

// ----------------------------------------------------------------------------

/// 2|x & y| / (|x| + |y|); 1.0 when both are empty.
double dice(const MaskVolume& x, const MaskVolume& y);
double dice(const MaskSlice& x, const MaskSlice& y);

/// Foreground voxels with a 6-connected background neighbour (outside the
/// grid counts as background), scaled by spacing. Emitted in storage order.
SurfacePointSet extract_surface(const MaskVolume& mask, const Spacing& spacing);

/// Distance from every point of `from` to the nearest point of `to`.
std::vector<double> directed_distances(const SurfacePointSet& from, const SurfacePointSet& to);

/// Normalized surface dice: fraction of both surfaces within tol of the other.
/// Both surfaces empty -> 1.0, exactly one empty -> 0.0.
double nsd(const MaskVolume& x, const MaskVolume& y, const Spacing& spacing, Tolerance tol = Tolerance{});

/// 95th percentile (nearest rank) of the pooled directed surface distances.
/// Throws undefined_metric_error when either mask is empty.
double hd95(const MaskVolume& x, const MaskVolume& y, const Spacing& spacing);

/// Slice indices along `axis` whose foreground count is strictly greater than threshold.
std::vector<std::size_t> salient_slices(const MaskVolume& gt, int axis, std::size_t threshold = 256);

/// Stacks the listed slices of a mask into a sub-volume (slices keep their order).
MaskVolume stack_slices(const MaskVolume& mask, int axis, const std::vector<std::size_t>& indices);

struct SubsetMetrics {
    double dice = 0.0;
    double nsd = 0.0;
};

/// Dice/NSD on the sub-volume formed by the listed slices only.
SubsetMetrics masked_metrics(const MaskVolume& pred, const MaskVolume& gt, const Spacing& spacing, int axis,
                             const std::vector<std::size_t>& indices, Tolerance tol = Tolerance{});

/// (dice_after[r] - dice_after[r-1]) / points_added[r], with baseline_dice
/// standing in before the first round. No clamping.
std::vector<double> dice_growth_per_point(const RoundLog& log, double baseline_dice = 0.0);

struct MetricSummary {
    double mean = 0.0;
    double stddev = 0.0;  // population
    std::size_t count = 0;
    std::size_t excluded = 0;
};

struct AggregateSummary {
    MetricSummary dice;
    MetricSummary nsd;
    MetricSummary hd95;
    std::optional<MetricSummary> salient_dice;
    std::optional<MetricSummary> salient_nsd;
};

/// Mean / population std per metric. Undefined hd95 values are excluded and counted.
AggregateSummary aggregate(const std::vector<CaseMetrics>& cases);

}  // namespace slicewise::metrics
