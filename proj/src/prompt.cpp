#include "slicewise/prompt.hpp"

#include <cmath>
#include <deque>

#include "slicewise/metrics.hpp"

namespace slicewise::prompt {

Prompt Prompt::clicks(std::vector<Click> clicks, std::size_t slice) { return Prompt{std::move(clicks), slice}; }
Prompt Prompt::box(Box box, std::size_t slice) { return Prompt{box, slice}; }
Prompt Prompt::mask(MaskSlice mask, std::size_t slice) { return Prompt{std::move(mask), slice}; }

void Prompt::validate(std::size_t rows, std::size_t cols) const
{
    if (const auto* clicks = std::get_if<std::vector<Click>>(&value)) {
        for (const Click& c : *clicks) {
            if (c.row >= rows || c.col >= cols) throw bounds_error("click outside the frame");
        }
    } else if (const auto* b = std::get_if<Box>(&value)) {
        if (b->r0 > b->r1 || b->c0 > b->c1) throw contract_error("box corners must be ordered");
        if (b->r1 >= rows || b->c1 >= cols) throw bounds_error("box outside the frame");
    } else {
        const auto& m = std::get<MaskSlice>(value);
        if (m.rows() != rows || m.cols() != cols) throw contract_error("mask prompt shape does not match the frame");
    }
}

// ============================================================================
// Robot user
// ============================================================================

std::size_t select_center_slice(const MaskVolume& gt, int axis)
{
    const auto counts = slice_counts(gt, axis);
    std::size_t best = 0;
    for (std::size_t i = 1; i < counts.size(); ++i) {
        if (counts[i] > counts[best]) best = i;
    }
    if (counts.empty() || counts[best] == 0) throw contract_error("ground truth mask is empty");
    return best;
}

Click initial_click(const MaskSlice& gt_slice)
{
    if (count_foreground(gt_slice) == 0) throw contract_error("initial_click: ground-truth slice is empty");
    const Pixel p = deepest_pixel(gt_slice);
    return Click{p.row, p.col, ClickLabel::foreground, 1};
}

std::optional<Click> next_click(const MaskSlice& pred, const MaskSlice& gt)
{
    if (!pred.same_shape(gt)) throw contract_error("prediction and ground truth shapes differ");
    MaskSlice false_neg(gt.rows(), gt.cols(), 0);
    MaskSlice false_pos(gt.rows(), gt.cols(), 0);
    bool any = false;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const bool g = gt.pixels()[i] != 0;
        const bool p = pred.pixels()[i] != 0;
        false_neg.pixels()[i] = g && !p;
        false_pos.pixels()[i] = p && !g;
        any = any || (g != p);
    }
    if (!any) return std::nullopt;

    const Component* best = nullptr;
    ClickLabel best_label = ClickLabel::foreground;
    const auto fn_components = connected_components_4(false_neg);
    const auto fp_components = connected_components_4(false_pos);
    auto consider = [&](const std::vector<Component>& comps, ClickLabel label) {
        for (const Component& c : comps) {
            if (best == nullptr || c.size() > best->size() ||
                (c.size() == best->size() && c.pixels.front() < best->pixels.front())) {
                best = &c;
                best_label = label;
            }
        }
    };
    consider(fn_components, ClickLabel::foreground);
    consider(fp_components, ClickLabel::background);

    const Pixel p = deepest_pixel(component_mask(*best, gt.rows(), gt.cols()));
    return Click{p.row, p.col, best_label, 0};
}

SliceSessionLog run_click_session(const Frame& frame, const MaskSlice& gt_slice, InteractiveSegmenter& segmenter,
                                  std::size_t k_rounds)
{
    if (k_rounds < 1) throw contract_error("k_rounds must be >= 1");
    if (!frame.same_shape(gt_slice)) throw contract_error("frame and ground-truth slice shapes differ");

    SliceSessionLog log;
    log.final_mask = MaskSlice(gt_slice.rows(), gt_slice.cols(), 0);
    std::vector<Click> clicks{initial_click(gt_slice)};
    segmenter.reset();

    for (std::size_t round = 1; round <= k_rounds; ++round) {
        MaskSlice pred;
        try {
            pred = segmenter.predict(frame, Prompt::clicks(clicks));
            if (!pred.same_shape(gt_slice)) throw contract_error("segmenter returned a mask of the wrong shape");
        } catch (const std::exception& e) {
            log.error = "round " + std::to_string(round) + ": " + e.what();
            return log;
        }
        log.rounds.push_back(SessionRound{round, clicks.back(), metrics::dice(pred, gt_slice)});
        log.final_mask = std::move(pred);
        if (round == k_rounds) break;
        auto next = next_click(log.final_mask, gt_slice);
        if (!next) break;
        next->round = round + 1;
        clicks.push_back(*next);
    }
    return log;
}

// ============================================================================
// Reference segmenter
// ============================================================================

namespace {

/// Breadth-first growth from `seed`, 4-connected, within `limit` (inclusive box).
void grow_from(const Frame& frame, const MaskSlice& forbidden, Pixel seed, const Box& limit, double tolerance,
               MaskSlice& out)
{
    if (forbidden(seed.row, seed.col) != 0) return;
    MaskSlice region(frame.rows(), frame.cols(), 0);
    std::deque<Pixel> queue{seed};
    region(seed.row, seed.col) = 1;
    double sum = frame(seed.row, seed.col);
    double count = 1.0;
    while (!queue.empty()) {
        const Pixel p = queue.front();
        queue.pop_front();
        const long long offsets[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
        for (const auto& o : offsets) {
            const long long r = static_cast<long long>(p.row) + o[0];
            const long long c = static_cast<long long>(p.col) + o[1];
            if (r < static_cast<long long>(limit.r0) || c < static_cast<long long>(limit.c0) ||
                r > static_cast<long long>(limit.r1) || c > static_cast<long long>(limit.c1)) {
                continue;
            }
            const auto ur = static_cast<std::size_t>(r);
            const auto uc = static_cast<std::size_t>(c);
            if (region(ur, uc) != 0 || forbidden(ur, uc) != 0) continue;
            const double value = frame(ur, uc);
            if (std::abs(value - sum / count) > tolerance) continue;
            region(ur, uc) = 1;
            sum += value;
            count += 1.0;
            queue.push_back(Pixel{ur, uc});
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i) out.pixels()[i] |= region.pixels()[i];
}

}  // namespace

MaskSlice ReferenceSegmenter::predict(const Frame& frame, const Prompt& prompt)
{
    prompt.validate(frame.rows(), frame.cols());
    if (const auto* m = std::get_if<MaskSlice>(&prompt.value)) return *m;

    MaskSlice out(frame.rows(), frame.cols(), 0);
    MaskSlice forbidden(frame.rows(), frame.cols(), 0);
    const Box whole{0, 0, frame.rows() - 1, frame.cols() - 1};

    if (const auto* b = std::get_if<Box>(&prompt.value)) {
        const Pixel center{(b->r0 + b->r1) / 2, (b->c0 + b->c1) / 2};
        grow_from(frame, forbidden, center, *b, params_.tolerance, out);
        return out;
    }

    const auto& clicks = std::get<std::vector<Click>>(prompt.value);
    for (const Click& c : clicks) {
        if (c.label != ClickLabel::background) continue;
        for (long long dr = -1; dr <= 1; ++dr) {
            for (long long dc = -1; dc <= 1; ++dc) {
                const long long r = static_cast<long long>(c.row) + dr;
                const long long col = static_cast<long long>(c.col) + dc;
                if (forbidden.contains(r, col)) forbidden(static_cast<std::size_t>(r), static_cast<std::size_t>(col)) = 1;
            }
        }
    }
    for (const Click& c : clicks) {
        if (c.label != ClickLabel::foreground) continue;
        grow_from(frame, forbidden, Pixel{c.row, c.col}, whole, params_.tolerance, out);
    }
    return out;
}

std::unique_ptr<InteractiveSegmenter> reference_2d_segmenter(RegionGrowParams params)
{
    return std::make_unique<ReferenceSegmenter>(params);
}

}  // namespace slicewise::prompt
