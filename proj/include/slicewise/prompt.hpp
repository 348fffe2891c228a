#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "slicewise/image.hpp"
#include "slicewise/image_ops.hpp"
#include "slicewise/volume.hpp"

namespace slicewise::prompt {

enum class ClickLabel { foreground, background };

struct Click {
    std::size_t row = 0;
    std::size_t col = 0;
    ClickLabel label = ClickLabel::foreground;
    std::size_t round = 0;

    friend bool operator==(const Click&, const Click&) = default;
};

struct Box {
    std::size_t r0 = 0;
    std::size_t c0 = 0;
    std::size_t r1 = 0;
    std::size_t c1 = 0;

    friend bool operator==(const Box&, const Box&) = default;
};

/// One prompt on one slice: a click set, a box, or a full mask.
struct Prompt {
    std::variant<std::vector<Click>, Box, MaskSlice> value;
    std::size_t slice_index = 0;

    static Prompt clicks(std::vector<Click> clicks, std::size_t slice = 0);
    static Prompt box(Box box, std::size_t slice = 0);
    static Prompt mask(MaskSlice mask, std::size_t slice = 0);

    /// Throws bounds_error / contract_error when the prompt does not fit the frame shape.
    void validate(std::size_t rows, std::size_t cols) const;
};

/// A 2D promptable segmenter. Equal frame + equal cumulative prompt must
/// give an equal mask.
class InteractiveSegmenter {
public:
    virtual ~InteractiveSegmenter() = default;
    virtual MaskSlice predict(const Frame& frame, const Prompt& prompt) = 0;
    /// Drops any per-slice state before a new session.
    virtual void reset() {}
};

// ----------------------------------------------------------------------------
// Robot user

/// Slice with the most ground-truth foreground; ties go to the lower index.
std::size_t select_center_slice(const MaskVolume& gt, int axis);

/// Foreground click at the deepest interior point of the GT slice.
Click initial_click(const MaskSlice& gt_slice);

/// Next corrective click, or nullopt when pred == gt.
///
/// False negatives (gt=1, pred=0) and false positives (gt=0, pred=1) are split
/// into 4-connected components; the largest wins, ties going to the component
/// holding the smallest (row, col). The click sits at that component's
/// distance-transform maximum and is labelled foreground for a false negative.
std::optional<Click> next_click(const MaskSlice& pred, const MaskSlice& gt);

struct SessionRound {
    std::size_t round = 0;
    Click click;
    double dice = 0.0;
};

struct SliceSessionLog {
    std::vector<SessionRound> rounds;
    MaskSlice final_mask;
    std::optional<std::string> error;
};

/// Robot-user loop: round 1 clicks the deepest GT point, later rounds correct
/// the largest error. Stops early when the prediction matches the GT.
SliceSessionLog run_click_session(const Frame& frame, const MaskSlice& gt_slice, InteractiveSegmenter& segmenter,
                                  std::size_t k_rounds);

// ----------------------------------------------------------------------------
// Built-in segmenter

struct RegionGrowParams {
    /// Accept a neighbour when |I - running mean| <= tolerance.
    double tolerance = 25.0;
};

/// Deterministic classical stand-in for a learned interactive model.
///
/// Clicks: region growing (4-connected, breadth-first) from each foreground
/// click, accepting pixels within `tolerance` of the running mean of accepted
/// pixels; the 3x3 neighbourhood of every background click is never entered.
/// Result is the union over seeds. Box: the same growth from the box centre,
/// confined to the box. Mask: returned unchanged.
class ReferenceSegmenter final : public InteractiveSegmenter {
public:
    explicit ReferenceSegmenter(RegionGrowParams params = {}) : params_(params) {}
    MaskSlice predict(const Frame& frame, const Prompt& prompt) override;

private:
    RegionGrowParams params_;
};

std::unique_ptr<InteractiveSegmenter> reference_2d_segmenter(RegionGrowParams params = {});

}  // namespace slicewise::prompt
