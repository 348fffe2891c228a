#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "slicewise/image.hpp"
#include "slicewise/volume.hpp"

namespace slicewise::propagation {

enum class Direction { forward, backward };
const char* to_string(Direction d) noexcept;

/// Visit orders from the prompted slice outwards.
struct PropagationPlan {
    std::size_t center = 0;
    std::vector<std::size_t> forward;   // center, center+1, ..., n-1
    std::vector<std::size_t> backward;  // center, center-1, ..., 0
};

PropagationPlan plan(std::size_t n_slices, std::size_t center);

struct VisitFrame {
    std::size_t index = 0;  // slice index within the stack
    Frame frame;
};

/// Sequential mask propagator for one direction.
///
/// begin() receives the frames in visit order; frames[0] is the prompted
/// slice and `prompt` its mask. Each step() returns the mask for the next
/// frame in order, and nullopt once frames.size() - 1 masks were produced.
/// Implementations must be deterministic for identical inputs.
class Propagator {
public:
    virtual ~Propagator() = default;
    virtual void begin(std::vector<VisitFrame> frames, const MaskSlice& prompt, Direction direction) = 0;
    virtual std::optional<MaskSlice> step() = 0;
};

/// Makes a fresh, independent propagator (one per direction).
using PropagatorFactory = std::function<std::unique_ptr<Propagator>()>;

enum class Provenance { missing, prompt, forward, backward };
const char* to_string(Provenance p) noexcept;

struct PropagationResult {
    MaskVolume mask;
    std::vector<Provenance> provenance;     // per slice index
    std::vector<double> step_milliseconds;  // per slice index; 0 for prompt / missing
    std::optional<std::string> forward_error;
    std::optional<std::string> backward_error;

    bool complete() const noexcept { return !forward_error && !backward_error; }
};

struct PropagateOptions {
    /// Run the backward direction on a second thread.
    bool concurrent = true;
    /// Called after each slice is stored (from the direction's thread).
    std::function<void(std::size_t slice, Provenance, const MaskSlice&)> on_slice;
};

/// Propagates `center_mask` through the whole stack in both directions.
/// The result holds center_mask verbatim at `center`. A failing direction
/// leaves its remaining slices as Provenance::missing and records the cause.
PropagationResult propagate(const FrameStack& stack, const MaskSlice& center_mask, std::size_t center,
                            const PropagatorFactory& factory, const PropagateOptions& options = {});

// ----------------------------------------------------------------------------
// Built-in propagators

/// Repeats the previous mask for every frame.
class IdentityPropagator final : public Propagator {
public:
    void begin(std::vector<VisitFrame> frames, const MaskSlice& prompt, Direction direction) override;
    std::optional<MaskSlice> step() override;

private:
    std::size_t remaining_ = 0;
    MaskSlice mask_;
};

struct ReferencePropagatorParams {
    double band_k = 2.5;
    double min_overlap = 0.3;

    void validate() const;
};

/// Deterministic intensity-band tracker.
///
/// Per step, with previous mask M on previous frame P and next frame F:
/// mu, sigma = mean / std of P under M (sigma floored at 1); candidates are
/// pixels of F with |F - mu| <= band_k * sigma; candidate 4-connected
/// components survive when |component & M| >= min_overlap * |component|;
/// the survivors get one 3x3 closing. An empty M stays empty.
class ReferencePropagator final : public Propagator {
public:
    explicit ReferencePropagator(ReferencePropagatorParams params = {});
    void begin(std::vector<VisitFrame> frames, const MaskSlice& prompt, Direction direction) override;
    std::optional<MaskSlice> step() override;

    /// One propagation step in isolation.
    static MaskSlice advance(const Frame& previous_frame, const MaskSlice& previous_mask, const Frame& next_frame,
                             const ReferencePropagatorParams& params);

private:
    ReferencePropagatorParams params_;
    std::vector<VisitFrame> frames_;
    MaskSlice mask_;
    std::size_t position_ = 0;
};

PropagatorFactory identity_propagator();
PropagatorFactory reference_propagator(ReferencePropagatorParams params = {});

}  // namespace slicewise::propagation
