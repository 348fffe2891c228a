#include "slicewise/propagation.hpp"

#include <cmath>
#include <future>
#include <mutex>

#include "slicewise/image_ops.hpp"
#include "slicewise/kernels.hpp"

namespace slicewise::propagation {

const char* to_string(Direction d) noexcept { return d == Direction::forward ? "forward" : "backward"; }

const char* to_string(Provenance p) noexcept
{
    switch (p) {
        case Provenance::prompt: return "prompt";
        case Provenance::forward: return "forward";
        case Provenance::backward: return "backward";
        case Provenance::missing: break;
    }
    return "missing";
}

PropagationPlan plan(std::size_t n_slices, std::size_t center)
{
    if (center >= n_slices) throw contract_error("propagation center outside the stack");
    PropagationPlan p;
    p.center = center;
    for (std::size_t i = center; i < n_slices; ++i) p.forward.push_back(i);
    for (std::size_t i = center + 1; i-- > 0;) p.backward.push_back(i);
    return p;
}

namespace {

struct Assembly {
    std::mutex mutex;
    PropagationResult result;
    int axis = 2;
};

std::optional<std::string> run_direction(const FrameStack& stack, const MaskSlice& center_mask,
                                         const std::vector<std::size_t>& order, Direction direction,
                                         const PropagatorFactory& factory, Assembly& assembly,
                                         const PropagateOptions& options)
{
    if (order.size() < 2) return std::nullopt;
    const Provenance tag = direction == Direction::forward ? Provenance::forward : Provenance::backward;
    std::size_t position = 1;
    try {
        std::unique_ptr<Propagator> prop = factory();
        std::vector<VisitFrame> frames;
        frames.reserve(order.size());
        for (std::size_t idx : order) frames.push_back(VisitFrame{idx, stack.frames[idx]});
        prop->begin(std::move(frames), center_mask, direction);

        for (; position < order.size(); ++position) {
            const auto start = std::chrono::steady_clock::now();
            std::optional<MaskSlice> mask = prop->step();
            const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start);
            if (!mask) throw protocol_error("propagator ended before slice " + std::to_string(order[position]));
            if (!mask->same_shape(center_mask)) {
                throw protocol_error("propagator returned a mask of the wrong shape for slice " +
                                     std::to_string(order[position]));
            }
            {
                std::lock_guard lock(assembly.mutex);
                assign_slice(assembly.result.mask, assembly.axis, order[position], *mask);
                assembly.result.provenance[order[position]] = tag;
                assembly.result.step_milliseconds[order[position]] = elapsed.count();
            }
            if (options.on_slice) options.on_slice(order[position], tag, *mask);
        }
    } catch (const std::exception& e) {
        return std::string(to_string(direction)) + " propagation failed at slice " +
               std::to_string(order[position]) + ": " + e.what();
    }
    return std::nullopt;
}

}  // namespace

PropagationResult propagate(const FrameStack& stack, const MaskSlice& center_mask, std::size_t center,
                            const PropagatorFactory& factory, const PropagateOptions& options)
{
    const PropagationPlan p = plan(stack.size(), center);
    if (!center_mask.same_shape(stack.frames[center])) {
        throw contract_error("center mask shape does not match the frames");
    }

    Assembly assembly;
    assembly.axis = stack.axis;
    assembly.result.mask = MaskVolume(stack.source_dims);
    assembly.result.provenance.assign(stack.size(), Provenance::missing);
    assembly.result.step_milliseconds.assign(stack.size(), 0.0);
    assign_slice(assembly.result.mask, stack.axis, center, center_mask);
    assembly.result.provenance[center] = Provenance::prompt;
    if (options.on_slice) options.on_slice(center, Provenance::prompt, center_mask);

    std::optional<std::string> backward_error;
    std::future<std::optional<std::string>> backward;
    if (options.concurrent && p.backward.size() > 1) {
        backward = std::async(std::launch::async, [&] {
            return run_direction(stack, center_mask, p.backward, Direction::backward, factory, assembly, options);
        });
    } else {
        backward_error = run_direction(stack, center_mask, p.backward, Direction::backward, factory, assembly, options);
    }
    const auto forward_error =
        run_direction(stack, center_mask, p.forward, Direction::forward, factory, assembly, options);
    if (backward.valid()) backward_error = backward.get();

    PropagationResult result = std::move(assembly.result);
    result.forward_error = forward_error;
    result.backward_error = backward_error;
    return result;
}

// ============================================================================
// Identity
// ============================================================================

void IdentityPropagator::begin(std::vector<VisitFrame> frames, const MaskSlice& prompt, Direction)
{
    remaining_ = frames.empty() ? 0 : frames.size() - 1;
    mask_ = prompt;
}

std::optional<MaskSlice> IdentityPropagator::step()
{
    if (remaining_ == 0) return std::nullopt;
    --remaining_;
    return mask_;
}

PropagatorFactory identity_propagator()
{
    return [] { return std::make_unique<IdentityPropagator>(); };
}

// ============================================================================
// Reference
// ============================================================================

void ReferencePropagatorParams::validate() const
{
    if (!(band_k > 0.0)) throw contract_error("band_k must be > 0");
    if (!(min_overlap >= 0.0 && min_overlap <= 1.0)) throw contract_error("min_overlap must lie in [0, 1]");
}

ReferencePropagator::ReferencePropagator(ReferencePropagatorParams params) : params_(params) { params_.validate(); }

void ReferencePropagator::begin(std::vector<VisitFrame> frames, const MaskSlice& prompt, Direction)
{
    if (!frames.empty() && !prompt.same_shape(frames.front().frame)) {
        throw contract_error("prompt mask shape does not match the first frame");
    }
    frames_ = std::move(frames);
    mask_ = prompt;
    position_ = 0;
}

std::optional<MaskSlice> ReferencePropagator::step()
{
    if (position_ + 1 >= frames_.size()) return std::nullopt;
    mask_ = advance(frames_[position_].frame, mask_, frames_[position_ + 1].frame, params_);
    ++position_;
    return mask_;
}

MaskSlice ReferencePropagator::advance(const Frame& previous_frame, const MaskSlice& previous_mask,
                                       const Frame& next_frame, const ReferencePropagatorParams& params)
{
    MaskSlice out(next_frame.rows(), next_frame.cols(), 0);
    const auto m = kernels::active().masked_moments(previous_frame.pixels().data(), previous_mask.pixels().data(),
                                                    previous_frame.size());
    if (m.count == 0) return out;

    const double n = static_cast<double>(m.count);
    const double mean = static_cast<double>(m.sum) / n;
    const double variance = std::max(0.0, static_cast<double>(m.sum_sq) / n - mean * mean);
    const double sigma = std::max(1.0, std::sqrt(variance));
    const double band = params.band_k * sigma;

    MaskSlice candidates(next_frame.rows(), next_frame.cols(), 0);
    for (std::size_t i = 0; i < next_frame.size(); ++i) {
        candidates.pixels()[i] = std::abs(static_cast<double>(next_frame.pixels()[i]) - mean) <= band ? 1 : 0;
    }

    for (const Component& comp : connected_components_4(candidates)) {
        std::size_t overlap = 0;
        for (const Pixel& p : comp.pixels) overlap += previous_mask(p.row, p.col) != 0;
        if (static_cast<double>(overlap) < params.min_overlap * static_cast<double>(comp.size())) continue;
        for (const Pixel& p : comp.pixels) out(p.row, p.col) = 1;
    }
    return close3x3(out);
}

PropagatorFactory reference_propagator(ReferencePropagatorParams params)
{
    params.validate();
    return [params] { return std::make_unique<ReferencePropagator>(params); };
}

}  // namespace slicewise::propagation
