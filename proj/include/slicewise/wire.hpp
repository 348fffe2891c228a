#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "json.hpp"
#include "slicewise/propagation.hpp"
#include "slicewise/prompt.hpp"

namespace httplib {
class Server;
}

namespace slicewise::wire {

using json = nlohmann::json;

// ============================================================================
// Message encoding shared by every backend
// ============================================================================
//
//   POST /v1/propagation
//     {"frames": [{"index", "width", "height", "pixels": base64 8-bit row-major}],
//      "prompt": {"index", "mask_rle": [...]},
//      "direction": "forward" | "backward"}            -> {"stream_id"}
//   GET  /v1/propagation/{stream_id}/next             -> {"index", "mask_rle"} | {"done": true}
//   POST /v1/segment2d
//     {"frame": {...}, "clicks": [{"row","col","label"}] | "box": {"r0","c0","r1","c1"} | "mask_rle": [...]}
//                                                      -> {"mask_rle", "width", "height"}
//
// Errors are {"code", "message", "field"?} with a 4xx/5xx status.

json frame_to_json(std::size_t index, const Frame& frame);

/// Returns (index, frame). Throws format_error naming the bad field.
std::pair<std::size_t, Frame> frame_from_json(const json& j);

json mask_to_rle_json(const MaskSlice& mask);
MaskSlice mask_from_rle_json(const json& runs, std::size_t rows, std::size_t cols);

const char* to_string(prompt::ClickLabel label) noexcept;
prompt::ClickLabel click_label_from_string(const std::string& s);

json prompt_to_json(const prompt::Prompt& p);
/// Parses clicks / box / mask_rle from a request body (exactly one must be present).
prompt::Prompt prompt_from_json(const json& body, std::size_t rows, std::size_t cols);

json error_body(const std::string& code, const std::string& message, const std::string& field = {});

// ============================================================================
// Clients
// ============================================================================

struct RemoteOptions {
    std::chrono::milliseconds step_timeout{30000};
    std::chrono::milliseconds connect_timeout{5000};
};

/// Propagator speaking the wire protocol against `endpoint` ("http://host:port").
class RemotePropagator final : public propagation::Propagator {
public:
    RemotePropagator(std::string endpoint, RemoteOptions options = {});
    ~RemotePropagator() override;

    void begin(std::vector<propagation::VisitFrame> frames, const MaskSlice& prompt,
               propagation::Direction direction) override;
    std::optional<MaskSlice> step() override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

propagation::PropagatorFactory remote_propagator(std::string endpoint, RemoteOptions options = {});

/// 2D segmenter backed by POST /v1/segment2d.
class RemoteSegmenter final : public prompt::InteractiveSegmenter {
public:
    RemoteSegmenter(std::string endpoint, RemoteOptions options = {});
    ~RemoteSegmenter() override;
    MaskSlice predict(const Frame& frame, const prompt::Prompt& prompt) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// ============================================================================
// Server side
// ============================================================================

using SegmenterFactory = std::function<std::unique_ptr<prompt::InteractiveSegmenter>()>;

/// Serves the propagation and segment2d endpoints from local implementations.
class BackendService {
public:
    BackendService(propagation::PropagatorFactory propagators, SegmenterFactory segmenters);

    void mount(httplib::Server& server);

private:
    struct Stream {
        std::unique_ptr<propagation::Propagator> propagator;
        std::vector<std::size_t> order;
        std::size_t position = 0;
        std::mutex mutex;
    };

    propagation::PropagatorFactory propagators_;
    SegmenterFactory segmenters_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Stream>> streams_;
    std::size_t next_id_ = 1;
};

}  // namespace slicewise::wire
