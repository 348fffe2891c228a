#include "slicewise/wire.hpp"

#include "httplib.h"
#include "slicewise/codec.hpp"

namespace slicewise::wire {

namespace {

template <typename T>
T require(const json& j, const char* field)
{
    if (!j.is_object() || !j.contains(field)) throw format_error(field, "missing field");
    try {
        return j.at(field).get<T>();
    } catch (const json::exception&) {
        throw format_error(field, "wrong type");
    }
}

}  // namespace

json frame_to_json(std::size_t index, const Frame& frame)
{
    return json{{"index", index},
                {"width", frame.cols()},
                {"height", frame.rows()},
                {"pixels", codec::base64_encode(frame.pixels())}};
}

std::pair<std::size_t, Frame> frame_from_json(const json& j)
{
    const auto index = require<std::size_t>(j, "index");
    const auto width = require<std::size_t>(j, "width");
    const auto height = require<std::size_t>(j, "height");
    if (width == 0 || height == 0) throw format_error("width", "frame must be non-empty");
    std::vector<std::uint8_t> pixels = codec::base64_decode(require<std::string>(j, "pixels"));
    if (pixels.size() != width * height) throw format_error("pixels", "pixel count does not match width*height");
    return {index, Frame(height, width, std::move(pixels))};
}

json mask_to_rle_json(const MaskSlice& mask) { return codec::rle_encode(mask); }

MaskSlice mask_from_rle_json(const json& runs, std::size_t rows, std::size_t cols)
{
    if (!runs.is_array()) throw format_error("mask_rle", "must be an array of run lengths");
    std::vector<std::uint64_t> values;
    values.reserve(runs.size());
    for (const json& r : runs) {
        if (!r.is_number_integer() || r.get<long long>() < 0) {
            throw format_error("mask_rle", "run lengths must be non-negative integers");
        }
        values.push_back(r.get<std::uint64_t>());
    }
    return codec::rle_decode(values, rows, cols);
}

const char* to_string(prompt::ClickLabel label) noexcept
{
    return label == prompt::ClickLabel::foreground ? "foreground" : "background";
}

prompt::ClickLabel click_label_from_string(const std::string& s)
{
    if (s == "foreground" || s == "fg") return prompt::ClickLabel::foreground;
    if (s == "background" || s == "bg") return prompt::ClickLabel::background;
    throw format_error("label", "expected \"foreground\" or \"background\"");
}

json prompt_to_json(const prompt::Prompt& p)
{
    json out = json::object();
    if (const auto* clicks = std::get_if<std::vector<prompt::Click>>(&p.value)) {
        json arr = json::array();
        for (const auto& c : *clicks) arr.push_back({{"row", c.row}, {"col", c.col}, {"label", to_string(c.label)}});
        out["clicks"] = std::move(arr);
    } else if (const auto* b = std::get_if<prompt::Box>(&p.value)) {
        out["box"] = {{"r0", b->r0}, {"c0", b->c0}, {"r1", b->r1}, {"c1", b->c1}};
    } else {
        out["mask_rle"] = mask_to_rle_json(std::get<MaskSlice>(p.value));
    }
    return out;
}

prompt::Prompt prompt_from_json(const json& body, std::size_t rows, std::size_t cols)
{
    const int present = static_cast<int>(body.contains("clicks")) + static_cast<int>(body.contains("box")) +
                        static_cast<int>(body.contains("mask_rle"));
    if (present != 1) throw format_error("prompt", "exactly one of clicks, box, mask_rle is required");
    prompt::Prompt p;
    if (body.contains("clicks")) {
        const json& arr = body.at("clicks");
        if (!arr.is_array()) throw format_error("clicks", "must be an array");
        std::vector<prompt::Click> clicks;
        for (const json& c : arr) {
            clicks.push_back(prompt::Click{require<std::size_t>(c, "row"), require<std::size_t>(c, "col"),
                                           click_label_from_string(require<std::string>(c, "label")), 0});
        }
        p = prompt::Prompt::clicks(std::move(clicks));
    } else if (body.contains("box")) {
        const json& b = body.at("box");
        p = prompt::Prompt::box(prompt::Box{require<std::size_t>(b, "r0"), require<std::size_t>(b, "c0"),
                                            require<std::size_t>(b, "r1"), require<std::size_t>(b, "c1")});
    } else {
        p = prompt::Prompt::mask(mask_from_rle_json(body.at("mask_rle"), rows, cols));
    }
    p.validate(rows, cols);
    return p;
}

json error_body(const std::string& code, const std::string& message, const std::string& field)
{
    json out{{"code", code}, {"message", message}};
    if (!field.empty()) out["field"] = field;
    return out;
}

// ============================================================================
// Clients
// ============================================================================

namespace {

std::unique_ptr<httplib::Client> make_client(const std::string& endpoint, const RemoteOptions& options)
{
    auto client = std::make_unique<httplib::Client>(endpoint);
    if (!client->is_valid()) throw transport_error("invalid endpoint: " + endpoint);
    client->set_connection_timeout(options.connect_timeout);
    client->set_read_timeout(options.step_timeout);
    client->set_write_timeout(options.step_timeout);
    return client;
}

json parse_response(const httplib::Result& res, const std::string& what, std::optional<std::size_t> frame)
{
    if (!res) {
        throw transport_error(what + ": " + httplib::to_string(res.error()), frame);
    }
    if (res->status < 200 || res->status >= 300) {
        throw protocol_error(what + ": HTTP " + std::to_string(res->status) + " " + res->body, frame);
    }
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw protocol_error(what + ": response is not JSON (" + e.what() + ")", frame);
    }
}

}  // namespace

struct RemotePropagator::Impl {
    std::string endpoint;
    RemoteOptions options;
    std::unique_ptr<httplib::Client> client;
    std::string stream_id;
    std::vector<std::size_t> order;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t position = 0;
};

RemotePropagator::RemotePropagator(std::string endpoint, RemoteOptions options) : impl_(std::make_unique<Impl>())
{
    impl_->endpoint = std::move(endpoint);
    impl_->options = options;
}

RemotePropagator::~RemotePropagator() = default;

void RemotePropagator::begin(std::vector<propagation::VisitFrame> frames, const MaskSlice& prompt,
                             propagation::Direction direction)
{
    if (frames.empty()) throw contract_error("no frames to propagate");
    Impl& s = *impl_;
    s.client = make_client(s.endpoint, s.options);
    s.order.clear();
    s.position = 0;
    s.rows = frames.front().frame.rows();
    s.cols = frames.front().frame.cols();

    json body;
    body["direction"] = propagation::to_string(direction);
    body["prompt"] = {{"index", frames.front().index}, {"mask_rle", mask_to_rle_json(prompt)}};
    json arr = json::array();
    for (const auto& f : frames) {
        s.order.push_back(f.index);
        arr.push_back(frame_to_json(f.index, f.frame));
    }
    body["frames"] = std::move(arr);

    auto res = s.client->Post("/v1/propagation", body.dump(), "application/json");
    const json reply = parse_response(res, "POST /v1/propagation", frames.front().index);
    if (!reply.contains("stream_id") || !reply["stream_id"].is_string()) {
        throw protocol_error("POST /v1/propagation: reply lacks stream_id", frames.front().index);
    }
    s.stream_id = reply["stream_id"].get<std::string>();
}

std::optional<MaskSlice> RemotePropagator::step()
{
    Impl& s = *impl_;
    if (!s.client) throw contract_error("step() before begin()");
    if (s.position + 1 >= s.order.size()) return std::nullopt;
    const std::size_t expected = s.order[s.position + 1];

    auto res = s.client->Get("/v1/propagation/" + s.stream_id + "/next");
    const json reply = parse_response(res, "GET next", expected);
    if (reply.value("done", false)) return std::nullopt;
    if (!reply.contains("index") || !reply["index"].is_number_unsigned()) {
        throw protocol_error("reply lacks a frame index", expected);
    }
    const auto index = reply["index"].get<std::size_t>();
    if (index != expected) {
        throw protocol_error("out-of-order frame: expected " + std::to_string(expected) + ", got " +
                                 std::to_string(index),
                             expected);
    }
    MaskSlice mask;
    try {
        mask = mask_from_rle_json(reply.value("mask_rle", json()), s.rows, s.cols);
    } catch (const format_error& e) {
        throw protocol_error("bad mask for frame " + std::to_string(index) + ": " + e.what(), index);
    }
    ++s.position;
    return mask;
}

propagation::PropagatorFactory remote_propagator(std::string endpoint, RemoteOptions options)
{
    return [endpoint = std::move(endpoint), options] { return std::make_unique<RemotePropagator>(endpoint, options); };
}

struct RemoteSegmenter::Impl {
    std::unique_ptr<httplib::Client> client;
};

RemoteSegmenter::RemoteSegmenter(std::string endpoint, RemoteOptions options) : impl_(std::make_unique<Impl>())
{
    impl_->client = make_client(endpoint, options);
}

RemoteSegmenter::~RemoteSegmenter() = default;

MaskSlice RemoteSegmenter::predict(const Frame& frame, const prompt::Prompt& p)
{
    json body = prompt_to_json(p);
    body["frame"] = frame_to_json(p.slice_index, frame);
    auto res = impl_->client->Post("/v1/segment2d", body.dump(), "application/json");
    const json reply = parse_response(res, "POST /v1/segment2d", p.slice_index);
    try {
        return mask_from_rle_json(reply.value("mask_rle", json()), frame.rows(), frame.cols());
    } catch (const format_error& e) {
        throw protocol_error(std::string("segment2d: ") + e.what(), p.slice_index);
    }
}

// ============================================================================
// Server
// ============================================================================

BackendService::BackendService(propagation::PropagatorFactory propagators, SegmenterFactory segmenters)
    : propagators_(std::move(propagators)), segmenters_(std::move(segmenters))
{
}

namespace {

void reply_json(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

}  // namespace

void BackendService::mount(httplib::Server& server)
{
    server.Post("/v1/propagation", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            const json body = json::parse(req.body);
            const auto direction_name = require<std::string>(body, "direction");
            if (direction_name != "forward" && direction_name != "backward") {
                throw format_error("direction", "expected \"forward\" or \"backward\"");
            }
            const json& frames_json = body.at("frames");
            if (!frames_json.is_array() || frames_json.empty()) throw format_error("frames", "must be a non-empty array");
            std::vector<propagation::VisitFrame> frames;
            for (const json& f : frames_json) {
                auto [index, frame] = frame_from_json(f);
                if (!frames.empty() && !frame.same_shape(frames.front().frame)) {
                    throw format_error("frames", "all frames must share one shape");
                }
                frames.push_back(propagation::VisitFrame{index, std::move(frame)});
            }
            const json& prompt_json = body.at("prompt");
            if (require<std::size_t>(prompt_json, "index") != frames.front().index) {
                throw format_error("prompt", "prompt index must match the first frame");
            }
            const MaskSlice prompt_mask = mask_from_rle_json(prompt_json.at("mask_rle"), frames.front().frame.rows(),
                                                             frames.front().frame.cols());

            auto stream = std::make_shared<Stream>();
            for (const auto& f : frames) stream->order.push_back(f.index);
            stream->propagator = propagators_();
            stream->propagator->begin(std::move(frames), prompt_mask,
                                      direction_name == "forward" ? propagation::Direction::forward
                                                                  : propagation::Direction::backward);
            std::string id;
            {
                std::lock_guard lock(mutex_);
                id = "s" + std::to_string(next_id_++);
                streams_[id] = stream;
            }
            reply_json(res, 200, {{"stream_id", id}});
        } catch (const format_error& e) {
            reply_json(res, 400, error_body("bad_request", e.what(), e.field()));
        } catch (const json::exception& e) {
            reply_json(res, 400, error_body("bad_request", e.what()));
        } catch (const std::exception& e) {
            reply_json(res, 500, error_body("internal", e.what()));
        }
    });

    server.Get(R"(/v1/propagation/([^/]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
        std::shared_ptr<Stream> stream;
        const std::string id = req.matches[1];
        {
            std::lock_guard lock(mutex_);
            auto it = streams_.find(id);
            if (it != streams_.end()) stream = it->second;
        }
        if (!stream) {
            reply_json(res, 404, error_body("not_found", "unknown stream " + id));
            return;
        }
        try {
            std::lock_guard lock(stream->mutex);
            std::optional<MaskSlice> mask = stream->propagator->step();
            if (!mask) {
                std::lock_guard map_lock(mutex_);
                streams_.erase(id);
                reply_json(res, 200, {{"done", true}});
                return;
            }
            ++stream->position;
            reply_json(res, 200, {{"index", stream->order[stream->position]}, {"mask_rle", mask_to_rle_json(*mask)}});
        } catch (const std::exception& e) {
            reply_json(res, 500, error_body("propagation_failed", e.what()));
        }
    });

    server.Post("/v1/segment2d", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            const json body = json::parse(req.body);
            auto [index, frame] = frame_from_json(body.at("frame"));
            prompt::Prompt p = prompt_from_json(body, frame.rows(), frame.cols());
            p.slice_index = index;
            auto segmenter = segmenters_();
            const MaskSlice mask = segmenter->predict(frame, p);
            reply_json(res, 200, {{"mask_rle", mask_to_rle_json(mask)}, {"width", mask.cols()}, {"height", mask.rows()}});
        } catch (const format_error& e) {
            reply_json(res, 400, error_body("bad_request", e.what(), e.field()));
        } catch (const contract_error& e) {
            reply_json(res, 400, error_body("bad_request", e.what()));
        } catch (const json::exception& e) {
            reply_json(res, 400, error_body("bad_request", e.what()));
        } catch (const std::exception& e) {
            reply_json(res, 500, error_body("internal", e.what()));
        }
    });
}

}  // namespace slicewise::wire
