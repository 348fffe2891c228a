#include "slicewise/service.hpp"

#include <algorithm>
#include <optional>
#include <thread>
#include <vector>

#include "httplib.h"
#include "slicewise/codec.hpp"
#include "slicewise/harness.hpp"
#include "slicewise/metrics.hpp"
#include "slicewise/nifti.hpp"

namespace slicewise::service {

using json = nlohmann::json;
using propagation::Provenance;

struct PromptEvent {
    enum class Kind { click, mask };
    Kind kind = Kind::click;
    prompt::Click click;
    MaskSlice mask;
};

struct Job {
    std::mutex mutex;
    std::size_t id = 0;
    std::string backend;
    std::string status = "running";  // running | done | error
    std::size_t done = 0;
    std::size_t total = 0;
    std::vector<Provenance> provenance;
    std::vector<std::optional<MaskSlice>> masks;
    std::string error;
    std::string write_error;
};

struct Session {
    enum class Status { idle, predicting, propagating };

    std::mutex mutex;
    std::string id;
    Volume volume;
    std::optional<MaskVolume> gt;
    FrameStack stack;
    std::size_t active_slice = 0;

    std::size_t prompt_slice = 0;
    std::vector<PromptEvent> history;
    std::optional<MaskSlice> prediction;
    std::size_t round = 0;

    Status status = Status::idle;
    std::shared_ptr<Job> job;
    std::size_t jobs_started = 0;
    std::optional<propagation::PropagationResult> result;
    std::thread worker;
    Clock::time_point last_access;

    ~Session()
    {
        if (worker.joinable()) worker.detach();
    }
};

namespace {

const char* to_string(Session::Status s)
{
    switch (s) {
        case Session::Status::idle: return "idle";
        case Session::Status::predicting: return "predicting";
        case Session::Status::propagating: return "propagating";
    }
    return "idle";
}

void reply(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                 const std::string& field = {})
{
    reply(res, status, wire::error_body(code, message, field));
}

json parse_body(const httplib::Request& req)
{
    if (req.body.empty()) return json::object();
    json body = json::parse(req.body);
    if (!body.is_object()) throw format_error("body", "expected a JSON object");
    return body;
}

template <typename T>
T require(const json& j, const char* name)
{
    if (!j.contains(name)) throw format_error(name, "missing field");
    try {
        return j.at(name).get<T>();
    } catch (const json::exception&) {
        throw format_error(name, "wrong type");
    }
}

std::size_t parse_index(const std::string& text) { return static_cast<std::size_t>(std::stoull(text)); }

/// Current prediction from scratch: the clicks after the last mask prompt,
/// or that mask itself when no click follows it.
std::optional<MaskSlice> replay(const Frame& frame, std::size_t slice, const std::vector<PromptEvent>& history,
                                prompt::InteractiveSegmenter& segmenter, std::size_t& round)
{
    std::optional<MaskSlice> base;
    std::vector<prompt::Click> clicks;
    for (const PromptEvent& e : history) {
        if (e.kind == PromptEvent::Kind::mask) {
            base = e.mask;
            clicks.clear();
        } else {
            clicks.push_back(e.click);
        }
    }
    round = clicks.size();
    if (clicks.empty()) return base;
    return segmenter.predict(frame, prompt::Prompt::clicks(std::move(clicks), slice));
}

json history_to_json(const std::vector<PromptEvent>& history)
{
    json out = json::array();
    for (const PromptEvent& e : history) {
        if (e.kind == PromptEvent::Kind::mask) {
            out.push_back({{"kind", "mask"}, {"foreground", count_foreground(e.mask)}});
        } else {
            out.push_back({{"kind", "click"},
                           {"row", e.click.row},
                           {"col", e.click.col},
                           {"label", wire::to_string(e.click.label)},
                           {"round", e.click.round}});
        }
    }
    return out;
}

// Caller holds session.mutex.
json prediction_json(const Session& s)
{
    json out{{"slice", s.prompt_slice}, {"round", s.round}, {"rows", s.stack.frames[0].rows()},
             {"cols", s.stack.frames[0].cols()}};
    out["mask_rle"] = s.prediction ? wire::mask_to_rle_json(*s.prediction) : json(nullptr);
    if (s.gt && s.prediction) {
        out["dice"] = metrics::dice(*s.prediction, slice_of(*s.gt, s.stack.axis, s.prompt_slice));
    }
    return out;
}

json summary_json(const Session& s)
{
    const Dims& d = s.volume.dims();
    json out{{"session_id", s.id},
             {"status", to_string(s.status)},
             {"axis", s.stack.axis},
             {"dims", {d[0], d[1], d[2]}},
             {"slices", s.stack.size()},
             {"rows", s.stack.frames[0].rows()},
             {"cols", s.stack.frames[0].cols()},
             {"active_slice", s.active_slice},
             {"prompt_slice", s.prompt_slice},
             {"round", s.round},
             {"history", history_to_json(s.history)},
             {"has_prediction", s.prediction.has_value()},
             {"has_gt", s.gt.has_value()},
             {"degenerate_window", s.stack.degenerate_window},
             {"window", harness::window_to_json(s.stack.window)}};
    return out;
}

json job_json(Job& job)
{
    std::lock_guard lock(job.mutex);
    json prov = json::array();
    for (Provenance p : job.provenance) prov.push_back(propagation::to_string(p));
    json out{{"job_id", job.id},  {"backend", job.backend}, {"status", job.status},
             {"done", job.done},  {"total", job.total},     {"provenance", std::move(prov)}};
    if (!job.error.empty()) out["error"] = job.error;
    if (!job.write_error.empty()) out["write_error"] = job.write_error;
    return out;
}

struct LoadedInput {
    Volume volume;
    std::optional<MaskVolume> gt;
    int axis = 2;
    std::optional<WindowSpec> window;
    std::string modality_tag;
};

int parse_axis(const std::string& text)
{
    if (text != "0" && text != "1" && text != "2") throw format_error("axis", "must be 0, 1 or 2");
    return text[0] - '0';
}

std::span<const std::uint8_t> as_bytes(const std::string& s)
{
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

MaskVolume mask_from_volume(const Volume& v)
{
    std::vector<std::uint8_t> labels(v.voxel_count());
    const auto data = v.data();
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = data[i] != 0.0f ? 1 : 0;
    return MaskVolume(v.dims(), std::move(labels));
}

// Throws format_error/contract_error (400) for request problems; volume
// problems surface as VolumeError (422).
struct VolumeError {
    std::string message;
    std::string field;
};

template <typename F>
auto volume_step(F&& f, const std::string& fallback_field)
{
    try {
        return f();
    } catch (const format_error& e) {
        throw VolumeError{e.what(), e.field()};
    } catch (const slicewise::error& e) {
        throw VolumeError{e.what(), fallback_field};
    }
}

LoadedInput load_input(const httplib::Request& req)
{
    LoadedInput in;
    if (req.is_multipart_form_data()) {
        if (!req.has_file("image")) throw format_error("image", "multipart upload needs an 'image' part");
        const std::string& image = req.get_file_value("image").content;
        in.volume = volume_step([&] { return nifti::parse_volume(as_bytes(image)); }, "image");
        if (req.has_file("label")) {
            const std::string& label = req.get_file_value("label").content;
            in.gt = volume_step([&] { return mask_from_volume(nifti::parse_volume(as_bytes(label))); }, "label");
        }
        if (req.has_file("axis")) in.axis = parse_axis(req.get_file_value("axis").content);
        if (req.has_file("modality_tag")) in.modality_tag = req.get_file_value("modality_tag").content;
        if (req.has_file("window")) in.window = harness::window_from_json(json::parse(req.get_file_value("window").content));
        return in;
    }
    const std::string type = req.get_header_value("Content-Type");
    if (type.rfind("application/json", 0) == 0) {
        const json body = parse_body(req);
        const auto path = require<std::string>(body, "path");
        in.volume = volume_step([&] { return nifti::load_volume(path); }, "path");
        if (body.contains("gt_path") && !body.at("gt_path").is_null()) {
            const auto gt_path = require<std::string>(body, "gt_path");
            in.gt = volume_step([&] { return nifti::load_mask(gt_path); }, "gt_path");
        }
        if (body.contains("axis")) {
            const int axis = require<int>(body, "axis");
            if (axis < 0 || axis > 2) throw format_error("axis", "must be 0, 1 or 2");
            in.axis = axis;
        }
        if (body.contains("window") && !body.at("window").is_null()) in.window = harness::window_from_json(body.at("window"));
        if (body.contains("modality_tag")) in.modality_tag = require<std::string>(body, "modality_tag");
        return in;
    }
    // Raw NIfTI body; options in the query string.
    in.volume = volume_step([&] { return nifti::parse_volume(as_bytes(req.body)); }, "body");
    if (req.has_param("axis")) in.axis = parse_axis(req.get_param_value("axis"));
    if (req.has_param("modality_tag")) in.modality_tag = req.get_param_value("modality_tag");
    return in;
}

}  // namespace

// ============================================================================

SessionService::SessionService(ServiceOptions options) : options_(std::move(options))
{
    options_.propagator.validate();
}

SessionService::~SessionService()
{
    std::vector<std::shared_ptr<Session>> all;
    {
        std::lock_guard lock(mutex_);
        for (auto& [id, s] : sessions_) all.push_back(s);
    }
    for (auto& s : all) {
        std::thread worker;
        {
            std::lock_guard lock(s->mutex);
            worker = std::move(s->worker);
        }
        if (worker.joinable()) worker.join();
    }
}

Clock::time_point SessionService::now() const { return options_.now ? options_.now() : Clock::now(); }

std::size_t SessionService::session_count() const
{
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

std::size_t SessionService::evict_expired()
{
    const auto t = now();
    std::vector<std::shared_ptr<Session>> evicted;
    {
        std::lock_guard lock(mutex_);
        for (auto it = sessions_.begin(); it != sessions_.end();) {
            std::unique_lock slock(it->second->mutex);
            const bool stale = it->second->status == Session::Status::idle &&
                               t - it->second->last_access > options_.ttl;
            slock.unlock();
            if (stale) {
                evicted.push_back(it->second);
                it = sessions_.erase(it);
            } else {
                ++it;
            }
        }
    }
    for (auto& s : evicted) {
        std::thread worker;
        {
            std::lock_guard lock(s->mutex);
            worker = std::move(s->worker);
        }
        if (worker.joinable()) worker.join();
    }
    return evicted.size();
}

std::shared_ptr<Session> SessionService::find(const std::string& id)
{
    evict_expired();
    std::shared_ptr<Session> s;
    {
        std::lock_guard lock(mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) return nullptr;
        s = it->second;
    }
    std::lock_guard lock(s->mutex);
    s->last_access = now();
    return s;
}

std::string SessionService::add(std::shared_ptr<Session> session)
{
    evict_expired();
    std::lock_guard lock(mutex_);
    std::string id = "sess-" + std::to_string(next_id_++);
    session->id = id;
    session->last_access = now();
    sessions_[id] = std::move(session);
    return id;
}

void SessionService::mount(httplib::Server& server)
{
    // Wraps a per-session handler: 404 for unknown ids, uniform error mapping.
    auto with_session = [this](auto handler) {
        return [this, handler](const httplib::Request& req, httplib::Response& res) {
            auto session = find(req.matches[1]);
            if (!session) {
                reply_error(res, 404, "not_found", "unknown session " + std::string(req.matches[1]));
                return;
            }
            try {
                handler(*session, session, req, res);
            } catch (const bounds_error& e) {
                reply_error(res, 400, "out_of_bounds", e.what());
            } catch (const format_error& e) {
                reply_error(res, 400, "bad_request", e.what(), e.field());
            } catch (const contract_error& e) {
                reply_error(res, 400, "bad_request", e.what());
            } catch (const json::exception& e) {
                reply_error(res, 400, "bad_request", e.what());
            } catch (const std::exception& e) {
                reply_error(res, 500, "internal", e.what());
            }
        };
    };

    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            LoadedInput in = load_input(req);
            if (in.gt && in.gt->dims() != in.volume.dims()) {
                reply_error(res, 422, "bad_volume", "label dims do not match image dims", "gt_path");
                return;
            }
            auto s = std::make_shared<Session>();
            const WindowSpec window = in.window ? *in.window : WindowSpec::default_for(in.modality_tag);
            s->stack = to_frames(in.volume, in.axis, window);
            s->volume = std::move(in.volume);
            s->gt = std::move(in.gt);
            s->active_slice = s->gt && s->gt->count() > 0 ? prompt::select_center_slice(*s->gt, in.axis)
                                                         : s->stack.size() / 2;
            s->prompt_slice = s->active_slice;
            add(s);
            std::lock_guard lock(s->mutex);
            reply(res, 201, summary_json(*s));
        } catch (const VolumeError& e) {
            reply_error(res, 422, "bad_volume", e.message, e.field);
        } catch (const format_error& e) {
            reply_error(res, 400, "bad_request", e.what(), e.field());
        } catch (const json::exception& e) {
            reply_error(res, 400, "bad_request", e.what());
        } catch (const std::exception& e) {
            reply_error(res, 400, "bad_request", e.what());
        }
    });

    server.Get(R"(/sessions/([^/]+))", with_session([](Session& s, auto&, const auto&, auto& res) {
        std::lock_guard lock(s.mutex);
        json out = summary_json(s);
        out["job"] = s.job ? job_json(*s.job) : json(nullptr);
        reply(res, 200, out);
    }));

    server.Delete(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        std::shared_ptr<Session> s;
        {
            std::lock_guard lock(mutex_);
            auto it = sessions_.find(req.matches[1]);
            if (it != sessions_.end()) {
                std::lock_guard slock(it->second->mutex);
                if (it->second->status != Session::Status::idle) {
                    reply_error(res, 409, "busy", "session has an operation in flight");
                    return;
                }
                s = it->second;
                sessions_.erase(it);
            }
        }
        if (!s) {
            reply_error(res, 404, "not_found", "unknown session " + std::string(req.matches[1]));
            return;
        }
        std::thread worker;
        {
            std::lock_guard lock(s->mutex);
            worker = std::move(s->worker);
        }
        if (worker.joinable()) worker.join();
        res.status = 204;
    });

    // Prompt edits share one shape: validate and build the new history under
    // the lock, replay without it (status = predicting), commit.
    auto edit_history = [this](Session& s, httplib::Response& res, auto&& build) {
        std::vector<PromptEvent> history;
        std::size_t slice = 0;
        {
            std::lock_guard lock(s.mutex);
            if (s.status != Session::Status::idle) {
                reply_error(res, 409, "busy", std::string("session is ") + to_string(s.status));
                return;
            }
            if (!build(s, history, slice, res)) return;
            s.status = Session::Status::predicting;
        }
        std::optional<MaskSlice> prediction;
        std::size_t round = 0;
        try {
            prompt::ReferenceSegmenter segmenter(options_.segmenter);
            prediction = replay(s.stack.frames[slice], slice, history, segmenter, round);
        } catch (...) {
            std::lock_guard lock(s.mutex);
            s.status = Session::Status::idle;
            throw;
        }
        std::lock_guard lock(s.mutex);
        s.history = std::move(history);
        s.prompt_slice = slice;
        s.active_slice = slice;
        s.prediction = std::move(prediction);
        s.round = round;
        s.job.reset();
        s.result.reset();
        s.status = Session::Status::idle;
        reply(res, 200, prediction_json(s));
    };

    server.Post(R"(/sessions/([^/]+)/clicks)",
                with_session([edit_history](Session& s, auto&, const auto& req, auto& res) {
                    const json body = parse_body(req);
                    const auto slice = require<std::size_t>(body, "slice");
                    const auto row = require<std::size_t>(body, "row");
                    const auto col = require<std::size_t>(body, "col");
                    const auto label = wire::click_label_from_string(require<std::string>(body, "label"));
                    edit_history(s, res, [&](Session& ss, std::vector<PromptEvent>& history, std::size_t& target,
                                             httplib::Response& r) {
                        const Frame& f0 = ss.stack.frames[0];
                        if (slice >= ss.stack.size() || row >= f0.rows() || col >= f0.cols()) {
                            reply_error(r, 400, "out_of_bounds", "click outside the slice stack", "row");
                            return false;
                        }
                        if (slice == ss.prompt_slice) history = ss.history;
                        std::size_t clicks_since_mask = 0;
                        for (const auto& e : history) {
                            clicks_since_mask = e.kind == PromptEvent::Kind::mask ? 0 : clicks_since_mask + 1;
                        }
                        PromptEvent e;
                        e.click = prompt::Click{row, col, label, clicks_since_mask + 1};
                        history.push_back(std::move(e));
                        target = slice;
                        return true;
                    });
                }));

    server.Post(R"(/sessions/([^/]+)/mask-prompt)",
                with_session([edit_history](Session& s, auto&, const auto& req, auto& res) {
                    const json body = parse_body(req);
                    const auto slice = require<std::size_t>(body, "slice");
                    if (!body.contains("mask_rle")) throw format_error("mask_rle", "missing field");
                    edit_history(s, res, [&](Session& ss, std::vector<PromptEvent>& history, std::size_t& target,
                                             httplib::Response& r) {
                        if (slice >= ss.stack.size()) {
                            reply_error(r, 400, "out_of_bounds", "slice outside the stack", "slice");
                            return false;
                        }
                        const Frame& f0 = ss.stack.frames[0];
                        PromptEvent e;
                        e.kind = PromptEvent::Kind::mask;
                        e.mask = wire::mask_from_rle_json(body.at("mask_rle"), f0.rows(), f0.cols());
                        history.push_back(std::move(e));
                        target = slice;
                        return true;
                    });
                }));

    server.Post(R"(/sessions/([^/]+)/undo)", with_session([edit_history](Session& s, auto&, const auto&, auto& res) {
                    edit_history(s, res, [&](Session& ss, std::vector<PromptEvent>& history, std::size_t& target,
                                             httplib::Response& r) {
                        if (ss.history.empty()) {
                            reply_error(r, 409, "empty_history", "nothing to undo");
                            return false;
                        }
                        history = ss.history;
                        history.pop_back();
                        target = ss.prompt_slice;
                        return true;
                    });
                }));

    server.Post(R"(/sessions/([^/]+)/propagate)",
                with_session([this](Session& s, const std::shared_ptr<Session>& owner, const auto& req, auto& res) {
                    const json body = parse_body(req);
                    const std::string backend = body.value("backend", std::string("reference"));
                    propagation::PropagatorFactory factory;
                    if (backend == "reference") {
                        factory = propagation::reference_propagator(options_.propagator);
                    } else if (backend == "remote") {
                        factory = wire::remote_propagator(require<std::string>(body, "endpoint"), options_.remote);
                    } else {
                        throw format_error("backend", "expected \"reference\" or \"remote\"");
                    }

                    std::thread previous;
                    std::shared_ptr<Job> job;
                    MaskSlice center_mask;
                    std::size_t center = 0;
                    {
                        std::lock_guard lock(s.mutex);
                        if (s.status != Session::Status::idle) {
                            reply_error(res, 409, "busy", std::string("session is ") + to_string(s.status));
                            return;
                        }
                        if (!s.prediction) {
                            reply_error(res, 409, "no_prompt", "add a click or mask prompt first");
                            return;
                        }
                        previous = std::move(s.worker);
                        job = std::make_shared<Job>();
                        job->id = ++s.jobs_started;
                        job->backend = backend;
                        job->total = s.stack.size();
                        job->provenance.assign(s.stack.size(), Provenance::missing);
                        job->masks.resize(s.stack.size());
                        s.job = job;
                        s.result.reset();
                        s.status = Session::Status::propagating;
                        center_mask = *s.prediction;
                        center = s.prompt_slice;
                        // Started under the lock so a quick second request cannot race the assignment.
                        s.worker = std::thread([owner, job, factory, center_mask, center, data_dir = options_.data_dir] {
                            propagation::PropagateOptions opts;
                            opts.on_slice = [&job](std::size_t k, Provenance p, const MaskSlice& m) {
                                std::lock_guard lock(job->mutex);
                                job->provenance[k] = p;
                                job->masks[k] = m;
                                ++job->done;
                            };
                            std::optional<propagation::PropagationResult> result;
                            std::string error;
                            try {
                                result = propagation::propagate(owner->stack, center_mask, center, factory, opts);
                                if (!result->complete()) {
                                    error = result->forward_error ? *result->forward_error : *result->backward_error;
                                    if (result->forward_error && result->backward_error) {
                                        error += "; " + *result->backward_error;
                                    }
                                }
                            } catch (const std::exception& e) {
                                error = e.what();
                            }
                            std::string write_error;
                            if (result && error.empty() && !data_dir.empty()) {
                                try {
                                    nifti::save_mask(result->mask, owner->volume, data_dir / (owner->id + "_mask.nii.gz"));
                                } catch (const std::exception& e) {
                                    write_error = e.what();
                                }
                            }
                            std::lock_guard lock(owner->mutex);
                            owner->result = std::move(result);
                            {
                                std::lock_guard jlock(job->mutex);
                                job->status = error.empty() ? "done" : "error";
                                job->error = error;
                                job->write_error = write_error;
                            }
                            owner->status = Session::Status::idle;
                        });
                    }
                    if (previous.joinable()) previous.join();
                    reply(res, 202, job_json(*job));
                }));

    server.Get(R"(/sessions/([^/]+)/progress)", with_session([](Session& s, auto&, const auto&, auto& res) {
                   std::shared_ptr<Job> job;
                   std::string status;
                   {
                       std::lock_guard lock(s.mutex);
                       job = s.job;
                       status = to_string(s.status);
                   }
                   if (!job) {
                       reply_error(res, 404, "no_job", "no propagation has been started");
                       return;
                   }
                   json out = job_json(*job);
                   out["session_status"] = status;
                   reply(res, 200, out);
               }));

    server.Get(R"(/sessions/([^/]+)/frames/(\d+)\.png)", with_session([](Session& s, auto&, const auto& req, auto& res) {
                   const std::size_t k = parse_index(req.matches[2]);
                   if (k >= s.stack.size()) {
                       reply_error(res, 404, "not_found", "slice " + std::to_string(k) + " out of range");
                       return;
                   }
                   const auto png = codec::encode_png(s.stack.frames[k]);
                   res.status = 200;
                   res.set_content(std::string(png.begin(), png.end()), "image/png");
               }));

    server.Get(R"(/sessions/([^/]+)/masks/(\d+))", with_session([](Session& s, auto&, const auto& req, auto& res) {
                   const std::size_t k = parse_index(req.matches[2]);
                   std::shared_ptr<Job> job;
                   std::optional<MaskSlice> prediction;
                   std::size_t prompt_slice = 0;
                   {
                       std::lock_guard lock(s.mutex);
                       job = s.job;
                       prediction = s.prediction;
                       prompt_slice = s.prompt_slice;
                   }
                   if (job) {
                       std::lock_guard lock(job->mutex);
                       if (k < job->masks.size() && job->masks[k]) {
                           reply(res, 200, {{"slice", k},
                                            {"provenance", propagation::to_string(job->provenance[k])},
                                            {"mask_rle", wire::mask_to_rle_json(*job->masks[k])}});
                           return;
                       }
                   }
                   if (prediction && k == prompt_slice) {
                       reply(res, 200, {{"slice", k},
                                        {"provenance", "prediction"},
                                        {"mask_rle", wire::mask_to_rle_json(*prediction)}});
                       return;
                   }
                   reply_error(res, 404, "not_available", "no mask for slice " + std::to_string(k));
               }));

    server.Get(R"(/sessions/([^/]+)/metrics)", with_session([](Session& s, auto&, const auto&, auto& res) {
                   std::lock_guard lock(s.mutex);
                   if (!s.gt) {
                       reply_error(res, 404, "no_gt", "session has no ground truth");
                       return;
                   }
                   if (!s.result) {
                       reply_error(res, 404, "not_available", "no finished propagation");
                       return;
                   }
                   const auto& r = *s.result;
                   json out{{"complete", r.complete()},
                            {"missing_slices",
                             std::count(r.provenance.begin(), r.provenance.end(), Provenance::missing)},
                            {"dice", metrics::dice(r.mask, *s.gt)},
                            {"nsd", metrics::nsd(r.mask, *s.gt, s.volume.spacing())}};
                   try {
                       out["hd95"] = metrics::hd95(r.mask, *s.gt, s.volume.spacing());
                   } catch (const undefined_metric_error&) {
                       out["hd95"] = nullptr;
                   }
                   const auto salient = metrics::salient_slices(*s.gt, s.stack.axis);
                   if (!salient.empty()) {
                       const auto sub =
                           metrics::masked_metrics(r.mask, *s.gt, s.volume.spacing(), s.stack.axis, salient);
                       out["salient_dice"] = sub.dice;
                       out["salient_nsd"] = sub.nsd;
                   } else {
                       out["salient_dice"] = nullptr;
                       out["salient_nsd"] = nullptr;
                   }
                   reply(res, 200, out);
               }));
}

}  // namespace slicewise::service
