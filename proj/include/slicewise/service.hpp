#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "slicewise/prompt.hpp"
#include "slicewise/propagation.hpp"
#include "slicewise/wire.hpp"

namespace httplib {
class Server;
}

namespace slicewise::service {

using Clock = std::chrono::steady_clock;

struct ServiceOptions {
    std::chrono::seconds ttl{7200};
    /// When set, finished propagation masks are written here as <session>_mask.nii.gz.
    std::filesystem::path data_dir;
    prompt::RegionGrowParams segmenter;
    propagation::ReferencePropagatorParams propagator;
    wire::RemoteOptions remote;
    /// Test hook; defaults to Clock::now.
    std::function<Clock::time_point()> now;
};

struct Session;

/// In-memory annotation sessions behind a REST API.
///
///   POST   /sessions                   JSON {path, gt_path?, axis?, window?, modality_tag?},
///                                      multipart (image, label?, axis?, modality_tag?) or raw NIfTI body
///   GET    /sessions/{id}
///   POST   /sessions/{id}/clicks       {slice, row, col, label}
///   POST   /sessions/{id}/mask-prompt  {slice, mask_rle}
///   POST   /sessions/{id}/undo
///   POST   /sessions/{id}/propagate    {backend: "reference" | "remote", endpoint?}
///   GET    /sessions/{id}/progress
///   GET    /sessions/{id}/frames/{k}.png
///   GET    /sessions/{id}/masks/{k}
///   GET    /sessions/{id}/metrics
///   DELETE /sessions/{id}
///
/// The prompt history is the source of truth: the current prediction is
/// always the replay of the history on its slice. A click on another slice
/// starts a new history; a mask prompt clears the history and later clicks
/// form a fresh click sequence on top of it (undo returns to the mask).
class SessionService {
public:
    explicit SessionService(ServiceOptions options = {});
    ~SessionService();

    SessionService(const SessionService&) = delete;
    SessionService& operator=(const SessionService&) = delete;

    void mount(httplib::Server& server);

    /// Drops idle sessions not touched within the TTL. Returns how many went.
    std::size_t evict_expired();
    std::size_t session_count() const;

private:
    std::shared_ptr<Session> find(const std::string& id);
    std::string add(std::shared_ptr<Session> session);
    Clock::time_point now() const;

    ServiceOptions options_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::size_t next_id_ = 1;
};

}  // namespace slicewise::service
