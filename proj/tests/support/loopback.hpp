#pragma once

// Minimal in-process backend for protocol tests: repeats the prompt mask for
// every later frame and can inject one fault at a chosen frame index.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

namespace loopback {

using json = nlohmann::json;

enum class Fault { none, wrong_shape, out_of_order, drop, http_error, early_done };

class EchoServer {
public:
    EchoServer()
    {
        server_.Post("/v1/propagation", [this](const httplib::Request& req, httplib::Response& res) {
            const json body = json::parse(req.body);
            Stream s;
            for (const auto& f : body.at("frames")) s.order.push_back(f.at("index").get<std::size_t>());
            s.runs = body.at("prompt").at("mask_rle");
            s.width = body.at("frames")[0].at("width").get<std::size_t>();
            s.height = body.at("frames")[0].at("height").get<std::size_t>();
            std::lock_guard lock(mutex_);
            requests_.push_back(body);
            const std::string id = "echo" + std::to_string(streams_.size() + 1);
            streams_[id] = std::move(s);
            res.set_content(json{{"stream_id", id}}.dump(), "application/json");
        });
        server_.Get(R"(/v1/propagation/([^/]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard lock(mutex_);
            auto it = streams_.find(req.matches[1]);
            if (it == streams_.end()) {
                res.status = 404;
                res.set_content(R"({"code":"not_found","message":"unknown stream"})", "application/json");
                return;
            }
            Stream& s = it->second;
            if (s.position + 1 >= s.order.size()) {
                res.set_content(R"({"done":true})", "application/json");
                return;
            }
            const std::size_t index = s.order[s.position + 1];
            ++s.position;
            if (index == fault_index_) {
                switch (fault_) {
                    case Fault::none: break;
                    case Fault::wrong_shape:
                        res.set_content(json{{"index", index}, {"mask_rle", {s.width * s.height + 1}}}.dump(),
                                        "application/json");
                        return;
                    case Fault::out_of_order:
                        res.set_content(json{{"index", index + 100}, {"mask_rle", s.runs}}.dump(), "application/json");
                        return;
                    case Fault::drop:
                        // Headers go out, then the body is cut off.
                        res.set_content_provider(64, "application/json",
                                                 [](std::size_t, std::size_t, httplib::DataSink&) { return false; });
                        return;
                    case Fault::http_error:
                        res.status = 503;
                        res.set_content(R"({"code":"unavailable","message":"model not loaded"})", "application/json");
                        return;
                    case Fault::early_done:
                        res.set_content(R"({"done":true})", "application/json");
                        return;
                }
            }
            res.set_content(json{{"index", index}, {"mask_rle", s.runs}}.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~EchoServer()
    {
        server_.stop();
        thread_.join();
    }

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

    void inject(Fault fault, std::size_t at_index)
    {
        std::lock_guard lock(mutex_);
        fault_ = fault;
        fault_index_ = at_index;
    }

    std::vector<json> requests() const
    {
        std::lock_guard lock(mutex_);
        return requests_;
    }

private:
    struct Stream {
        std::vector<std::size_t> order;
        json runs;
        std::size_t width = 0;
        std::size_t height = 0;
        std::size_t position = 0;
    };

    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    mutable std::mutex mutex_;
    std::map<std::string, Stream> streams_;
    std::vector<json> requests_;
    Fault fault_ = Fault::none;
    std::size_t fault_index_ = static_cast<std::size_t>(-1);
};

/// Serves an arbitrary mount function (e.g. BackendService or SessionService) on a free port.
class Host {
public:
    template <typename Mount>
    explicit Host(Mount&& mount)
    {
        mount(server_);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~Host()
    {
        server_.stop();
        thread_.join();
    }
    int port() const { return port_; }
    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
    httplib::Client client() const
    {
        httplib::Client c("127.0.0.1", port_);
        c.set_read_timeout(30, 0);
        return c;
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

/// A port with nothing listening on it.
inline int closed_port()
{
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    ::close(fd);  // bound, never listened on, now released
    return ntohs(addr.sin_port);
}

}  // namespace loopback
