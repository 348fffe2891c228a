#include <csignal>
#include <iostream>

#include "CLI11.hpp"
#include "httplib.h"
#include "slicewise/service.hpp"
#include "slicewise/wire.hpp"

namespace {

httplib::Server* g_server = nullptr;

void on_signal(int)
{
    if (g_server != nullptr) g_server->stop();
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"slicewise annotation session server"};
    int port = 8080;
    std::string host = "127.0.0.1";
    std::string data_dir;
    long long ttl = 7200;
    app.add_option("--port", port, "listen port")->check(CLI::Range(0, 65535));
    app.add_option("--host", host, "listen address");
    app.add_option("--data-dir", data_dir, "write finished masks here");
    app.add_option("--ttl-seconds", ttl, "idle session lifetime")->check(CLI::PositiveNumber);
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 64;
    }

    slicewise::service::ServiceOptions options;
    options.ttl = std::chrono::seconds(ttl);
    options.data_dir = data_dir;
    slicewise::service::SessionService sessions(options);

    // The same process also answers the backend protocol with the reference
    // implementations, so "remote" can point back at this server.
    slicewise::wire::BackendService backend(slicewise::propagation::reference_propagator(),
                                            [] { return slicewise::prompt::reference_2d_segmenter(); });

    httplib::Server server;
    sessions.mount(server);
    backend.mount(server);

    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    if (port == 0) {
        port = server.bind_to_any_port(host);
    } else if (!server.bind_to_port(host, port)) {
        std::cerr << "cannot bind " << host << ':' << port << '\n';
        return 1;
    }
    std::cerr << "listening on http://" << host << ':' << port << '\n';
    server.listen_after_bind();
    return 0;
}
