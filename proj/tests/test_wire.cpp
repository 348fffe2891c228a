#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "slicewise/codec.hpp"
#include "slicewise/wire.hpp"
#include "support/loopback.hpp"

using namespace slicewise;
using namespace slicewise::wire;
using propagation::Provenance;

namespace {

json load_cases()
{
    std::ifstream in(std::filesystem::path(SLICEWISE_TEST_DATA) / "wire" / "propagation_cases.json");
    return json::parse(in).at("cases");
}

std::vector<propagation::VisitFrame> frames_of(const json& request)
{
    std::vector<propagation::VisitFrame> out;
    for (const auto& f : request.at("frames")) {
        auto [index, frame] = frame_from_json(f);
        out.push_back({index, std::move(frame)});
    }
    return out;
}

FrameStack stack_of(std::size_t n, std::size_t rows, std::size_t cols)
{
    FrameStack s;
    s.source_dims = {cols, rows, n};
    for (std::size_t k = 0; k < n; ++k) {
        Frame f(rows, cols);
        for (std::size_t i = 0; i < f.size(); ++i) f.pixels()[i] = static_cast<std::uint8_t>(k * 31 + i);
        s.frames.push_back(std::move(f));
    }
    return s;
}

MaskSlice blob(std::size_t rows, std::size_t cols)
{
    MaskSlice m(rows, cols, 0);
    for (std::size_t r = rows / 4; r < rows * 3 / 4; ++r)
        for (std::size_t c = cols / 4; c < cols * 3 / 4; ++c) m(r, c) = 1;
    return m;
}

}  // namespace

TEST(WireJson, FrameRoundTrip)
{
    Frame f(3, 4);
    for (std::size_t i = 0; i < f.size(); ++i) f.pixels()[i] = static_cast<std::uint8_t>(i * 20);
    const json j = frame_to_json(9, f);
    EXPECT_EQ(j["width"], 4);
    EXPECT_EQ(j["height"], 3);
    const auto [index, back] = frame_from_json(j);
    EXPECT_EQ(index, 9u);
    EXPECT_EQ(back, f);
    json bad = j;
    bad["width"] = 5;
    try {
        frame_from_json(bad);
        FAIL();
    } catch (const format_error& e) {
        EXPECT_EQ(e.field(), "pixels");
    }
}

TEST(WireJson, PromptForms)
{
    const prompt::Prompt clicks = prompt::Prompt::clicks(
        {{1, 2, prompt::ClickLabel::foreground, 1}, {3, 0, prompt::ClickLabel::background, 2}});
    const prompt::Prompt back = prompt_from_json(prompt_to_json(clicks), 4, 4);
    const auto& cs = std::get<std::vector<prompt::Click>>(back.value);
    ASSERT_EQ(cs.size(), 2u);
    EXPECT_EQ(cs[1].label, prompt::ClickLabel::background);
    EXPECT_EQ(cs[0].col, 2u);

    const prompt::Prompt box = prompt::Prompt::box({0, 1, 2, 3});
    EXPECT_EQ(std::get<prompt::Box>(prompt_from_json(prompt_to_json(box), 4, 4).value), (prompt::Box{0, 1, 2, 3}));

    const prompt::Prompt mask = prompt::Prompt::mask(blob(4, 4));
    EXPECT_EQ(std::get<MaskSlice>(prompt_from_json(prompt_to_json(mask), 4, 4).value), blob(4, 4));

    EXPECT_THROW(prompt_from_json(json::object(), 4, 4), format_error);
    EXPECT_THROW(click_label_from_string("maybe"), format_error);
}

TEST(WireJson, ErrorBody)
{
    const json e = error_body("bad_request", "nope", "mask_rle");
    EXPECT_EQ(e["code"], "bad_request");
    EXPECT_EQ(e["field"], "mask_rle");
    EXPECT_FALSE(error_body("x", "y").contains("field"));
}

TEST(Conformance, RemotePropagatorPassesFixtureCorpus)
{
    loopback::EchoServer echo;
    const json cases = load_cases();
    ASSERT_GE(cases.size(), 5u);
    for (const auto& c : cases) {
        SCOPED_TRACE(c["name"].get<std::string>());
        const json& req = c["request"];
        auto frames = frames_of(req);
        const MaskSlice prompt = mask_from_rle_json(req["prompt"]["mask_rle"], frames[0].frame.rows(),
                                                    frames[0].frame.cols());
        RemotePropagator remote(echo.endpoint());
        remote.begin(frames, prompt,
                     req["direction"] == "forward" ? propagation::Direction::forward : propagation::Direction::backward);
        // The request the client sent is the fixture request.
        EXPECT_EQ(echo.requests().back(), req);
        for (const auto& e : c["expected"]) {
            const auto mask = remote.step();
            ASSERT_TRUE(mask);
            EXPECT_EQ(mask_to_rle_json(*mask), e["mask_rle"]);
        }
        EXPECT_FALSE(remote.step());
    }
}

TEST(Conformance, BackendServiceAnswersFixtureCorpus)
{
    BackendService backend(propagation::identity_propagator(), [] { return prompt::reference_2d_segmenter(); });
    loopback::Host host([&](httplib::Server& s) { backend.mount(s); });
    auto client = host.client();
    for (const auto& c : load_cases()) {
        SCOPED_TRACE(c["name"].get<std::string>());
        auto res = client.Post("/v1/propagation", c["request"].dump(), "application/json");
        ASSERT_TRUE(res);
        ASSERT_EQ(res->status, 200);
        const std::string id = json::parse(res->body)["stream_id"];
        for (const auto& e : c["expected"]) {
            auto next = client.Get("/v1/propagation/" + id + "/next");
            ASSERT_TRUE(next);
            EXPECT_EQ(json::parse(next->body), e);
        }
        auto done = client.Get("/v1/propagation/" + id + "/next");
        EXPECT_EQ(json::parse(done->body), (json{{"done", true}}));
    }
    auto missing = client.Get("/v1/propagation/nope/next");
    EXPECT_EQ(missing->status, 404);
    auto bad = client.Post("/v1/propagation", R"({"direction":"sideways"})", "application/json");
    EXPECT_EQ(bad->status, 400);
    EXPECT_EQ(json::parse(bad->body)["field"], "direction");
}

TEST(Conformance, RemoteMatchesLocalThroughBackendService)
{
    BackendService backend(propagation::reference_propagator(), [] { return prompt::reference_2d_segmenter(); });
    loopback::Host host([&](httplib::Server& s) { backend.mount(s); });
    const Phantom p = make_phantom(PhantomSpec{});
    const FrameStack s = to_frames(p.volume, 2, WindowSpec::percentile(0.5, 99.5));
    const MaskSlice prompt = slice_of(p.mask, 2, 32);
    const auto local = propagation::propagate(s, prompt, 32, propagation::reference_propagator());
    const auto remote = propagation::propagate(s, prompt, 32, remote_propagator(host.endpoint()));
    ASSERT_TRUE(remote.complete());
    EXPECT_EQ(local.mask, remote.mask);
}

TEST(Conformance, Segment2dEndpoint)
{
    BackendService backend(propagation::identity_propagator(), [] { return prompt::reference_2d_segmenter(); });
    loopback::Host host([&](httplib::Server& s) { backend.mount(s); });
    Frame f(20, 20, 30);
    for (std::size_t r = 5; r < 15; ++r)
        for (std::size_t c = 5; c < 15; ++c) f(r, c) = 200;
    RemoteSegmenter remote(host.endpoint());
    prompt::ReferenceSegmenter local;
    const auto p = prompt::Prompt::clicks({{10, 10, prompt::ClickLabel::foreground, 1}});
    EXPECT_EQ(remote.predict(f, p), local.predict(f, p));
    EXPECT_EQ(count_foreground(remote.predict(f, p)), 100u);
    EXPECT_THROW(remote.predict(f, prompt::Prompt::clicks({{30, 10, prompt::ClickLabel::foreground, 1}})),
                 protocol_error);
}

TEST(Faults, DropAtFrameGivesPartialResult)
{
    loopback::EchoServer echo;
    echo.inject(loopback::Fault::drop, 7);
    const FrameStack s = stack_of(10, 6, 5);
    const MaskSlice prompt = blob(6, 5);
    const auto r = propagation::propagate(s, prompt, 3, remote_propagator(echo.endpoint()));
    EXPECT_FALSE(r.complete());
    ASSERT_TRUE(r.forward_error);
    EXPECT_NE(r.forward_error->find("slice 7"), std::string::npos) << *r.forward_error;
    EXPECT_FALSE(r.backward_error);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(r.provenance[k], Provenance::backward);
    EXPECT_EQ(r.provenance[3], Provenance::prompt);
    for (std::size_t k = 4; k < 7; ++k) EXPECT_EQ(r.provenance[k], Provenance::forward);
    for (std::size_t k = 7; k < 10; ++k) EXPECT_EQ(r.provenance[k], Provenance::missing);
    for (std::size_t k = 0; k < 7; ++k) EXPECT_EQ(slice_of(r.mask, 2, k), prompt);
}

TEST(Faults, DropSurfacesAsTransportError)
{
    loopback::EchoServer echo;
    echo.inject(loopback::Fault::drop, 2);
    const FrameStack s = stack_of(4, 3, 3);
    RemotePropagator remote(echo.endpoint());
    std::vector<propagation::VisitFrame> frames;
    for (std::size_t k = 0; k < 4; ++k) frames.push_back({k, s.frames[k]});
    remote.begin(frames, blob(3, 3), propagation::Direction::forward);
    EXPECT_TRUE(remote.step());
    try {
        remote.step();
        FAIL() << "expected transport_error";
    } catch (const transport_error& e) {
        EXPECT_EQ(e.frame(), 2u);
    }
}

TEST(Faults, OutOfOrderAndWrongShapeAreProtocolErrors)
{
    for (auto fault : {loopback::Fault::out_of_order, loopback::Fault::wrong_shape}) {
        loopback::EchoServer echo;
        echo.inject(fault, 1);
        const FrameStack s = stack_of(3, 4, 4);
        RemotePropagator remote(echo.endpoint());
        std::vector<propagation::VisitFrame> frames;
        for (std::size_t k = 0; k < 3; ++k) frames.push_back({k, s.frames[k]});
        remote.begin(frames, blob(4, 4), propagation::Direction::forward);
        try {
            remote.step();
            FAIL() << "expected protocol_error";
        } catch (const protocol_error& e) {
            EXPECT_EQ(e.frame(), 1u);
            if (fault == loopback::Fault::out_of_order) {
                EXPECT_NE(std::string(e.what()).find("out-of-order"), std::string::npos);
            }
        }
    }
}

TEST(Faults, HttpErrorAndEarlyDone)
{
    {
        loopback::EchoServer echo;
        echo.inject(loopback::Fault::http_error, 2);
        const auto r = propagation::propagate(stack_of(5, 3, 3), blob(3, 3), 0, remote_propagator(echo.endpoint()));
        ASSERT_TRUE(r.forward_error);
        EXPECT_NE(r.forward_error->find("503"), std::string::npos) << *r.forward_error;
        EXPECT_EQ(r.provenance[1], Provenance::forward);
        EXPECT_EQ(r.provenance[2], Provenance::missing);
    }
    {
        loopback::EchoServer echo;
        echo.inject(loopback::Fault::early_done, 3);
        const auto r = propagation::propagate(stack_of(5, 3, 3), blob(3, 3), 0, remote_propagator(echo.endpoint()));
        ASSERT_TRUE(r.forward_error);
        EXPECT_EQ(r.provenance[2], Provenance::forward);
        EXPECT_EQ(r.provenance[3], Provenance::missing);
    }
}

TEST(Faults, UnreachableBackend)
{
    const std::string endpoint = "http://127.0.0.1:" + std::to_string(loopback::closed_port());
    RemoteOptions opts;
    opts.connect_timeout = std::chrono::milliseconds(500);
    const auto r = propagation::propagate(stack_of(3, 3, 3), blob(3, 3), 1, remote_propagator(endpoint, opts));
    EXPECT_TRUE(r.forward_error);
    EXPECT_TRUE(r.backward_error);
    EXPECT_EQ(r.provenance[1], Provenance::prompt);
    EXPECT_EQ(r.provenance[0], Provenance::missing);
    EXPECT_EQ(r.provenance[2], Provenance::missing);
}
