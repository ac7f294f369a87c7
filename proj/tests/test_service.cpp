#include <doctest.h>

#include <filesystem>
#include <random>

#include <httplib.h>
#include <json.hpp>

#include "i2v/base64.hpp"
#include "i2v/checkpoint.hpp"
#include "i2v/error.hpp"
#include "i2v/service.hpp"

using namespace i2v;
using namespace i2v::service;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kEmotions{"happy", "sad"};

fs::path checkpoint(std::uint64_t seed) {
    const fs::path dir = fs::temp_directory_path() / "i2v_test_service";
    fs::create_directories(dir);
    const fs::path p = dir / ("model_" + std::to_string(seed) + ".ckpt");
    model::save_params(model::Model<float>(model::ArchConfig::toy(kEmotions), seed), p);
    return p;
}

FrameImage noise_image(int size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0, 1);
    FrameImage img(size, size);
    for (auto& v : img.tensor().storage()) v = u(rng);
    return quantize8(img);
}

std::string image_b64(const FrameImage& img) { return base64_encode(encode_png(img)); }

FrameImage frame_of(const json& b64) {
    return decode_png(base64_decode(b64.get<std::string>()));
}

json body_of(const Reply& r) { return json::parse(r.body); }

}  // namespace

TEST_CASE("base64 round trip and errors") {
    for (std::size_t n : {0, 1, 2, 3, 4, 5, 100}) {
        std::vector<std::uint8_t> bytes(n);
        for (std::size_t i = 0; i < n; ++i) bytes[i] = static_cast<std::uint8_t>(i * 37 + 11);
        CHECK(base64_decode(base64_encode(bytes)) == bytes);
    }
    const std::string hello = "hello";
    CHECK(base64_encode({reinterpret_cast<const std::uint8_t*>(hello.data()), hello.size()}) == "aGVsbG8=");
    CHECK_THROWS_AS(base64_decode("aGVsbG8"), Error);
    CHECK_THROWS_AS(base64_decode("aGV*bG8="), Error);
}

TEST_CASE("requests before a model is loaded get 503") {
    InferenceService svc;
    CHECK(svc.emotions().status == 503);
    CHECK(svc.health().status == 503);
    CHECK(body_of(svc.health())["ready"] == false);
    CHECK(svc.preview("{}").status == 503);
    CHECK(body_of(svc.generate("{}"))["error"] == "model not loaded");
}

TEST_CASE("handlers") {
    InferenceService svc;
    svc.load(checkpoint(1));
    const auto snap = svc.snapshot();
    const FrameImage img = noise_image(16, 2);

    CHECK(body_of(svc.emotions())["emotions"] == json(kEmotions));
    CHECK(body_of(svc.health())["model"] == snap->id);

    SUBCASE("preview with a zero action is the self-reconstruction") {
        const Reply r = svc.preview(json{{"image", image_b64(img)}, {"action", {0.0, 0.0}}}.dump());
        REQUIRE(r.status == 200);
        const json b = body_of(r);
        const auto self = model::generate_frame(snap->generator, img, model::ActionVector::zeros(2));
        CHECK(frame_of(b["frame"]) == quantize8(self.image()));
        CHECK(b["landmarks"].size() == 68);
        CHECK(b["landmarks"][5][0].get<double>() == doctest::Approx(self.landmarks.points[5].x));
        CHECK(b["model"] == snap->id);
        CHECK(b["timing"].contains("total_ms"));
    }
    SUBCASE("generate with a ten-step linear schedule") {
        const Reply r =
            svc.generate(json{{"image", image_b64(img)}, {"schedule", {{"kind", "linear"}, {"spec", "sad:10"}}}}.dump());
        REQUIRE(r.status == 200);
        const json b = body_of(r);
        REQUIRE(b["frames"].size() == 10);
        CHECK(b["landmarks"].size() == 10);
        const auto last = model::generate_frame(snap->generator, img, model::ActionVector({0.0, 1.0}));
        CHECK(frame_of(b["frames"][9]) == quantize8(last.image()));
    }
    SUBCASE("explicit schedule and image resizing") {
        const FrameImage big = noise_image(40, 3);
        const Reply r = svc.generate(json{{"image", image_b64(big)}, {"schedule", {{0.2, 0.0}, {0.0, 0.7}}}}.dump());
        REQUIRE(r.status == 200);
        CHECK(frame_of(body_of(r)["frames"][1]).height() == 16);
    }
    SUBCASE("bad requests") {
        const std::string im = image_b64(img);
        auto error_of = [](const Reply& r) {
            CHECK(r.status == 400);
            return body_of(r)["error"].get<std::string>();
        };
        CHECK(error_of(svc.preview(json{{"image", im}, {"action", {1.2, 0.0}}}.dump())) == "degree out of range");
        CHECK(error_of(svc.preview(json{{"image", im}, {"action", {1.0}}}.dump())).find("degrees") !=
              std::string::npos);
        CHECK(error_of(svc.preview(json{{"action", {0, 0}}}.dump())) == "missing image");
        CHECK(error_of(svc.preview(json{{"image", "%%%"}, {"action", {0, 0}}}.dump())) ==
              "image is not valid base64");
        CHECK(error_of(svc.preview(json{{"image", "aGVsbG8="}, {"action", {0, 0}}}.dump())) ==
              "image is not a decodable PNG");
        CHECK(error_of(svc.preview("{not json")).starts_with("malformed request"));
        CHECK(error_of(svc.preview(json{{"image", im}, {"action", {0, 0}}, {"model", "other@1"}}.dump())) ==
              "unknown model id");
        CHECK(error_of(svc.generate(json{{"image", im}}.dump())) == "missing schedule");
        CHECK(error_of(svc.generate(json{{"image", im}, {"schedule", {{"kind", "linear"}}}}.dump())) ==
              "schedule builder needs kind and spec");
        CHECK(error_of(svc.generate(
                  json{{"image", im}, {"schedule", {{"kind", "linear"}, {"spec", "sad:5000"}}}}.dump()))
                  .starts_with("schedule longer than"));
    }
}

TEST_CASE("HTTP server") {
    ServiceConfig cfg;
    cfg.port = 0;
    cfg.max_payload_bytes = 64 * 1024;
    InferenceService svc(cfg);
    const int port = svc.start();
    REQUIRE(port > 0);
    httplib::Client cli("127.0.0.1", port);

    auto res = cli.Get("/health");
    REQUIRE(res);
    CHECK(res->status == 503);
    res = cli.Post("/preview", "{}", "application/json");
    REQUIRE(res);
    CHECK(res->status == 503);

    svc.load(checkpoint(1));
    const std::string first = svc.snapshot()->id;
    res = cli.Get("/emotions");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["emotions"] == json(kEmotions));

    const std::string im = image_b64(noise_image(16, 4));
    res = cli.Post("/generate", json{{"image", im}, {"schedule", {{"kind", "unimodal"}, {"spec", "happy:5"}}}}.dump(),
                   "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["frames"].size() == 5);

    res = cli.Post("/preview", json{{"image", im}, {"action", {1.2, 0}}}.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    CHECK(json::parse(res->body)["error"] == "degree out of range");

    res = cli.Post("/preview", std::string(100 * 1024, 'x'), "application/json");
    REQUIRE(res);
    CHECK(res->status == 413);

    // Hot swap: later requests see the new model.
    svc.load(checkpoint(2));
    CHECK(svc.snapshot()->id != first);
    res = cli.Get("/health");
    REQUIRE(res);
    CHECK(json::parse(res->body)["model"] == svc.snapshot()->id);
    res = cli.Post("/preview", json{{"image", im}, {"action", {0, 0}}, {"model", first}}.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);

    svc.stop();
}
