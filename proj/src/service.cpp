#include "i2v/service.hpp"

#include <chrono>
#include <cstdio>

#include <httplib.h>
#include <json.hpp>

#include "i2v/base64.hpp"
#include "i2v/checkpoint.hpp"
#include "i2v/error.hpp"
#include "i2v/synthesis.hpp"

namespace i2v::service {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

Reply error_reply(int status, const std::string& message) { return {status, json{{"error", message}}.dump()}; }

Reply not_ready() { return error_reply(503, "model not loaded"); }

double ms_since(Clock::time_point t) { return std::chrono::duration<double, std::milli>(Clock::now() - t).count(); }

json landmarks_json(const LandmarkSet& lm) {
    json pts = json::array();
    for (const auto& p : lm.points) pts.push_back({p.x, p.y});
    return pts;
}

// Decodes the request image and brings it to the model's input size.
FrameImage request_image(const json& req, int input_size) {
    if (!req.contains("image") || !req["image"].is_string()) throw Error("missing image");
    std::vector<std::uint8_t> png;
    try {
        png = base64_decode(req["image"].get<std::string>());
    } catch (const Error&) {
        throw Error("image is not valid base64");
    }
    FrameImage img;
    try {
        img = decode_png(png);
    } catch (const Error&) {
        throw Error("image is not a decodable PNG");
    }
    if (img.height() == input_size && img.width() == input_size) return img;
    return center_square(img, input_size);
}

void check_model_id(const json& req, const ModelSnapshot& snap) {
    if (req.contains("model") && !req["model"].is_null() && req["model"] != snap.id)
        throw Error("unknown model id");
}

model::ActionVector action_from(const json& v, std::size_t n) {
    if (!v.is_array()) throw Error("action must be an array of degrees");
    if (v.size() != n) throw Error("action has " + std::to_string(v.size()) + " degrees, model has " +
                                   std::to_string(n) + " emotions");
    std::vector<double> d;
    for (const auto& x : v) {
        if (!x.is_number()) throw Error("degrees must be numbers");
        d.push_back(x.get<double>());
    }
    return model::ActionVector(std::move(d));
}

synthesis::ActionSchedule schedule_from(const json& req, const ModelSnapshot& snap) {
    if (!req.contains("schedule")) throw Error("missing schedule");
    const json& s = req["schedule"];
    const auto& emotions = snap.generator.arch().emotions;
    if (s.is_object()) {
        if (!s.contains("kind") || !s.contains("spec") || !s["kind"].is_string() || !s["spec"].is_string())
            throw Error("schedule builder needs kind and spec");
        return synthesis::build_schedule(s["kind"].get<std::string>(), s["spec"].get<std::string>(), emotions);
    }
    if (!s.is_array()) throw Error("schedule must be a list of action vectors or a builder");
    std::vector<model::ActionVector> steps;
    for (const auto& step : s) steps.push_back(action_from(step, emotions.size()));
    return synthesis::ActionSchedule(std::move(steps));
}

template <typename F>
Reply guarded(F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        return error_reply(400, e.what());
    } catch (const json::exception& e) {
        return error_reply(400, std::string("malformed request: ") + e.what());
    }
}

}  // namespace

std::shared_ptr<const ModelSnapshot> load_snapshot(const std::filesystem::path& checkpoint) {
    const model::Model<float> m = model::load_model<float>(checkpoint);
    char crc[16];
    std::snprintf(crc, sizeof crc, "%08x", m.generator.crc());
    return std::make_shared<const ModelSnapshot>(
        ModelSnapshot{m.generator, checkpoint.filename().string() + "@" + crc});
}

InferenceService::InferenceService(ServiceConfig cfg) : cfg_(std::move(cfg)) {}

InferenceService::~InferenceService() { stop(); }

void InferenceService::set_model(std::shared_ptr<const ModelSnapshot> snapshot) {
    std::lock_guard lock(mutex_);
    snapshot_ = std::move(snapshot);
}

std::shared_ptr<const ModelSnapshot> InferenceService::snapshot() const {
    std::lock_guard lock(mutex_);
    return snapshot_;
}

Reply InferenceService::emotions() const {
    const auto snap = snapshot();
    if (!snap) return not_ready();
    return {200, json{{"emotions", snap->generator.arch().emotions}}.dump()};
}

Reply InferenceService::health() const {
    const auto snap = snapshot();
    if (!snap) return {503, json{{"ready", false}, {"model", nullptr}}.dump()};
    return {200, json{{"ready", true}, {"model", snap->id}}.dump()};
}

Reply InferenceService::generate(const std::string& body) const {
    const auto snap = snapshot();
    if (!snap) return not_ready();
    return guarded([&] {
        const auto t0 = Clock::now();
        const json req = json::parse(body);
        check_model_id(req, *snap);
        const auto schedule = schedule_from(req, *snap);
        if (schedule.size() > cfg_.max_schedule_steps)
            throw Error("schedule longer than " + std::to_string(cfg_.max_schedule_steps) + " steps");
        const FrameImage image = request_image(req, snap->generator.arch().input_size);
        const double decode_ms = ms_since(t0);
        const auto t1 = Clock::now();
        const auto seq = synthesis::render(snap->generator, image, schedule);
        const double render_ms = ms_since(t1);
        json frames = json::array(), landmarks = json::array();
        for (std::size_t i = 0; i < seq.frames.size(); ++i) {
            frames.push_back(base64_encode(encode_png(seq.frames[i])));
            landmarks.push_back(landmarks_json(seq.landmarks[i]));
        }
        json out{{"model", snap->id},
                 {"frames", frames},
                 {"landmarks", landmarks},
                 {"timing", {{"decode_ms", decode_ms}, {"render_ms", render_ms}, {"total_ms", ms_since(t0)}}}};
        return Reply{200, out.dump()};
    });
}

Reply InferenceService::preview(const std::string& body) const {
    const auto snap = snapshot();
    if (!snap) return not_ready();
    return guarded([&] {
        const auto t0 = Clock::now();
        const json req = json::parse(body);
        check_model_id(req, *snap);
        if (!req.contains("action")) throw Error("missing action");
        const auto a = action_from(req["action"], snap->generator.arch().emotions.size());
        const FrameImage image = request_image(req, snap->generator.arch().input_size);
        const auto out = model::generate_frame(snap->generator, image, a);
        json res{{"model", snap->id},
                 {"frame", base64_encode(encode_png(out.image()))},
                 {"landmarks", landmarks_json(out.landmarks)},
                 {"timing", {{"total_ms", ms_since(t0)}}}};
        return Reply{200, res.dump()};
    });
}

void InferenceService::install_routes() {
    server_ = std::make_unique<httplib::Server>();
    server_->set_payload_max_length(cfg_.max_payload_bytes);
    auto send = [](httplib::Response& res, const Reply& r) {
        res.status = r.status;
        res.set_content(r.body, "application/json");
    };
    server_->Get("/emotions", [this, send](const httplib::Request&, httplib::Response& res) { send(res, emotions()); });
    server_->Get("/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, health()); });
    server_->Post("/generate",
                  [this, send](const httplib::Request& req, httplib::Response& res) { send(res, generate(req.body)); });
    server_->Post("/preview",
                  [this, send](const httplib::Request& req, httplib::Response& res) { send(res, preview(req.body)); });
    server_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.status == 413) res.set_content(json{{"error", "payload too large"}}.dump(), "application/json");
        else if (res.body.empty())
            res.set_content(json{{"error", httplib::status_message(res.status)}}.dump(), "application/json");
    });
}

int InferenceService::start() {
    install_routes();
    int port = cfg_.port;
    if (port == 0) port = server_->bind_to_any_port(cfg_.host);
    else if (!server_->bind_to_port(cfg_.host, port)) port = -1;
    if (port < 0) throw Error("cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port;
}

void InferenceService::run() {
    install_routes();
    if (!server_->listen(cfg_.host, cfg_.port))
        throw Error("cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
}

void InferenceService::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace i2v::service
