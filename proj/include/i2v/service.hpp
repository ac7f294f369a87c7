#pragma once

// HTTP inference service:
//   GET  /emotions  -> {"emotions": [...]}
//   POST /generate  {"image": b64 PNG, "schedule": [[...], ...] | {"kind": "linear", "spec": "happy:10"},
//                    "model": optional id}
//                   -> {"model", "frames": [b64 PNG...], "landmarks": [[[x, y] x68] ...], "timing": {...}}
//   POST /preview   {"image": b64 PNG, "action": [...], "model": optional id}
//                   -> {"model", "frame": b64 PNG, "landmarks": [[x, y] x68], "timing": {...}}
//   GET  /health    -> {"ready", "model"}
// Errors are {"error": message} with 400 (bad request), 413 (payload over
// the limit) or 503 (no model loaded yet).

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "i2v/model.hpp"

namespace httplib {
class Server;
}

namespace i2v::service {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::size_t max_payload_bytes = 16u << 20;
    std::size_t max_schedule_steps = 1000;
};

/// Immutable loaded model shared by in-flight requests.
struct ModelSnapshot {
    model::Generator<float> generator;
    std::string id;
};

std::shared_ptr<const ModelSnapshot> load_snapshot(const std::filesystem::path& checkpoint);

struct Reply {
    int status = 200;
    std::string body;  // JSON
};

class InferenceService {
public:
    explicit InferenceService(ServiceConfig cfg = {});
    ~InferenceService();

    // Replaces the model between requests; requests already running keep
    // the snapshot they started with.
    void set_model(std::shared_ptr<const ModelSnapshot> snapshot);
    void load(const std::filesystem::path& checkpoint) { set_model(load_snapshot(checkpoint)); }
    std::shared_ptr<const ModelSnapshot> snapshot() const;

    Reply emotions() const;
    Reply health() const;
    Reply generate(const std::string& body) const;
    Reply preview(const std::string& body) const;

    // Binds and serves on a background thread; returns the bound port.
    int start();
    void stop();
    // Serves on the calling thread until stop().
    void run();

private:
    void install_routes();

    ServiceConfig cfg_;
    mutable std::mutex mutex_;
    std::shared_ptr<const ModelSnapshot> snapshot_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

}  // namespace i2v::service
