#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "i2v/image.hpp"
#include "i2v/landmarks.hpp"
#include "i2v/model.hpp"

namespace i2v::synthesis {

/// Ordered action vectors, one per output frame; all the same length.
class ActionSchedule {
public:
    explicit ActionSchedule(std::vector<model::ActionVector> steps);

    std::size_t size() const { return steps_.size(); }
    std::size_t emotion_count() const { return steps_.front().size(); }
    const model::ActionVector& operator[](std::size_t i) const { return steps_[i]; }
    const std::vector<model::ActionVector>& steps() const { return steps_; }
    bool operator==(const ActionSchedule&) const = default;

private:
    std::vector<model::ActionVector> steps_;
};

// Degrees k/count, k = 1..count, on the named emotion.
ActionSchedule linear_schedule(const std::vector<std::string>& emotions, const std::string& emotion, int count);
// 0 -> 1 -> 0, symmetric; the endpoints are exactly 0 and the peak exactly 1.
ActionSchedule unimodal_schedule(const std::vector<std::string>& emotions, const std::string& emotion, int count);
// `from` ramps 1 -> 0 while `to` ramps 0 -> 1.
ActionSchedule transfer_schedule(const std::vector<std::string>& emotions, const std::string& from,
                                 const std::string& to, int count);

// One line per frame, comma-separated degrees in manifest emotion order.
// Blank lines and lines starting with '#' are ignored.
ActionSchedule parse_schedule(const std::string& text, std::size_t emotion_count);
ActionSchedule load_schedule(const std::filesystem::path& path, std::size_t emotion_count);
std::string format_schedule(const ActionSchedule& schedule);
void save_schedule(const ActionSchedule& schedule, const std::filesystem::path& path);

// Builder flags: kind is "linear", "unimodal" or "transfer"; spec is
// "happy:10" or, for transfer, "angry:happy:10".
ActionSchedule build_schedule(const std::string& kind, const std::string& spec,
                              const std::vector<std::string>& emotions);

struct RenderedSequence {
    std::vector<FrameImage> frames;
    std::vector<LandmarkSet> landmarks;
    ActionSchedule schedule;
};

// One generate_frame call per step. Steps are independent and may run on
// several threads; frames are assembled by index.
template <typename T>
RenderedSequence render(const model::Generator<T>& gen, const FrameImage& image, const ActionSchedule& schedule);

/// Turns a numbered frame directory into a container file.
class VideoEncoder {
public:
    virtual ~VideoEncoder() = default;
    virtual std::string name() const = 0;
    virtual bool available() const = 0;
    // frame_pattern is printf-style, e.g. dir/frame_%04d.png
    virtual void encode(const std::string& frame_pattern, int fps, const std::filesystem::path& out) const = 0;
};

class FfmpegEncoder final : public VideoEncoder {
public:
    explicit FfmpegEncoder(std::string binary = "ffmpeg") : binary_(std::move(binary)) {}
    std::string name() const override { return binary_; }
    bool available() const override;
    void encode(const std::string& frame_pattern, int fps, const std::filesystem::path& out) const override;

private:
    std::string binary_;
};

struct ExportResult {
    std::vector<std::filesystem::path> frames;
    std::filesystem::path metadata;
    std::optional<std::filesystem::path> container;  // empty in frames-only mode
    double duration_seconds = 0;
};

// Writes frame_0001.png... and video.json (fps, frame count, duration) into
// `dir`, then hands the frames to `encoder` if one is given and available.
ExportResult export_video(const RenderedSequence& seq, const std::filesystem::path& dir, int fps,
                          const VideoEncoder* encoder = nullptr);

}  // namespace i2v::synthesis
