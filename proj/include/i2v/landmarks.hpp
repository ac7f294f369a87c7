#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <span>
#include <string>

namespace i2v {

inline constexpr int kLandmarkCount = 68;
// Mouth region of the standard 68-point scheme: outer lip 48-59, inner 60-67.
inline constexpr int kMouthBegin = 48;
inline constexpr int kMouthEnd = 68;

struct Point {
    double x = 0;
    double y = 0;
    bool operator==(const Point&) const = default;
};

/// 68 ordered points in pixel units, origin top-left, pixel centers at
/// integer coordinates.
struct LandmarkSet {
    std::array<Point, kLandmarkCount> points{};

    std::span<const Point> mouth() const { return std::span(points).subspan(kMouthBegin, kMouthEnd - kMouthBegin); }
    bool within(int height, int width) const;
    bool operator==(const LandmarkSet&) const = default;
};

// Geometric transforms shared by images and landmarks.
LandmarkSet resize_landmarks(const LandmarkSet& lm, int src_h, int src_w, int dst_h, int dst_w);
LandmarkSet translate_landmarks(const LandmarkSet& lm, double dx, double dy);

// Euclidean norm of the flattened 136-dimensional difference.
double landmark_distance(const LandmarkSet& a, const LandmarkSet& b);

// CSV: 68 lines of "x,y".
LandmarkSet load_landmarks_csv(const std::filesystem::path& path);
LandmarkSet parse_landmarks_csv(const std::string& text);
void save_landmarks_csv(const LandmarkSet& lm, const std::filesystem::path& path);
std::string format_landmarks_csv(const LandmarkSet& lm);

/// Source of landmarks for a frame on disk.
class LandmarkProvider {
public:
    virtual ~LandmarkProvider() = default;
    virtual LandmarkSet landmarks_for(const std::filesystem::path& frame_path) const = 0;
};

/// Reads frame_%04d.landmarks.csv next to frame_%04d.png.
class FileLandmarkProvider final : public LandmarkProvider {
public:
    LandmarkSet landmarks_for(const std::filesystem::path& frame_path) const override;
    static std::filesystem::path sidecar_path(const std::filesystem::path& frame_path);
};

/// Adapter for an external detector: runs `command <frame_path>` and parses
/// 68 "x,y" lines from its standard output.
class CommandLandmarkProvider final : public LandmarkProvider {
public:
    explicit CommandLandmarkProvider(std::string command) : command_(std::move(command)) {}
    LandmarkSet landmarks_for(const std::filesystem::path& frame_path) const override;

private:
    std::string command_;
};

}  // namespace i2v
