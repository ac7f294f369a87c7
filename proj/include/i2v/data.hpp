#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "i2v/image.hpp"
#include "i2v/landmarks.hpp"

namespace i2v {

struct EmotionLabel {
    int index = 0;  // 1-based
    std::string name;
    bool operator==(const EmotionLabel&) const = default;
};

enum class Split { train, validation };

struct ClipDescriptor {
    std::filesystem::path dir;
    std::string emotion;
    int frames = 0;
    Split split = Split::train;
};

/// Parsed dataset manifest. Text format, one clip per line:
///
///     # comment
///     emotions: happy angry        (optional; fixes order and vocabulary)
///     <clip_dir> <emotion_name> <num_frames> <train|validation>
///
/// Relative clip directories resolve against the manifest's directory.
/// Emotion indices follow the `emotions:` line, else first appearance.
struct DatasetManifest {
    std::filesystem::path root;
    std::vector<ClipDescriptor> clips;
    std::vector<EmotionLabel> emotions;

    int emotion_count() const { return static_cast<int>(emotions.size()); }
    const EmotionLabel& emotion(const std::string& name) const;
    std::vector<std::size_t> clip_indices(Split split) const;
    std::vector<std::string> emotion_names() const;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
std::filesystem::path frame_path(const std::filesystem::path& clip_dir, int t);

/// a_t = (t - 1) / (T - 1) for t = 1..T.
std::vector<double> assign_action_coefficients(int frame_count);

struct ExpressionClip {
    std::vector<FrameImage> frames;
    std::vector<LandmarkSet> landmarks;
    EmotionLabel emotion;
    std::vector<double> coefficients;
};

ExpressionClip load_clip(const ClipDescriptor& clip, const DatasetManifest& manifest,
                         const LandmarkProvider& provider);

// --- mouth mask --------------------------------------------------------------

struct MouthMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> bits;

    std::uint8_t at(int y, int x) const { return bits[std::size_t(y) * width + x]; }
    std::size_t count() const;
    // (3, H, W) multiplicative mask.
    Tensor<float> as_tensor() const;
    bool operator==(const MouthMask&) const = default;
};

// Convex hull of the points (counter-clockwise in image coordinates,
// collinear points dropped).
std::vector<Point> convex_hull(std::span<const Point> points);
// 1 at integer pixel centers inside or on the hull of `points`.
// Throws "degenerate mouth hull" if the points span no area.
MouthMask hull_mask(std::span<const Point> points, int height, int width);
MouthMask mouth_mask(const LandmarkSet& landmarks, int height, int width);
// Falls back to a box of half-size `half_extent` around the mouth centroid
// when the hull is degenerate.
MouthMask mouth_mask_or_box(const LandmarkSet& landmarks, int height, int width, int half_extent);

// --- preprocessing -------------------------------------------------------------

struct PreprocessConfig {
    int resize = 289;
    int crop = 256;
    int max_retries = 8;

    // Same resize:crop ratio at another model input size.
    static PreprocessConfig for_input_size(int input_size);
};

struct PreprocessedPair {
    FrameImage input;
    FrameImage target;
    LandmarkSet landmarks;
    int top = 0;
    int left = 0;
    bool center_fallback = false;
};

// Crops already-resized images at a fixed offset; nullopt when a landmark
// leaves the window.
std::optional<PreprocessedPair> crop_pair_at(const FrameImage& input, const FrameImage& target,
                                             const LandmarkSet& landmarks, int top, int left, int size);

PreprocessedPair preprocess_pair(const FrameImage& input, const FrameImage& target,
                                 const LandmarkSet& target_landmarks, bool training, std::uint64_t seed,
                                 const PreprocessConfig& cfg = {});

// --- sampling ---------------------------------------------------------------------

/// Clips of one split held in memory.
class ClipDataset {
public:
    ClipDataset(const DatasetManifest& manifest, Split split, const LandmarkProvider& provider);
    ClipDataset(std::vector<ExpressionClip> clips, std::vector<EmotionLabel> emotions);

    std::size_t size() const { return clips_.size(); }
    bool empty() const { return clips_.empty(); }
    const ExpressionClip& clip(std::size_t i) const { return clips_.at(i); }
    const std::vector<EmotionLabel>& emotions() const { return emotions_; }
    int emotion_count() const { return static_cast<int>(emotions_.size()); }

private:
    std::vector<ExpressionClip> clips_;
    std::vector<EmotionLabel> emotions_;
};

struct TrainingSample {
    FrameImage input;
    FrameImage target;
    double degree = 0;
    EmotionLabel emotion;
    LandmarkSet landmarks;
    MouthMask mask;
    std::size_t clip = 0;
    int frame = 1;  // 1-based t
};

// Deterministic pair for (clip, t); the crop offset derives from crop_seed.
TrainingSample make_training_pair(const ClipDataset& data, std::size_t clip, int frame, std::uint64_t crop_seed,
                                  const PreprocessConfig& cfg, bool training);

// Draws clip ~ U{clips}, t ~ U{1..T}, then a crop seed, in that order.
TrainingSample sample_training_pair(const ClipDataset& data, std::mt19937_64& rng, const PreprocessConfig& cfg,
                                    bool training = true);

}  // namespace i2v
