#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "i2v/data.hpp"

namespace i2v::synthetic {

/// Per-subject appearance and geometry of a cartoon face.
struct FaceParams {
    double cx = 32, cy = 32;        // face center
    double rx = 20, ry = 26;        // face half-extents
    double eye_dx = 8, eye_y = 27;  // eye offset from midline, eye row
    double eye_w = 3.5, eye_h = 1.6;
    double brow_y = 22;
    double nose_tip_y = 36;
    double mouth_y = 44, mouth_w = 6, lip_up = 1.4, lip_low = 1.8;
    double intensity = 1.0;
    std::array<float, 3> skin{0.9f, 0.75f, 0.6f};
    std::array<float, 3> hair{0.2f, 0.15f, 0.1f};
    std::array<float, 3> background{0.3f, 0.4f, 0.5f};
    std::array<float, 3> lips{0.7f, 0.3f, 0.3f};
};

/// Shape changes at the peak of an expression, in units of the face size.
struct ExpressionDelta {
    double mouth_width = 0;  // fraction of mouth_w
    double corner_lift = 0;  // fraction of ry, positive = up
    double opening = 0;      // fraction of ry
    double brow_raise = 0;   // fraction of ry
    double brow_inner_drop = 0;
    double eye_open = 0;     // fraction of eye_h
};

ExpressionDelta expression_delta(const std::string& emotion);
FaceParams draw_face(std::mt19937_64& rng, int image_size);

// Every landmark coordinate is affine in `degree`, so the displacement from
// the neutral frame grows linearly.
LandmarkSet face_landmarks(const FaceParams& face, const ExpressionDelta& delta, double degree);
FrameImage render_face(const FaceParams& face, const LandmarkSet& landmarks, int image_size);

struct SyntheticConfig {
    int subjects = 4;
    int frames = 11;
    std::vector<std::string> emotions{"happy"};
    int image_size = 64;
    std::uint64_t seed = 0;
    int validation_subjects = 0;  // trailing subjects assigned to validation
};

/// Writes <out>/manifest.txt and one clip directory per (subject, emotion).
DatasetManifest generate_synthetic_dataset(const SyntheticConfig& cfg, const std::filesystem::path& out);

}  // namespace i2v::synthetic
