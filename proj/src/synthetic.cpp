#include "i2v/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "i2v/error.hpp"

namespace fs = std::filesystem;

namespace i2v::synthetic {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Even-odd rule; handles the non-convex lip outline.
bool inside_polygon(const LandmarkSet& lm, int begin, int end, double x, double y) {
    bool in = false;
    for (int i = begin, j = end - 1; i < end; j = i++) {
        const Point& a = lm.points[i];
        const Point& b = lm.points[j];
        if ((a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) in = !in;
    }
    return in;
}

double segment_distance(const Point& a, const Point& b, double x, double y) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    const double t = len2 > 0 ? std::clamp(((x - a.x) * dx + (y - a.y) * dy) / len2, 0.0, 1.0) : 0.0;
    const double px = a.x + t * dx - x, py = a.y + t * dy - y;
    return std::sqrt(px * px + py * py);
}

double polyline_distance(const LandmarkSet& lm, int begin, int end, double x, double y) {
    double d = 1e300;
    for (int i = begin; i + 1 < end; ++i) d = std::min(d, segment_distance(lm.points[i], lm.points[i + 1], x, y));
    return d;
}

std::array<float, 3> scaled(const std::array<float, 3>& c, double s) {
    return {static_cast<float>(std::clamp(c[0] * s, 0.0, 1.0)), static_cast<float>(std::clamp(c[1] * s, 0.0, 1.0)),
            static_cast<float>(std::clamp(c[2] * s, 0.0, 1.0))};
}

std::array<float, 3> scene_color(const FaceParams& f, const LandmarkSet& lm, double unit, int size, double x,
                                 double y) {
    if (inside_polygon(lm, 60, 68, x, y)) return {0.18f, 0.04f, 0.06f};
    if (inside_polygon(lm, 48, 60, x, y)) return f.lips;
    for (int eye = 0; eye < 2; ++eye) {
        const int b = 36 + 6 * eye;
        if (inside_polygon(lm, b, b + 6, x, y)) {
            const double ex = (lm.points[b].x + lm.points[b + 3].x) / 2, ey = (lm.points[b].y + lm.points[b + 3].y) / 2;
            const double r = 0.9 * f.eye_h;
            if ((x - ex) * (x - ex) + (y - ey) * (y - ey) <= r * r) return {0.1f, 0.08f, 0.06f};
            return {0.95f, 0.95f, 0.93f};
        }
    }
    if (polyline_distance(lm, 17, 22, x, y) < 0.7 * unit || polyline_distance(lm, 22, 27, x, y) < 0.7 * unit)
        return f.hair;
    const double fx = (x - f.cx) / f.rx, fy = (y - f.cy) / f.ry;
    if (fx * fx + fy * fy <= 1.0) {
        if (polyline_distance(lm, 27, 31, x, y) < 0.35 * unit || polyline_distance(lm, 31, 36, x, y) < 0.35 * unit)
            return scaled(f.skin, 0.75);
        return scaled(f.skin, 1.0 - 0.12 * fy);
    }
    const double hx = (x - f.cx) / (1.1 * f.rx), hy = (y - (f.cy - 0.3 * f.ry)) / (0.85 * f.ry);
    if (hx * hx + hy * hy <= 1.0) return f.hair;
    return scaled(f.background, 0.9 + 0.2 * y / size);
}

}  // namespace

ExpressionDelta expression_delta(const std::string& emotion) {
    if (emotion == "happy") return {0.30, 0.10, 0.06, 0.02, 0.0, -0.15};
    if (emotion == "surprised" || emotion == "surprise") return {-0.20, 0.0, 0.24, 0.10, 0.0, 0.40};
    if (emotion == "angry") return {-0.10, -0.05, 0.0, -0.02, 0.08, -0.30};
    if (emotion == "sad") return {-0.05, -0.08, 0.0, 0.0, -0.06, -0.20};
    std::mt19937_64 rng(fnv1a(emotion));
    return {uniform(rng, -0.2, 0.3), uniform(rng, -0.08, 0.1), uniform(rng, 0.0, 0.2),
            uniform(rng, -0.05, 0.1), uniform(rng, -0.05, 0.08), uniform(rng, -0.3, 0.4)};
}

FaceParams draw_face(std::mt19937_64& rng, int image_size) {
    static constexpr std::array<std::array<float, 3>, 4> kSkin{
        {{0.96f, 0.80f, 0.69f}, {0.87f, 0.67f, 0.52f}, {0.68f, 0.49f, 0.36f}, {0.45f, 0.32f, 0.24f}}};
    static constexpr std::array<std::array<float, 3>, 4> kHair{
        {{0.12f, 0.09f, 0.07f}, {0.35f, 0.22f, 0.12f}, {0.75f, 0.62f, 0.35f}, {0.45f, 0.45f, 0.45f}}};
    const double u = image_size / 64.0;
    FaceParams f;
    f.cx = image_size / 2.0 + uniform(rng, -2, 2) * u;
    f.cy = image_size / 2.0 + uniform(rng, -1.5, 1.5) * u;
    f.rx = uniform(rng, 18, 21) * u;
    f.ry = uniform(rng, 23, 26) * u;
    f.eye_dx = uniform(rng, 7, 9) * u;
    f.eye_y = f.cy - uniform(rng, 4, 6) * u;
    f.eye_w = uniform(rng, 3, 4) * u;
    f.eye_h = uniform(rng, 1.4, 1.8) * u;
    f.brow_y = f.eye_y - uniform(rng, 4.5, 5.5) * u;
    f.nose_tip_y = f.cy + uniform(rng, 3, 5) * u;
    f.mouth_y = f.cy + uniform(rng, 11, 13) * u;
    f.mouth_w = uniform(rng, 5.5, 7) * u;
    f.lip_up = uniform(rng, 1.2, 1.6) * u;
    f.lip_low = uniform(rng, 1.6, 2.2) * u;
    f.intensity = uniform(rng, 0.85, 1.15);
    const auto& skin = kSkin[std::uniform_int_distribution<int>(0, 3)(rng)];
    for (int c = 0; c < 3; ++c) f.skin[c] = static_cast<float>(std::clamp(skin[c] + uniform(rng, -0.04, 0.04), 0.0, 1.0));
    f.hair = kHair[std::uniform_int_distribution<int>(0, 3)(rng)];
    for (int c = 0; c < 3; ++c) f.background[c] = static_cast<float>(uniform(rng, 0.15, 0.85));
    f.lips = {f.skin[0] * 0.85f, f.skin[1] * 0.45f, f.skin[2] * 0.45f};
    return f;
}

LandmarkSet face_landmarks(const FaceParams& f, const ExpressionDelta& d, double degree) {
    using std::numbers::pi;
    const double k = degree * f.intensity;
    const double unit = f.ry / 24.5;
    const double mw = f.mouth_w * (1 + k * d.mouth_width);
    const double lift = k * d.corner_lift * f.ry;
    const double open = k * d.opening * f.ry;
    const double brow_up = k * d.brow_raise * f.ry;
    const double brow_drop = k * d.brow_inner_drop * f.ry;
    const double eh = f.eye_h * (1 + k * d.eye_open);

    LandmarkSet lm;
    auto& p = lm.points;
    for (int i = 0; i <= 16; ++i) {
        const double phi = pi * i / 16.0;
        p[i] = {f.cx - f.rx * std::cos(phi), f.cy + f.ry * std::sin(phi)};
    }
    for (int s = 0; s < 5; ++s) {
        const double u = s / 4.0;
        const double arc = 1.2 * unit * std::sin(pi * u);
        p[17 + s] = {f.cx - f.eye_dx - 1.1 * f.eye_w + u * 2.2 * f.eye_w, f.brow_y - arc - brow_up + brow_drop * u};
        p[22 + s] = {f.cx + f.eye_dx - 1.1 * f.eye_w + u * 2.2 * f.eye_w,
                     f.brow_y - arc - brow_up + brow_drop * (1 - u)};
    }
    for (int s = 0; s < 4; ++s) p[27 + s] = {f.cx, f.eye_y + (f.nose_tip_y - f.eye_y) * s / 3.0};
    for (int s = 0; s < 5; ++s)
        p[31 + s] = {f.cx + (s - 2) * 0.35 * f.eye_w, f.nose_tip_y + 0.6 * unit * (1 - std::abs(s - 2) / 2.0)};
    for (int eye = 0; eye < 2; ++eye) {
        const double ex = f.cx + (eye == 0 ? -f.eye_dx : f.eye_dx);
        const int b = 36 + 6 * eye;
        p[b + 0] = {ex - f.eye_w, f.eye_y};
        p[b + 1] = {ex - f.eye_w / 2, f.eye_y - eh};
        p[b + 2] = {ex + f.eye_w / 2, f.eye_y - eh};
        p[b + 3] = {ex + f.eye_w, f.eye_y};
        p[b + 4] = {ex + f.eye_w / 2, f.eye_y + eh};
        p[b + 5] = {ex - f.eye_w / 2, f.eye_y + eh};
    }
    // Outer lip 48-59 clockwise from the left corner; 49-53 upper, 55-59 lower.
    for (int i = 0; i < 12; ++i) {
        const double th = pi - i * pi / 6.0;
        const double c = std::cos(th), s = std::sin(th);
        double y = f.mouth_y;
        if (i >= 1 && i <= 5) y -= (f.lip_up + 0.2 * open) * s;
        if (i >= 7) y -= (f.lip_low + open) * s;
        p[48 + i] = {f.cx + mw * c, y - lift * c * c};
    }
    // Inner lip 60-67; 61-63 upper, 65-67 lower. Coincident when closed.
    for (int j = 0; j < 8; ++j) {
        const double th = pi - j * pi / 4.0;
        const double c = std::cos(th), s = std::sin(th);
        double y = f.mouth_y;
        if (j >= 1 && j <= 3) y -= 0.2 * open * s;
        if (j >= 5) y -= open * s;
        p[60 + j] = {f.cx + 0.75 * mw * c, y - lift * c * c};
    }
    return lm;
}

FrameImage render_face(const FaceParams& f, const LandmarkSet& lm, int image_size) {
    constexpr int kSuper = 4;
    const double unit = f.ry / 24.5;
    FrameImage img(image_size, image_size);
    for (int y = 0; y < image_size; ++y) {
        for (int x = 0; x < image_size; ++x) {
            double acc[3] = {0, 0, 0};
            for (int sy = 0; sy < kSuper; ++sy)
                for (int sx = 0; sx < kSuper; ++sx) {
                    const double px = x - 0.5 + (sx + 0.5) / kSuper, py = y - 0.5 + (sy + 0.5) / kSuper;
                    const auto col = scene_color(f, lm, unit, image_size, px, py);
                    for (int c = 0; c < 3; ++c) acc[c] += col[c];
                }
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(acc[c] / (kSuper * kSuper));
        }
    }
    return img;
}

DatasetManifest generate_synthetic_dataset(const SyntheticConfig& cfg, const fs::path& out) {
    if (cfg.subjects < 1) throw Error("need at least one subject");
    if (cfg.frames < 2) throw Error("clip too short");
    if (cfg.emotions.empty()) throw Error("need at least one emotion");
    if (cfg.image_size < 16) throw Error("image size too small");
    try {
        fs::create_directories(out);
    } catch (const fs::filesystem_error& e) {
        throw Error("unwritable path: " + out.string());
    }
    DatasetManifest m;
    m.root = out;
    for (const auto& name : cfg.emotions) {
        for (const auto& e : m.emotions)
            if (e.name == name) throw Error("duplicate emotion '" + name + "'");
        m.emotions.push_back({static_cast<int>(m.emotions.size()) + 1, name});
    }
    std::mt19937_64 rng(cfg.seed);
    const auto coeffs = assign_action_coefficients(cfg.frames);
    for (int s = 0; s < cfg.subjects; ++s) {
        const FaceParams face = draw_face(rng, cfg.image_size);
        const Split split = s >= cfg.subjects - cfg.validation_subjects ? Split::validation : Split::train;
        for (const auto& emotion : cfg.emotions) {
            char name[96];
            std::snprintf(name, sizeof name, "subject_%02d_%s", s, emotion.c_str());
            const fs::path dir = out / name;
            std::error_code ec;
            fs::create_directories(dir, ec);
            if (ec) throw Error("unwritable path: " + dir.string());
            const ExpressionDelta delta = expression_delta(emotion);
            for (int t = 1; t <= cfg.frames; ++t) {
                const LandmarkSet lm = face_landmarks(face, delta, coeffs[t - 1]);
                const fs::path fp = frame_path(dir, t);
                save_png(render_face(face, lm, cfg.image_size), fp);
                save_landmarks_csv(lm, FileLandmarkProvider::sidecar_path(fp));
            }
            m.clips.push_back({fs::path(name), emotion, cfg.frames, split});
        }
    }
    write_manifest(m, out / "manifest.txt");
    for (auto& c : m.clips) c.dir = out / c.dir;
    return m;
}

}  // namespace i2v::synthetic
