#include "i2v/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "i2v/error.hpp"

namespace fs = std::filesystem;

namespace i2v {

// --- manifest -----------------------------------------------------------------

const EmotionLabel& DatasetManifest::emotion(const std::string& name) const {
    for (const auto& e : emotions)
        if (e.name == name) return e;
    throw Error("unknown emotion name '" + name + "'");
}

std::vector<std::size_t> DatasetManifest::clip_indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < clips.size(); ++i)
        if (clips[i].split == split) out.push_back(i);
    return out;
}

std::vector<std::string> DatasetManifest::emotion_names() const {
    std::vector<std::string> out;
    for (const auto& e : emotions) out.push_back(e.name);
    return out;
}

fs::path frame_path(const fs::path& clip_dir, int t) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04d.png", t);
    return clip_dir / name;
}

DatasetManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("manifest not found: " + path.string());
    DatasetManifest m;
    m.root = path.parent_path();
    bool fixed_vocabulary = false;
    std::set<fs::path> seen;
    std::string line;
    int lineno = 0;
    auto add_emotion = [&m](const std::string& name) {
        for (const auto& e : m.emotions)
            if (e.name == name) return;
        m.emotions.push_back({static_cast<int>(m.emotions.size()) + 1, name});
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first)) continue;
        if (first == "emotions:") {
            if (!m.clips.empty() || fixed_vocabulary)
                throw Error("malformed manifest: 'emotions:' must precede all clips (line " + std::to_string(lineno) + ")");
            std::string name;
            while (ls >> name) add_emotion(name);
            if (m.emotions.empty()) throw Error("malformed manifest: empty emotion list");
            fixed_vocabulary = true;
            continue;
        }
        ClipDescriptor c;
        std::string split, extra;
        if (!(ls >> c.emotion >> c.frames >> split) || (ls >> extra))
            throw Error("malformed manifest entry at line " + std::to_string(lineno));
        if (split == "train") c.split = Split::train;
        else if (split == "validation" || split == "val") c.split = Split::validation;
        else throw Error("malformed manifest entry at line " + std::to_string(lineno) + ": unknown split '" + split + "'");
        if (c.frames < 2) throw Error("clip too short at line " + std::to_string(lineno) + " (T < 2)");
        c.dir = fs::path(first).is_absolute() ? fs::path(first) : m.root / first;
        if (!fs::is_directory(c.dir)) throw Error("clip path not found: " + c.dir.string());
        for (int t = 1; t <= c.frames; ++t)
            if (!fs::exists(frame_path(c.dir, t))) throw Error("missing frame " + frame_path(c.dir, t).string());
        if (!seen.insert(fs::weakly_canonical(c.dir)).second)
            throw Error("clip listed twice (splits must be disjoint): " + c.dir.string());
        if (fixed_vocabulary) (void)m.emotion(c.emotion);
        else add_emotion(c.emotion);
        m.clips.push_back(std::move(c));
    }
    if (m.clips.empty()) throw Error("empty dataset");
    return m;
}

void write_manifest(const DatasetManifest& m, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write manifest " + path.string());
    out << "emotions:";
    for (const auto& e : m.emotions) out << ' ' << e.name;
    out << '\n';
    for (const auto& c : m.clips) {
        const fs::path rel = c.dir.is_absolute() ? fs::relative(c.dir, path.parent_path()) : c.dir;
        out << rel.generic_string() << ' ' << c.emotion << ' ' << c.frames << ' '
            << (c.split == Split::train ? "train" : "validation") << '\n';
    }
    if (!out) throw Error("cannot write manifest " + path.string());
}

std::vector<double> assign_action_coefficients(int frame_count) {
    if (frame_count < 2) throw Error("clip too short");
    std::vector<double> out(frame_count);
    for (int t = 1; t <= frame_count; ++t) out[t - 1] = double(t - 1) / double(frame_count - 1);
    return out;
}

ExpressionClip load_clip(const ClipDescriptor& clip, const DatasetManifest& manifest,
                         const LandmarkProvider& provider) {
    ExpressionClip out;
    out.emotion = manifest.emotion(clip.emotion);
    out.coefficients = assign_action_coefficients(clip.frames);
    for (int t = 1; t <= clip.frames; ++t) {
        const fs::path fp = frame_path(clip.dir, t);
        out.frames.push_back(load_png(fp));
        out.landmarks.push_back(provider.landmarks_for(fp));
        const auto& f = out.frames.back();
        if (f.height() != out.frames.front().height() || f.width() != out.frames.front().width())
            throw Error("frame size changes within clip " + clip.dir.string());
    }
    return out;
}

// --- mouth mask ---------------------------------------------------------------

std::size_t MouthMask::count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t(1)));
}

Tensor<float> MouthMask::as_tensor() const {
    Tensor<float> t({3, height, width});
    const std::size_t plane = std::size_t(height) * width;
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < plane; ++i) t[c * plane + i] = bits[i];
    return t;
}

namespace {
double cross(const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}
constexpr double kHullEps = 1e-9;
}  // namespace

std::vector<Point> convex_hull(std::span<const Point> points) {
    std::vector<Point> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    std::vector<Point> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

MouthMask hull_mask(std::span<const Point> points, int height, int width) {
    if (height <= 0 || width <= 0) throw Error("mask size must be positive");
    const auto hull = convex_hull(points);
    double area2 = 0;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const Point& a = hull[i];
        const Point& b = hull[(i + 1) % hull.size()];
        area2 += a.x * b.y - b.x * a.y;
    }
    if (hull.size() < 3 || std::abs(area2) < kHullEps) throw Error("degenerate mouth hull");

    MouthMask m{height, width, std::vector<std::uint8_t>(std::size_t(height) * width, 0)};
    double ymin = hull[0].y, ymax = hull[0].y;
    for (const auto& p : hull) {
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    const int y0 = std::max(0, static_cast<int>(std::ceil(ymin - kHullEps)));
    const int y1 = std::min(height - 1, static_cast<int>(std::floor(ymax + kHullEps)));
    // Scanline: the intersection of a row with a convex polygon is one interval.
    for (int y = y0; y <= y1; ++y) {
        double xl = 1e300, xr = -1e300;
        for (std::size_t i = 0; i < hull.size(); ++i) {
            const Point& a = hull[i];
            const Point& b = hull[(i + 1) % hull.size()];
            const double lo = std::min(a.y, b.y), hi = std::max(a.y, b.y);
            if (y < lo - kHullEps || y > hi + kHullEps) continue;
            if (hi - lo < kHullEps) {
                xl = std::min({xl, a.x, b.x});
                xr = std::max({xr, a.x, b.x});
            } else {
                const double t = std::clamp((y - a.y) / (b.y - a.y), 0.0, 1.0);
                const double x = a.x + t * (b.x - a.x);
                xl = std::min(xl, x);
                xr = std::max(xr, x);
            }
        }
        if (xl > xr) continue;
        const int x0 = std::max(0, static_cast<int>(std::ceil(xl - kHullEps)));
        const int x1 = std::min(width - 1, static_cast<int>(std::floor(xr + kHullEps)));
        for (int x = x0; x <= x1; ++x) m.bits[std::size_t(y) * width + x] = 1;
    }
    return m;
}

MouthMask mouth_mask(const LandmarkSet& landmarks, int height, int width) {
    return hull_mask(landmarks.mouth(), height, width);
}

MouthMask mouth_mask_or_box(const LandmarkSet& landmarks, int height, int width, int half_extent) {
    try {
        return mouth_mask(landmarks, height, width);
    } catch (const Error&) {
        double cx = 0, cy = 0;
        for (const auto& p : landmarks.mouth()) {
            cx += p.x;
            cy += p.y;
        }
        cx /= kMouthEnd - kMouthBegin;
        cy /= kMouthEnd - kMouthBegin;
        MouthMask m{height, width, std::vector<std::uint8_t>(std::size_t(height) * width, 0)};
        const int xc = static_cast<int>(std::lround(cx)), yc = static_cast<int>(std::lround(cy));
        for (int y = std::max(0, yc - half_extent); y <= std::min(height - 1, yc + half_extent); ++y)
            for (int x = std::max(0, xc - half_extent); x <= std::min(width - 1, xc + half_extent); ++x)
                m.bits[std::size_t(y) * width + x] = 1;
        return m;
    }
}

// --- preprocessing --------------------------------------------------------------

PreprocessConfig PreprocessConfig::for_input_size(int input_size) {
    PreprocessConfig c;
    c.crop = input_size;
    c.resize = static_cast<int>(std::lround(input_size * 289.0 / 256.0));
    return c;
}

std::optional<PreprocessedPair> crop_pair_at(const FrameImage& input, const FrameImage& target,
                                             const LandmarkSet& landmarks, int top, int left, int size) {
    const LandmarkSet moved = translate_landmarks(landmarks, -left, -top);
    if (!moved.within(size, size)) return std::nullopt;
    return PreprocessedPair{crop(input, top, left, size, size), crop(target, top, left, size, size), moved, top, left,
                            false};
}

PreprocessedPair preprocess_pair(const FrameImage& input, const FrameImage& target,
                                 const LandmarkSet& target_landmarks, bool training, std::uint64_t seed,
                                 const PreprocessConfig& cfg) {
    if (input.height() != target.height() || input.width() != target.width())
        throw Error("input and target frames differ in size");
    if (cfg.crop > cfg.resize) throw Error("crop larger than resize");
    const FrameImage in_r = resize_bilinear(input, cfg.resize, cfg.resize);
    const FrameImage tg_r = resize_bilinear(target, cfg.resize, cfg.resize);
    const LandmarkSet lm_r = resize_landmarks(target_landmarks, input.height(), input.width(), cfg.resize, cfg.resize);
    const int slack = cfg.resize - cfg.crop;
    if (training) {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<int> offset(0, slack);
        for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
            const int top = offset(rng);
            const int left = offset(rng);
            if (auto p = crop_pair_at(in_r, tg_r, lm_r, top, left, cfg.crop)) return *std::move(p);
        }
    }
    const int c = slack / 2;
    if (auto p = crop_pair_at(in_r, tg_r, lm_r, c, c, cfg.crop)) {
        p->center_fallback = training;
        return *std::move(p);
    }
    // Landmarks outside even the center window are clamped onto the border.
    PreprocessedPair p{crop(in_r, c, c, cfg.crop, cfg.crop), crop(tg_r, c, c, cfg.crop, cfg.crop),
                       translate_landmarks(lm_r, -c, -c), c, c, true};
    for (auto& pt : p.landmarks.points) {
        pt.x = std::clamp(pt.x, 0.0, double(cfg.crop - 1));
        pt.y = std::clamp(pt.y, 0.0, double(cfg.crop - 1));
    }
    return p;
}

// --- sampling -------------------------------------------------------------------------

ClipDataset::ClipDataset(const DatasetManifest& manifest, Split split, const LandmarkProvider& provider)
    : emotions_(manifest.emotions) {
    for (std::size_t i : manifest.clip_indices(split)) clips_.push_back(load_clip(manifest.clips[i], manifest, provider));
}

ClipDataset::ClipDataset(std::vector<ExpressionClip> clips, std::vector<EmotionLabel> emotions)
    : clips_(std::move(clips)), emotions_(std::move(emotions)) {}

TrainingSample make_training_pair(const ClipDataset& data, std::size_t clip, int frame, std::uint64_t crop_seed,
                                  const PreprocessConfig& cfg, bool training) {
    const ExpressionClip& c = data.clip(clip);
    if (frame < 1 || frame > static_cast<int>(c.frames.size())) throw Error("frame index out of range");
    auto pair = preprocess_pair(c.frames.front(), c.frames[frame - 1], c.landmarks[frame - 1], training, crop_seed, cfg);
    TrainingSample s;
    s.mask = mouth_mask_or_box(pair.landmarks, cfg.crop, cfg.crop, std::max(2, cfg.crop / 16));
    s.input = std::move(pair.input);
    s.target = std::move(pair.target);
    s.landmarks = pair.landmarks;
    s.degree = c.coefficients[frame - 1];
    s.emotion = c.emotion;
    s.clip = clip;
    s.frame = frame;
    return s;
}

TrainingSample sample_training_pair(const ClipDataset& data, std::mt19937_64& rng, const PreprocessConfig& cfg,
                                    bool training) {
    if (data.empty()) throw Error("empty dataset");
    const std::size_t clip = std::uniform_int_distribution<std::size_t>(0, data.size() - 1)(rng);
    const int frames = static_cast<int>(data.clip(clip).frames.size());
    const int t = std::uniform_int_distribution<int>(1, frames)(rng);
    const std::uint64_t crop_seed = rng();
    return make_training_pair(data, clip, t, crop_seed, cfg, training);
}

}  // namespace i2v
