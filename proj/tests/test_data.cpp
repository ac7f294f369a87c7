#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "i2v/data.hpp"
#include "i2v/error.hpp"
#include "i2v/synthetic.hpp"
#include "mask_oracle.hpp"

using namespace i2v;
using i2v::testing::oracle_mask;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / "i2v_test_data" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p);
    out << s;
}

LandmarkSet far_landmarks() {
    LandmarkSet lm;
    for (int k = 0; k < kLandmarkCount; ++k) lm.points[k] = {2.0 + k % 5, 2.0 + k % 7};
    return lm;
}

}  // namespace

TEST_CASE("action coefficients are (t-1)/(T-1)") {
    const auto c21 = assign_action_coefficients(21);
    REQUIRE(c21.size() == 21);
    CHECK(c21[0] == 0.0);
    CHECK(c21[10] == 0.5);
    CHECK(c21[20] == 1.0);
    CHECK(assign_action_coefficients(2) == std::vector<double>{0.0, 1.0});
    CHECK_THROWS_WITH_AS(assign_action_coefficients(1), "clip too short", Error);
    for (int T = 2; T <= 50; ++T) {
        const auto c = assign_action_coefficients(T);
        for (int t = 1; t <= T; ++t) CHECK(c[t - 1] == double(t - 1) / double(T - 1));
        for (int t = 1; t < T; ++t) CHECK(c[t] > c[t - 1]);
    }
}

TEST_CASE("mouth mask of an axis-aligned square has 121 pixels") {
    LandmarkSet lm = far_landmarks();
    const Point corners[] = {{10, 10}, {20, 10}, {20, 20}, {10, 20}};
    for (int k = kMouthBegin; k < kMouthEnd; ++k) lm.points[k] = corners[k % 4];
    const MouthMask m = mouth_mask(lm, 32, 32);
    CHECK(m.count() == 121);
    CHECK(m.at(10, 10) == 1);
    CHECK(m.at(20, 20) == 1);
    CHECK(m.at(9, 15) == 0);
    CHECK(m.at(15, 21) == 0);
}

TEST_CASE("mouth mask of a triangle matches the half-plane oracle") {
    LandmarkSet lm = far_landmarks();
    const Point tri[] = {{3.3, 4.1}, {27.8, 9.5}, {12.2, 29.6}};
    for (int k = kMouthBegin; k < kMouthEnd; ++k) lm.points[k] = tri[k % 3];
    const std::vector<Point> pts(std::begin(tri), std::end(tri));
    CHECK(mouth_mask(lm, 32, 32) == oracle_mask(pts, 32, 32));
}

TEST_CASE("degenerate mouth hulls") {
    LandmarkSet lm = far_landmarks();
    for (int k = kMouthBegin; k < kMouthEnd; ++k) lm.points[k] = {12, 12};
    CHECK_THROWS_WITH_AS(mouth_mask(lm, 32, 32), "degenerate mouth hull", Error);
    for (int k = kMouthBegin; k < kMouthEnd; ++k) lm.points[k] = {double(k - kMouthBegin), 5.0 + 0.5 * (k - kMouthBegin)};
    CHECK_THROWS_WITH_AS(mouth_mask(lm, 32, 32), "degenerate mouth hull", Error);

    // Fallback: box of half-extent 2 around the centroid.
    for (int k = kMouthBegin; k < kMouthEnd; ++k) lm.points[k] = {12, 12};
    const MouthMask box = mouth_mask_or_box(lm, 32, 32, 2);
    CHECK(box.count() == 25);
    CHECK(box.at(10, 10) == 1);
    CHECK(box.at(14, 14) == 1);
}

TEST_CASE("mouth mask equals the oracle on random landmark sets") {
    std::mt19937_64 rng(42);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        LandmarkSet lm = far_landmarks();
        std::uniform_real_distribution<double> cx(8, 40), spread(1, 12), u(-1, 1);
        const double x0 = cx(rng), y0 = cx(rng), sx = spread(rng), sy = spread(rng);
        // Some trials snap to the pixel grid so boundary pixels are exercised.
        const bool snap = trial % 3 == 0;
        std::vector<Point> pts;
        for (int k = kMouthBegin; k < kMouthEnd; ++k) {
            Point p{x0 + sx * u(rng), y0 + sy * u(rng)};
            if (snap) p = {std::round(p.x), std::round(p.y)};
            lm.points[k] = p;
            pts.push_back(p);
        }
        MouthMask m;
        try {
            m = mouth_mask(lm, 48, 48);
        } catch (const Error&) {
            continue;
        }
        ++checked;
        const MouthMask o = oracle_mask(pts, 48, 48);
        std::size_t mismatched = 0;
        for (std::size_t i = 0; i < m.bits.size(); ++i) mismatched += m.bits[i] != o.bits[i];
        CHECK(mismatched == 0);
    }
    CHECK(checked >= 95);
}

TEST_CASE("manifest parsing") {
    const fs::path dir = fresh_dir("manifest");
    synthetic::SyntheticConfig sc;
    sc.subjects = 2;
    sc.frames = 3;
    sc.emotions = {"happy", "sad"};
    sc.image_size = 32;
    const DatasetManifest gen = synthetic::generate_synthetic_dataset(sc, dir);
    CHECK(gen.clips.size() == 4);

    const DatasetManifest m = load_manifest(dir / "manifest.txt");
    CHECK(m.emotion_count() == 2);
    CHECK(m.emotion("sad").index == 2);
    CHECK(m.clips.size() == 4);

    // Three clips, two emotions, relative paths, comments.
    const auto clip_names = [&] {
        std::vector<std::string> out;
        for (const auto& c : m.clips) out.push_back(fs::relative(c.dir, dir).string());
        return out;
    }();
    write_text(dir / "three.txt", "# three clips\n" + clip_names[0] + " happy 3 train\n" + clip_names[1] +
                                      " happy 3 train\n" + clip_names[2] + " sad 3 validation\n");
    const auto three = load_manifest(dir / "three.txt");
    CHECK(three.clips.size() == 3);
    CHECK(three.emotion_count() == 2);
    CHECK(three.clip_indices(Split::validation).size() == 1);

    write_text(dir / "missing_dir.txt", "nowhere happy 3 train\n");
    CHECK_THROWS_WITH_AS(load_manifest(dir / "missing_dir.txt"), doctest::Contains("clip path not found"), Error);
    write_text(dir / "empty.txt", "# nothing here\n");
    CHECK_THROWS_WITH_AS(load_manifest(dir / "empty.txt"), "empty dataset", Error);
    write_text(dir / "short.txt", clip_names[0] + " happy 1 train\n");
    CHECK_THROWS_WITH_AS(load_manifest(dir / "short.txt"), doctest::Contains("clip too short"), Error);
    write_text(dir / "bad.txt", clip_names[0] + " happy\n");
    CHECK_THROWS_WITH_AS(load_manifest(dir / "bad.txt"), doctest::Contains("malformed manifest entry at line 1"), Error);
    write_text(dir / "vocab.txt", "emotions: happy\n" + clip_names[2] + " sad 3 train\n");
    CHECK_THROWS_WITH_AS(load_manifest(dir / "vocab.txt"), doctest::Contains("unknown emotion name"), Error);
    write_text(dir / "twice.txt", clip_names[0] + " happy 3 train\n" + clip_names[0] + " happy 3 validation\n");
    CHECK_THROWS_WITH_AS(load_manifest(dir / "twice.txt"), doctest::Contains("clip listed twice"), Error);
    write_text(dir / "frames.txt", clip_names[0] + " happy 9 train\n");
    CHECK_THROWS_WITH_AS(load_manifest(dir / "frames.txt"), doctest::Contains("missing frame"), Error);
    CHECK_THROWS_WITH_AS(load_manifest(dir / "absent.txt"), doctest::Contains("manifest not found"), Error);

    write_manifest(m, dir / "rewritten.txt");
    const auto again = load_manifest(dir / "rewritten.txt");
    CHECK(again.emotion_names() == m.emotion_names());
    CHECK(again.clips.size() == m.clips.size());
}

TEST_CASE("loaded clips carry exact coefficients") {
    const fs::path dir = fresh_dir("clips");
    synthetic::SyntheticConfig sc;
    sc.subjects = 1;
    sc.frames = 7;
    sc.image_size = 32;
    synthetic::generate_synthetic_dataset(sc, dir);
    const auto m = load_manifest(dir / "manifest.txt");
    const auto clip = load_clip(m.clips[0], m, FileLandmarkProvider());
    CHECK(clip.frames.size() == 7);
    CHECK(clip.landmarks.size() == 7);
    CHECK(clip.coefficients == assign_action_coefficients(7));
    CHECK(clip.emotion.name == "happy");
}

TEST_CASE("preprocessing geometry") {
    FrameImage a(289, 289), b(289, 289);
    LandmarkSet lm;
    for (auto& p : lm.points) p = {100, 120};

    SUBCASE("offset (0,0) takes the top-left window; a far landmark is rejected") {
        auto p = crop_pair_at(a, b, lm, 0, 0, 256);
        REQUIRE(p.has_value());
        CHECK(p->input.height() == 256);
        CHECK(p->landmarks.points[0].x == 100);
        lm.points[5] = {288, 288};
        CHECK_FALSE(crop_pair_at(a, b, lm, 0, 0, 256).has_value());
    }
    SUBCASE("evaluation mode uses the centre offset 16") {
        const auto p = preprocess_pair(a, b, lm, false, 0);
        CHECK(p.top == 16);
        CHECK(p.left == 16);
        CHECK(p.landmarks.points[0].x == 84);
        CHECK(p.landmarks.points[0].y == 104);
    }
    SUBCASE("same seed, same crop; landmarks stay inside") {
        const auto p = preprocess_pair(a, b, lm, true, 77);
        const auto q = preprocess_pair(a, b, lm, true, 77);
        CHECK(p.top == q.top);
        CHECK(p.left == q.left);
        CHECK(p.landmarks.within(256, 256));
    }
    SUBCASE("impossible landmarks fall back to the centre crop") {
        lm.points[0] = {1, 1};
        lm.points[1] = {287, 287};
        const auto p = preprocess_pair(a, b, lm, true, 5);
        CHECK(p.center_fallback);
        CHECK(p.top == 16);
    }
    SUBCASE("desk-scale ratio") {
        const auto c = PreprocessConfig::for_input_size(64);
        CHECK(c.resize == 72);
        CHECK(c.crop == 64);
    }
}

TEST_CASE("a dot drawn at a landmark lands on the transformed landmark") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> pos(70, 130);
    for (int trial = 0; trial < 10; ++trial) {
        const double px = pos(rng), py = pos(rng);
        FrameImage target(200, 200), input(200, 200);
        // Smooth blob so the intensity centroid tracks the sub-pixel centre.
        for (int y = 0; y < 200; ++y)
            for (int x = 0; x < 200; ++x) {
                const double d2 = (x - px) * (x - px) + (y - py) * (y - py);
                target.at(0, y, x) = static_cast<float>(std::exp(-d2 / (2 * 3.0 * 3.0)));
            }
        LandmarkSet lm;
        for (auto& p : lm.points) p = {px, py};
        const auto out = preprocess_pair(input, target, lm, true, 1000 + trial);
        double sw = 0, sx = 0, sy = 0;
        for (int y = 0; y < 256; ++y)
            for (int x = 0; x < 256; ++x) {
                const double w = out.target.at(0, y, x);
                sw += w;
                sx += w * x;
                sy += w * y;
            }
        CHECK(std::abs(sx / sw - out.landmarks.points[0].x) < 0.05);
        CHECK(std::abs(sy / sw - out.landmarks.points[0].y) < 0.05);
    }
}

TEST_CASE("training pair sampling") {
    const fs::path dir = fresh_dir("sampling");
    synthetic::SyntheticConfig sc;
    sc.subjects = 1;
    sc.frames = 5;
    sc.image_size = 32;
    synthetic::generate_synthetic_dataset(sc, dir);
    const ClipDataset data(load_manifest(dir / "manifest.txt"), Split::train, FileLandmarkProvider());
    const auto cfg = PreprocessConfig::for_input_size(32);

    const auto first = make_training_pair(data, 0, 1, 3, cfg, true);
    CHECK(first.degree == 0.0);
    CHECK(first.input == first.target);
    const auto last = make_training_pair(data, 0, 5, 3, cfg, true);
    CHECK(last.degree == 1.0);
    CHECK(last.emotion.name == "happy");
    CHECK(last.mask.count() > 0);

    std::mt19937_64 r1(5), r2(5);
    for (int i = 0; i < 5; ++i) {
        const auto a = sample_training_pair(data, r1, cfg);
        const auto b = sample_training_pair(data, r2, cfg);
        CHECK(a.frame == b.frame);
        CHECK(a.target == b.target);
        CHECK(a.degree == assign_action_coefficients(5)[a.frame - 1]);
    }
    const ClipDataset empty(std::vector<ExpressionClip>{}, {});
    CHECK_THROWS_WITH_AS(sample_training_pair(empty, r1, cfg), "empty dataset", Error);
}
