#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "i2v/error.hpp"
#include "i2v/synthesis.hpp"

using namespace i2v;
using namespace i2v::synthesis;
using model::ActionVector;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kEmotions{"happy", "sad", "angry"};

fs::path fresh_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / "i2v_test_synthesis" / name;
    fs::remove_all(dir);
    return dir;
}

std::vector<double> degrees(const ActionSchedule& s, int emotion) {
    std::vector<double> out;
    for (const auto& a : s.steps()) out.push_back(a[emotion]);
    return out;
}

FrameImage noise_image(int size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0, 1);
    FrameImage img(size, size);
    for (auto& v : img.tensor().storage()) v = u(rng);
    return img;
}

const model::Generator<float>& toy_generator() {
    static const model::Model<float> m(model::ArchConfig::toy(kEmotions), 4);
    return m.generator;
}

class RecordingEncoder final : public VideoEncoder {
public:
    mutable std::string pattern;
    mutable int fps = 0;
    std::string name() const override { return "recording"; }
    bool available() const override { return true; }
    void encode(const std::string& frame_pattern, int f, const fs::path& out) const override {
        pattern = frame_pattern;
        fps = f;
        std::ofstream(out) << "container";
    }
};

class MissingEncoder final : public VideoEncoder {
public:
    std::string name() const override { return "missing"; }
    bool available() const override { return false; }
    void encode(const std::string&, int, const fs::path&) const override { FAIL("must not be called"); }
};

}  // namespace

TEST_CASE("linear schedule") {
    const auto s = linear_schedule(kEmotions, "sad", 4);
    CHECK(s.size() == 4);
    CHECK(degrees(s, 1) == std::vector<double>{0.25, 0.5, 0.75, 1.0});
    CHECK(degrees(s, 0) == std::vector<double>(4, 0.0));
    CHECK(degrees(linear_schedule(kEmotions, "happy", 10), 0).back() == 1.0);
    CHECK_THROWS_WITH_AS(linear_schedule(kEmotions, "bored", 4), "unknown emotion name: bored", Error);
    CHECK_THROWS_AS(linear_schedule(kEmotions, "sad", 0), Error);
}

TEST_CASE("unimodal schedule") {
    CHECK(degrees(unimodal_schedule(kEmotions, "happy", 5), 0) == std::vector<double>{0, 0.5, 1, 0.5, 0});
    for (int n : {3, 4, 9, 10}) {
        const auto d = degrees(unimodal_schedule(kEmotions, "angry", n), 2);
        CHECK(d.front() == 0.0);
        CHECK(d.back() == 0.0);
        for (int i = 0; i < n; ++i) CHECK(d[i] == d[n - 1 - i]);
        CHECK(*std::max_element(d.begin(), d.end()) <= 1.0);
        if (n % 2 == 1) CHECK(d[n / 2] == 1.0);
    }
    CHECK_THROWS_AS(unimodal_schedule(kEmotions, "happy", 2), Error);
}

TEST_CASE("transfer schedule") {
    const auto s = transfer_schedule(kEmotions, "angry", "happy", 3);
    CHECK(degrees(s, 2) == std::vector<double>{1, 0.5, 0});
    CHECK(degrees(s, 0) == std::vector<double>{0, 0.5, 1});
    CHECK(degrees(s, 1) == std::vector<double>{0, 0, 0});
    CHECK_THROWS_AS(transfer_schedule(kEmotions, "sad", "sad", 5), Error);
}

TEST_CASE("schedule text format") {
    const auto s = parse_schedule("# two steps\n0.5,0,0\n\n1, 0, 0.25\r\n", 3);
    REQUIRE(s.size() == 2);
    CHECK(s[0].values() == std::vector<double>{0.5, 0, 0});
    CHECK(s[1].values() == std::vector<double>{1, 0, 0.25});
    CHECK(parse_schedule(format_schedule(s), 3) == s);

    CHECK_THROWS_AS(parse_schedule("0.5,0\n", 3), Error);
    CHECK_THROWS_AS(parse_schedule("0.5,x,0\n", 3), Error);
    CHECK_THROWS_AS(parse_schedule("1.2,0,0\n", 3), Error);
    CHECK_THROWS_AS(parse_schedule("# nothing\n", 3), Error);

    const fs::path dir = fresh_dir("file");
    fs::create_directories(dir);
    const auto t = transfer_schedule(kEmotions, "happy", "sad", 7);
    save_schedule(t, dir / "s.txt");
    CHECK(load_schedule(dir / "s.txt", 3) == t);
    CHECK_THROWS_AS(load_schedule(dir / "missing.txt", 3), Error);
}

TEST_CASE("builder flags") {
    CHECK(build_schedule("linear", "happy:10", kEmotions) == linear_schedule(kEmotions, "happy", 10));
    CHECK(build_schedule("unimodal", "sad:5", kEmotions) == unimodal_schedule(kEmotions, "sad", 5));
    CHECK(build_schedule("transfer", "angry:happy:4", kEmotions) ==
          transfer_schedule(kEmotions, "angry", "happy", 4));
    CHECK_THROWS_AS(build_schedule("linear", "happy", kEmotions), Error);
    CHECK_THROWS_AS(build_schedule("linear", "happy:ten", kEmotions), Error);
    CHECK_THROWS_AS(build_schedule("linear", "happy:10x", kEmotions), Error);
    CHECK_THROWS_AS(build_schedule("spiral", "happy:10", kEmotions), Error);
}

TEST_CASE("rendered frames match independent generator calls") {
    const auto& gen = toy_generator();
    const FrameImage img = noise_image(16, 1);
    const auto schedule = build_schedule("transfer", "happy:angry:6", kEmotions);
    const auto seq = render(gen, img, schedule);
    REQUIRE(seq.frames.size() == 6);
    CHECK(seq.schedule == schedule);
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        const auto out = model::generate_frame(gen, img, schedule[i]);
        CHECK(seq.frames[i] == out.image());
        CHECK(seq.landmarks[i] == out.landmarks);
    }
    CHECK_THROWS_AS(render(gen, img, linear_schedule({"happy"}, "happy", 3)), Error);
}

TEST_CASE("rendering a permuted schedule permutes the frames") {
    const auto& gen = toy_generator();
    const FrameImage img = noise_image(16, 2);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<ActionVector> steps;
    for (int i = 0; i < 8; ++i) steps.emplace_back(std::vector<double>{u(rng), u(rng), u(rng)});
    std::vector<std::size_t> perm(steps.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<ActionVector> permuted;
    for (auto p : perm) permuted.push_back(steps[p]);

    const auto a = render(gen, img, ActionSchedule(steps));
    const auto b = render(gen, img, ActionSchedule(permuted));
    for (std::size_t i = 0; i < perm.size(); ++i) CHECK(b.frames[i] == a.frames[perm[i]]);
}

TEST_CASE("an all-zero schedule repeats the self-reconstruction") {
    const auto& gen = toy_generator();
    const FrameImage img = noise_image(16, 3);
    const auto self = model::generate_frame(gen, img, ActionVector::zeros(3)).image();
    const auto seq = render(gen, img, ActionSchedule(std::vector<ActionVector>(4, ActionVector::zeros(3))));
    for (const auto& f : seq.frames) CHECK(f == self);
}

TEST_CASE("frame export") {
    const auto& gen = toy_generator();
    const auto seq = render(gen, noise_image(16, 4), linear_schedule(kEmotions, "happy", 10));

    const fs::path dir = fresh_dir("frames");
    const auto res = export_video(seq, dir, 25);
    REQUIRE(res.frames.size() == 10);
    CHECK(res.frames.front().filename() == "frame_0001.png");
    CHECK(res.frames.back().filename() == "frame_0010.png");
    CHECK_FALSE(res.container);
    CHECK(res.duration_seconds == doctest::Approx(0.4));
    for (std::size_t i = 0; i < 10; ++i) CHECK(load_png(res.frames[i]) == quantize8(seq.frames[i]));

    std::ifstream in(res.metadata);
    const auto meta = nlohmann::json::parse(in);
    CHECK(meta["fps"] == 25);
    CHECK(meta["frame_count"] == 10);
    CHECK(meta["duration_seconds"].get<double>() == doctest::Approx(0.4));
    CHECK(meta["schedule"].size() == 10);
    CHECK(meta["container"].is_null());

    RecordingEncoder rec;
    const auto with = export_video(seq, fresh_dir("container"), 12, &rec);
    REQUIRE(with.container);
    CHECK(fs::exists(*with.container));
    CHECK(rec.fps == 12);
    CHECK(rec.pattern.ends_with("frame_%04d.png"));

    MissingEncoder missing;
    CHECK_FALSE(export_video(seq, fresh_dir("missing"), 12, &missing).container);

    CHECK_THROWS_WITH_AS(export_video(seq, fresh_dir("zero"), 0), "fps must be ≥ 1", Error);
    CHECK_THROWS_AS(export_video(seq, "/proc/i2v/out", 25), Error);
}
