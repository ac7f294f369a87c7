#include "i2v/synthesis.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "i2v/error.hpp"

namespace i2v::synthesis {

using model::ActionVector;

ActionSchedule::ActionSchedule(std::vector<ActionVector> steps) : steps_(std::move(steps)) {
    if (steps_.empty()) throw Error("schedule must not be empty");
    for (const auto& s : steps_)
        if (s.size() != steps_.front().size()) throw Error("schedule steps differ in length");
}

namespace {

int emotion_index(const std::vector<std::string>& emotions, const std::string& name) {
    for (std::size_t i = 0; i < emotions.size(); ++i)
        if (emotions[i] == name) return static_cast<int>(i) + 1;
    throw Error("unknown emotion name: " + name);
}

int parse_count(const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(s, &used);
    } catch (const std::exception&) {
        throw Error("invalid frame count: " + s);
    }
    if (used != s.size()) throw Error("invalid frame count: " + s);
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(item);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

}  // namespace

ActionSchedule linear_schedule(const std::vector<std::string>& emotions, const std::string& emotion, int count) {
    const int e = emotion_index(emotions, emotion);
    if (count < 1) throw Error("count must be ≥ 1");
    std::vector<ActionVector> steps;
    for (int k = 1; k <= count; ++k)
        steps.push_back(ActionVector::one_hot(static_cast<int>(emotions.size()), e, double(k) / double(count)));
    return ActionSchedule(std::move(steps));
}

ActionSchedule unimodal_schedule(const std::vector<std::string>& emotions, const std::string& emotion, int count) {
    const int e = emotion_index(emotions, emotion);
    if (count < 3) throw Error("count must be ≥ 3");
    const int half = (count - 1) / 2;
    std::vector<ActionVector> steps;
    for (int i = 0; i < count; ++i)
        steps.push_back(ActionVector::one_hot(static_cast<int>(emotions.size()), e,
                                              double(std::min(i, count - 1 - i)) / double(half)));
    return ActionSchedule(std::move(steps));
}

ActionSchedule transfer_schedule(const std::vector<std::string>& emotions, const std::string& from,
                                 const std::string& to, int count) {
    const int f = emotion_index(emotions, from), t = emotion_index(emotions, to);
    if (f == t) throw Error("transfer needs two different emotions");
    if (count < 2) throw Error("count must be ≥ 2");
    std::vector<ActionVector> steps;
    for (int k = 0; k < count; ++k) {
        std::vector<double> v(emotions.size(), 0.0);
        v[f - 1] = double(count - 1 - k) / double(count - 1);
        v[t - 1] = double(k) / double(count - 1);
        steps.emplace_back(std::move(v));
    }
    return ActionSchedule(std::move(steps));
}

ActionSchedule parse_schedule(const std::string& text, std::size_t emotion_count) {
    std::vector<ActionVector> steps;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        std::vector<double> v;
        for (const auto& field : split(line, ',')) {
            std::size_t used = 0;
            double d = 0;
            try {
                d = std::stod(field, &used);
            } catch (const std::exception&) {
                throw Error("malformed schedule line " + std::to_string(lineno));
            }
            if (field.find_first_not_of(" \t", used) != std::string::npos)
                throw Error("malformed schedule line " + std::to_string(lineno));
            v.push_back(d);
        }
        if (v.size() != emotion_count)
            throw Error("schedule line " + std::to_string(lineno) + " has " + std::to_string(v.size()) +
                        " degrees, model has " + std::to_string(emotion_count) + " emotions");
        steps.emplace_back(std::move(v));
    }
    return ActionSchedule(std::move(steps));
}

ActionSchedule load_schedule(const std::filesystem::path& path, std::size_t emotion_count) {
    std::ifstream in(path);
    if (!in) throw Error("schedule file not found: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_schedule(ss.str(), emotion_count);
}

std::string format_schedule(const ActionSchedule& schedule) {
    std::string out;
    char buf[40];
    for (const auto& s : schedule.steps()) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", s[i]);
            if (i) out += ',';
            out += buf;
        }
        out += '\n';
    }
    return out;
}

void save_schedule(const ActionSchedule& schedule, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("unwritable path: " + path.string());
    out << format_schedule(schedule);
    if (!out) throw Error("unwritable path: " + path.string());
}

ActionSchedule build_schedule(const std::string& kind, const std::string& spec,
                              const std::vector<std::string>& emotions) {
    const auto parts = split(spec, ':');
    if (kind == "linear" || kind == "unimodal") {
        if (parts.size() != 2) throw Error("--" + kind + " expects emotion:count");
        const int n = parse_count(parts[1]);
        return kind == "linear" ? linear_schedule(emotions, parts[0], n) : unimodal_schedule(emotions, parts[0], n);
    }
    if (kind == "transfer") {
        if (parts.size() != 3) throw Error("--transfer expects from:to:count");
        return transfer_schedule(emotions, parts[0], parts[1], parse_count(parts[2]));
    }
    throw Error("unknown schedule builder " + kind);
}

template <typename T>
RenderedSequence render(const model::Generator<T>& gen, const FrameImage& image, const ActionSchedule& schedule) {
    if (schedule.emotion_count() != static_cast<std::size_t>(gen.arch().emotion_count()))
        throw Error("schedule has " + std::to_string(schedule.emotion_count()) + " degrees per step, model has " +
                    std::to_string(gen.arch().emotion_count()) + " emotions");
    const int n = static_cast<int>(schedule.size());
    RenderedSequence seq{std::vector<FrameImage>(n), std::vector<LandmarkSet>(n), schedule};
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        try {
            const auto out = model::generate_frame(gen, image, schedule[i]);
            seq.frames[i] = out.image();
            seq.landmarks[i] = out.landmarks;
        } catch (...) {
#pragma omp critical
            failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return seq;
}

template RenderedSequence render(const model::Generator<float>&, const FrameImage&, const ActionSchedule&);
template RenderedSequence render(const model::Generator<double>&, const FrameImage&, const ActionSchedule&);

bool FfmpegEncoder::available() const {
    const std::string cmd = "command -v '" + binary_ + "' >/dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
}

void FfmpegEncoder::encode(const std::string& frame_pattern, int fps, const std::filesystem::path& out) const {
    const std::string cmd = "'" + binary_ + "' -loglevel error -y -framerate " + std::to_string(fps) + " -i '" +
                            frame_pattern + "' -pix_fmt yuv420p '" + out.string() + "'";
    if (std::system(cmd.c_str()) != 0) throw Error("video encoder failed: " + binary_);
}

ExportResult export_video(const RenderedSequence& seq, const std::filesystem::path& dir, int fps,
                          const VideoEncoder* encoder) {
    if (seq.frames.empty()) throw Error("nothing to export");
    if (fps < 1) throw Error("fps must be ≥ 1");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw Error("unwritable path: " + dir.string());

    ExportResult res;
    char name[32];
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        std::snprintf(name, sizeof name, "frame_%04zu.png", i + 1);
        res.frames.push_back(dir / name);
        save_png(seq.frames[i], res.frames.back());
    }
    res.duration_seconds = double(seq.frames.size()) / double(fps);
    if (encoder && encoder->available()) {
        res.container = dir / "video.mp4";
        encoder->encode((dir / "frame_%04d.png").string(), fps, *res.container);
    }

    nlohmann::ordered_json meta;
    meta["fps"] = fps;
    meta["frame_count"] = seq.frames.size();
    meta["duration_seconds"] = res.duration_seconds;
    meta["frames"] = nlohmann::json::array();
    for (const auto& f : res.frames) meta["frames"].push_back(f.filename().string());
    meta["schedule"] = nlohmann::json::array();
    for (const auto& s : seq.schedule.steps()) meta["schedule"].push_back(s.values());
    meta["container"] = res.container ? nlohmann::json(res.container->filename().string()) : nlohmann::json(nullptr);
    res.metadata = dir / "video.json";
    std::ofstream out(res.metadata);
    if (!out) throw Error("unwritable path: " + res.metadata.string());
    out << meta.dump(2) << '\n';
    return res;
}

}  // namespace i2v::synthesis
