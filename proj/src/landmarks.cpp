#include "i2v/landmarks.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "i2v/error.hpp"

namespace i2v {

bool LandmarkSet::within(int height, int width) const {
    for (const auto& p : points)
        if (!(p.x >= 0 && p.y >= 0 && p.x <= width - 1 && p.y <= height - 1)) return false;
    return true;
}

LandmarkSet resize_landmarks(const LandmarkSet& lm, int src_h, int src_w, int dst_h, int dst_w) {
    const double sx = double(dst_w) / src_w, sy = double(dst_h) / src_h;
    LandmarkSet out;
    for (int i = 0; i < kLandmarkCount; ++i) {
        out.points[i].x = (lm.points[i].x + 0.5) * sx - 0.5;
        out.points[i].y = (lm.points[i].y + 0.5) * sy - 0.5;
    }
    return out;
}

LandmarkSet translate_landmarks(const LandmarkSet& lm, double dx, double dy) {
    LandmarkSet out = lm;
    for (auto& p : out.points) {
        p.x += dx;
        p.y += dy;
    }
    return out;
}

double landmark_distance(const LandmarkSet& a, const LandmarkSet& b) {
    double s = 0;
    for (int i = 0; i < kLandmarkCount; ++i) {
        const double dx = a.points[i].x - b.points[i].x, dy = a.points[i].y - b.points[i].y;
        s += dx * dx + dy * dy;
    }
    return std::sqrt(s);
}

LandmarkSet parse_landmarks_csv(const std::string& text) {
    LandmarkSet lm;
    std::istringstream in(text);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (n == kLandmarkCount) throw Error("landmark file has more than 68 points");
        double x = 0, y = 0;
        char comma = 0;
        std::istringstream ls(line);
        if (!(ls >> x >> comma >> y) || comma != ',') throw Error("malformed landmark line: " + line);
        lm.points[n++] = {x, y};
    }
    if (n != kLandmarkCount) throw Error("landmark file has " + std::to_string(n) + " points, expected 68");
    return lm;
}

LandmarkSet load_landmarks_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("landmark file not found: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_landmarks_csv(ss.str());
}

std::string format_landmarks_csv(const LandmarkSet& lm) {
    std::string out;
    char buf[64];
    for (const auto& p : lm.points) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f\n", p.x, p.y);
        out += buf;
    }
    return out;
}

void save_landmarks_csv(const LandmarkSet& lm, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write landmarks " + path.string());
    out << format_landmarks_csv(lm);
}

std::filesystem::path FileLandmarkProvider::sidecar_path(const std::filesystem::path& frame_path) {
    auto p = frame_path;
    p.replace_extension(".landmarks.csv");
    return p;
}

LandmarkSet FileLandmarkProvider::landmarks_for(const std::filesystem::path& frame_path) const {
    return load_landmarks_csv(sidecar_path(frame_path));
}

LandmarkSet CommandLandmarkProvider::landmarks_for(const std::filesystem::path& frame_path) const {
    const std::string cmd = command_ + " '" + frame_path.string() + "'";
    std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
    if (!pipe) throw Error("cannot run landmark detector: " + command_);
    std::string out;
    char buf[256];
    while (std::fgets(buf, sizeof buf, pipe.get())) out += buf;
    const int status = pclose(pipe.release());
    if (status != 0) throw Error("landmark detector failed on " + frame_path.string());
    return parse_landmarks_csv(out);
}

}  // namespace i2v
