#include "i2v/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "i2v/error.hpp"

namespace i2v::evaluation {

namespace {

ContinuityCurve curve_of(std::size_t n, std::size_t points, auto&& point_at) {
    if (n == 0) throw Error("continuity curve needs at least one frame");
    ContinuityCurve c;
    for (std::size_t t = 0; t < n; ++t) {
        double s = 0;
        for (std::size_t k = 0; k < points; ++k) {
            const Point a = point_at(t, k), b = point_at(0, k);
            s += (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y);
        }
        c.distances.push_back(std::sqrt(s));
    }
    return c;
}

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = (double(i) + double(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

ContinuityCurve continuity_curve(std::span<const LandmarkSet> seq) {
    return curve_of(seq.size(), kLandmarkCount, [&](std::size_t t, std::size_t k) { return seq[t].points[k]; });
}

ContinuityCurve continuity_curve(const std::vector<std::vector<Point>>& seq) {
    for (const auto& s : seq)
        if (s.size() != seq.front().size()) throw Error("inconsistent landmark counts");
    return curve_of(seq.size(), seq.empty() ? 0 : seq.front().size(),
                    [&](std::size_t t, std::size_t k) { return seq[t][k]; });
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw Error("spearman needs two equal-length series of length ≥ 2");
    const auto rx = average_ranks(x), ry = average_ranks(y);
    const double n = double(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0 || syy == 0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

SmoothnessStats smoothness_stats(const ContinuityCurve& curve) {
    const auto& d = curve.distances;
    if (d.size() < 2) throw Error("smoothness stats need a curve of length ≥ 2");
    SmoothnessStats s;
    for (std::size_t t = 0; t + 1 < d.size(); ++t) {
        s.max_jump = std::max(s.max_jump, std::abs(d[t + 1] - d[t]));
        s.max_decrease = std::max(s.max_decrease, d[t] - d[t + 1]);
    }
    std::vector<double> index(d.size());
    std::iota(index.begin(), index.end(), 1.0);
    s.monotonicity_rank_corr = spearman(index, d);
    s.final_value = d.back();
    return s;
}

ReportFiles compare_report(const std::vector<std::pair<std::string, ContinuityCurve>>& curves,
                           const std::filesystem::path& out) {
    if (curves.empty()) throw Error("compare_report needs at least one curve");
    const std::size_t n = curves.front().second.distances.size();
    for (const auto& [name, c] : curves)
        if (c.distances.size() != n) throw Error("curves must share frame count");

    ReportFiles files{out, out};
    files.plot.replace_extension(".svg");
    if (out.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(out.parent_path(), ec);
    }
    {
        std::ofstream csv(files.table);
        if (!csv) throw Error("unwritable path: " + files.table.string());
        csv << "frame";
        for (const auto& [name, c] : curves) csv << ',' << name;
        csv << '\n';
        for (std::size_t t = 0; t < n; ++t) {
            csv << t + 1;
            for (const auto& [name, c] : curves) csv << ',' << fmt(c.distances[t]);
            csv << '\n';
        }
        if (!csv) throw Error("unwritable path: " + files.table.string());
    }

    // Plain SVG line chart: x = frame, y = distance.
    const double W = 640, H = 400, left = 60, right = 150, top = 30, bottom = 50;
    double ymax = 0;
    for (const auto& [name, c] : curves)
        for (double v : c.distances) ymax = std::max(ymax, v);
    if (ymax <= 0) ymax = 1;
    const auto px = [&](std::size_t t) { return left + (n > 1 ? double(t) / double(n - 1) : 0.5) * (W - left - right); };
    const auto py = [&](double v) { return H - bottom - v / ymax * (H - top - bottom); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

    std::ofstream svg(files.plot);
    if (!svg) throw Error("unwritable path: " + files.plot.string());
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\"" << H - bottom
        << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
        << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">frame</text>\n"
        << "<text x=\"14\" y=\"" << (top + H - bottom) / 2 << "\" transform=\"rotate(-90 14 " << (top + H - bottom) / 2
        << ")\" text-anchor=\"middle\">landmark L2 distance to frame 1</text>\n";
    for (std::size_t t = 0; t < n; ++t)
        svg << "<text x=\"" << px(t) << "\" y=\"" << H - bottom + 16 << "\" text-anchor=\"middle\">" << t + 1
            << "</text>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = ymax * k / 4;
        svg << "<text x=\"" << left - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
    }
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const char* color = colors[i % std::size(colors)];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t t = 0; t < n; ++t) svg << px(t) << ',' << py(curves[i].second.distances[t]) << ' ';
        svg << "\"/>\n";
        const double ly = top + 18.0 * double(i);
        svg << "<line x1=\"" << W - right + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - right + 30 << "\" y2=\"" << ly
            << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
            << "<text x=\"" << W - right + 36 << "\" y=\"" << ly + 4 << "\">" << curves[i].first << "</text>\n";
    }
    svg << "</svg>\n";
    if (!svg) throw Error("unwritable path: " + files.plot.string());
    return files;
}

}  // namespace i2v::evaluation
