#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "i2v/data.hpp"

namespace i2v::testing {

// Oracle: a pixel centre is inside the convex hull of a point set iff it lies
// in some triangle spanned by three of the points (Carathéodory). Each
// triangle test is a plain half-plane sign check with boundary counted inside.
inline bool in_some_triangle(const std::vector<Point>& pts, double x, double y) {
    const double eps = 1e-9;
    auto cross = [](const Point& a, const Point& b, double px, double py) {
        return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
    };
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            for (std::size_t k = j + 1; k < pts.size(); ++k) {
                const double d1 = cross(pts[i], pts[j], x, y);
                const double d2 = cross(pts[j], pts[k], x, y);
                const double d3 = cross(pts[k], pts[i], x, y);
                const bool neg = d1 < -eps || d2 < -eps || d3 < -eps;
                const bool pos = d1 > eps || d2 > eps || d3 > eps;
                if (!(neg && pos)) {
                    // Zero-area triangles contain only their segment; accept
                    // when the point is on it, reject otherwise.
                    const double area = cross(pts[i], pts[j], pts[k].x, pts[k].y);
                    if (std::abs(area) > eps) return true;
                }
            }
    return false;
}

inline MouthMask oracle_mask(const std::vector<Point>& pts, int h, int w) {
    MouthMask m{h, w, std::vector<std::uint8_t>(std::size_t(h) * w, 0)};
    double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
    for (const auto& p : pts) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    for (int y = std::max(0, int(std::floor(y0))); y <= std::min(h - 1, int(std::ceil(y1))); ++y)
        for (int x = std::max(0, int(std::floor(x0))); x <= std::min(w - 1, int(std::ceil(x1))); ++x)
            m.bits[std::size_t(y) * w + x] = in_some_triangle(pts, x, y);
    return m;
}

}  // namespace i2v::testing
