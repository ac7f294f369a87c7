#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "i2v/landmarks.hpp"

namespace i2v::evaluation {

/// distances[t] = |K_t - K_1|_2 over the flattened 136-dim coordinates.
struct ContinuityCurve {
    std::vector<double> distances;
    bool operator==(const ContinuityCurve&) const = default;
};

ContinuityCurve continuity_curve(std::span<const LandmarkSet> sequence);
// Variable-size point lists; all must have the same count.
ContinuityCurve continuity_curve(const std::vector<std::vector<Point>>& sequence);

struct SmoothnessStats {
    double max_jump = 0;                // max |d[t+1] - d[t]|
    double monotonicity_rank_corr = 0;  // Spearman, frame index vs distance
    double final_value = 0;
    double max_decrease = 0;  // max (d[t] - d[t+1]), 0 if never decreasing
};

SmoothnessStats smoothness_stats(const ContinuityCurve& curve);

// Spearman correlation with average ranks for ties; 0 if either side is
// constant.
double spearman(std::span<const double> x, std::span<const double> y);

struct ReportFiles {
    std::filesystem::path table;
    std::filesystem::path plot;
};

// Writes `out` (CSV, header "frame,<name>...", frames numbered from 1) and
// the same path with extension .svg (line plot).
ReportFiles compare_report(const std::vector<std::pair<std::string, ContinuityCurve>>& curves,
                           const std::filesystem::path& out);

}  // namespace i2v::evaluation
