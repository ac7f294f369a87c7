#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "i2v/error.hpp"
#include "i2v/evaluation.hpp"

using namespace i2v;
using namespace i2v::evaluation;
namespace fs = std::filesystem;

namespace {

std::vector<std::vector<Point>> shifted(std::initializer_list<double> offsets) {
    std::vector<std::vector<Point>> seq;
    for (double d : offsets) seq.push_back({{d, 0.0}});
    return seq;
}

std::vector<std::string> lines_of(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

}  // namespace

TEST_CASE("continuity curve") {
    const auto c = continuity_curve(shifted({0, 1, 2, 3}));
    CHECK(c.distances == std::vector<double>{0, 1, 2, 3});

    LandmarkSet base;
    for (int k = 0; k < kLandmarkCount; ++k) base.points[k] = {double(k), 1.0};
    const std::vector<LandmarkSet> seq{base, translate_landmarks(base, 1, 0), translate_landmarks(base, 3, 4)};
    const auto d = continuity_curve(seq).distances;
    CHECK(d[0] == 0.0);
    CHECK(d[1] == doctest::Approx(std::sqrt(68.0)));
    CHECK(d[2] == doctest::Approx(5 * std::sqrt(68.0)));

    CHECK_THROWS_AS(continuity_curve(std::vector<std::vector<Point>>{{{0, 0}}, {{0, 0}, {1, 1}}}), Error);
    CHECK_THROWS_AS(continuity_curve(std::vector<std::vector<Point>>{}), Error);
}

TEST_CASE("smoothness statistics") {
    const auto s = smoothness_stats(ContinuityCurve{{0, 1, 2, 3}});
    CHECK(s.max_jump == 1.0);
    CHECK(s.monotonicity_rank_corr == doctest::Approx(1.0));
    CHECK(s.final_value == 3.0);
    CHECK(s.max_decrease == 0.0);

    const auto jumpy = smoothness_stats(ContinuityCurve{{0, 5, 1, 5}});
    CHECK(jumpy.max_jump == 5.0);
    CHECK(jumpy.max_decrease == 4.0);
    CHECK(jumpy.monotonicity_rank_corr < 1.0);

    CHECK(smoothness_stats(ContinuityCurve{{3, 2, 1, 0}}).monotonicity_rank_corr == doctest::Approx(-1.0));
    CHECK_THROWS_AS(smoothness_stats(ContinuityCurve{{0}}), Error);
}

TEST_CASE("spearman with ties and constants") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    CHECK(spearman(x, std::vector<double>{10, 20, 30, 40, 50}) == doctest::Approx(1.0));
    CHECK(spearman(x, std::vector<double>{1, 4, 9, 16, 25}) == doctest::Approx(1.0));
    CHECK(spearman(x, std::vector<double>{2, 2, 2, 2, 2}) == 0.0);
    // ranks of y with ties: 1.5 1.5 3 4 5 -> Pearson on ranks
    const double r = spearman(x, std::vector<double>{0, 0, 1, 2, 3});
    const double oracle = [] {
        const std::vector<double> a{1, 2, 3, 4, 5}, b{1.5, 1.5, 3, 4, 5};
        double ma = 3, mb = 3, sab = 0, saa = 0, sbb = 0;
        for (int i = 0; i < 5; ++i) {
            sab += (a[i] - ma) * (b[i] - mb);
            saa += (a[i] - ma) * (a[i] - ma);
            sbb += (b[i] - mb) * (b[i] - mb);
        }
        return sab / std::sqrt(saa * sbb);
    }();
    CHECK(r == doctest::Approx(oracle));
    CHECK_THROWS_AS(spearman(x, std::vector<double>{1, 2}), Error);
}

TEST_CASE("comparison report") {
    const fs::path dir = fs::temp_directory_path() / "i2v_test_evaluation";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto files = compare_report({{"ours", ContinuityCurve{{0, 1, 2}}}, {"truth", ContinuityCurve{{0, 1.5, 2.5}}}},
                                      dir / "cmp.csv");
    CHECK(files.table == dir / "cmp.csv");
    CHECK(files.plot == dir / "cmp.svg");
    const auto rows = lines_of(files.table);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0] == "frame,ours,truth");
    CHECK(rows[1].starts_with("1,0,0"));
    CHECK(rows[3].starts_with("3,2,2.5"));
    std::ifstream svg(files.plot);
    std::stringstream ss;
    ss << svg.rdbuf();
    CHECK(ss.str().find("<svg") != std::string::npos);
    CHECK(ss.str().find("truth") != std::string::npos);

    CHECK_THROWS_WITH_AS(compare_report({{"a", ContinuityCurve{{0, 1}}}, {"b", ContinuityCurve{{0, 1, 2}}}},
                                        dir / "bad.csv"),
                         "curves must share frame count", Error);
}
