#include <catch_amalgamated.hpp>

#include "rfgen/raster.hpp"
#include "rfgen/rng.hpp"

#include <cmath>
#include <numbers>

using namespace rfgen;
using Catch::Approx;

namespace {

// Point-sampling oracle: 64x64 subsamples per pixel.
double subsample_rect_coverage(const std::vector<RectMM>& rects, const BoardGrid& g, int ix,
                               int iy) {
    int hits = 0;
    for (int sj = 0; sj < 64; ++sj)
        for (int si = 0; si < 64; ++si) {
            double x = (ix + (si + 0.5) / 64.0) * g.pitch_mm;
            double y = (iy + (sj + 0.5) / 64.0) * g.pitch_mm;
            for (const auto& r : rects)
                if (x >= r.x0 && x <= r.x1 && y >= r.y0 && y <= r.y1) {
                    ++hits;
                    break;
                }
        }
    return hits / 4096.0;
}

// Disjoint decomposition of A union B: A plus the parts of B outside A.
std::vector<RectMM> decompose_union(const RectMM& a, const RectMM& b) {
    std::vector<RectMM> out{a};
    double ix0 = std::max(a.x0, b.x0), ix1 = std::min(a.x1, b.x1);
    double iy0 = std::max(a.y0, b.y0), iy1 = std::min(a.y1, b.y1);
    if (ix0 >= ix1 || iy0 >= iy1) {
        out.push_back(b);
        return out;
    }
    if (b.y0 < iy0) out.push_back(RectMM(b.x0, b.y0, b.x1, iy0));
    if (b.y1 > iy1) out.push_back(RectMM(b.x0, iy1, b.x1, b.y1));
    if (b.x0 < ix0) out.push_back(RectMM(b.x0, iy0, ix0, iy1));
    if (b.x1 > ix1) out.push_back(RectMM(ix1, iy0, b.x1, iy1));
    return out;
}

RectMM random_rect(Rng& rng, double side) {
    double x0 = rng.uniform(0.0, side - 0.2), y0 = rng.uniform(0.0, side - 0.2);
    double x1 = rng.uniform(x0 + 0.1, side), y1 = rng.uniform(y0 + 0.1, side);
    return RectMM(x0, y0, x1, y1);
}

}  // namespace

TEST_CASE("partial pixel coverage", "[raster]") {
    BoardGrid g;
    const double p = g.pitch_mm;

    SECTION("rect over the left 30% of one pixel") {
        auto m = rasterize_rects({RectMM(0.0, 0.0, 0.3 * p, p)}, g);
        CHECK(m[0] == Approx(0.3));
        CHECK(m[1] == 0.0);
    }
    SECTION("rect covering the whole board") {
        auto m = rasterize_rects({RectMM(-1.0, -1.0, 9.0, 9.0)}, g);
        for (double v : m) REQUIRE(v == Approx(1.0));
    }
    SECTION("interior quarter of a pixel") {
        auto m = rasterize_rects({RectMM(0.25 * p, 0.25 * p, 0.75 * p, 0.75 * p)}, g);
        CHECK(m[0] == Approx(0.25));
    }
    SECTION("rect fully outside the board contributes nothing") {
        auto m = rasterize_rects({RectMM(9.0, 9.0, 10.0, 10.0)}, g);
        for (double v : m) REQUIRE(v == 0.0);
    }
}

TEST_CASE("union exactness and conservation", "[raster][property]") {
    BoardGrid g;
    Rng rng(42);
    for (int iter = 0; iter < 50; ++iter) {
        RectMM a = random_rect(rng, 8.0), b = random_rect(rng, 8.0);
        auto pair_cov = rasterize_rects({a, b}, g);
        auto union_cov = rasterize_rects(decompose_union(a, b), g);
        double max_diff = 0.0, total = 0.0;
        for (std::size_t i = 0; i < pair_cov.size(); ++i) {
            max_diff = std::max(max_diff, std::abs(pair_cov[i] - union_cov[i]));
            total += pair_cov[i];
        }
        REQUIRE(max_diff < 1e-9);

        // Conservation vs inclusion-exclusion area of two rects.
        double ix = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
        double iy = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
        double expect = a.area() + b.area() - ix * iy;
        REQUIRE(total * g.pitch_mm * g.pitch_mm == Approx(expect).epsilon(1e-9));
        REQUIRE(rect_union_area({a, b}) == Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("monotonicity: adding a rect never lowers coverage", "[raster][property]") {
    BoardGrid g;
    Rng rng(7);
    std::vector<RectMM> rects;
    auto prev = rasterize_rects(rects, g);
    for (int i = 0; i < 8; ++i) {
        rects.push_back(random_rect(rng, 8.0));
        auto cur = rasterize_rects(rects, g);
        for (std::size_t j = 0; j < cur.size(); ++j) REQUIRE(cur[j] >= prev[j] - 1e-12);
        prev = cur;
    }
}

TEST_CASE("rect coverage agrees with the subsample oracle", "[raster][property]") {
    BoardGrid g;
    Rng rng(3);
    std::vector<RectMM> rects{random_rect(rng, 8.0), random_rect(rng, 8.0),
                              random_rect(rng, 8.0)};
    auto m = rasterize_rects(rects, g);
    for (int iter = 0; iter < 60; ++iter) {
        int ix = static_cast<int>(rng.next_below(64)), iy = static_cast<int>(rng.next_below(64));
        double oracle = subsample_rect_coverage(rects, g, ix, iy);
        REQUIRE(std::abs(m[std::size_t(iy) * 64 + ix] - oracle) < 0.05);
    }
}

TEST_CASE("via coverage", "[raster]") {
    BoardGrid g;
    const double p = g.pitch_mm;

    SECTION("no vias means all zeros") {
        auto v = rasterize_vias({}, g);
        for (double x : v) REQUIRE(x == 0.0);
    }
    SECTION("disc with radius = pitch/2 centered in a pixel") {
        // 4x4 subsampling of the quarter-circle: 12/16 hits, within 0.05 of pi/4.
        ViaMM via(10.5 * p, 20.5 * p, 0.5 * p);
        auto v = rasterize_vias({via}, g);
        double center = v[std::size_t(20) * 64 + 10];
        CHECK(std::abs(center - std::numbers::pi / 4.0) < 0.05);
    }
    SECTION("pixel fully inside a large disc") {
        ViaMM via(20.5 * p, 20.5 * p, 1.6 * p);
        auto v = rasterize_vias({via}, g);
        CHECK(v[std::size_t(20) * 64 + 20] == 1.0);
    }
    SECTION("matches the dense subsample oracle within 0.05") {
        ViaMM via(3.07, 4.91, 0.4);
        auto v = rasterize_vias({via}, g);
        Rng rng(5);
        for (int iter = 0; iter < 40; ++iter) {
            int ix = static_cast<int>(rng.next_below(64)), iy = static_cast<int>(rng.next_below(64));
            int hits = 0;
            for (int sj = 0; sj < 64; ++sj)
                for (int si = 0; si < 64; ++si) {
                    double x = (ix + (si + 0.5) / 64.0) * p - via.cx;
                    double y = (iy + (sj + 0.5) / 64.0) * p - via.cy;
                    if (x * x + y * y <= via.radius_mm * via.radius_mm) ++hits;
                }
            REQUIRE(std::abs(v[std::size_t(iy) * 64 + ix] - hits / 4096.0) < 0.05);
        }
    }
}

TEST_CASE("feed validity predicate", "[raster]") {
    BoardGrid g;
    BoardLayout layout(g);
    FeedSet feeds = FeedSet::single(2.0625, 3.0625);

    SECTION("metal everywhere is valid") {
        std::fill(layout.metal.begin(), layout.metal.end(), 1.0);
        CHECK(feed_valid(layout, feeds));
    }
    SECTION("bare board is invalid") { CHECK_FALSE(feed_valid(layout, feeds)); }
    SECTION("bright feed pixel with dim neighbors is invalid") {
        auto [ix, iy] = g.pixel_of(2.0625, 3.0625);
        layout.metal[layout.idx(ix, iy)] = 0.6;
        layout.metal[layout.idx(ix + 1, iy)] = 0.4;
        layout.metal[layout.idx(ix - 1, iy)] = 0.4;
        layout.metal[layout.idx(ix, iy + 1)] = 0.4;
        layout.metal[layout.idx(ix, iy - 1)] = 0.4;
        CHECK_FALSE(feed_valid(layout, feeds));
        layout.metal[layout.idx(ix + 1, iy)] = 0.5;
        CHECK(feed_valid(layout, feeds));
    }
}
