#include <catch_amalgamated.hpp>

#include "rfgen/core.hpp"
#include "rfgen/rng.hpp"

#include <cmath>

using namespace rfgen;
using Catch::Approx;

TEST_CASE("board grid invariants", "[core]") {
    BoardGrid g;
    CHECK(g.n == 64);
    CHECK(g.side_mm() == Approx(8.0));
    CHECK_THROWS_AS(BoardGrid(4, 0.125), std::invalid_argument);
    CHECK_THROWS_AS(BoardGrid(64, 0.0), std::invalid_argument);

    auto [ix, iy] = g.pixel_of(0.0625, 0.0625);
    CHECK(ix == 0);
    CHECK(iy == 0);
    // Far edge lands in the last pixel.
    auto [jx, jy] = g.pixel_of(8.0, 8.0);
    CHECK(jx == 63);
    CHECK(jy == 63);
}

TEST_CASE("frequency grid is the fixed 51-point 1-20 GHz ladder", "[core]") {
    const auto& f = FrequencyGrid::standard();
    CHECK(f.f_ghz[0] == Approx(1.0));
    CHECK(f.f_ghz[50] == Approx(20.0));
    for (int k = 1; k < kFreqCount; ++k) {
        CHECK(f.f_ghz[k] > f.f_ghz[k - 1]);
        CHECK(f.f_ghz[k] - f.f_ghz[k - 1] == Approx(0.38));
    }
}

TEST_CASE("encode_sparams magnitude and phase features", "[core]") {
    DatasetStats stats(-15.0, 5.0);
    SParamSet sp;
    // |S21| = -20 dB at 90 degrees on every frequency.
    for (int k = 0; k < kFreqCount; ++k) sp.set(SComponent::S21, k, complexd(0.0, 0.1));

    auto f = encode_sparams(sp, stats);
    const int c21 = static_cast<int>(SComponent::S21);
    CHECK(f.mask[c21][0]);
    CHECK(f.feat[c21][0][0] == Approx(-1.0));       // z = (-20 - (-15)) / 5
    CHECK(f.feat[c21][0][1] == Approx(1.0));        // sin 90
    CHECK(f.feat[c21][0][2] == Approx(0.0).margin(1e-12));  // cos 90

    // S12 masked invalid: all-zero features, mask 0.
    const int c12 = static_cast<int>(SComponent::S12);
    CHECK_FALSE(f.mask[c12][0]);
    CHECK(f.feat[c12][0][0] == 0.0);
    CHECK(f.feat[c12][0][1] == 0.0);
    CHECK(f.feat[c12][0][2] == 0.0);
}

TEST_CASE("encodings stay finite for any magnitude", "[core][property]") {
    DatasetStats stats;
    Rng rng(17);
    SParamSet sp;
    for (int c = 0; c < 4; ++c)
        for (int k = 0; k < kFreqCount; ++k) {
            double mag = rng.uniform() < 0.2 ? 0.0 : std::pow(10.0, rng.uniform(-12.0, 1.0));
            sp.set(static_cast<SComponent>(c), k, std::polar(mag, rng.uniform(0.0, 6.28)));
        }
    auto f = encode_sparams(sp, stats);
    for (int c = 0; c < 4; ++c)
        for (int k = 0; k < kFreqCount; ++k)
            for (int j = 0; j < 3; ++j) REQUIRE(std::isfinite(f.feat[c][k][j]));
}

TEST_CASE("conditioning channel stack layout", "[core]") {
    BoardGrid grid;
    DatasetStats stats;
    ConditioningBundle bundle;
    bundle.feeds = FeedSet::pair(0.0625, 0.0625, 8.0, 4.0);
    bundle.substrate = SubstrateSpec(3.55, 0.0027, 0.203);
    bundle.template_id = kNullTemplate;

    auto ch = encode_conditioning_channels(bundle, grid, stats);
    CHECK(ch.data.size() == std::size_t(17) * 64 * 64);
    CHECK(ch.at(0, 0, 0) == 1.0);      // feed pixel
    CHECK(ch.at(0, 1, 0) == 0.0);
    CHECK(ch.at(1, 5, 9) == Approx(0.355));  // eps_r / 10
    CHECK(ch.at(2, 5, 9) == Approx(0.027));  // tan_delta * 10
    CHECK(ch.at(3, 5, 9) == Approx(0.203));  // h_mm
    CHECK(ch.at(16, 7, 7) == -1.0);          // null template sentinel

    bundle.template_id = 3;
    auto ch2 = encode_conditioning_channels(bundle, grid, stats);
    CHECK(ch2.at(16, 7, 7) == Approx(3.0 / 32.0));

    // No S target: summary channels stay zero.
    for (int c = 4; c < 16; ++c) CHECK(ch.at(c, 3, 3) == 0.0);
}

TEST_CASE("conditioning equals itself under port swap", "[core][property]") {
    BoardGrid grid;
    DatasetStats stats;
    ConditioningBundle a;
    a.feeds = FeedSet::pair(0.0625, 2.0625, 7.9, 4.0625);
    ConditioningBundle b = a;
    std::swap(b.feeds.ports[0], b.feeds.ports[1]);

    auto ca = encode_conditioning_channels(a, grid, stats);
    auto cb = encode_conditioning_channels(b, grid, stats);
    REQUIRE(ca.data == cb.data);
}

TEST_CASE("conditioning rejects out-of-board feeds", "[core]") {
    BoardGrid grid;
    DatasetStats stats;
    ConditioningBundle bundle;
    bundle.feeds = FeedSet::single(9.5, 1.0);
    CHECK_THROWS_AS(encode_conditioning_channels(bundle, grid, stats), std::invalid_argument);
}
