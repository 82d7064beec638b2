#include <catch_amalgamated.hpp>

#include "rfgen/emsolve.hpp"
#include "rfgen/rng.hpp"
#include "rfgen/templates.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rfgen;
using Catch::Approx;

namespace {

double bisect_width_for_z0(double target, const SubstrateSpec& sub) {
    double lo = 0.05, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (microstrip_params(mid, sub).z0_ohms > target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("hammerstad-jensen limits", "[emsolve]") {
    SECTION("air substrate gives eps_eff = 1 for any width") {
        SubstrateSpec air(1.0, 0.0, 0.5);
        for (double w : {0.1, 0.5, 2.0, 20.0})
            CHECK(microstrip_params(w, air).eps_eff == Approx(1.0).margin(1e-9));
    }
    SECTION("wide-line limit approaches eps_r") {
        SubstrateSpec sub = SubstrateSpec::ro4003c();
        double prev = 0.0;
        for (double w : {1.0, 4.0, 16.0, 64.0, 256.0}) {
            double ee = microstrip_params(w, sub).eps_eff;
            CHECK(ee >= prev);       // monotone toward the parallel-plate limit
            CHECK(ee <= sub.eps_r + 1e-12);
            CHECK(ee >= 1.0);
            prev = ee;
        }
        CHECK(microstrip_params(256.0, sub).eps_eff == Approx(sub.eps_r).epsilon(0.02));
    }
    SECTION("50-ohm width exists on RO4003C") {
        SubstrateSpec sub = SubstrateSpec::ro4003c();
        double w = bisect_width_for_z0(50.0, sub);
        CHECK(microstrip_params(w, sub).z0_ohms == Approx(50.0).margin(1e-6));
        CHECK(w / sub.h_mm > 1.5);
        CHECK(w / sub.h_mm < 3.0);
    }
    SECTION("board-scale guided wavelength at 20 GHz is near 8 mm") {
        SubstrateSpec sub = SubstrateSpec::ro4003c();
        double ee = microstrip_params(8.0, sub).eps_eff;  // board-wide line
        double lg = guided_wavelength_mm(20.0, ee);
        CHECK(std::abs(lg - 8.0) / 8.0 < 0.10);
    }
}

TEST_CASE("element ABCD blocks", "[emsolve]") {
    SubstrateSpec sub = SubstrateSpec::ro4003c();
    const double w = bisect_width_for_z0(50.0, sub);
    const auto ms = microstrip_params(w, sub);
    const double f = 10.0;
    const double beta = 2.0 * std::numbers::pi * f * std::sqrt(ms.eps_eff) / kSpeedOfLightMMGHz;

    SECTION("quarter-wave series line") {
        double l = (std::numbers::pi / 2.0) / beta;
        ABCD m = element_abcd({ElementKind::SeriesLine, w, l}, f, sub);
        CHECK(std::abs(m.a) < 1e-9);
        CHECK(std::abs(m.d) < 1e-9);
        CHECK(m.b.imag() == Approx(50.0).margin(1e-5));
        CHECK(m.c.imag() == Approx(1.0 / 50.0).margin(1e-9));
        CHECK(std::abs(m.det() - 1.0) < 1e-9);
    }
    SECTION("zero-length limit is the identity") {
        for (auto kind : {ElementKind::SeriesLine, ElementKind::ShuntOpenStub}) {
            ABCD m = element_abcd({kind, w, 1e-12}, f, sub);
            CHECK(std::abs(m.a - 1.0) < 1e-9);
            CHECK(std::abs(m.b) < 1e-9);
            CHECK(std::abs(m.c) < 1e-6);
            CHECK(std::abs(m.d - 1.0) < 1e-9);
        }
    }
    SECTION("open stub at beta*L = pi/4 has Y = j/Z0") {
        double l = (std::numbers::pi / 4.0) / beta;
        ABCD m = element_abcd({ElementKind::ShuntOpenStub, w, l}, f, sub);
        CHECK(m.c.imag() == Approx(1.0 / 50.0).margin(1e-9));
        CHECK(m.a == complexd(1.0, 0.0));
        CHECK(m.b == complexd(0.0, 0.0));
    }
    SECTION("short stub cot singularity is nudged, not infinite") {
        double l = std::numbers::pi / beta;  // sin(beta L) == 0 up to rounding
        ABCD m = element_abcd({ElementKind::ShuntShortStub, w, l}, f, sub);
        CHECK(std::isfinite(m.c.imag()));
    }
}

TEST_CASE("cascade order and associativity", "[emsolve]") {
    SubstrateSpec sub = SubstrateSpec::ro4003c();
    const double f = 7.6;

    SECTION("identity times identity") {
        ABCD m = cascade({ABCD::identity(), ABCD::identity()});
        CHECK(m.a == complexd(1.0, 0.0));
        CHECK(m.d == complexd(1.0, 0.0));
    }
    SECTION("two eighth-wave lines equal one quarter-wave line") {
        const double w = 0.45;
        const auto ms = microstrip_params(w, sub);
        const double beta = 2.0 * std::numbers::pi * f * std::sqrt(ms.eps_eff) / kSpeedOfLightMMGHz;
        double l8 = (std::numbers::pi / 4.0) / beta;
        ABCD half = element_abcd({ElementKind::SeriesLine, w, l8}, f, sub);
        ABCD full = element_abcd({ElementKind::SeriesLine, w, 2.0 * l8}, f, sub);
        ABCD two = cascade({half, half});
        CHECK(std::abs(two.a - full.a) < 1e-12);
        CHECK(std::abs(two.b - full.b) < 1e-10);
        CHECK(std::abs(two.c - full.c) < 1e-12);
        CHECK(std::abs(two.d - full.d) < 1e-12);
    }
    SECTION("left fold equals right fold for a random 5-element chain") {
        Rng rng(11);
        std::vector<ABCD> ms;
        for (int i = 0; i < 5; ++i) {
            NetlistElement e{i % 2 ? ElementKind::ShuntOpenStub : ElementKind::SeriesLine,
                             rng.uniform(0.2, 1.2), rng.uniform(0.5, 4.0)};
            ms.push_back(element_abcd(e, f, sub));
        }
        ABCD left = cascade(ms);
        ABCD right = ABCD::identity();
        for (auto it = ms.rbegin(); it != ms.rend(); ++it) right = *it * right;
        CHECK(std::abs(left.a - right.a) < 1e-12);
        CHECK(std::abs(left.b - right.b) < 1e-10);
        CHECK(std::abs(left.c - right.c) < 1e-12);
        CHECK(std::abs(left.d - right.d) < 1e-12);
    }
}

TEST_CASE("abcd to s conversion", "[emsolve]") {
    SECTION("identity is a through connection") {
        S2x2 s = abcd_to_s(ABCD::identity());
        CHECK(std::abs(s.s11) < 1e-15);
        CHECK(std::abs(s.s21 - 1.0) < 1e-15);
        CHECK(std::abs(s.s12 - 1.0) < 1e-15);
        CHECK(std::abs(s.s22) < 1e-15);
    }
    SECTION("matched quarter-wave line gives S21 = -j") {
        SubstrateSpec sub = SubstrateSpec::ro4003c();
        double w = bisect_width_for_z0(50.0, sub);
        const auto ms = microstrip_params(w, sub);
        const double f = 10.0;
        const double beta = 2.0 * std::numbers::pi * f * std::sqrt(ms.eps_eff) / kSpeedOfLightMMGHz;
        ABCD m = element_abcd({ElementKind::SeriesLine, w, (std::numbers::pi / 2.0) / beta}, f, sub);
        S2x2 s = abcd_to_s(m);
        CHECK(std::abs(s.s11) < 1e-7);
        CHECK(std::abs(s.s21 - complexd(0.0, -1.0)) < 1e-7);
    }
    SECTION("series 50-ohm impedance") {
        ABCD m;
        m.b = complexd(50.0, 0.0);
        S2x2 s = abcd_to_s(m);
        CHECK(s.s11.real() == Approx(1.0 / 3.0));
        CHECK(s.s21.real() == Approx(2.0 / 3.0));
    }
}

TEST_CASE("solver physics on random instances", "[emsolve][property]") {
    SubstrateSpec sub = SubstrateSpec::ro4003c();
    const auto& freqs = FrequencyGrid::standard();
    FeedSet feeds = FeedSet::pair(0.0, 4.0625, 8.0, 4.0625);
    Rng rng(100);
    for (int iter = 0; iter < 40; ++iter) {
        auto family = static_cast<TemplateFamily>(rng.next_below(kFamilyCount));
        auto inst = sample_template(family, feeds, rng.next_u64());
        SParamSet sp = solve(inst, freqs, sub);
        for (int k = 0; k < kFreqCount; ++k) {
            complexd s11 = sp.at(SComponent::S11, k), s21 = sp.at(SComponent::S21, k);
            REQUIRE(sp.at(SComponent::S12, k) == s21);  // reciprocity, exact
            REQUIRE(std::abs(std::norm(s11) + std::norm(s21) - 1.0) < 1e-9);  // lossless
        }
    }
}

TEST_CASE("mline transmits everything; quarter-wave stub blocks", "[emsolve]") {
    SubstrateSpec sub = SubstrateSpec::ro4003c();
    const auto& freqs = FrequencyGrid::standard();
    FeedSet feeds = FeedSet::pair(0.0, 4.0625, 8.0, 4.0625);

    // A uniform line at the reference impedance transmits everything. (With
    // width steps the lossless cascade still conserves |S11|^2 + |S21|^2 but
    // reflects a little, so the unit-magnitude claim needs the matched case.)
    const double w50 = bisect_width_for_z0(50.0, sub);
    SParamSet sp = solve_netlist({{ElementKind::SeriesLine, w50, 8.0}}, freqs, sub);
    for (int k = 0; k < kFreqCount; ++k)
        REQUIRE(std::abs(sp.at(SComponent::S21, k)) == Approx(1.0).margin(1e-9));

    auto mline = sample_template(TemplateFamily::Mline, feeds, 5);
    SParamSet spm = solve(mline, freqs, sub);
    for (int k = 0; k < kFreqCount; ++k)
        REQUIRE(std::abs(spm.at(SComponent::S21, k)) > 0.9);

    // Open stub of length Ls short-circuits the line where beta * Ls = pi/2.
    const double ws = 0.4, ls = 3.0;
    auto inst = make_instance(TemplateFamily::OpenStubBsf, {0.45, ws, ls, 0.5}, feeds);
    const auto ms = microstrip_params(ws, sub);
    const double f_star = kSpeedOfLightMMGHz / (4.0 * ls * std::sqrt(ms.eps_eff));
    REQUIRE(f_star > 1.0);
    REQUIRE(f_star < 20.0);
    ABCD acc = ABCD::identity();
    for (const auto& e : inst.netlist) acc = acc * element_abcd(e, f_star, sub);
    S2x2 s = abcd_to_s(acc);
    CHECK(std::abs(s.s21) < 1e-6);
}

TEST_CASE("stepped LPF matches a 10x refined-grid recomputation", "[emsolve]") {
    SubstrateSpec sub = SubstrateSpec::ro4003c();
    FeedSet feeds = FeedSet::pair(0.0, 4.0625, 8.0, 4.0625);
    auto inst = sample_template(TemplateFamily::SteppedLpf, feeds, 21);
    const auto& freqs = FrequencyGrid::standard();
    SParamSet sp = solve(inst, freqs, sub);

    // Brute-force recomputation on a 10x grid; coarse samples must coincide.
    for (int k = 0; k < kFreqCount; ++k) {
        int fine_idx = 10 * k;
        double f = 1.0 + (19.0 / 500.0) * fine_idx;
        REQUIRE(f == Approx(freqs.f_ghz[k]).margin(1e-9));
        f = freqs.f_ghz[k];  // evaluate at the exact shared frequency
        ABCD acc = ABCD::identity();
        for (const auto& e : inst.netlist) acc = acc * element_abcd(e, f, sub);
        S2x2 s = abcd_to_s(acc);
        REQUIRE(std::abs(s.s21 - sp.at(SComponent::S21, k)) < 1e-12);
    }
    // Low-pass sanity: passband at the bottom of the band.
    CHECK(std::abs(sp.at(SComponent::S21, 0)) > 0.7);
}

TEST_CASE("touchstone round trips", "[emsolve][touchstone]") {
    SubstrateSpec sub = SubstrateSpec::ro4003c();
    FeedSet feeds = FeedSet::pair(0.0, 4.0625, 8.0, 4.0625);
    auto inst = sample_template(TemplateFamily::OpenStubBsf, feeds, 9);
    SParamSet sp = solve(inst, FrequencyGrid::standard(), sub);

    for (auto fmt : {TouchstoneFormat::RI, TouchstoneFormat::MA, TouchstoneFormat::DB}) {
        std::string p1 = tmp_path("rfgen_ts_a.s2p"), p2 = tmp_path("rfgen_ts_b.s2p");
        touchstone_write(sp, p1, fmt);
        SParamSet rd = touchstone_read(p1);
        for (int c = 0; c < 4; ++c)
            for (int k = 0; k < kFreqCount; ++k) {
                REQUIRE(rd.valid[c][k]);
                REQUIRE(std::abs(rd.data[c][k] - sp.data[c][k]) <
                        1e-6 * std::max(1.0, std::abs(sp.data[c][k])));
            }
        // write -> read -> write is byte-identical.
        touchstone_write(rd, p2, fmt);
        REQUIRE(slurp(p1) == slurp(p2));
    }
}

TEST_CASE("touchstone parsing details", "[emsolve][touchstone]") {
    SECTION("MA row mag=1 ang=-90 is -j") {
        std::string p = tmp_path("rfgen_ts_ma.s2p");
        std::ofstream(p) << "# GHz S MA R 50\n1.0 1 -90 1 -90 1 -90 1 -90\n20.0 1 -90 1 -90 1 -90 1 -90\n";
        SParamSet sp = touchstone_read(p);
        CHECK(sp.at(SComponent::S11, 0).real() == Approx(0.0).margin(1e-12));
        CHECK(sp.at(SComponent::S11, 0).imag() == Approx(-1.0));
    }
    SECTION("file covering 5-20 GHz masks the grid points below 5") {
        std::string p = tmp_path("rfgen_ts_hi.s2p");
        std::ofstream(p) << "# GHz S RI R 50\n5.0 0 0 1 0 1 0 0 0\n20.0 0 0 0.5 0 0.5 0 0 0\n";
        SParamSet sp = touchstone_read(p);
        const auto& f = FrequencyGrid::standard();
        for (int k = 0; k < kFreqCount; ++k) {
            bool in_range = f.f_ghz[k] >= 5.0 - 1e-9;
            REQUIRE(sp.valid[0][k] == in_range);
        }
        // Linear interpolation between the two rows.
        int k10 = 24;  // 1 + 0.38*24 = 10.12 GHz
        double t = (f.f_ghz[k10] - 5.0) / 15.0;
        CHECK(sp.at(SComponent::S21, k10).real() == Approx(1.0 + t * (0.5 - 1.0)));
    }
    SECTION("errors carry line numbers") {
        std::string p = tmp_path("rfgen_ts_bad.s2p");
        std::ofstream(p) << "# GHz X RI R 50\n";
        CHECK_THROWS_AS(touchstone_read(p), TouchstoneError);

        std::ofstream(p) << "# GHz S RI R 50\n2.0 0 0 1 0 1 0 0 0\n1.0 0 0 1 0 1 0 0 0\n";
        try {
            touchstone_read(p);
            FAIL("expected TouchstoneError");
        } catch (const TouchstoneError& e) {
            CHECK(e.line == 3);
        }

        std::ofstream(p) << "# GHz S RI R 50\n1.0 0 0\n";
        CHECK_THROWS_AS(touchstone_read(p), TouchstoneError);  // not a two-port row
    }
    SECTION("masked components survive the round trip") {
        SParamSet sp;
        for (int k = 0; k < kFreqCount; ++k) {
            sp.set(SComponent::S11, k, complexd(0.3, -0.1));
            sp.set(SComponent::S21, k, complexd(0.5, 0.2));
        }
        std::string p = tmp_path("rfgen_ts_mask.s2p");
        touchstone_write(sp, p, TouchstoneFormat::RI);
        SParamSet rd = touchstone_read(p);
        CHECK(rd.component_valid(0));
        CHECK(rd.component_valid(1));
        CHECK_FALSE(rd.component_valid(2));
        CHECK_FALSE(rd.component_valid(3));
    }
}
