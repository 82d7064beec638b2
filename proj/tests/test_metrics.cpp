#include <catch_amalgamated.hpp>

#include "rfgen/metrics.hpp"
#include "rfgen/rng.hpp"

#include <cmath>

using namespace rfgen;
using Catch::Approx;

namespace {

SParamSet random_sparams(std::uint64_t seed, bool all_valid = true) {
    Rng rng(seed);
    SParamSet sp;
    for (int c = 0; c < 4; ++c)
        for (int k = 0; k < kFreqCount; ++k)
            sp.set(static_cast<SComponent>(c), k,
                   complexd(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)), all_valid);
    return sp;
}

}  // namespace

TEST_CASE("rmse basics", "[metrics]") {
    SParamSet tgt = random_sparams(1);
    CHECK(rmse_ri(tgt, tgt) == 0.0);

    SParamSet off = tgt;
    for (int c = 0; c < 4; ++c)
        for (int k = 0; k < kFreqCount; ++k) off.data[c][k] += complexd(0.1, 0.1);
    CHECK(rmse_ri(off, tgt) == Approx(0.1).epsilon(1e-12));

    SParamSet none;
    CHECK_THROWS_AS(rmse_ri(tgt, none), std::invalid_argument);
}

TEST_CASE("rmse matches a brute-force double loop", "[metrics][property]") {
    Rng rng(2);
    for (int iter = 0; iter < 20; ++iter) {
        SParamSet a = random_sparams(rng.next_u64());
        SParamSet b = random_sparams(rng.next_u64());
        // Knock out a random subset of target entries.
        for (int c = 0; c < 4; ++c)
            for (int k = 0; k < kFreqCount; ++k)
                if (rng.uniform() < 0.3) b.valid[c][k] = false;
        if (!b.any_valid()) continue;

        double sum = 0.0;
        long cnt = 0;
        for (int c = 0; c < 4; ++c)
            for (int k = 0; k < kFreqCount; ++k) {
                if (!b.valid[c][k]) continue;
                double dre = a.data[c][k].real() - b.data[c][k].real();
                double dim = a.data[c][k].imag() - b.data[c][k].imag();
                sum += dre * dre;
                sum += dim * dim;
                cnt += 2;
            }
        REQUIRE(std::abs(rmse_ri(a, b) - std::sqrt(sum / cnt)) < 1e-12);
    }
}

TEST_CASE("wmae weighting", "[metrics]") {
    CHECK(wmae_weight(-10.0) == 1.0);
    CHECK(wmae_weight(-20.0) == 1.0);
    CHECK(wmae_weight(-30.0) == Approx(0.5));
    CHECK(wmae_weight(-40.0) == 0.1);
    CHECK(wmae_weight(-70.0) == 0.1);

    SECTION("single valid point, tgt -10 dB, pred -12 dB") {
        SParamSet tgt, pred;
        tgt.set(SComponent::S21, 0, std::polar(std::pow(10.0, -10.0 / 20.0), 0.0));
        pred.set(SComponent::S21, 0, std::polar(std::pow(10.0, -12.0 / 20.0), 0.0));
        CHECK(wmae_db(pred, tgt) == Approx(2.0).epsilon(1e-9));
    }
    SECTION("deep-stopband point is down-weighted to 0.1") {
        SParamSet tgt, pred;
        // Point A: -40 dB target with 10 dB error. Point B: -10 dB, exact.
        tgt.set(SComponent::S21, 0, std::polar(1e-2, 0.0));
        pred.set(SComponent::S21, 0, std::polar(std::pow(10.0, -50.0 / 20.0), 0.0));
        tgt.set(SComponent::S21, 1, std::polar(std::pow(10.0, -10.0 / 20.0), 0.0));
        pred.set(SComponent::S21, 1, std::polar(std::pow(10.0, -10.0 / 20.0), 0.0));
        CHECK(wmae_db(pred, tgt) == Approx(0.1 * 10.0 / 1.1).epsilon(1e-9));
    }
    SECTION("pred = tgt gives zero") {
        SParamSet tgt = random_sparams(3);
        CHECK(wmae_db(tgt, tgt) == 0.0);
    }
    SECTION("invalid-masked entries cannot move the metric") {
        SParamSet tgt = random_sparams(4);
        for (int k = 0; k < kFreqCount; ++k) tgt.valid[2][k] = false;
        SParamSet pred = random_sparams(5);
        double before = wmae_db(pred, tgt);
        for (int k = 0; k < kFreqCount; ++k) pred.data[2][k] = complexd(123.0, -9.0);
        CHECK(wmae_db(pred, tgt) == before);
    }
}

TEST_CASE("candidate ranking order", "[metrics]") {
    BoardGrid grid;
    FeedSet feeds = FeedSet::single(4.0, 4.0);
    SParamSet tgt = random_sparams(10);

    BoardLayout valid_board(grid);
    std::fill(valid_board.metal.begin(), valid_board.metal.end(), 1.0);
    BoardLayout invalid_board(grid);

    SParamSet close = tgt;
    close.data[0][0] += complexd(0.01, 0.0);
    SParamSet far = tgt;
    for (int c = 0; c < 4; ++c)
        for (int k = 0; k < kFreqCount; ++k) far.data[c][k] += complexd(0.5, 0.5);

    SECTION("equal-to-target ranks first") {
        std::vector<std::pair<BoardLayout, std::optional<SParamSet>>> cands{
            {valid_board, far}, {valid_board, tgt}, {valid_board, close}};
        auto rows = rank_candidates(cands, tgt, feeds);
        CHECK(rows[0].index == 1);
        CHECK(rows[0].rmse == 0.0);
        CHECK(rows[1].index == 2);
        CHECK(rows[2].index == 0);
    }
    SECTION("all NoFit preserves input order") {
        std::vector<std::pair<BoardLayout, std::optional<SParamSet>>> cands{
            {valid_board, std::nullopt}, {valid_board, std::nullopt}, {valid_board, std::nullopt}};
        auto rows = rank_candidates(cands, tgt, feeds);
        CHECK(rows[0].index == 0);
        CHECK(rows[1].index == 1);
        CHECK(rows[2].index == 2);
        CHECK(std::isnan(rows[0].rmse));
    }
    SECTION("valid before NoFit before feed-invalid") {
        std::vector<std::pair<BoardLayout, std::optional<SParamSet>>> cands{
            {invalid_board, close},          // feed-invalid, fit
            {valid_board, std::nullopt},     // NoFit
            {valid_board, far},              // fit + valid
        };
        auto rows = rank_candidates(cands, tgt, feeds);
        CHECK(rows[0].index == 2);
        CHECK(rows[1].index == 1);
        CHECK(rows[2].index == 0);
    }
}

TEST_CASE("valid rate counts boards", "[metrics]") {
    BoardGrid grid;
    FeedSet feeds = FeedSet::single(4.0, 4.0);
    BoardLayout good(grid), bad(grid);
    std::fill(good.metal.begin(), good.metal.end(), 1.0);
    CHECK(valid_rate({good, good, good}, feeds) == 1.0);
    CHECK(valid_rate({bad, bad}, feeds) == 0.0);
    CHECK(valid_rate({good, good, good, bad}, feeds) == Approx(0.75));
}
