#pragma once

// =============================================================================
// Candidate quality metrics and ranking
// =============================================================================

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rfgen/core.hpp"
#include "rfgen/raster.hpp"

namespace rfgen {

/// RMSE over the real/imaginary parts of every (component, frequency) pair
/// valid in the target.
inline double rmse_ri(const SParamSet& pred, const SParamSet& tgt) {
    double sum = 0.0;
    long count = 0;
    for (int c = 0; c < 4; ++c) {
        for (int k = 0; k < kFreqCount; ++k) {
            if (!tgt.valid[c][k]) continue;
            complexd d = pred.data[c][k] - tgt.data[c][k];
            sum += d.real() * d.real() + d.imag() * d.imag();
            count += 2;
        }
    }
    if (count == 0) throw std::invalid_argument("rmse_ri: no valid target entries");
    return std::sqrt(sum / count);
}

/// Weight ramp for the magnitude MAE: full weight at and above -20 dB,
/// linear down to the 0.1 floor below.
inline double wmae_weight(double target_db) {
    return std::clamp((target_db + 40.0) / 20.0, 0.1, 1.0);
}

/// Weighted magnitude MAE in dB over valid target entries; magnitudes are
/// floored at -80 dB before the dB conversion.
inline double wmae_db(const SParamSet& pred, const SParamSet& tgt) {
    double num = 0.0, den = 0.0;
    long count = 0;
    for (int c = 0; c < 4; ++c) {
        for (int k = 0; k < kFreqCount; ++k) {
            if (!tgt.valid[c][k]) continue;
            double tdb = mag_db_floored(tgt.data[c][k]);
            double pdb = mag_db_floored(pred.data[c][k]);
            double w = wmae_weight(tdb);
            num += w * std::abs(pdb - tdb);
            den += w;
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("wmae_db: no valid target entries");
    return num / den;
}

struct RankedCandidate {
    int index = 0;       // position in the input list
    double rmse = std::numeric_limits<double>::quiet_NaN();
    double wmae = std::numeric_limits<double>::quiet_NaN();
    bool feed_ok = false;
    bool nofit = false;
};

/// Order candidates by ascending RMSE; NoFit candidates sort after every fit
/// one, feed-invalid candidates after those. The sort is stable.
inline std::vector<RankedCandidate> rank_candidates(
    const std::vector<std::pair<BoardLayout, std::optional<SParamSet>>>& cands,
    const SParamSet& tgt, const FeedSet& feeds) {
    if (cands.empty()) throw std::invalid_argument("rank_candidates: empty candidate list");
    std::vector<RankedCandidate> rows;
    rows.reserve(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) {
        RankedCandidate r;
        r.index = static_cast<int>(i);
        r.feed_ok = feed_valid(cands[i].first, feeds);
        r.nofit = !cands[i].second.has_value();
        if (!r.nofit) {
            r.rmse = rmse_ri(*cands[i].second, tgt);
            r.wmae = wmae_db(*cands[i].second, tgt);
        }
        rows.push_back(r);
    }
    auto cls = [](const RankedCandidate& r) { return !r.feed_ok ? 2 : (r.nofit ? 1 : 0); };
    std::stable_sort(rows.begin(), rows.end(), [&](const RankedCandidate& a, const RankedCandidate& b) {
        int ca = cls(a), cb = cls(b);
        if (ca != cb) return ca < cb;
        if (ca == 0) return a.rmse < b.rmse;
        return false;  // stable within NoFit / invalid classes
    });
    return rows;
}

inline double valid_rate(const std::vector<BoardLayout>& layouts, const FeedSet& feeds) {
    if (layouts.empty()) return 0.0;
    int ok = 0;
    for (const auto& l : layouts)
        if (feed_valid(l, feeds)) ++ok;
    return static_cast<double>(ok) / static_cast<double>(layouts.size());
}

}  // namespace rfgen
