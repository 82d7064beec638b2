#pragma once

// =============================================================================
// S-parameter-preserving dataset augmentations
// =============================================================================
// Rotations, reflections and isolated structures leave the stored SParamSet
// bit-identical; port swap permutes components by the port transposition.
// =============================================================================

#include <array>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rfgen/core.hpp"
#include "rfgen/raster.hpp"
#include "rfgen/rng.hpp"
#include "rfgen/templates.hpp"

namespace rfgen {

/// Rotate layout and feeds by 90 degrees k times; each application maps a
/// board point (x, y) to (y, side - x).
inline std::pair<BoardLayout, FeedSet> rotate90(const BoardLayout& layout, const FeedSet& feeds,
                                                int k) {
    k = ((k % 4) + 4) % 4;
    BoardLayout cur = layout;
    FeedSet f = feeds;
    const int n = layout.grid.n;
    const double side = layout.grid.side_mm();
    for (int r = 0; r < k; ++r) {
        BoardLayout next(cur.grid);
        for (int iy = 0; iy < n; ++iy) {
            for (int ix = 0; ix < n; ++ix) {
                next.metal[next.idx(iy, n - 1 - ix)] = cur.metal[cur.idx(ix, iy)];
                next.via[next.idx(iy, n - 1 - ix)] = cur.via[cur.idx(ix, iy)];
            }
        }
        cur = std::move(next);
        for (int p = 0; p < 2; ++p) {
            if (!f.active[p]) continue;
            double x = f.ports[p].x_mm, y = f.ports[p].y_mm;
            f.ports[p] = {y, side - x};
        }
    }
    return {cur, f};
}

enum class ReflectAxis { H, V };

/// Mirror the board: V maps x to side - x, H maps y to side - y.
inline std::pair<BoardLayout, FeedSet> reflect(const BoardLayout& layout, const FeedSet& feeds,
                                               ReflectAxis axis) {
    const int n = layout.grid.n;
    const double side = layout.grid.side_mm();
    BoardLayout out(layout.grid);
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            int jx = axis == ReflectAxis::V ? n - 1 - ix : ix;
            int jy = axis == ReflectAxis::H ? n - 1 - iy : iy;
            out.metal[out.idx(jx, jy)] = layout.metal[layout.idx(ix, iy)];
            out.via[out.idx(jx, jy)] = layout.via[layout.idx(ix, iy)];
        }
    }
    FeedSet f = feeds;
    for (int p = 0; p < 2; ++p) {
        if (!f.active[p]) continue;
        if (axis == ReflectAxis::V) f.ports[p].x_mm = side - f.ports[p].x_mm;
        else f.ports[p].y_mm = side - f.ports[p].y_mm;
    }
    return {out, f};
}

/// Swap the two ports; S components and masks are permuted by the
/// transposition (S11<->S22, S21<->S12).
inline std::pair<FeedSet, SParamSet> port_swap(const FeedSet& feeds, const SParamSet& sp) {
    if (feeds.active_count() != 2)
        throw std::invalid_argument("port_swap: two active ports required");
    FeedSet f = feeds;
    std::swap(f.ports[0], f.ports[1]);
    SParamSet out;
    auto copy = [&](SComponent dst, SComponent src) {
        out.data[static_cast<int>(dst)] = sp.data[static_cast<int>(src)];
        out.valid[static_cast<int>(dst)] = sp.valid[static_cast<int>(src)];
    };
    copy(SComponent::S11, SComponent::S22);
    copy(SComponent::S22, SComponent::S11);
    copy(SComponent::S21, SComponent::S12);
    copy(SComponent::S12, SComponent::S21);
    return {f, out};
}

struct IsolatedResult {
    BoardLayout layout;
    bool skipped = false;
};

/// Add 1-3 random rectangles that stay at least 2 pixels (Chebyshev) away
/// from existing metal and from the feed pads, so the netlist (and hence the
/// stored S-parameters) is untouched. Returns the input unchanged with
/// `skipped` set when 64 attempts find no placement.
inline IsolatedResult add_isolated_structure(const BoardLayout& layout, const FeedSet& feeds,
                                             std::uint64_t seed) {
    const int n = layout.grid.n;
    const double side = layout.grid.side_mm();
    Rng rng(seed);

    // Obstacle map: prior metal plus feed pads.
    std::vector<char> blocked(static_cast<std::size_t>(n) * n, 0);
    for (std::size_t i = 0; i < blocked.size(); ++i)
        if (layout.metal[i] >= 0.01) blocked[i] = 1;
    for (int p = 0; p < 2; ++p) {
        if (!feeds.active[p]) continue;
        auto [ix, iy] = layout.grid.pixel_of(feeds.ports[p].x_mm, feeds.ports[p].y_mm);
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                int jx = ix + dx, jy = iy + dy;
                if (jx >= 0 && jx < n && jy >= 0 && jy < n)
                    blocked[static_cast<std::size_t>(jy) * n + jx] = 1;
            }
    }

    for (int attempt = 0; attempt < 64; ++attempt) {
        int count = 1 + static_cast<int>(rng.next_below(3));
        std::vector<RectMM> add;
        bool bad = false;
        for (int r = 0; r < count && !bad; ++r) {
            double w = rng.uniform(0.25, 1.5), h = rng.uniform(0.25, 1.5);
            if (w >= side || h >= side) {
                bad = true;
                break;
            }
            double x0 = rng.uniform(0.0, side - w), y0 = rng.uniform(0.0, side - h);
            add.push_back(RectMM(x0, y0, x0 + w, y0 + h));
        }
        if (bad) continue;
        std::vector<double> cover = rasterize_rects(add, layout.grid);
        bool ok = true;
        for (int iy = 0; iy < n && ok; ++iy) {
            for (int ix = 0; ix < n && ok; ++ix) {
                if (cover[static_cast<std::size_t>(iy) * n + ix] <= 0.0) continue;
                for (int dy = -1; dy <= 1 && ok; ++dy)
                    for (int dx = -1; dx <= 1 && ok; ++dx) {
                        int jx = ix + dx, jy = iy + dy;
                        if (jx < 0 || jx >= n || jy < 0 || jy >= n) continue;
                        if (blocked[static_cast<std::size_t>(jy) * n + jx]) ok = false;
                    }
            }
        }
        if (!ok) continue;
        IsolatedResult res{layout, false};
        for (std::size_t i = 0; i < cover.size(); ++i)
            res.layout.metal[i] = std::max(res.layout.metal[i], cover[i]);
        return res;
    }
    return {layout, true};
}

}  // namespace rfgen
