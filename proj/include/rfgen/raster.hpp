#pragma once

// =============================================================================
// Exact area-coverage rasterization of axis-aligned rectangles and vias
// =============================================================================
// Rect coverage is exact for unions: per pixel row strip, the strip is cut at
// every rect y-edge so the active set is constant per sub-strip, and the 1-D
// x-interval union gives the covered cross length. Via coverage uses 4x4
// subpixel sampling; vias are positional indicators and 5% accuracy is enough.
// =============================================================================

#include <algorithm>
#include <bit>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rfgen/core.hpp"

namespace rfgen {

/// Axis-aligned rectangle in board millimetres.
struct RectMM {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

    RectMM() = default;
    RectMM(double x0_, double y0_, double x1_, double y1_) : x0(x0_), y0(y0_), x1(x1_), y1(y1_) {
        if (!(x0 < x1) || !(y0 < y1))
            throw std::invalid_argument("RectMM: requires x0 < x1 and y0 < y1");
    }

    [[nodiscard]] double width() const noexcept { return x1 - x0; }
    [[nodiscard]] double height() const noexcept { return y1 - y0; }
    [[nodiscard]] double area() const noexcept { return width() * height(); }
};

struct ViaMM {
    double cx = 0.0, cy = 0.0;
    double radius_mm = 0.0;

    ViaMM() = default;
    ViaMM(double cx_, double cy_, double r) : cx(cx_), cy(cy_), radius_mm(r) {
        if (!(radius_mm > 0.0)) throw std::invalid_argument("ViaMM: radius must be > 0");
    }
};

namespace detail {

/// Total length of the union of 1-D intervals. Modifies its argument.
inline double interval_union_length(std::vector<std::pair<double, double>>& iv) {
    if (iv.empty()) return 0.0;
    std::sort(iv.begin(), iv.end());
    double total = 0.0, lo = iv[0].first, hi = iv[0].second;
    for (std::size_t i = 1; i < iv.size(); ++i) {
        if (iv[i].first > hi) {
            total += hi - lo;
            lo = iv[i].first;
            hi = iv[i].second;
        } else {
            hi = std::max(hi, iv[i].second);
        }
    }
    return total + (hi - lo);
}

}  // namespace detail

/// Exact area of the union of a set of rectangles.
inline double rect_union_area(const std::vector<RectMM>& rects) {
    if (rects.empty()) return 0.0;
    std::vector<double> ycuts;
    ycuts.reserve(rects.size() * 2);
    for (const auto& r : rects) {
        ycuts.push_back(r.y0);
        ycuts.push_back(r.y1);
    }
    std::sort(ycuts.begin(), ycuts.end());
    ycuts.erase(std::unique(ycuts.begin(), ycuts.end()), ycuts.end());

    double area = 0.0;
    std::vector<std::pair<double, double>> xs;
    for (std::size_t s = 0; s + 1 < ycuts.size(); ++s) {
        double ya = ycuts[s], yb = ycuts[s + 1];
        xs.clear();
        for (const auto& r : rects)
            if (r.y0 <= ya && r.y1 >= yb) xs.emplace_back(r.x0, r.x1);
        if (!xs.empty()) area += detail::interval_union_length(xs) * (yb - ya);
    }
    return area;
}

/// True when `probe` is entirely inside the union of `rects` (up to tol).
inline bool rect_union_covers(const RectMM& probe, const std::vector<RectMM>& rects,
                              double tol = 1e-9) {
    std::vector<RectMM> clipped;
    for (const auto& r : rects) {
        double x0 = std::max(r.x0, probe.x0), x1 = std::min(r.x1, probe.x1);
        double y0 = std::max(r.y0, probe.y0), y1 = std::min(r.y1, probe.y1);
        if (x0 < x1 && y0 < y1) clipped.push_back(RectMM(x0, y0, x1, y1));
    }
    return rect_union_area(clipped) >= probe.area() - tol;
}

/// Exact union coverage of `rects` on the grid; each pixel value is the
/// covered fraction of that pixel, in [0, 1]. Rects are clipped to the board;
/// rects fully outside contribute nothing.
inline std::vector<double> rasterize_rects(const std::vector<RectMM>& rects,
                                           const BoardGrid& grid) {
    const int n = grid.n;
    const double p = grid.pitch_mm;
    const double side = grid.side_mm();
    std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);

    std::vector<RectMM> clipped;
    clipped.reserve(rects.size());
    for (const auto& r : rects) {
        double x0 = std::max(r.x0, 0.0), x1 = std::min(r.x1, side);
        double y0 = std::max(r.y0, 0.0), y1 = std::min(r.y1, side);
        if (x0 < x1 && y0 < y1) clipped.push_back(RectMM(x0, y0, x1, y1));
    }
    if (clipped.empty()) return out;

    const double inv_area = 1.0 / (p * p);
    std::vector<double> ycuts;
    std::vector<std::pair<double, double>> xs;
    for (int iy = 0; iy < n; ++iy) {
        const double strip_lo = iy * p, strip_hi = (iy + 1) * p;
        ycuts.clear();
        ycuts.push_back(strip_lo);
        ycuts.push_back(strip_hi);
        bool any = false;
        for (const auto& r : clipped) {
            if (r.y1 <= strip_lo || r.y0 >= strip_hi) continue;
            any = true;
            if (r.y0 > strip_lo) ycuts.push_back(r.y0);
            if (r.y1 < strip_hi) ycuts.push_back(r.y1);
        }
        if (!any) continue;
        std::sort(ycuts.begin(), ycuts.end());
        ycuts.erase(std::unique(ycuts.begin(), ycuts.end()), ycuts.end());

        for (std::size_t s = 0; s + 1 < ycuts.size(); ++s) {
            const double ya = ycuts[s], yb = ycuts[s + 1];
            xs.clear();
            for (const auto& r : clipped)
                if (r.y0 <= ya && r.y1 >= yb) xs.emplace_back(r.x0, r.x1);
            if (xs.empty()) continue;
            std::sort(xs.begin(), xs.end());
            // Merge and deposit per pixel.
            double lo = xs[0].first, hi = xs[0].second;
            auto deposit = [&](double a, double b) {
                int ix0 = std::max(0, static_cast<int>(std::floor(a / p)));
                int ix1 = std::min(n - 1, static_cast<int>(std::ceil(b / p)) - 1);
                for (int ix = ix0; ix <= ix1; ++ix) {
                    double ov = std::min(b, (ix + 1) * p) - std::max(a, ix * p);
                    if (ov > 0.0)
                        out[static_cast<std::size_t>(iy) * n + ix] += ov * (yb - ya) * inv_area;
                }
            };
            for (std::size_t i = 1; i < xs.size(); ++i) {
                if (xs[i].first > hi) {
                    deposit(lo, hi);
                    lo = xs[i].first;
                    hi = xs[i].second;
                } else {
                    hi = std::max(hi, xs[i].second);
                }
            }
            deposit(lo, hi);
        }
    }
    for (double& v : out) v = std::clamp(v, 0.0, 1.0);
    return out;
}

/// Disc coverage via 4x4 subpixel sampling of the union of vias.
inline std::vector<double> rasterize_vias(const std::vector<ViaMM>& vias, const BoardGrid& grid) {
    const int n = grid.n;
    const double p = grid.pitch_mm;
    std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
    if (vias.empty()) return out;

    // One 16-bit hit mask per pixel keeps union semantics across vias.
    std::vector<std::uint16_t> mask(static_cast<std::size_t>(n) * n, 0);
    for (const auto& v : vias) {
        int ix0 = std::max(0, static_cast<int>(std::floor((v.cx - v.radius_mm) / p)));
        int ix1 = std::min(n - 1, static_cast<int>(std::floor((v.cx + v.radius_mm) / p)));
        int iy0 = std::max(0, static_cast<int>(std::floor((v.cy - v.radius_mm) / p)));
        int iy1 = std::min(n - 1, static_cast<int>(std::floor((v.cy + v.radius_mm) / p)));
        const double r2 = v.radius_mm * v.radius_mm;
        for (int iy = iy0; iy <= iy1; ++iy) {
            for (int ix = ix0; ix <= ix1; ++ix) {
                std::uint16_t bits = 0;
                for (int sj = 0; sj < 4; ++sj) {
                    double sy = (iy + (sj + 0.5) / 4.0) * p - v.cy;
                    for (int si = 0; si < 4; ++si) {
                        double sx = (ix + (si + 0.5) / 4.0) * p - v.cx;
                        if (sx * sx + sy * sy <= r2) bits |= static_cast<std::uint16_t>(1u << (4 * sj + si));
                    }
                }
                mask[static_cast<std::size_t>(iy) * n + ix] |= bits;
            }
        }
    }
    for (std::size_t i = 0; i < mask.size(); ++i)
        out[i] = std::popcount(static_cast<unsigned>(mask[i])) / 16.0;
    return out;
}

/// A board is feed-valid when every active port pixel has metal >= 0.5 and
/// at least one 4-neighbor >= 0.5.
inline bool feed_valid(const BoardLayout& layout, const FeedSet& feeds) {
    const int n = layout.grid.n;
    for (int pI = 0; pI < 2; ++pI) {
        if (!feeds.active[pI]) continue;
        auto [ix, iy] = layout.grid.pixel_of(feeds.ports[pI].x_mm, feeds.ports[pI].y_mm);
        if (layout.metal_at(ix, iy) < 0.5) return false;
        bool neighbor = false;
        const int dx[4] = {1, -1, 0, 0};
        const int dy[4] = {0, 0, 1, -1};
        for (int d = 0; d < 4; ++d) {
            int jx = ix + dx[d], jy = iy + dy[d];
            if (jx < 0 || jx >= n || jy < 0 || jy >= n) continue;
            if (layout.metal_at(jx, jy) >= 0.5) {
                neighbor = true;
                break;
            }
        }
        if (!neighbor) return false;
    }
    return true;
}

}  // namespace rfgen
