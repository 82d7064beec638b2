#pragma once

// =============================================================================
// Grayscale-to-rectangles conversion and fabrication export
// =============================================================================
// extract_rects peels maximal axis-aligned rectangles off the binarized mask
// (largest-rectangle-under-histogram sweep), so the output tiles the mask
// exactly. refine_rects then runs coordinate descent on every rect edge
// against the grayscale target; per-pixel coverage is piecewise-linear in
// each edge position, giving an analytic descent direction, and a
// backtracking line search keeps the exact objective non-increasing.
// =============================================================================

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfgen/core.hpp"
#include "rfgen/raster.hpp"

namespace rfgen {

/// Greedy maximal-rectangle decomposition of the thresholded metal mask.
/// Returned rects are pairwise interior-disjoint and cover the binary mask
/// exactly; coordinates are pixel-aligned millimetres.
inline std::vector<RectMM> extract_rects(const std::vector<double>& metal, const BoardGrid& grid,
                                         double threshold = 0.5) {
    const int n = grid.n;
    if (metal.size() != static_cast<std::size_t>(n) * n)
        throw std::invalid_argument("extract_rects: metal plane size mismatch");
    std::vector<char> mask(metal.size());
    std::size_t remaining = 0;
    for (std::size_t i = 0; i < metal.size(); ++i) {
        mask[i] = metal[i] >= threshold ? 1 : 0;
        remaining += mask[i];
    }

    std::vector<RectMM> out;
    std::vector<int> height(n);
    std::vector<int> stack;
    while (remaining > 0) {
        // Largest rectangle of ones via the histogram sweep.
        long best_area = 0;
        int bx0 = 0, bx1 = 0, by0 = 0, by1 = 0;
        std::fill(height.begin(), height.end(), 0);
        for (int iy = 0; iy < n; ++iy) {
            for (int ix = 0; ix < n; ++ix)
                height[ix] = mask[static_cast<std::size_t>(iy) * n + ix] ? height[ix] + 1 : 0;
            stack.clear();
            for (int ix = 0; ix <= n; ++ix) {
                int h = ix < n ? height[ix] : 0;
                while (!stack.empty() && height[stack.back()] >= h) {
                    int th = height[stack.back()];
                    stack.pop_back();
                    int left = stack.empty() ? 0 : stack.back() + 1;
                    long area = static_cast<long>(th) * (ix - left);
                    if (area > best_area) {
                        best_area = area;
                        bx0 = left;
                        bx1 = ix - 1;
                        by0 = iy - th + 1;
                        by1 = iy;
                    }
                }
                stack.push_back(ix);
            }
        }
        for (int iy = by0; iy <= by1; ++iy)
            for (int ix = bx0; ix <= bx1; ++ix) mask[static_cast<std::size_t>(iy) * n + ix] = 0;
        remaining -= static_cast<std::size_t>(best_area);
        const double p = grid.pitch_mm;
        out.push_back(RectMM(bx0 * p, by0 * p, (bx1 + 1) * p, (by1 + 1) * p));
    }
    return out;
}

namespace detail {

/// Coverage of all rects over one pixel, exact.
inline double pixel_coverage(const std::vector<RectMM>& rects, const BoardGrid& grid, int ix,
                             int iy) {
    const double p = grid.pitch_mm;
    const double px0 = ix * p, px1 = (ix + 1) * p, py0 = iy * p, py1 = (iy + 1) * p;
    std::vector<RectMM> clipped;
    for (const auto& r : rects) {
        double x0 = std::max(r.x0, px0), x1 = std::min(r.x1, px1);
        double y0 = std::max(r.y0, py0), y1 = std::min(r.y1, py1);
        if (x0 < x1 && y0 < y1) clipped.push_back(RectMM(x0, y0, x1, y1));
    }
    if (clipped.empty()) return 0.0;
    return rect_union_area(clipped) / (p * p);
}

struct RefineState {
    const BoardGrid& grid;
    const std::vector<double>& target;
    std::vector<RectMM> rects;
    std::vector<double> render;
    double f = 0.0;

    RefineState(const BoardGrid& g, const std::vector<double>& tgt, std::vector<RectMM> rs)
        : grid(g), target(tgt), rects(std::move(rs)) {
        render = rasterize_rects(rects, grid);
        f = 0.0;
        for (std::size_t i = 0; i < render.size(); ++i) {
            double d = render[i] - target[i];
            f += d * d;
        }
    }

    /// Objective delta from recomputing coverage over a pixel window, with
    /// the candidate rect set already in place.
    double try_window(int wx0, int wx1, int wy0, int wy1, std::vector<double>& patch) const {
        const int n = grid.n;
        wx0 = std::max(wx0, 0);
        wy0 = std::max(wy0, 0);
        wx1 = std::min(wx1, n - 1);
        wy1 = std::min(wy1, n - 1);
        patch.clear();
        double delta = 0.0;
        for (int iy = wy0; iy <= wy1; ++iy) {
            for (int ix = wx0; ix <= wx1; ++ix) {
                double cov = pixel_coverage(rects, grid, ix, iy);
                patch.push_back(cov);
                double t = target[static_cast<std::size_t>(iy) * n + ix];
                double old = render[static_cast<std::size_t>(iy) * n + ix];
                delta += (cov - t) * (cov - t) - (old - t) * (old - t);
            }
        }
        return delta;
    }

    void commit_window(int wx0, int wx1, int wy0, int wy1, const std::vector<double>& patch,
                       double delta) {
        const int n = grid.n;
        wx0 = std::max(wx0, 0);
        wy0 = std::max(wy0, 0);
        wx1 = std::min(wx1, n - 1);
        wy1 = std::min(wy1, n - 1);
        std::size_t k = 0;
        for (int iy = wy0; iy <= wy1; ++iy)
            for (int ix = wx0; ix <= wx1; ++ix)
                render[static_cast<std::size_t>(iy) * n + ix] = patch[k++];
        f += delta;
    }
};

}  // namespace detail

/// Coordinate descent on each rect edge against the grayscale target.
/// F = sum((render - target)^2) never increases on an accepted step; stops
/// after `iters` sweeps or when a full sweep improves F by less than 1e-10.
inline std::vector<RectMM> refine_rects(const std::vector<RectMM>& rects,
                                        const std::vector<double>& metal_target,
                                        const BoardGrid& grid, int iters = 200) {
    if (rects.empty()) return {};
    const int n = grid.n;
    if (metal_target.size() != static_cast<std::size_t>(n) * n)
        throw std::invalid_argument("refine_rects: target size mismatch");

    detail::RefineState st(grid, metal_target, rects);
    const double p = grid.pitch_mm;
    const double side = grid.side_mm();
    std::vector<double> patch;

    for (int sweep = 0; sweep < iters; ++sweep) {
        double f_before = st.f;
        for (std::size_t ri = 0; ri < st.rects.size(); ++ri) {
            // Edge order: x0, x1, y0, y1.
            for (int edge = 0; edge < 4; ++edge) {
                RectMM& r = st.rects[ri];
                const bool is_x = edge < 2;
                const double cur = edge == 0 ? r.x0 : edge == 1 ? r.x1 : edge == 2 ? r.y0 : r.y1;

                // Analytic dF/d(edge): residual times covered cross length
                // over the pixel row/column the edge runs through.
                const double lo = is_x ? r.y0 : r.x0;
                const double hi = is_x ? r.y1 : r.x1;
                int strip = static_cast<int>(std::floor(cur / p));
                strip = std::clamp(strip, 0, n - 1);
                double grad = 0.0;
                int c0 = std::max(0, static_cast<int>(std::floor(lo / p)));
                int c1 = std::min(n - 1, static_cast<int>(std::ceil(hi / p)) - 1);
                for (int c = c0; c <= c1; ++c) {
                    double cross = std::min(hi, (c + 1) * p) - std::max(lo, c * p);
                    if (cross <= 0.0) continue;
                    int ix = is_x ? strip : c;
                    int iy = is_x ? c : strip;
                    double resid = st.render[static_cast<std::size_t>(iy) * n + ix] -
                                   metal_target[static_cast<std::size_t>(iy) * n + ix];
                    // Outward growth raises coverage; edge 0/2 grow by moving
                    // down, edge 1/3 by moving up.
                    double sign_out = (edge == 0 || edge == 2) ? -1.0 : 1.0;
                    grad += 2.0 * resid * (cross / (p * p)) * sign_out;
                }
                // Coverage is piecewise-linear with kinks at pixel borders;
                // a zero one-sided derivative there just means the action is
                // on the other side, so probe both directions.
                std::vector<double> dirs =
                    grad != 0.0 ? std::vector<double>{grad > 0.0 ? -1.0 : 1.0}
                                : std::vector<double>{1.0, -1.0};
                bool accepted = false;
                for (double dir : dirs) {
                    if (accepted) break;
                    // Backtracking line search on the exact objective.
                    double step = 0.25 * p;
                    for (int bt = 0; bt < 12 && !accepted; ++bt, step *= 0.5) {
                        double cand = cur + dir * step;
                        // Keep a positive extent and stay on the board.
                        if (edge == 0 && cand > r.x1 - 1e-6) continue;
                        if (edge == 1 && cand < r.x0 + 1e-6) continue;
                        if (edge == 2 && cand > r.y1 - 1e-6) continue;
                        if (edge == 3 && cand < r.y0 + 1e-6) continue;
                        if (cand < 0.0 || cand > side) continue;

                        const double saved = cur;
                        auto set_edge = [&](double v) {
                            if (edge == 0) r.x0 = v;
                            else if (edge == 1) r.x1 = v;
                            else if (edge == 2) r.y0 = v;
                            else r.y1 = v;
                        };
                        set_edge(cand);
                        int wx0, wx1, wy0, wy1;
                        if (is_x) {
                            wx0 = static_cast<int>(std::floor(std::min(saved, cand) / p)) - 1;
                            wx1 = static_cast<int>(std::floor(std::max(saved, cand) / p)) + 1;
                            wy0 = static_cast<int>(std::floor(r.y0 / p)) - 1;
                            wy1 = static_cast<int>(std::floor(r.y1 / p)) + 1;
                        } else {
                            wy0 = static_cast<int>(std::floor(std::min(saved, cand) / p)) - 1;
                            wy1 = static_cast<int>(std::floor(std::max(saved, cand) / p)) + 1;
                            wx0 = static_cast<int>(std::floor(r.x0 / p)) - 1;
                            wx1 = static_cast<int>(std::floor(r.x1 / p)) + 1;
                        }
                        double delta = st.try_window(wx0, wx1, wy0, wy1, patch);
                        if (delta < -1e-15) {
                            st.commit_window(wx0, wx1, wy0, wy1, patch, delta);
                            accepted = true;
                        } else {
                            set_edge(saved);
                        }
                    }
                }
            }
        }
        if (f_before - st.f < 1e-10) break;
    }
    return st.rects;
}

// -----------------------------------------------------------------------------
// Fabrication export
// -----------------------------------------------------------------------------

namespace detail {

inline std::string fmt_fixed(double v, int digits) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

}  // namespace detail

/// Gerber RS-274X with one rectangular aperture per distinct rect size and a
/// D03 flash at each rect center. 4.6 fixed coordinate format, millimetres,
/// LF line endings, byte-deterministic. Rects with any side below 0.05 mm
/// are dropped and reported in the returned warning list.
inline std::vector<std::string> to_gerber(const std::vector<RectMM>& rects, const BoardGrid& grid,
                                          const std::string& path) {
    (void)grid;
    std::vector<std::string> warnings;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("to_gerber: cannot open " + path);

    out << "%FSLAX46Y46*%\n%MOMM*%\n";

    // Apertures keyed by the printed size so deduplication is exact.
    std::vector<std::pair<std::string, int>> apertures;  // size token -> D code
    std::vector<int> rect_aperture(rects.size(), -1);
    int next_code = 10;
    for (std::size_t i = 0; i < rects.size(); ++i) {
        const auto& r = rects[i];
        if (r.width() < 0.05 || r.height() < 0.05) {
            warnings.push_back("rect below 0.05 mm minimum size at (" +
                               detail::fmt_fixed(r.x0, 3) + ", " + detail::fmt_fixed(r.y0, 3) +
                               ")");
            continue;
        }
        std::string token =
            detail::fmt_fixed(r.width(), 6) + "X" + detail::fmt_fixed(r.height(), 6);
        int code = -1;
        for (const auto& [tok, c] : apertures)
            if (tok == token) code = c;
        if (code < 0) {
            code = next_code++;
            apertures.emplace_back(token, code);
        }
        rect_aperture[i] = code;
    }
    for (const auto& [token, code] : apertures)
        out << "%ADD" << code << "R," << token << "*%\n";

    auto coord = [](double mm) {
        return std::to_string(static_cast<long long>(std::llround(mm * 1e6)));
    };
    for (const auto& [token, code] : apertures) {
        out << "D" << code << "*\n";
        for (std::size_t i = 0; i < rects.size(); ++i) {
            if (rect_aperture[i] != code) continue;
            const auto& r = rects[i];
            out << "X" << coord((r.x0 + r.x1) / 2.0) << "Y" << coord((r.y0 + r.y1) / 2.0)
                << "D03*\n";
        }
    }
    out << "M02*\n";
    return warnings;
}

/// Excellon drill file: metric, one tool per distinct diameter, X/Y hits at
/// via centers.
inline void to_excellon(const std::vector<ViaMM>& vias, const BoardGrid& grid,
                        const std::string& path) {
    (void)grid;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("to_excellon: cannot open " + path);

    std::vector<std::pair<std::string, int>> tools;  // diameter token -> tool no
    std::vector<int> via_tool(vias.size(), -1);
    int next_tool = 1;
    for (std::size_t i = 0; i < vias.size(); ++i) {
        std::string token = detail::fmt_fixed(2.0 * vias[i].radius_mm, 3);
        int tool = -1;
        for (const auto& [tok, t] : tools)
            if (tok == token) tool = t;
        if (tool < 0) {
            tool = next_tool++;
            tools.emplace_back(token, tool);
        }
        via_tool[i] = tool;
    }

    out << "M48\nMETRIC\n";
    for (const auto& [token, tool] : tools) out << "T" << tool << "C" << token << "\n";
    out << "%\n";
    for (const auto& [token, tool] : tools) {
        out << "T" << tool << "\n";
        for (std::size_t i = 0; i < vias.size(); ++i) {
            if (via_tool[i] != tool) continue;
            out << "X" << detail::fmt_fixed(vias[i].cx, 3) << "Y"
                << detail::fmt_fixed(vias[i].cy, 3) << "\n";
        }
    }
    out << "M30\n";
}

}  // namespace rfgen
