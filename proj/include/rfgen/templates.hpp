#pragma once

// =============================================================================
// Parametric component families ("templates")
// =============================================================================
// Five families cover series lines, stepped-impedance cascades, shunt open
// stubs, via-shorted stubs, and L-match networks. Geometry convention: both
// ports sit at the same height on the left (x = 0) and right (x = side) board
// edges; family structures live on the horizontal axis through the ports and
// feed lines of fixed width connect them to the edges.
//
// Parameter extraction inverts emission from a rect set by analysing the
// column height profile of the rect union, so it works both on exact
// instance rects (round-trip to 1e-6 mm) and on refined rects recovered from
// rasters (ranking path).
// =============================================================================

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfgen/core.hpp"
#include "rfgen/emsolve.hpp"
#include "rfgen/raster.hpp"
#include "rfgen/rng.hpp"

namespace rfgen {

enum class TemplateFamily : int {
    Mline = 0,
    SteppedLpf = 1,
    OpenStubBsf = 2,
    ViaShuntStub = 3,
    LMatch = 4,
};
inline constexpr int kFamilyCount = 5;

inline constexpr double kFeedWidthMM = 0.45;     // feed-line width, all families
inline constexpr double kLoadFeedLenMM = 1.0;    // fixed load-side feed, L_MATCH
inline constexpr double kViaRadiusMM = 0.125;    // 1 pixel at default pitch
inline constexpr double kEdgeClearanceMM = 0.25; // 2 pixels at default pitch

inline const char* family_token(TemplateFamily f) {
    switch (f) {
        case TemplateFamily::Mline: return "mline";
        case TemplateFamily::SteppedLpf: return "stepped_lpf";
        case TemplateFamily::OpenStubBsf: return "open_stub_bsf";
        case TemplateFamily::ViaShuntStub: return "via_shunt_stub";
        case TemplateFamily::LMatch: return "l_match";
    }
    throw std::logic_error("family_token: unreachable");
}

inline TemplateFamily family_from_token(const std::string& tok) {
    for (int i = 0; i < kFamilyCount; ++i) {
        auto f = static_cast<TemplateFamily>(i);
        if (tok == family_token(f)) return f;
    }
    throw std::invalid_argument("unknown template family '" + tok + "'");
}

/// Sampling bounds per parameter, all lengths in mm.
inline const std::vector<std::pair<double, double>>& family_schema(TemplateFamily f) {
    static const std::vector<std::pair<double, double>> mline = {{0.2, 1.2}, {2.0, 7.0}};
    static const std::vector<std::pair<double, double>> lpf = {
        {0.2, 0.35}, {1.0, 2.0}, {0.6, 1.6}, {0.6, 1.6}, {0.6, 1.6}, {0.6, 1.6}, {0.6, 1.6}};
    static const std::vector<std::pair<double, double>> stub = {
        {0.3, 0.6}, {0.2, 0.6}, {1.0, 3.5}, {0.25, 0.75}};
    static const std::vector<std::pair<double, double>> lmatch = {
        {0.2, 1.2}, {1.5, 5.0}, {0.2, 0.8}, {1.0, 3.0}};
    switch (f) {
        case TemplateFamily::Mline: return mline;
        case TemplateFamily::SteppedLpf: return lpf;
        case TemplateFamily::OpenStubBsf:
        case TemplateFamily::ViaShuntStub: return stub;
        case TemplateFamily::LMatch: return lmatch;
    }
    throw std::logic_error("family_schema: unreachable");
}

struct TemplateInstance {
    TemplateFamily family = TemplateFamily::Mline;
    std::vector<double> params;
    std::vector<RectMM> rects;
    std::vector<ViaMM> vias;
    std::vector<NetlistElement> netlist;
    FeedSet feeds;
};

namespace detail {

struct PortAxis {
    double span = 0.0;  // port-to-port distance == board side
    double y = 0.0;     // shared port height
};

inline PortAxis port_axis(const FeedSet& feeds) {
    if (feeds.active_count() != 2)
        throw std::invalid_argument("templates: two active ports required");
    const auto& p0 = feeds.ports[0];
    const auto& p1 = feeds.ports[1];
    if (std::abs(p0.y_mm - p1.y_mm) > 1e-9)
        throw std::invalid_argument("templates: ports must share one height");
    double xl = std::min(p0.x_mm, p1.x_mm), xr = std::max(p0.x_mm, p1.x_mm);
    if (std::abs(xl) > 1e-9)
        throw std::invalid_argument("templates: left port must sit on the x = 0 board edge");
    if (xr < 4.0) throw std::invalid_argument("templates: port span too small");
    return {xr - xl, p0.y_mm};
}

inline RectMM hseg(double xa, double xb, double yc, double w) {
    return RectMM(xa, yc - w / 2.0, xb, yc + w / 2.0);
}

}  // namespace detail

/// Build geometry + netlist from a parameter vector. Does not check board
/// fit; sample_template does that and resamples.
inline TemplateInstance make_instance(TemplateFamily family, const std::vector<double>& params,
                                      const FeedSet& feeds) {
    const auto axis = detail::port_axis(feeds);
    const double span = axis.span, y = axis.y;
    if (params.size() != family_schema(family).size())
        throw std::invalid_argument("make_instance: wrong parameter count");
    for (double p : params)
        if (!(p > 0.0)) throw std::invalid_argument("make_instance: parameters must be > 0");

    TemplateInstance inst;
    inst.family = family;
    inst.params = params;
    inst.feeds = feeds;
    const double wf = kFeedWidthMM;

    switch (family) {
        case TemplateFamily::Mline: {
            const double w = params[0], l = params[1];
            const double a = (span - l) / 2.0, b = (span + l) / 2.0;
            if (!(a > 0.0)) throw std::invalid_argument("mline: trace longer than span");
            inst.rects = {detail::hseg(0.0, a, y, wf), detail::hseg(a, b, y, w),
                          detail::hseg(b, span, y, wf)};
            inst.netlist = {{ElementKind::SeriesLine, wf, a},
                            {ElementKind::SeriesLine, w, l},
                            {ElementKind::SeriesLine, wf, a}};
            break;
        }
        case TemplateFamily::SteppedLpf: {
            const double wh = params[0], wl = params[1];
            double total = 0.0;
            for (int i = 0; i < 5; ++i) total += params[2 + i];
            const double a = (span - total) / 2.0;
            if (!(a > 0.0)) throw std::invalid_argument("stepped_lpf: sections longer than span");
            inst.rects.push_back(detail::hseg(0.0, a, y, wf));
            inst.netlist.push_back({ElementKind::SeriesLine, wf, a});
            double x = a;
            for (int i = 0; i < 5; ++i) {
                const double w = (i % 2 == 0) ? wh : wl;  // hi-Z first
                const double l = params[2 + i];
                inst.rects.push_back(detail::hseg(x, x + l, y, w));
                inst.netlist.push_back({ElementKind::SeriesLine, w, l});
                x += l;
            }
            inst.rects.push_back(detail::hseg(x, span, y, wf));
            inst.netlist.push_back({ElementKind::SeriesLine, wf, a});
            break;
        }
        case TemplateFamily::OpenStubBsf:
        case TemplateFamily::ViaShuntStub: {
            const double w = params[0], ws = params[1], ls = params[2], pos = params[3];
            if (!(pos < 1.0)) throw std::invalid_argument("stub: pos must be < 1");
            const double xs = pos * span;
            inst.rects = {detail::hseg(0.0, span, y, w),
                          RectMM(xs - ws / 2.0, y + w / 2.0, xs + ws / 2.0, y + w / 2.0 + ls)};
            const bool shorted = family == TemplateFamily::ViaShuntStub;
            inst.netlist = {{ElementKind::SeriesLine, w, xs},
                            {shorted ? ElementKind::ShuntShortStub : ElementKind::ShuntOpenStub,
                             ws, ls},
                            {ElementKind::SeriesLine, w, span - xs}};
            if (shorted)
                inst.vias.push_back(ViaMM(xs, y + w / 2.0 + ls - kViaRadiusMM, kViaRadiusMM));
            break;
        }
        case TemplateFamily::LMatch: {
            const double w = params[0], l1 = params[1], ws = params[2], ls = params[3];
            const double xb = span - kLoadFeedLenMM;
            const double a = xb - l1;
            if (!(a > 0.0)) throw std::invalid_argument("l_match: series line longer than span");
            if (!(ws < l1)) throw std::invalid_argument("l_match: stub wider than series line");
            inst.rects = {detail::hseg(0.0, a, y, wf), detail::hseg(a, xb, y, w),
                          RectMM(xb - ws, y + w / 2.0, xb, y + w / 2.0 + ls),
                          detail::hseg(xb, span, y, wf)};
            inst.netlist = {{ElementKind::SeriesLine, wf, a},
                            {ElementKind::SeriesLine, w, l1},
                            {ElementKind::ShuntOpenStub, ws, ls},
                            {ElementKind::SeriesLine, wf, kLoadFeedLenMM}};
            break;
        }
    }
    return inst;
}

namespace detail {

/// Board-fit predicate used by the sampler: every structure stays inside the
/// clearance margin, feed lines excepted in x.
inline bool instance_fits(const TemplateInstance& inst, double side) {
    const double m = kEdgeClearanceMM;
    for (const auto& r : inst.rects) {
        if (r.y0 < m || r.y1 > side - m) return false;
        bool touches_left = r.x0 <= 1e-9, touches_right = r.x1 >= side - 1e-9;
        if (!touches_left && r.x0 < m) return false;
        if (!touches_right && r.x1 > side - m) return false;
        if (r.x0 < -1e-9 || r.x1 > side + 1e-9) return false;
    }
    for (const auto& v : inst.vias) {
        if (v.cx - v.radius_mm < m || v.cx + v.radius_mm > side - m) return false;
        if (v.cy - v.radius_mm < m || v.cy + v.radius_mm > side - m) return false;
    }
    return true;
}

}  // namespace detail

/// Draw a random instance; identical (family, feeds, seed) gives identical
/// output. Resamples up to 32 times when the drawn geometry does not fit.
inline TemplateInstance sample_template(TemplateFamily family, const FeedSet& feeds,
                                        std::uint64_t seed) {
    const auto axis = detail::port_axis(feeds);
    const auto& schema = family_schema(family);
    Rng rng(seed);
    for (int attempt = 0; attempt < 32; ++attempt) {
        std::vector<double> params(schema.size());
        for (std::size_t i = 0; i < schema.size(); ++i)
            params[i] = rng.uniform(schema[i].first, schema[i].second);
        TemplateInstance inst;
        try {
            inst = make_instance(family, params, feeds);
        } catch (const std::invalid_argument&) {
            continue;
        }
        if (detail::instance_fits(inst, axis.span)) return inst;
    }
    throw std::runtime_error(std::string("sample_template: no fitting geometry for ") +
                             family_token(family) + " after 32 attempts");
}

/// 3x3-pixel full-density pad box at an active port, clipped to the board.
inline std::optional<RectMM> feed_pad_rect(const BoardGrid& grid, double x_mm, double y_mm) {
    auto [ix, iy] = grid.pixel_of(x_mm, y_mm);
    const double p = grid.pitch_mm;
    double x0 = std::max(0.0, (ix - 1) * p), x1 = std::min(grid.side_mm(), (ix + 2) * p);
    double y0 = std::max(0.0, (iy - 1) * p), y1 = std::min(grid.side_mm(), (iy + 2) * p);
    if (!(x0 < x1 && y0 < y1)) return std::nullopt;
    return RectMM(x0, y0, x1, y1);
}

/// Rasterize an instance. Feed pads are added only when the family geometry
/// does not already cover them, so every emitted layout is feed-valid.
inline BoardLayout emit_layout(const TemplateInstance& inst, const BoardGrid& grid) {
    std::vector<RectMM> rects = inst.rects;
    for (int p = 0; p < 2; ++p) {
        if (!inst.feeds.active[p]) continue;
        auto pad = feed_pad_rect(grid, inst.feeds.ports[p].x_mm, inst.feeds.ports[p].y_mm);
        if (pad && !rect_union_covers(*pad, inst.rects)) rects.push_back(*pad);
    }
    BoardLayout layout(grid);
    layout.metal = rasterize_rects(rects, grid);
    layout.via = rasterize_vias(inst.vias, grid);
    return layout;
}

/// Solve an instance's netlist on the standard grid.
inline SParamSet solve(const TemplateInstance& inst, const FrequencyGrid& freqs,
                       const SubstrateSpec& sub) {
    return solve_netlist(inst.netlist, freqs, sub);
}

// -----------------------------------------------------------------------------
// Parameter extraction (forward-model substitute)
// -----------------------------------------------------------------------------

namespace detail {

struct ProfileColumn {
    double x0 = 0.0, x1 = 0.0;  // x extent
    double ylo = 0.0, yhi = 0.0;
};

/// Column height profile of the rect union over [win_lo, win_hi]. Empty when
/// any column's y cross-section is not a single connected interval.
inline std::optional<std::vector<ProfileColumn>> height_profile(const std::vector<RectMM>& rects,
                                                                double win_lo, double win_hi) {
    std::vector<double> cuts{win_lo, win_hi};
    for (const auto& r : rects) {
        if (r.x1 <= win_lo || r.x0 >= win_hi) continue;
        if (r.x0 > win_lo) cuts.push_back(r.x0);
        if (r.x1 < win_hi) cuts.push_back(r.x1);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               cuts.end());

    std::vector<ProfileColumn> cols;
    std::vector<std::pair<double, double>> ys;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double xm = 0.5 * (cuts[i] + cuts[i + 1]);
        ys.clear();
        for (const auto& r : rects)
            if (r.x0 <= xm && r.x1 >= xm) ys.emplace_back(r.y0, r.y1);
        if (ys.empty()) return std::nullopt;  // hole in the profile
        std::sort(ys.begin(), ys.end());
        // Refined rects can leave hairline gaps where a stub meets the line;
        // anything wider than a pixel is a genuine disconnection.
        double lo = ys[0].first, hi = ys[0].second;
        for (std::size_t j = 1; j < ys.size(); ++j) {
            if (ys[j].first > hi + 0.12) return std::nullopt;  // disconnected column
            hi = std::max(hi, ys[j].second);
        }
        cols.push_back({cuts[i], cuts[i + 1], lo, hi});
    }
    return cols;
}

struct Plateau {
    double x0 = 0.0, x1 = 0.0;
    double ylo = 0.0, yhi = 0.0;  // length-weighted means

    [[nodiscard]] double len() const { return x1 - x0; }
    [[nodiscard]] double height() const { return yhi - ylo; }
};

/// Merge adjacent profile columns whose edges agree within tol; per plateau
/// the reported edges are length-weighted means (least squares per edge).
inline std::vector<Plateau> cluster_plateaus(const std::vector<ProfileColumn>& cols, double tol) {
    std::vector<Plateau> out;
    for (const auto& c : cols) {
        if (!out.empty() && std::abs(c.ylo - out.back().ylo) <= tol &&
            std::abs(c.yhi - out.back().yhi) <= tol) {
            Plateau& p = out.back();
            const double wl = p.len(), wc = c.x1 - c.x0;
            p.ylo = (p.ylo * wl + c.ylo * wc) / (wl + wc);
            p.yhi = (p.yhi * wl + c.yhi * wc) / (wl + wc);
            p.x1 = c.x1;
        } else {
            out.push_back({c.x0, c.x1, c.ylo, c.yhi});
        }
    }
    // Running means can drift across a real edge on noisy input; keep the
    // clustering but drop slivers shorter than a quarter pixel.
    std::vector<Plateau> kept;
    for (const auto& p : out)
        if (p.len() > 0.03 || out.size() <= 2) kept.push_back(p);
    return kept;
}

inline std::optional<std::vector<double>> extract_with_tol(TemplateFamily family,
                                                           const std::vector<RectMM>& rects,
                                                           const std::vector<ViaMM>& vias,
                                                           const PortAxis& axis, double tol) {
    const double span = axis.span;
    const double pad_skip = 0.3;  // exclude port pads from the analysis window
    auto profile = height_profile(rects, pad_skip, span - pad_skip);
    if (!profile) return std::nullopt;
    auto plat = cluster_plateaus(*profile, tol);

    switch (family) {
        case TemplateFamily::Mline: {
            if (plat.size() != 3) return std::nullopt;
            const auto& mid = plat[1];
            return std::vector<double>{mid.height(), mid.len()};
        }
        case TemplateFamily::SteppedLpf: {
            if (plat.size() != 7) return std::nullopt;
            // Sections are plateaus 1..5, hi-Z first; widths combine per class.
            double wh_num = 0, wh_den = 0, wl_num = 0, wl_den = 0;
            for (int i = 0; i < 5; ++i) {
                const auto& s = plat[1 + i];
                if (i % 2 == 0) {
                    wh_num += s.height() * s.len();
                    wh_den += s.len();
                } else {
                    wl_num += s.height() * s.len();
                    wl_den += s.len();
                }
            }
            const double wh = wh_num / wh_den, wl = wl_num / wl_den;
            if (!(wh < wl)) return std::nullopt;
            std::vector<double> params{wh, wl};
            for (int i = 0; i < 5; ++i) params.push_back(plat[1 + i].len());
            return params;
        }
        case TemplateFamily::OpenStubBsf:
        case TemplateFamily::ViaShuntStub: {
            if (plat.size() != 3) return std::nullopt;
            const auto& main_l = plat[0];
            const auto& stub = plat[1];
            if (!(stub.yhi > main_l.yhi + 0.05)) return std::nullopt;  // stub must rise
            // The stub sits on the line: its column shares the line's bottom
            // edge. A wide mid-section (mline-like) fails here.
            if (std::abs(stub.ylo - 0.5 * (main_l.ylo + plat[2].ylo)) > 0.05) return std::nullopt;
            if (std::abs(main_l.height() - plat[2].height()) > 0.1) return std::nullopt;
            const double w = 0.5 * (main_l.height() + plat[2].height());
            const double ws = stub.len();
            const double ls = stub.yhi - 0.5 * (main_l.yhi + plat[2].yhi);
            const double xs = 0.5 * (stub.x0 + stub.x1);
            if (family == TemplateFamily::ViaShuntStub) {
                bool hit = false;
                for (const auto& v : vias)
                    if (std::abs(v.cx - xs) < 0.3 && v.cy > stub.yhi - 4.0 * kViaRadiusMM)
                        hit = true;
                if (!hit) return std::nullopt;
            }
            return std::vector<double>{w, ws, ls, xs / span};
        }
        case TemplateFamily::LMatch: {
            if (plat.size() != 4) return std::nullopt;
            const auto& series = plat[1];
            const auto& stub = plat[2];
            if (!(stub.yhi > series.yhi + 0.05)) return std::nullopt;
            if (std::abs(stub.ylo - series.ylo) > 0.05) return std::nullopt;
            const double w = series.height();
            const double ws = stub.len();
            const double ls = stub.yhi - series.yhi;
            const double xb = stub.x1;
            const double l1 = xb - series.x0;
            return std::vector<double>{w, l1, ws, ls};
        }
    }
    return std::nullopt;
}

}  // namespace detail

/// Recover family parameters from a rect/via set. Returns std::nullopt when
/// the geometry does not match the family topology (NoFit). Exact instance
/// rects round-trip to 1e-6 mm; refined raster rects fit by least squares.
inline std::optional<std::vector<double>> extract_params(TemplateFamily family,
                                                         const std::vector<RectMM>& rects,
                                                         const std::vector<ViaMM>& vias,
                                                         const FeedSet& feeds) {
    if (rects.empty()) return std::nullopt;
    detail::PortAxis axis;
    try {
        axis = detail::port_axis(feeds);
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }

    // Keep only the connected component touching the ports; electrically
    // isolated structures are not part of the family topology. The touch
    // tolerance matches the profile's column-gap tolerance; isolated
    // structures sit at least 0.25 mm away.
    const double eps = 0.12;
    auto touches = [eps](const RectMM& a, const RectMM& b) {
        return a.x0 <= b.x1 + eps && b.x0 <= a.x1 + eps && a.y0 <= b.y1 + eps &&
               b.y0 <= a.y1 + eps;
    };
    std::vector<char> in(rects.size(), 0);
    std::vector<std::size_t> queue;
    for (std::size_t i = 0; i < rects.size(); ++i) {
        const auto& r = rects[i];
        bool at_port = false;
        for (double px : {0.0, axis.span})
            if (r.x0 <= px + 0.3 && r.x1 >= px - 0.3 && r.y0 <= axis.y + 0.3 &&
                r.y1 >= axis.y - 0.3)
                at_port = true;
        if (at_port && !in[i]) {
            in[i] = 1;
            queue.push_back(i);
        }
    }
    while (!queue.empty()) {
        std::size_t i = queue.back();
        queue.pop_back();
        for (std::size_t j = 0; j < rects.size(); ++j) {
            if (!in[j] && touches(rects[i], rects[j])) {
                in[j] = 1;
                queue.push_back(j);
            }
        }
    }
    std::vector<RectMM> connected;
    for (std::size_t i = 0; i < rects.size(); ++i)
        if (in[i]) connected.push_back(rects[i]);
    if (connected.empty()) return std::nullopt;

    // Tight clustering first (exact rects), then a coarse pass for rects
    // recovered from rasters.
    for (double tol : {1e-9, 0.04}) {
        auto p = detail::extract_with_tol(family, connected, vias, axis, tol);
        if (p) return p;
    }
    return std::nullopt;
}

}  // namespace rfgen
