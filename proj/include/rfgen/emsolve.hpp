#pragma once

// =============================================================================
// Analytic microstrip S-parameter solver (ABCD cascade) + Touchstone I/O
// =============================================================================
// Lossless model: static Hammerstad-Jensen Z0/eps_eff, ideal transmission
// line ABCD blocks cascaded by matrix product, converted to S at a real
// 50-ohm reference. tan_delta participates in conditioning but not here, so
// passivity |S11|^2 + |S21|^2 = 1 is exact up to rounding.
// =============================================================================

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfgen/core.hpp"

namespace rfgen {

inline constexpr double kSpeedOfLightMMGHz = 299.792458;  // c in mm*GHz
inline constexpr double kReferenceOhms = 50.0;

enum class ElementKind { SeriesLine, ShuntOpenStub, ShuntShortStub };

struct NetlistElement {
    ElementKind kind = ElementKind::SeriesLine;
    double w_mm = 0.0;
    double len_mm = 0.0;

    NetlistElement() = default;
    NetlistElement(ElementKind k, double w, double l) : kind(k), w_mm(w), len_mm(l) {
        if (!(w_mm > 0.0) || !(len_mm > 0.0))
            throw std::invalid_argument("NetlistElement: W and L must be > 0");
    }
};

/// Chain (ABCD) matrix of a two-port at one frequency.
struct ABCD {
    complexd a{1.0, 0.0}, b{0.0, 0.0}, c{0.0, 0.0}, d{1.0, 0.0};

    [[nodiscard]] static ABCD identity() { return {}; }

    [[nodiscard]] ABCD operator*(const ABCD& o) const {
        ABCD r;
        r.a = a * o.a + b * o.c;
        r.b = a * o.b + b * o.d;
        r.c = c * o.a + d * o.c;
        r.d = c * o.b + d * o.d;
        return r;
    }

    [[nodiscard]] complexd det() const { return a * d - b * c; }
};

struct MicrostripParams {
    double z0_ohms = 0.0;
    double eps_eff = 1.0;
};

/// Hammerstad-Jensen closed-form static characteristic impedance and
/// effective permittivity for a microstrip of width W on the substrate.
inline MicrostripParams microstrip_params(double w_mm, const SubstrateSpec& sub) {
    if (!(w_mm > 0.0)) throw std::invalid_argument("microstrip_params: W must be > 0");
    const double u = w_mm / sub.h_mm;
    const double er = sub.eps_r;

    const double u4 = u * u * u * u;
    const double a = 1.0 + std::log((u4 + (u / 52.0) * (u / 52.0)) / (u4 + 0.432)) / 49.0 +
                     std::log(1.0 + std::pow(u / 18.1, 3.0)) / 18.7;
    const double b = 0.564 * std::pow((er - 0.9) / (er + 3.0), 0.053);
    const double eps_eff = 0.5 * (er + 1.0) + 0.5 * (er - 1.0) * std::pow(1.0 + 10.0 / u, -a * b);

    const double eta0 = 376.730313668;
    const double f = 6.0 + (2.0 * std::numbers::pi - 6.0) * std::exp(-std::pow(30.666 / u, 0.7528));
    const double z0_air =
        eta0 / (2.0 * std::numbers::pi) * std::log(f / u + std::sqrt(1.0 + (2.0 / u) * (2.0 / u)));

    return {z0_air / std::sqrt(eps_eff), eps_eff};
}

/// Guided wavelength c / (f sqrt(eps_eff)) in mm, f in GHz.
inline double guided_wavelength_mm(double f_ghz, double eps_eff) {
    return kSpeedOfLightMMGHz / (f_ghz * std::sqrt(eps_eff));
}

/// ABCD of one netlist element at one frequency.
inline ABCD element_abcd(const NetlistElement& elem, double f_ghz, const SubstrateSpec& sub) {
    const auto ms = microstrip_params(elem.w_mm, sub);
    const double beta = 2.0 * std::numbers::pi * f_ghz * std::sqrt(ms.eps_eff) / kSpeedOfLightMMGHz;
    double bl = beta * elem.len_mm;
    const complexd j{0.0, 1.0};

    switch (elem.kind) {
        case ElementKind::SeriesLine: {
            ABCD m;
            m.a = m.d = std::cos(bl);
            m.b = j * ms.z0_ohms * std::sin(bl);
            m.c = j * std::sin(bl) / ms.z0_ohms;
            return m;
        }
        case ElementKind::ShuntOpenStub: {
            complexd y = j * std::tan(bl) / ms.z0_ohms;
            ABCD m;
            m.c = y;
            return m;
        }
        case ElementKind::ShuntShortStub: {
            // cot is singular at multiples of pi; deterministic 1e-9 mm nudge.
            if (std::abs(std::sin(bl)) < 1e-9) bl = beta * (elem.len_mm + 1e-9);
            complexd y = -j * std::cos(bl) / (std::sin(bl) * ms.z0_ohms);
            ABCD m;
            m.c = y;
            return m;
        }
    }
    throw std::logic_error("element_abcd: unreachable");
}

/// Left-to-right matrix product in netlist order.
inline ABCD cascade(const std::vector<ABCD>& elems) {
    ABCD acc = ABCD::identity();
    for (const auto& m : elems) acc = acc * m;
    return acc;
}

struct S2x2 {
    complexd s11, s12, s21, s22;
};

/// Standard ABCD -> S conversion at a real reference impedance.
inline S2x2 abcd_to_s(const ABCD& m, double z_ref = kReferenceOhms) {
    const complexd den = m.a + m.b / z_ref + m.c * z_ref + m.d;
    if (std::abs(den) < 1e-30) throw std::domain_error("abcd_to_s: singular denominator");
    S2x2 s;
    s.s11 = (m.a + m.b / z_ref - m.c * z_ref - m.d) / den;
    s.s21 = 2.0 / den;
    s.s12 = 2.0 * m.det() / den;
    s.s22 = (-m.a + m.b / z_ref - m.c * z_ref + m.d) / den;
    return s;
}

/// Full sweep over the frequency grid. All four components valid; S12 is set
/// equal to S21 (every element is reciprocal by construction).
inline SParamSet solve_netlist(const std::vector<NetlistElement>& netlist,
                               const FrequencyGrid& freqs, const SubstrateSpec& sub) {
    if (netlist.empty()) throw std::invalid_argument("solve_netlist: empty netlist");
    SParamSet out;
    for (int k = 0; k < kFreqCount; ++k) {
        ABCD acc = ABCD::identity();
        for (const auto& e : netlist) acc = acc * element_abcd(e, freqs.f_ghz[k], sub);
        S2x2 s = abcd_to_s(acc);
        out.set(SComponent::S11, k, s.s11);
        out.set(SComponent::S21, k, s.s21);
        out.set(SComponent::S12, k, s.s21);
        out.set(SComponent::S22, k, s.s22);
    }
    return out;
}

// -----------------------------------------------------------------------------
// Touchstone v1 two-port I/O
// -----------------------------------------------------------------------------

enum class TouchstoneFormat { RI, MA, DB };

struct TouchstoneError : std::runtime_error {
    int line = 0;
    TouchstoneError(const std::string& msg, int line_no)
        : std::runtime_error(msg + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
};

namespace detail {

inline std::string fmt_g9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace detail

/// Write a two-port .s2p file. Rows are emitted for frequencies where every
/// anywhere-valid component is valid; a `! components ...` comment records
/// which components carry data when some are masked out entirely.
inline void touchstone_write(const SParamSet& sp, const std::string& path,
                             TouchstoneFormat format = TouchstoneFormat::RI) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("touchstone_write: cannot open " + path);

    const char* fmt_tok = format == TouchstoneFormat::RI   ? "RI"
                          : format == TouchstoneFormat::MA ? "MA"
                                                           : "DB";
    bool comp_on[4];
    int active = 0;
    for (int c = 0; c < 4; ++c) {
        comp_on[c] = sp.component_valid(c);
        active += comp_on[c] ? 1 : 0;
    }
    if (active == 0) throw std::invalid_argument("touchstone_write: no valid components");

    out << "! two-port S-parameters\n";
    if (active < 4) {
        out << "! components";
        for (int c = 0; c < 4; ++c)
            if (comp_on[c]) out << ' ' << kSComponentNames[c];
        out << '\n';
    }
    out << "# GHz S " << fmt_tok << " R 50\n";

    const auto& grid = FrequencyGrid::standard();
    const double rad2deg = 180.0 / std::numbers::pi;
    for (int k = 0; k < kFreqCount; ++k) {
        bool row_ok = true;
        for (int c = 0; c < 4; ++c)
            if (comp_on[c] && !sp.valid[c][k]) row_ok = false;
        if (!row_ok) continue;
        out << detail::fmt_g9(grid.f_ghz[k]);
        for (int c = 0; c < 4; ++c) {
            complexd v = comp_on[c] ? sp.data[c][k] : complexd{0.0, 0.0};
            double x, y;
            switch (format) {
                case TouchstoneFormat::RI:
                    x = v.real();
                    y = v.imag();
                    break;
                case TouchstoneFormat::MA:
                    x = std::abs(v);
                    y = std::arg(v) * rad2deg;
                    break;
                case TouchstoneFormat::DB:
                default:
                    x = mag_db_floored(v);
                    y = std::arg(v) * rad2deg;
                    break;
            }
            out << ' ' << detail::fmt_g9(x) << ' ' << detail::fmt_g9(y);
        }
        out << '\n';
    }
}

/// Read a two-port .s2p file and resample it onto the standard frequency
/// grid by complex linear interpolation. Grid points outside the file's
/// frequency range are masked invalid.
inline SParamSet touchstone_read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("touchstone_read: cannot open " + path);

    double unit_scale_ghz = 1.0;
    TouchstoneFormat fmt = TouchstoneFormat::MA;
    bool have_option = false;
    bool comp_on[4] = {true, true, true, true};

    struct Row {
        double f_ghz;
        complexd s[4];
    };
    std::vector<Row> rows;

    std::string line;
    int line_no = 0;
    const double deg2rad = std::numbers::pi / 180.0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (auto bang = line.find('!'); bang != std::string::npos) {
            // Mask comment is the one comment we interpret.
            std::istringstream cs(line.substr(bang + 1));
            std::string tag;
            if (cs >> tag && tag == "components") {
                for (bool& b : comp_on) b = false;
                std::string name;
                while (cs >> name) {
                    for (int c = 0; c < 4; ++c)
                        if (name == kSComponentNames[c]) comp_on[c] = true;
                }
            }
            line.erase(bang);
        }
        std::istringstream ss(line);
        std::string first;
        if (!(ss >> first)) continue;

        if (first == "#") {
            std::string unit, param, fmt_tok, rtok;
            double z = 0.0;
            if (!(ss >> unit >> param >> fmt_tok >> rtok >> z) || param != "S" || rtok != "R")
                throw TouchstoneError("malformed option line", line_no);
            std::string u;
            for (char ch : unit) u += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
            if (u == "HZ") unit_scale_ghz = 1e-9;
            else if (u == "KHZ") unit_scale_ghz = 1e-6;
            else if (u == "MHZ") unit_scale_ghz = 1e-3;
            else if (u == "GHZ") unit_scale_ghz = 1.0;
            else throw TouchstoneError("unknown frequency unit '" + unit + "'", line_no);
            if (fmt_tok == "RI") fmt = TouchstoneFormat::RI;
            else if (fmt_tok == "MA") fmt = TouchstoneFormat::MA;
            else if (fmt_tok == "DB") fmt = TouchstoneFormat::DB;
            else throw TouchstoneError("unknown format '" + fmt_tok + "'", line_no);
            if (z != 50.0) throw TouchstoneError("only R 50 is supported", line_no);
            have_option = true;
            continue;
        }

        std::vector<double> vals;
        vals.push_back(std::stod(first));
        double v;
        while (ss >> v) vals.push_back(v);
        if (vals.size() != 9)
            throw TouchstoneError("expected 9 values for a two-port row, got " +
                                      std::to_string(vals.size()),
                                  line_no);
        if (!have_option) throw TouchstoneError("data before option line", line_no);

        Row r;
        r.f_ghz = vals[0] * unit_scale_ghz;
        if (!rows.empty() && r.f_ghz <= rows.back().f_ghz)
            throw TouchstoneError("non-monotone frequency", line_no);
        for (int c = 0; c < 4; ++c) {
            double x = vals[1 + 2 * c], y = vals[2 + 2 * c];
            switch (fmt) {
                case TouchstoneFormat::RI: r.s[c] = {x, y}; break;
                case TouchstoneFormat::MA: r.s[c] = std::polar(x, y * deg2rad); break;
                case TouchstoneFormat::DB:
                    r.s[c] = std::polar(std::pow(10.0, x / 20.0), y * deg2rad);
                    break;
            }
        }
        rows.push_back(r);
    }
    if (!have_option) throw TouchstoneError("missing option line", 0);
    if (rows.empty()) throw TouchstoneError("no data rows", line_no);

    SParamSet sp;
    const auto& grid = FrequencyGrid::standard();
    const double eps = 1e-9;
    for (int k = 0; k < kFreqCount; ++k) {
        double f = grid.f_ghz[k];
        if (f < rows.front().f_ghz - eps || f > rows.back().f_ghz + eps) continue;
        // Bracketing rows for linear interpolation.
        std::size_t hi = 0;
        while (hi + 1 < rows.size() && rows[hi].f_ghz < f - eps) ++hi;
        std::size_t lo = hi > 0 ? hi - 1 : 0;
        double t = 0.0;
        if (rows[hi].f_ghz > rows[lo].f_ghz)
            t = std::clamp((f - rows[lo].f_ghz) / (rows[hi].f_ghz - rows[lo].f_ghz), 0.0, 1.0);
        for (int c = 0; c < 4; ++c) {
            if (!comp_on[c]) continue;
            complexd v = rows[lo].s[c] + t * (rows[hi].s[c] - rows[lo].s[c]);
            sp.set(static_cast<SComponent>(c), k, v);
        }
    }
    if (!sp.any_valid()) throw TouchstoneError("no file frequencies overlap the 1-20 GHz grid", 0);
    return sp;
}

}  // namespace rfgen
