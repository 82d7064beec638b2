#pragma once

// =============================================================================
// Core domain types: board grid, layouts, S-parameters, conditioning
// =============================================================================

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rfgen {

using complexd = std::complex<double>;

inline constexpr int kDefaultGridN = 64;
inline constexpr double kDefaultPitchMM = 0.125;
inline constexpr int kFreqCount = 51;
inline constexpr double kFreqStartGHz = 1.0;
inline constexpr double kFreqStepGHz = 0.38;
inline constexpr double kMagFloorDb = -80.0;
inline constexpr int kNullTemplate = -1;
inline constexpr int kConditioningChannels = 17;

/// Square raster the board lives on. Origin at the lower-left corner,
/// x to the right, y up, in millimetres.
struct BoardGrid {
    int n = kDefaultGridN;
    double pitch_mm = kDefaultPitchMM;

    BoardGrid() = default;
    BoardGrid(int n_, double pitch) : n(n_), pitch_mm(pitch) {
        if (n < 8) throw std::invalid_argument("BoardGrid: n must be >= 8");
        if (!(pitch_mm > 0.0)) throw std::invalid_argument("BoardGrid: pitch must be > 0");
    }

    [[nodiscard]] double side_mm() const noexcept { return n * pitch_mm; }

    [[nodiscard]] bool contains(double x_mm, double y_mm) const noexcept {
        return x_mm >= 0.0 && x_mm <= side_mm() && y_mm >= 0.0 && y_mm <= side_mm();
    }

    /// Index of the pixel containing (x, y); points on the far edge land in
    /// the last pixel.
    [[nodiscard]] std::pair<int, int> pixel_of(double x_mm, double y_mm) const {
        auto clampi = [this](double v) {
            int i = static_cast<int>(std::floor(v / pitch_mm));
            if (i < 0) i = 0;
            if (i >= n) i = n - 1;
            return i;
        };
        return {clampi(x_mm), clampi(y_mm)};
    }
};

/// Two grayscale channels (metal density, via density) on one grid.
/// Stored row-major with row index = y pixel, so element (ix, iy) lives at
/// iy * n + ix.
struct BoardLayout {
    BoardGrid grid;
    std::vector<double> metal;
    std::vector<double> via;

    BoardLayout() : BoardLayout(BoardGrid{}) {}
    explicit BoardLayout(const BoardGrid& g)
        : grid(g),
          metal(static_cast<std::size_t>(g.n) * g.n, 0.0),
          via(static_cast<std::size_t>(g.n) * g.n, 0.0) {}

    [[nodiscard]] std::size_t idx(int ix, int iy) const noexcept {
        return static_cast<std::size_t>(iy) * grid.n + ix;
    }
    [[nodiscard]] double metal_at(int ix, int iy) const { return metal[idx(ix, iy)]; }
    [[nodiscard]] double via_at(int ix, int iy) const { return via[idx(ix, iy)]; }
};

/// The fixed 51-point 1-20 GHz measurement grid, f_k = 1 + 0.38 k.
struct FrequencyGrid {
    std::array<double, kFreqCount> f_ghz{};

    FrequencyGrid() {
        for (int k = 0; k < kFreqCount; ++k) f_ghz[k] = kFreqStartGHz + kFreqStepGHz * k;
    }

    [[nodiscard]] static const FrequencyGrid& standard() {
        static const FrequencyGrid g;
        return g;
    }
};

enum class SComponent : int { S11 = 0, S21 = 1, S12 = 2, S22 = 3 };
inline constexpr std::array<const char*, 4> kSComponentNames = {"S11", "S21", "S12", "S22"};

/// Complex 2x2 scattering data on the fixed frequency grid with a
/// per-(component, frequency) validity mask. Component order S11, S21, S12,
/// S22 everywhere (matching Touchstone 2-port row order).
struct SParamSet {
    std::array<std::array<complexd, kFreqCount>, 4> data{};
    std::array<std::array<bool, kFreqCount>, 4> valid{};

    [[nodiscard]] complexd at(SComponent c, int k) const {
        return data[static_cast<int>(c)][k];
    }
    void set(SComponent c, int k, complexd v, bool is_valid = true) {
        data[static_cast<int>(c)][k] = v;
        valid[static_cast<int>(c)][k] = is_valid;
    }

    /// A component counts as valid when any of its points is valid.
    [[nodiscard]] bool component_valid(int c) const {
        for (bool b : valid[c])
            if (b) return true;
        return false;
    }

    [[nodiscard]] bool any_valid() const {
        for (int c = 0; c < 4; ++c)
            if (component_valid(c)) return true;
        return false;
    }

    void set_component_valid(int c, bool v) { valid[c].fill(v); }
    void set_all_valid() {
        for (auto& m : valid) m.fill(true);
    }
};

/// Up to two feed ports as physical board coordinates.
struct FeedSet {
    struct Port {
        double x_mm = 0.0;
        double y_mm = 0.0;
    };
    std::array<Port, 2> ports{};
    std::array<bool, 2> active{false, false};

    [[nodiscard]] int active_count() const noexcept {
        return (active[0] ? 1 : 0) + (active[1] ? 1 : 0);
    }

    [[nodiscard]] static FeedSet single(double x, double y) {
        FeedSet f;
        f.ports[0] = {x, y};
        f.active = {true, false};
        return f;
    }
    [[nodiscard]] static FeedSet pair(double x0, double y0, double x1, double y1) {
        FeedSet f;
        f.ports[0] = {x0, y0};
        f.ports[1] = {x1, y1};
        f.active = {true, true};
        return f;
    }

    void validate_on(const BoardGrid& grid) const {
        if (active_count() < 1) throw std::invalid_argument("FeedSet: need at least 1 active port");
        for (int p = 0; p < 2; ++p) {
            if (active[p] && !grid.contains(ports[p].x_mm, ports[p].y_mm))
                throw std::invalid_argument("FeedSet: active port outside board");
        }
    }
};

struct SubstrateSpec {
    double eps_r = 3.55;
    double tan_delta = 0.0027;
    double h_mm = 0.203;

    SubstrateSpec() = default;
    SubstrateSpec(double er, double td, double h) : eps_r(er), tan_delta(td), h_mm(h) {
        if (eps_r < 1.0) throw std::invalid_argument("SubstrateSpec: eps_r must be >= 1");
        if (tan_delta < 0.0) throw std::invalid_argument("SubstrateSpec: tan_delta must be >= 0");
        if (!(h_mm > 0.0)) throw std::invalid_argument("SubstrateSpec: h_mm must be > 0");
    }

    [[nodiscard]] static SubstrateSpec ro4003c() { return {3.55, 0.0027, 0.203}; }
    [[nodiscard]] static SubstrateSpec fr4() { return {4.4, 0.02, 1.6}; }
};

/// Everything the generator may be conditioned on. An absent target means
/// generation is unconditional in S; template kNullTemplate is a
/// distinguished "no template" value, not a missing field.
struct ConditioningBundle {
    std::optional<SParamSet> target;
    FeedSet feeds;
    SubstrateSpec substrate;
    int template_id = kNullTemplate;
};

/// z-score statistics of the valid magnitude-dB samples of a dataset.
struct DatasetStats {
    double mu_db = -20.0;
    double sigma_db = 15.0;

    DatasetStats() = default;
    DatasetStats(double mu, double sigma) : mu_db(mu), sigma_db(sigma) {
        if (!(sigma_db > 0.0)) throw std::invalid_argument("DatasetStats: sigma must be > 0");
    }
};

/// Magnitude in dB with the -80 dB floor applied before the log.
inline double mag_db_floored(complexd v) {
    constexpr double floor_lin = 1e-4;  // 10^(-80/20)
    double m = std::abs(v);
    if (m < floor_lin) m = floor_lin;
    return 20.0 * std::log10(m);
}

// -----------------------------------------------------------------------------
// Conditioning encoders
// -----------------------------------------------------------------------------

/// Per-frequency S-parameter features: (z-scored magnitude dB, sin, cos)
/// per component and frequency, plus the validity mask. Invalid points carry
/// all-zero features.
struct SParamFeatures {
    // [component][frequency][feature]; feature order z_magdb, sin, cos.
    std::array<std::array<std::array<double, 3>, kFreqCount>, 4> feat{};
    std::array<std::array<bool, kFreqCount>, 4> mask{};
};

inline SParamFeatures encode_sparams(const SParamSet& target, const DatasetStats& stats) {
    if (!(stats.sigma_db > 0.0)) throw std::invalid_argument("encode_sparams: invalid stats");
    SParamFeatures out;
    for (int c = 0; c < 4; ++c) {
        for (int k = 0; k < kFreqCount; ++k) {
            if (!target.valid[c][k]) continue;
            complexd v = target.data[c][k];
            double z = (mag_db_floored(v) - stats.mu_db) / stats.sigma_db;
            double phi = std::arg(v);  // arg(0) == 0 after flooring magnitude only
            out.feat[c][k] = {z, std::sin(phi), std::cos(phi)};
            out.mask[c][k] = true;
        }
    }
    return out;
}

/// Spatial conditioning stack, fixed channel order:
///   0       feed map (1 at each active feed pixel)
///   1..3    dielectric eps_r/10, tan_delta*10, h_mm (uniform broadcast)
///   4..15   per component S11,S21,S12,S22: mean over valid freqs of
///           (z_magdb, sin, cos), broadcast; zeros if component invalid
///   16      template id / 32, or -1 for the null template
struct ConditioningChannels {
    int n = 0;
    std::vector<double> data;  // kConditioningChannels * n * n, channel-major

    [[nodiscard]] double at(int ch, int ix, int iy) const {
        return data[(static_cast<std::size_t>(ch) * n + iy) * n + ix];
    }
    [[nodiscard]] const double* channel(int ch) const {
        return data.data() + static_cast<std::size_t>(ch) * n * n;
    }
};

inline ConditioningChannels encode_conditioning_channels(const ConditioningBundle& bundle,
                                                         const BoardGrid& grid,
                                                         const DatasetStats& stats) {
    bundle.feeds.validate_on(grid);
    const int n = grid.n;
    const std::size_t plane = static_cast<std::size_t>(n) * n;
    ConditioningChannels out;
    out.n = n;
    out.data.assign(kConditioningChannels * plane, 0.0);

    auto fill = [&](int ch, double v) {
        double* p = out.data.data() + ch * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] = v;
    };

    // Channel 0: feed map.
    for (int p = 0; p < 2; ++p) {
        if (!bundle.feeds.active[p]) continue;
        auto [ix, iy] = grid.pixel_of(bundle.feeds.ports[p].x_mm, bundle.feeds.ports[p].y_mm);
        out.data[(0 * static_cast<std::size_t>(n) + iy) * n + ix] = 1.0;
    }

    // Channels 1..3: dielectric triple, scaled to unit-ish range.
    fill(1, bundle.substrate.eps_r / 10.0);
    fill(2, bundle.substrate.tan_delta * 10.0);
    fill(3, bundle.substrate.h_mm);

    // Channels 4..15: frequency-pooled S summary.
    if (bundle.target.has_value()) {
        SParamFeatures f = encode_sparams(*bundle.target, stats);
        for (int c = 0; c < 4; ++c) {
            double sum[3] = {0, 0, 0};
            int cnt = 0;
            for (int k = 0; k < kFreqCount; ++k) {
                if (!f.mask[c][k]) continue;
                for (int j = 0; j < 3; ++j) sum[j] += f.feat[c][k][j];
                ++cnt;
            }
            for (int j = 0; j < 3; ++j)
                fill(4 + 3 * c + j, cnt > 0 ? sum[j] / cnt : 0.0);
        }
    }

    // Channel 16: template id.
    fill(16, bundle.template_id == kNullTemplate ? -1.0 : bundle.template_id / 32.0);

    return out;
}

}  // namespace rfgen
