#pragma once

// =============================================================================
// Trainable eps-prediction denoiser on the reduced 16x16 grid
// =============================================================================
// Dense MLP over concatenated channels: [2 data + 17 conditioning + 1 time]
// x 16 x 16 = 5120 inputs, three tanh hidden layers of 512, linear 512-wide
// output (2 x 16 x 16 eps-hat). The template conditioning channel is replaced
// by a learned scalar: dot(embedding[family], fold), with a 6-row table
// (5 families + null). Training is plain eps-MSE with hand-rolled backprop
// and Adam, deterministic for a fixed seed.
// =============================================================================

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfgen/core.hpp"
#include "rfgen/diffusion.hpp"
#include "rfgen/io.hpp"
#include "rfgen/rng.hpp"
#include "rfgen/templates.hpp"

namespace rfgen {

inline constexpr int kToyGridN = 16;
inline constexpr int kToyPlane = kToyGridN * kToyGridN;          // 256
inline constexpr int kToyDataDim = 2 * kToyPlane;                // 512
inline constexpr int kToyInputDim = (2 + kConditioningChannels + 1) * kToyPlane;  // 5120
inline constexpr int kToyHidden = 512;
inline constexpr int kToyEmbedWidth = 8;
inline constexpr int kToyEmbedRows = kFamilyCount + 1;  // families + null

struct DenseLayer {
    int rows = 0, cols = 0;            // weight is rows x cols, row-major
    std::vector<double> w, b;

    void init(int r, int c, Rng& rng) {
        rows = r;
        cols = c;
        w.resize(static_cast<std::size_t>(r) * c);
        b.assign(r, 0.0);
        const double scale = std::sqrt(1.0 / c);
        for (auto& v : w) v = scale * rng.normal();
    }
};

struct ToyDenoiser {
    std::vector<DenseLayer> layers;             // 5120->512->512->512->512
    std::vector<double> embed;                  // kToyEmbedRows x kToyEmbedWidth
    std::vector<double> fold;                   // kToyEmbedWidth

    [[nodiscard]] static ToyDenoiser init(std::uint64_t seed) {
        ToyDenoiser m;
        Rng rng(seed);
        m.layers.resize(4);
        m.layers[0].init(kToyHidden, kToyInputDim, rng);
        m.layers[1].init(kToyHidden, kToyHidden, rng);
        m.layers[2].init(kToyHidden, kToyHidden, rng);
        m.layers[3].init(kToyDataDim, kToyHidden, rng);
        m.embed.resize(static_cast<std::size_t>(kToyEmbedRows) * kToyEmbedWidth);
        m.fold.resize(kToyEmbedWidth);
        for (auto& v : m.embed) v = 0.1 * rng.normal();
        for (auto& v : m.fold) v = 0.1 * rng.normal();
        return m;
    }

    [[nodiscard]] std::size_t parameter_count() const {
        std::size_t n = embed.size() + fold.size();
        for (const auto& l : layers) n += l.w.size() + l.b.size();
        return n;
    }

    /// Template row for an encoded template-channel value (family/32 or -1).
    [[nodiscard]] static int embed_row_for_channel(double v) {
        if (v < 0.0) return kFamilyCount;  // null template
        int fam = static_cast<int>(std::lround(v * 32.0));
        if (fam < 0 || fam >= kFamilyCount) return kFamilyCount;
        return fam;
    }

    [[nodiscard]] double template_scalar(int row) const {
        double s = 0.0;
        for (int j = 0; j < kToyEmbedWidth; ++j) s += embed[row * kToyEmbedWidth + j] * fold[j];
        return s;
    }
};

namespace detail {

inline void affine_forward(const DenseLayer& l, const std::vector<double>& x,
                           std::vector<double>& out) {
    out.resize(l.rows);
    for (int r = 0; r < l.rows; ++r) {
        const double* wr = l.w.data() + static_cast<std::size_t>(r) * l.cols;
        double acc = l.b[r];
        for (int c = 0; c < l.cols; ++c) acc += wr[c] * x[c];
        out[r] = acc;
    }
}

struct ForwardTrace {
    std::vector<double> input;           // assembled 5120 input
    std::vector<double> h1, h2, h3;      // post-activation hiddens
    std::vector<double> out;             // eps-hat
    int embed_row = kFamilyCount;
};

}  // namespace detail

/// Assemble the flat MLP input from noisy data, time, and conditioning
/// channels; the template channel is replaced by the learned fold scalar.
inline void assemble_input(const ToyDenoiser& m, const std::vector<double>& x_t, double t,
                           const ConditioningChannels& cond, std::vector<double>& input,
                           int* embed_row_out = nullptr) {
    if (static_cast<int>(x_t.size()) != kToyDataDim)
        throw std::invalid_argument("toy denoiser: data must be 2 x 16 x 16");
    if (cond.n != kToyGridN)
        throw std::invalid_argument("toy denoiser: conditioning must be on the 16-grid");
    input.resize(kToyInputDim);
    std::size_t o = 0;
    for (int i = 0; i < kToyDataDim; ++i) input[o++] = x_t[i];
    const int tpl_ch = kConditioningChannels - 1;
    int row = ToyDenoiser::embed_row_for_channel(cond.channel(tpl_ch)[0]);
    const double tpl_val = m.template_scalar(row);
    for (int ch = 0; ch < kConditioningChannels; ++ch) {
        const double* src = cond.channel(ch);
        if (ch == tpl_ch) {
            for (int i = 0; i < kToyPlane; ++i) input[o++] = tpl_val;
        } else {
            for (int i = 0; i < kToyPlane; ++i) input[o++] = src[i];
        }
    }
    for (int i = 0; i < kToyPlane; ++i) input[o++] = t;
    if (embed_row_out) *embed_row_out = row;
}

inline void toy_forward(const ToyDenoiser& m, const std::vector<double>& x_t, double t,
                        const ConditioningChannels& cond, detail::ForwardTrace& tr) {
    assemble_input(m, x_t, t, cond, tr.input, &tr.embed_row);
    detail::affine_forward(m.layers[0], tr.input, tr.h1);
    for (auto& v : tr.h1) v = std::tanh(v);
    detail::affine_forward(m.layers[1], tr.h1, tr.h2);
    for (auto& v : tr.h2) v = std::tanh(v);
    detail::affine_forward(m.layers[2], tr.h2, tr.h3);
    for (auto& v : tr.h3) v = std::tanh(v);
    detail::affine_forward(m.layers[3], tr.h3, tr.out);
}

/// eps-hat prediction (DenoiserInterface for the toy model).
inline std::vector<double> predict(const ToyDenoiser& m, const std::vector<double>& x_t, double t,
                                   const ConditioningChannels& cond) {
    detail::ForwardTrace tr;
    toy_forward(m, x_t, t, cond, tr);
    return tr.out;
}

// -----------------------------------------------------------------------------
// Training
// -----------------------------------------------------------------------------

/// One training record: clean data in [-1,1] on the 16-grid plus everything
/// needed to rebuild conditioning channels with per-sample drops.
struct TrainRecord {
    std::vector<double> x0;  // kToyDataDim, in [-1, 1]
    SParamSet sparams;
    FeedSet feeds;
    SubstrateSpec substrate;
    int template_id = kNullTemplate;
};

struct AdamState {
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;
    std::vector<double> m, v;

    void init(std::size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        step = 0;
    }

    void update(std::vector<double>& params, const std::vector<double>& grad) {
        ++step;
        const double bc1 = 1.0 - std::pow(beta1, step);
        const double bc2 = 1.0 - std::pow(beta2, step);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
    }
};

struct TrainOptions {
    long steps = 5000;
    int batch = 8;
    std::uint64_t seed = 0;
    double lr = 1e-3;
    double s_component_drop = 0.3;  // per-component mask probability
    double template_drop = 0.2;     // drop template to null
    int loss_every = 50;            // loss-curve sampling period
};

struct TrainResult {
    ToyDenoiser model;
    std::vector<std::pair<long, double>> loss_curve;  // (step, batch eps-MSE)
};

namespace detail {

/// Flat parameter/gradient view in a fixed order: layers (w then b), then
/// embedding table, then fold vector.
struct ParamPack {
    static void gather(const ToyDenoiser& m, std::vector<double>& flat) {
        flat.clear();
        for (const auto& l : m.layers) {
            flat.insert(flat.end(), l.w.begin(), l.w.end());
            flat.insert(flat.end(), l.b.begin(), l.b.end());
        }
        flat.insert(flat.end(), m.embed.begin(), m.embed.end());
        flat.insert(flat.end(), m.fold.begin(), m.fold.end());
    }

    static void scatter(const std::vector<double>& flat, ToyDenoiser& m) {
        std::size_t o = 0;
        for (auto& l : m.layers) {
            std::copy_n(flat.begin() + o, l.w.size(), l.w.begin());
            o += l.w.size();
            std::copy_n(flat.begin() + o, l.b.size(), l.b.begin());
            o += l.b.size();
        }
        std::copy_n(flat.begin() + o, m.embed.size(), m.embed.begin());
        o += m.embed.size();
        std::copy_n(flat.begin() + o, m.fold.size(), m.fold.begin());
    }
};

struct GradBuffers {
    std::vector<std::vector<double>> gw, gb;
    std::vector<double> gembed, gfold;

    void init(const ToyDenoiser& m) {
        gw.resize(m.layers.size());
        gb.resize(m.layers.size());
        for (std::size_t i = 0; i < m.layers.size(); ++i) {
            gw[i].assign(m.layers[i].w.size(), 0.0);
            gb[i].assign(m.layers[i].b.size(), 0.0);
        }
        gembed.assign(m.embed.size(), 0.0);
        gfold.assign(m.fold.size(), 0.0);
    }

    void zero() {
        for (auto& g : gw) std::fill(g.begin(), g.end(), 0.0);
        for (auto& g : gb) std::fill(g.begin(), g.end(), 0.0);
        std::fill(gembed.begin(), gembed.end(), 0.0);
        std::fill(gfold.begin(), gfold.end(), 0.0);
    }

    void flatten(std::vector<double>& flat) const {
        flat.clear();
        for (std::size_t i = 0; i < gw.size(); ++i) {
            flat.insert(flat.end(), gw[i].begin(), gw[i].end());
            flat.insert(flat.end(), gb[i].begin(), gb[i].end());
        }
        flat.insert(flat.end(), gembed.begin(), gembed.end());
        flat.insert(flat.end(), gfold.begin(), gfold.end());
    }
};

/// Backprop for one sample; dL/dout in `dout`, gradients accumulated.
inline void toy_backward(const ToyDenoiser& m, const ForwardTrace& tr,
                         const std::vector<double>& dout, GradBuffers& g) {
    auto backprop_layer = [](const DenseLayer& l, const std::vector<double>& x,
                             const std::vector<double>& delta, std::vector<double>& gw,
                             std::vector<double>& gb, std::vector<double>* dx) {
        if (dx) dx->assign(l.cols, 0.0);
        for (int r = 0; r < l.rows; ++r) {
            const double d = delta[r];
            gb[r] += d;
            double* gwr = gw.data() + static_cast<std::size_t>(r) * l.cols;
            const double* wr = l.w.data() + static_cast<std::size_t>(r) * l.cols;
            for (int c = 0; c < l.cols; ++c) gwr[c] += d * x[c];
            if (dx) {
                double* dxp = dx->data();
                for (int c = 0; c < l.cols; ++c) dxp[c] += d * wr[c];
            }
        }
    };

    std::vector<double> d3, d2, d1, din;
    backprop_layer(m.layers[3], tr.h3, dout, g.gw[3], g.gb[3], &d3);
    for (std::size_t i = 0; i < d3.size(); ++i) d3[i] *= 1.0 - tr.h3[i] * tr.h3[i];
    backprop_layer(m.layers[2], tr.h2, d3, g.gw[2], g.gb[2], &d2);
    for (std::size_t i = 0; i < d2.size(); ++i) d2[i] *= 1.0 - tr.h2[i] * tr.h2[i];
    backprop_layer(m.layers[1], tr.h1, d2, g.gw[1], g.gb[1], &d1);
    for (std::size_t i = 0; i < d1.size(); ++i) d1[i] *= 1.0 - tr.h1[i] * tr.h1[i];
    backprop_layer(m.layers[0], tr.input, d1, g.gw[0], g.gb[0], &din);

    // Template scalar feeds the whole template channel; fan the input
    // gradient back into the embedding row and the fold vector.
    const int tpl_ch = kConditioningChannels - 1;
    const std::size_t tpl_off = static_cast<std::size_t>(kToyDataDim) + tpl_ch * kToyPlane;
    double dscalar = 0.0;
    for (int i = 0; i < kToyPlane; ++i) dscalar += din[tpl_off + i];
    for (int j = 0; j < kToyEmbedWidth; ++j) {
        g.gembed[tr.embed_row * kToyEmbedWidth + j] += dscalar * m.fold[j];
        g.gfold[j] += dscalar * m.embed[tr.embed_row * kToyEmbedWidth + j];
    }
}

}  // namespace detail

/// Conditioning channels for one record with per-sample drops applied.
inline ConditioningChannels record_conditioning(const TrainRecord& rec, const DatasetStats& stats,
                                                const std::array<bool, 4>& drop_component,
                                                bool drop_template) {
    ConditioningBundle bundle;
    bundle.feeds = rec.feeds;
    bundle.substrate = rec.substrate;
    bundle.template_id = drop_template ? kNullTemplate : rec.template_id;
    SParamSet sp = rec.sparams;
    for (int c = 0; c < 4; ++c)
        if (drop_component[c]) sp.valid[c].fill(false);
    if (sp.any_valid()) bundle.target = sp;
    return encode_conditioning_channels(bundle, BoardGrid(kToyGridN, 0.5), stats);
}

/// eps-MSE training loop, deterministic for fixed (records, options).
inline TrainResult train(const std::vector<TrainRecord>& records, const DatasetStats& stats,
                         const TrainOptions& opt) {
    if (records.empty()) throw std::invalid_argument("train: empty dataset");
    TrainResult res;
    res.model = ToyDenoiser::init(mix_seed(opt.seed, 0xA11CE));
    ToyDenoiser& m = res.model;

    AdamState adam;
    adam.lr = opt.lr;
    std::vector<double> flat_params, flat_grad;
    detail::ParamPack::gather(m, flat_params);
    adam.init(flat_params.size());

    detail::GradBuffers grads;
    grads.init(m);
    Rng rng(mix_seed(opt.seed, 0xBA7C4));

    std::vector<double> x_t(kToyDataDim), eps(kToyDataDim), dout(kToyDataDim);
    detail::ForwardTrace tr;

    for (long step = 0; step < opt.steps; ++step) {
        grads.zero();
        double loss = 0.0;
        for (int b = 0; b < opt.batch; ++b) {
            const TrainRecord& rec = records[rng.next_below(records.size())];
            std::array<bool, 4> drop{};
            for (auto& d : drop) d = rng.uniform() < opt.s_component_drop;
            bool drop_tpl = rng.uniform() < opt.template_drop;
            ConditioningChannels cond = record_conditioning(rec, stats, drop, drop_tpl);

            const double t = rng.uniform();
            const double a = NoiseSchedule::alpha(t), sig = NoiseSchedule::sigma(t);
            for (int i = 0; i < kToyDataDim; ++i) {
                eps[i] = rng.normal();
                x_t[i] = a * rec.x0[i] + sig * eps[i];
            }
            toy_forward(m, x_t, t, cond, tr);
            const double norm = 2.0 / (static_cast<double>(kToyDataDim) * opt.batch);
            for (int i = 0; i < kToyDataDim; ++i) {
                const double diff = tr.out[i] - eps[i];
                loss += diff * diff / (kToyDataDim * opt.batch);
                dout[i] = norm * diff;
            }
            detail::toy_backward(m, tr, dout, grads);
        }
        grads.flatten(flat_grad);
        detail::ParamPack::gather(m, flat_params);
        adam.update(flat_params, flat_grad);
        detail::ParamPack::scatter(flat_params, m);

        if (step % opt.loss_every == 0 || step == opt.steps - 1)
            res.loss_curve.emplace_back(step, loss);
    }
    return res;
}

/// Analytic gradient of the batch loss w.r.t. the flat parameter vector,
/// for gradient checking.
inline void loss_and_grad(const ToyDenoiser& m, const std::vector<double>& x_t, double t,
                          const ConditioningChannels& cond, const std::vector<double>& eps,
                          double* loss_out, std::vector<double>* grad_out) {
    detail::ForwardTrace tr;
    toy_forward(m, x_t, t, cond, tr);
    double loss = 0.0;
    std::vector<double> dout(kToyDataDim);
    for (int i = 0; i < kToyDataDim; ++i) {
        const double diff = tr.out[i] - eps[i];
        loss += diff * diff / kToyDataDim;
        dout[i] = 2.0 * diff / kToyDataDim;
    }
    if (loss_out) *loss_out = loss;
    if (grad_out) {
        detail::GradBuffers g;
        g.init(m);
        detail::toy_backward(m, tr, dout, g);
        g.flatten(*grad_out);
    }
}

// -----------------------------------------------------------------------------
// Model file I/O
// -----------------------------------------------------------------------------
// Layout: magic "RFDN", u32 version = 1, u32 layer count, then u32 rows/cols
// per layer, then per layer the row-major f32 weights followed by the f32
// biases, then the embedding table (rows then fold vector) as f32, then a
// CRC32 (IEEE) of all preceding bytes. Little-endian throughout.

inline void save_model(const ToyDenoiser& m, const std::string& path) {
    std::string buf;
    buf += "RFDN";
    put_u32(buf, 1);
    put_u32(buf, static_cast<std::uint32_t>(m.layers.size()));
    for (const auto& l : m.layers) {
        put_u32(buf, static_cast<std::uint32_t>(l.rows));
        put_u32(buf, static_cast<std::uint32_t>(l.cols));
    }
    for (const auto& l : m.layers) {
        for (double v : l.w) put_f32(buf, v);
        for (double v : l.b) put_f32(buf, v);
    }
    for (double v : m.embed) put_f32(buf, v);
    for (double v : m.fold) put_f32(buf, v);
    put_u32(buf, crc32_ieee(buf));
    write_file(path, buf);
}

inline ToyDenoiser load_model(const std::string& path) {
    std::string buf = read_file(path);
    if (buf.size() < 8 || buf.compare(0, 4, "RFDN") != 0)
        throw std::runtime_error("load_model: bad magic");
    const std::size_t body = buf.size() - 4;
    ByteReader rd(buf);
    rd.off = 4;
    if (rd.u32() != 1) throw std::runtime_error("load_model: unsupported version");
    const std::uint32_t nlayers = rd.u32();
    if (nlayers != 4) throw std::runtime_error("load_model: unexpected layer count");

    ToyDenoiser m;
    m.layers.resize(nlayers);
    for (auto& l : m.layers) {
        l.rows = static_cast<int>(rd.u32());
        l.cols = static_cast<int>(rd.u32());
        if (l.rows <= 0 || l.cols <= 0) throw std::runtime_error("load_model: bad layer dims");
        if (static_cast<std::size_t>(l.rows) * l.cols * 4 > buf.size())
            throw std::runtime_error("load_model: truncated, layer data extends past byte " +
                                     std::to_string(buf.size()));
    }
    for (auto& l : m.layers) {
        l.w.resize(static_cast<std::size_t>(l.rows) * l.cols);
        l.b.resize(l.rows);
        for (auto& v : l.w) v = rd.f32();
        for (auto& v : l.b) v = rd.f32();
    }
    m.embed.resize(static_cast<std::size_t>(kToyEmbedRows) * kToyEmbedWidth);
    m.fold.resize(kToyEmbedWidth);
    for (auto& v : m.embed) v = rd.f32();
    for (auto& v : m.fold) v = rd.f32();

    if (rd.off != body) throw std::runtime_error("load_model: trailing or missing data");
    const std::uint32_t want = rd.u32();
    const std::uint32_t got =
        crc32_ieee(reinterpret_cast<const unsigned char*>(buf.data()), body);
    if (want != got) throw std::runtime_error("load_model: CRC mismatch");
    return m;
}

/// DenoiseFn adapter over a trained model with fixed conditioning.
inline DenoiseFn model_denoiser(const ToyDenoiser& m, ConditioningChannels cond) {
    auto shared = std::make_shared<ToyDenoiser>(m);
    return [shared, cond = std::move(cond)](const std::vector<double>& x, double t,
                                            std::vector<double>& eps) {
        detail::ForwardTrace tr;
        toy_forward(*shared, x, t, cond, tr);
        eps = tr.out;
    };
}

}  // namespace rfgen
