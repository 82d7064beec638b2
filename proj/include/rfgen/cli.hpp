#pragma once

// =============================================================================
// Pipeline commands behind the CLI: dataset generation, training,
// generation, ranking, vectorization, evaluation.
// =============================================================================

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "rfgen/augment.hpp"
#include "rfgen/core.hpp"
#include "rfgen/dataset.hpp"
#include "rfgen/denoiser.hpp"
#include "rfgen/diffusion.hpp"
#include "rfgen/emsolve.hpp"
#include "rfgen/io.hpp"
#include "rfgen/metrics.hpp"
#include "rfgen/templates.hpp"
#include "rfgen/vectorize.hpp"

namespace rfgen::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitFormat = 3;
inline constexpr int kExitNumeric = 4;

// -----------------------------------------------------------------------------
// Flag parsing helpers
// -----------------------------------------------------------------------------

inline FeedSet parse_ports(const std::string& spec) {
    // "x0,y0" or "x0,y0;x1,y1"
    FeedSet feeds;
    std::size_t start = 0;
    int port = 0;
    while (start < spec.size() && port < 2) {
        std::size_t semi = spec.find(';', start);
        std::string tok = spec.substr(start, semi == std::string::npos ? semi : semi - start);
        double x, y;
        if (std::sscanf(tok.c_str(), "%lf,%lf", &x, &y) != 2)
            throw std::invalid_argument("bad port token '" + tok + "' (expected x,y)");
        feeds.ports[port] = {x, y};
        feeds.active[port] = true;
        ++port;
        if (semi == std::string::npos) break;
        start = semi + 1;
    }
    if (feeds.active_count() == 0) throw std::invalid_argument("no ports given");
    return feeds;
}

inline SubstrateSpec parse_substrate(const std::string& spec) {
    if (spec == "ro4003c") return SubstrateSpec::ro4003c();
    if (spec == "fr4") return SubstrateSpec::fr4();
    if (spec.rfind("custom:", 0) == 0) {
        double er, td, h;
        if (std::sscanf(spec.c_str() + 7, "%lf,%lf,%lf", &er, &td, &h) != 3)
            throw std::invalid_argument("bad custom substrate '" + spec +
                                        "' (expected custom:eps,tand,h)");
        return SubstrateSpec(er, td, h);
    }
    throw std::invalid_argument("unknown substrate '" + spec +
                                "' (ro4003c | fr4 | custom:eps,tand,h)");
}

inline int parse_template_id(const std::string& spec) {
    if (spec == "none") return kNullTemplate;
    return static_cast<int>(family_from_token(spec));
}

inline SamplerConfig parse_sampler(const std::string& name, int candidates, std::uint64_t seed) {
    if (name == "dpmpp") return SamplerConfig::dpmpp(seed, candidates > 0 ? candidates : 128);
    if (name == "langevin")
        return SamplerConfig::langevin(seed, candidates > 0 ? candidates : 16, true);
    throw std::invalid_argument("unknown sampler '" + name + "' (dpmpp | langevin)");
}

// -----------------------------------------------------------------------------
// dataset-gen
// -----------------------------------------------------------------------------

struct DatasetGenOptions {
    std::vector<std::string> families{"mline", "stepped_lpf", "open_stub_bsf", "via_shunt_stub",
                                      "l_match"};
    long count = 512;
    std::uint64_t seed = 0;
    bool augment = true;
    std::string out;
    std::string created;  // manifest timestamp text; empty stays deterministic
};

inline DatasetRecord generate_record(const std::vector<TemplateFamily>& fams, std::uint64_t seed) {
    Rng rng(seed);
    const BoardGrid grid;
    const auto family = fams[rng.next_below(fams.size())];

    // Port height on a pixel center in the central band.
    const int iy = 16 + static_cast<int>(rng.next_below(32));
    const double y = (iy + 0.5) * grid.pitch_mm;
    FeedSet feeds = FeedSet::pair(0.0, y, grid.side_mm(), y);
    SubstrateSpec substrate = rng.uniform() < 0.5 ? SubstrateSpec::ro4003c() : SubstrateSpec::fr4();

    TemplateInstance inst = sample_template(family, feeds, rng.next_u64());
    BoardLayout layout = emit_layout(inst, grid);
    SParamSet sp = solve(inst, FrequencyGrid::standard(), substrate);

    DatasetRecord rec;
    rec.template_id = static_cast<std::uint16_t>(family);
    for (std::size_t i = 0; i < inst.params.size() && i < rec.params.size(); ++i)
        rec.params[i] = static_cast<float>(inst.params[i]);
    rec.feeds = feeds;
    rec.substrate = substrate;
    rec.layout = layout;
    rec.sparams = sp;
    return rec;
}

inline void apply_augmentations(DatasetRecord& rec, Rng& rng) {
    // Decisions are drawn in a fixed order so the stream stays aligned.
    const bool do_rot = rng.uniform() < 0.5;
    const int rot_k = 1 + static_cast<int>(rng.next_below(3));
    const bool do_ref = rng.uniform() < 0.5;
    const ReflectAxis axis = rng.next_below(2) == 0 ? ReflectAxis::H : ReflectAxis::V;
    const bool do_swap = rng.uniform() < 0.5;
    const bool do_iso = rng.uniform() < 0.5;
    const std::uint64_t iso_seed = rng.next_u64();

    if (do_rot) {
        auto [l, f] = rotate90(rec.layout, rec.feeds, rot_k);
        rec.layout = std::move(l);
        rec.feeds = f;
    }
    if (do_ref) {
        auto [l, f] = reflect(rec.layout, rec.feeds, axis);
        rec.layout = std::move(l);
        rec.feeds = f;
    }
    if (do_swap && rec.feeds.active_count() == 2) {
        auto [f, sp] = port_swap(rec.feeds, rec.sparams);
        rec.feeds = f;
        rec.sparams = sp;
    }
    if (do_iso) rec.layout = add_isolated_structure(rec.layout, rec.feeds, iso_seed).layout;
}

inline int run_dataset_gen(const DatasetGenOptions& opt) {
    std::vector<TemplateFamily> fams;
    for (const auto& tok : opt.families) fams.push_back(family_from_token(tok));
    if (fams.empty()) throw std::invalid_argument("no families given");

    std::vector<DatasetRecord> records;
    records.reserve(opt.count);
    for (long i = 0; i < opt.count; ++i) {
        const std::uint64_t rec_seed = mix_seed(opt.seed, static_cast<std::uint64_t>(i));
        DatasetRecord rec = generate_record(fams, rec_seed);
        if (opt.augment) {
            Rng arng(mix_seed(rec_seed, 0xA06));
            apply_augmentations(rec, arng);
        }
        records.push_back(std::move(rec));
    }
    write_dataset(opt.out, records, opt.seed, opt.families, opt.augment);
    if (!opt.created.empty()) {
        // Patch the timestamp field in place; it is the one non-reproducible
        // manifest entry.
        namespace fs = std::filesystem;
        auto path = fs::path(opt.out) / "manifest.json";
        nlohmann::json m;
        std::ifstream in(path);
        in >> m;
        in.close();
        m["created"] = opt.created;
        std::ofstream out(path);
        out << m.dump(2) << '\n';
    }
    std::cout << "wrote " << records.size() << " records to " << opt.out << "\n";
    return kExitOk;
}

// -----------------------------------------------------------------------------
// train
// -----------------------------------------------------------------------------

struct TrainCliOptions {
    std::string dataset;
    long steps = 5000;
    int batch = 8;
    std::uint64_t seed = 0;
    std::string out = "model.bin";
};

inline std::vector<TrainRecord> to_train_records(const std::vector<DatasetRecord>& records) {
    std::vector<TrainRecord> out;
    out.reserve(records.size());
    const int factor = kDefaultGridN / kToyGridN;
    for (const auto& rec : records) {
        TrainRecord tr;
        tr.x0.resize(kToyDataDim);
        auto metal16 = box_downsample(rec.layout.metal, kDefaultGridN, factor);
        auto via16 = box_downsample(rec.layout.via, kDefaultGridN, factor);
        for (int i = 0; i < kToyPlane; ++i) {
            tr.x0[i] = 2.0 * metal16[i] - 1.0;
            tr.x0[kToyPlane + i] = 2.0 * via16[i] - 1.0;
        }
        tr.sparams = rec.sparams;
        tr.feeds = rec.feeds;
        tr.substrate = rec.substrate;
        tr.template_id = rec.template_id;
        out.push_back(std::move(tr));
    }
    return out;
}

inline int run_train(const TrainCliOptions& opt) {
    DatasetOnDisk ds = read_dataset(opt.dataset);
    auto records = to_train_records(ds.records);

    TrainOptions topt;
    topt.steps = opt.steps;
    topt.batch = opt.batch;
    topt.seed = opt.seed;
    TrainResult res = train(records, ds.stats, topt);

    save_model(res.model, opt.out);
    std::ofstream curve(opt.out + ".loss.csv");
    curve << "step,mse\n";
    for (auto [step, mse] : res.loss_curve) curve << step << ',' << mse << '\n';

    nlohmann::json meta{{"stats", {{"mu_db", ds.stats.mu_db}, {"sigma_db", ds.stats.sigma_db}}},
                        {"families", ds.manifest.value("families", nlohmann::json::array())},
                        {"train_steps", opt.steps},
                        {"train_seed", opt.seed}};
    std::ofstream metaf(opt.out + ".meta.json");
    metaf << meta.dump(2) << '\n';

    std::cout << "trained " << opt.steps << " steps; final mse "
              << (res.loss_curve.empty() ? 0.0 : res.loss_curve.back().second) << "\n";
    return kExitOk;
}

// -----------------------------------------------------------------------------
// generate
// -----------------------------------------------------------------------------

struct GenerateOptions {
    std::string model;
    std::string target;  // optional .s2p
    std::string ports = "0.0,4.0625;8.0,4.0625";
    std::string substrate = "ro4003c";
    std::string template_name = "none";
    std::string sampler = "dpmpp";
    int candidates = 0;  // 0 = sampler default
    std::uint64_t seed = 0;
    std::string out = "candidates";
    int workers = 1;
};

inline DatasetStats stats_for_model(const std::string& model_path) {
    namespace fs = std::filesystem;
    fs::path meta = model_path + ".meta.json";
    if (fs::exists(meta)) {
        nlohmann::json m;
        std::ifstream in(meta);
        in >> m;
        return DatasetStats(m["stats"]["mu_db"].get<double>(),
                            m["stats"]["sigma_db"].get<double>());
    }
    return {};
}

inline std::vector<BoardLayout> generate_candidates(const ToyDenoiser& model,
                                                    const ConditioningBundle& bundle,
                                                    const DatasetStats& stats,
                                                    const SamplerConfig& cfg, int workers) {
    const BoardGrid grid16(kToyGridN, kDefaultGridN * kDefaultPitchMM / kToyGridN);
    ConditioningChannels cond = encode_conditioning_channels(bundle, grid16, stats);
    DenoiseFn fn = model_denoiser(model, std::move(cond));
    std::vector<BoardLayout> small = sample_boards(fn, grid16, bundle.feeds, cfg, workers);

    const int factor = kDefaultGridN / kToyGridN;
    std::vector<BoardLayout> out;
    out.reserve(small.size());
    for (const auto& b : small) {
        BoardLayout big{BoardGrid{}};
        big.metal = nearest_upsample(b.metal, kToyGridN, factor);
        big.via = nearest_upsample(b.via, kToyGridN, factor);
        out.push_back(std::move(big));
    }
    return out;
}

inline int run_generate(const GenerateOptions& opt) {
    namespace fs = std::filesystem;
    ToyDenoiser model = load_model(opt.model);
    DatasetStats stats = stats_for_model(opt.model);

    ConditioningBundle bundle;
    bundle.feeds = parse_ports(opt.ports);
    bundle.substrate = parse_substrate(opt.substrate);
    bundle.template_id = parse_template_id(opt.template_name);
    if (!opt.target.empty()) bundle.target = touchstone_read(opt.target);

    SamplerConfig cfg = parse_sampler(opt.sampler, opt.candidates, opt.seed);
    auto boards = generate_candidates(model, bundle, stats, cfg, opt.workers);

    fs::create_directories(opt.out);
    for (std::size_t i = 0; i < boards.size(); ++i) {
        char base[32];
        std::snprintf(base, sizeof(base), "cand_%03zu", i);
        write_board_f32(boards[i], (fs::path(opt.out) / (std::string(base) + ".f32")).string());
        write_pgm(boards[i].metal, kDefaultGridN,
                  (fs::path(opt.out) / (std::string(base) + ".metal.pgm")).string());
        write_pgm(boards[i].via, kDefaultGridN,
                  (fs::path(opt.out) / (std::string(base) + ".via.pgm")).string());
    }
    std::cout << "wrote " << boards.size() << " candidates to " << opt.out << "\n";
    return kExitOk;
}

// -----------------------------------------------------------------------------
// rank
// -----------------------------------------------------------------------------

/// Via extraction from the via channel: 4-connected blobs above threshold
/// become drill hits at the blob centroid.
inline std::vector<ViaMM> extract_vias(const std::vector<double>& via_plane, const BoardGrid& grid,
                                       double threshold = 0.5) {
    const int n = grid.n;
    std::vector<char> mask(via_plane.size());
    for (std::size_t i = 0; i < via_plane.size(); ++i) mask[i] = via_plane[i] >= threshold;
    std::vector<ViaMM> out;
    std::vector<std::pair<int, int>> stack;
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            if (!mask[static_cast<std::size_t>(iy) * n + ix]) continue;
            double sx = 0, sy = 0;
            int cnt = 0;
            stack.assign(1, {ix, iy});
            mask[static_cast<std::size_t>(iy) * n + ix] = 0;
            while (!stack.empty()) {
                auto [cx, cy] = stack.back();
                stack.pop_back();
                sx += (cx + 0.5) * grid.pitch_mm;
                sy += (cy + 0.5) * grid.pitch_mm;
                ++cnt;
                const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
                for (int d = 0; d < 4; ++d) {
                    int jx = cx + dx[d], jy = cy + dy[d];
                    if (jx < 0 || jx >= n || jy < 0 || jy >= n) continue;
                    if (mask[static_cast<std::size_t>(jy) * n + jx]) {
                        mask[static_cast<std::size_t>(jy) * n + jx] = 0;
                        stack.push_back({jx, jy});
                    }
                }
            }
            out.push_back(ViaMM(sx / cnt, sy / cnt, kViaRadiusMM));
        }
    }
    return out;
}

/// Full candidate pipeline: board raster -> rects -> family parameters ->
/// netlist -> S-parameters. std::nullopt = NoFit.
inline std::optional<SParamSet> board_to_sparams(const BoardLayout& board, TemplateFamily family,
                                                 const FeedSet& feeds,
                                                 const SubstrateSpec& substrate) {
    try {
        auto rects = extract_rects(board.metal, board.grid);
        if (rects.empty()) return std::nullopt;
        rects = refine_rects(rects, board.metal, board.grid);
        auto vias = extract_vias(board.via, board.grid);
        auto params = extract_params(family, rects, vias, feeds);
        if (!params) return std::nullopt;
        TemplateInstance inst = make_instance(family, *params, feeds);
        return solve(inst, FrequencyGrid::standard(), substrate);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

struct RankOptions {
    std::string candidates_dir;
    std::string target;
    std::string template_name = "mline";
    std::string ports = "0.0,4.0625;8.0,4.0625";
    std::string substrate = "ro4003c";
    std::string out_csv;
};

inline int run_rank(const RankOptions& opt) {
    namespace fs = std::filesystem;
    SParamSet tgt = touchstone_read(opt.target);
    FeedSet feeds = parse_ports(opt.ports);
    SubstrateSpec substrate = parse_substrate(opt.substrate);
    int tid = parse_template_id(opt.template_name);
    if (tid == kNullTemplate)
        throw std::invalid_argument("rank: a concrete --template is required");
    auto family = static_cast<TemplateFamily>(tid);

    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(opt.candidates_dir))
        if (e.path().extension() == ".f32") files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::invalid_argument("rank: no .f32 boards in " + opt.candidates_dir);

    std::vector<std::pair<BoardLayout, std::optional<SParamSet>>> cands;
    for (const auto& f : files) {
        BoardLayout board = read_board_f32(f, BoardGrid{});
        auto sp = board_to_sparams(board, family, feeds, substrate);
        cands.emplace_back(std::move(board), std::move(sp));
    }
    auto rows = rank_candidates(cands, tgt, feeds);

    std::ofstream csv;
    if (!opt.out_csv.empty()) {
        csv.open(opt.out_csv);
        csv << "rank,file,rmse,wmae_db,valid\n";
    }
    std::printf("%-4s %-24s %10s %10s %s\n", "rank", "file", "rmse", "wmae_db", "valid");
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        std::string name = fs::path(files[row.index]).filename().string();
        std::printf("%-4zu %-24s %10.6f %10.4f %d\n", r, name.c_str(), row.rmse, row.wmae,
                    row.feed_ok ? 1 : 0);
        if (csv.is_open())
            csv << r << ',' << name << ',' << row.rmse << ',' << row.wmae << ','
                << (row.feed_ok ? 1 : 0) << '\n';
    }
    return kExitOk;
}

// -----------------------------------------------------------------------------
// vectorize
// -----------------------------------------------------------------------------

struct VectorizeOptions {
    std::string board;
    std::string out_gerber = "board.gbr";
    std::string out_drill = "board.drl";
};

inline int run_vectorize(const VectorizeOptions& opt) {
    BoardLayout board = read_board_f32(opt.board, BoardGrid{});
    auto rects = extract_rects(board.metal, board.grid);
    rects = refine_rects(rects, board.metal, board.grid);
    auto warnings = to_gerber(rects, board.grid, opt.out_gerber);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    auto vias = extract_vias(board.via, board.grid);
    to_excellon(vias, board.grid, opt.out_drill);
    std::cout << "wrote " << rects.size() << " rects to " << opt.out_gerber << " and "
              << vias.size() << " drills to " << opt.out_drill << "\n";
    return kExitOk;
}

// -----------------------------------------------------------------------------
// eval
// -----------------------------------------------------------------------------

struct EvalOptions {
    std::string dataset;
    std::string model;
    int samples = 10;
    std::string sampler = "dpmpp";
    int candidates = 0;
    std::uint64_t seed = 0;
    int workers = 1;
    std::string out_csv;
};

struct EvalReport {
    double valid_rate = 0.0;
    double mean_best_rmse = 0.0, std_best_rmse = 0.0;
    double mean_best_wmae = 0.0, std_best_wmae = 0.0;
    int targets = 0, fitted_targets = 0;
};

/// Record usable as an eval target: two ports on the left/right edges at one
/// height, which is what the extraction pipeline expects.
inline bool eval_compatible(const DatasetRecord& rec) {
    const auto& f = rec.feeds;
    if (f.active_count() != 2) return false;
    double xl = std::min(f.ports[0].x_mm, f.ports[1].x_mm);
    double xr = std::max(f.ports[0].x_mm, f.ports[1].x_mm);
    return std::abs(f.ports[0].y_mm - f.ports[1].y_mm) < 1e-9 && std::abs(xl) < 1e-9 &&
           std::abs(xr - rec.layout.grid.side_mm()) < 1e-9;
}

inline EvalReport run_eval_core(const DatasetOnDisk& ds, const ToyDenoiser& model,
                                const EvalOptions& opt) {
    std::vector<const DatasetRecord*> targets;
    for (auto it = ds.records.rbegin(); it != ds.records.rend(); ++it) {
        if (eval_compatible(*it)) targets.push_back(&*it);
        if (static_cast<int>(targets.size()) >= opt.samples) break;
    }
    if (targets.empty()) throw std::invalid_argument("eval: no axis-compatible records");

    EvalReport rep;
    rep.targets = static_cast<int>(targets.size());
    long valid = 0, total = 0;
    std::vector<double> best_rmse, best_wmae;
    for (std::size_t ti = 0; ti < targets.size(); ++ti) {
        const DatasetRecord& rec = *targets[ti];
        ConditioningBundle bundle;
        bundle.feeds = rec.feeds;
        bundle.substrate = rec.substrate;
        bundle.template_id = rec.template_id;
        bundle.target = rec.sparams;

        SamplerConfig cfg = parse_sampler(opt.sampler, opt.candidates,
                                          mix_seed(opt.seed, 0xE7A1 + ti));
        auto boards = generate_candidates(model, bundle, ds.stats, cfg, opt.workers);

        std::vector<std::pair<BoardLayout, std::optional<SParamSet>>> cands;
        for (auto& b : boards) {
            auto sp = board_to_sparams(b, static_cast<TemplateFamily>(rec.template_id), rec.feeds,
                                       rec.substrate);
            cands.emplace_back(std::move(b), std::move(sp));
        }
        for (const auto& [b, sp] : cands) {
            valid += feed_valid(b, rec.feeds) ? 1 : 0;
            ++total;
        }
        auto rows = rank_candidates(cands, rec.sparams, rec.feeds);
        if (!rows.empty() && !rows.front().nofit && rows.front().feed_ok) {
            best_rmse.push_back(rows.front().rmse);
            best_wmae.push_back(rows.front().wmae);
        }
    }
    rep.valid_rate = total > 0 ? static_cast<double>(valid) / total : 0.0;
    rep.fitted_targets = static_cast<int>(best_rmse.size());
    auto moments = [](const std::vector<double>& xs, double& mean, double& stdev) {
        if (xs.empty()) {
            mean = stdev = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        mean = 0.0;
        for (double x : xs) mean += x;
        mean /= xs.size();
        stdev = 0.0;
        for (double x : xs) stdev += (x - mean) * (x - mean);
        stdev = xs.size() > 1 ? std::sqrt(stdev / (xs.size() - 1)) : 0.0;
    };
    moments(best_rmse, rep.mean_best_rmse, rep.std_best_rmse);
    moments(best_wmae, rep.mean_best_wmae, rep.std_best_wmae);
    return rep;
}

inline int run_eval(const EvalOptions& opt) {
    DatasetOnDisk ds = read_dataset(opt.dataset);
    ToyDenoiser model = load_model(opt.model);
    EvalReport rep = run_eval_core(ds, model, opt);

    std::cout << "targets=" << rep.targets << "\n"
              << "fitted_targets=" << rep.fitted_targets << "\n"
              << "valid_rate=" << rep.valid_rate << "\n"
              << "mean_best_rmse=" << rep.mean_best_rmse << "\n"
              << "std_best_rmse=" << rep.std_best_rmse << "\n"
              << "mean_best_wmae=" << rep.mean_best_wmae << "\n"
              << "std_best_wmae=" << rep.std_best_wmae << "\n";
    if (!opt.out_csv.empty()) {
        std::ofstream csv(opt.out_csv);
        csv << "targets,fitted_targets,valid_rate,mean_best_rmse,std_best_rmse,mean_best_wmae,"
               "std_best_wmae\n"
            << rep.targets << ',' << rep.fitted_targets << ',' << rep.valid_rate << ','
            << rep.mean_best_rmse << ',' << rep.std_best_rmse << ',' << rep.mean_best_wmae << ','
            << rep.std_best_wmae << '\n';
    }
    return kExitOk;
}

}  // namespace rfgen::cli
