#pragma once

// =============================================================================
// Dataset shard binary format and JSON manifest
// =============================================================================
// Fixed-size little-endian records concatenated into shard files; the
// manifest carries the grid, frequency-grid spec, per-shard CRCs, and the
// dataset's magnitude-dB z-score statistics.
//
// Record layout (34472 bytes):
//   u16 template_id, u16 pad,
//   f32 params[8] (unused slots NaN),
//   f32 ports[4] (x0,y0,x1,y1 mm), u8 port_mask[2], u16 pad,
//   f32 dielectric[3] (eps_r, tan_delta, h_mm),
//   f32 metal[4096], f32 via[4096],
//   f32 sparams[408] ([S11,S21,S12,S22] x 51 x [re,im]),
//   u8 s_mask[4]
// =============================================================================

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfgen/core.hpp"
#include "rfgen/io.hpp"

namespace rfgen {

inline constexpr std::size_t kRecordBytes = 34472;
inline constexpr int kRecordsPerShard = 256;

struct DatasetRecord {
    std::uint16_t template_id = 0;
    std::array<float, 8> params{};
    FeedSet feeds;
    SubstrateSpec substrate;
    BoardLayout layout;
    SParamSet sparams;

    DatasetRecord() : layout(BoardGrid{}) {
        params.fill(std::numeric_limits<float>::quiet_NaN());
    }
};

inline void append_record(std::string& buf, const DatasetRecord& rec) {
    const std::size_t start = buf.size();
    put_u16(buf, rec.template_id);
    put_u16(buf, 0);
    for (float p : rec.params) put_f32(buf, p);
    put_f32(buf, rec.feeds.ports[0].x_mm);
    put_f32(buf, rec.feeds.ports[0].y_mm);
    put_f32(buf, rec.feeds.ports[1].x_mm);
    put_f32(buf, rec.feeds.ports[1].y_mm);
    buf.push_back(rec.feeds.active[0] ? 1 : 0);
    buf.push_back(rec.feeds.active[1] ? 1 : 0);
    put_u16(buf, 0);
    put_f32(buf, rec.substrate.eps_r);
    put_f32(buf, rec.substrate.tan_delta);
    put_f32(buf, rec.substrate.h_mm);
    for (double v : rec.layout.metal) put_f32(buf, v);
    for (double v : rec.layout.via) put_f32(buf, v);
    for (int c = 0; c < 4; ++c)
        for (int k = 0; k < kFreqCount; ++k) {
            put_f32(buf, rec.sparams.data[c][k].real());
            put_f32(buf, rec.sparams.data[c][k].imag());
        }
    for (int c = 0; c < 4; ++c) buf.push_back(rec.sparams.component_valid(c) ? 1 : 0);
    if (buf.size() - start != kRecordBytes)
        throw std::logic_error("append_record: layout drifted from kRecordBytes");
}

inline DatasetRecord parse_record(ByteReader& rd) {
    DatasetRecord rec;
    rec.template_id = rd.u16();
    rd.u16();
    for (auto& p : rec.params) p = static_cast<float>(rd.f32());
    rec.feeds.ports[0].x_mm = rd.f32();
    rec.feeds.ports[0].y_mm = rd.f32();
    rec.feeds.ports[1].x_mm = rd.f32();
    rec.feeds.ports[1].y_mm = rd.f32();
    rec.feeds.active[0] = rd.u8() != 0;
    rec.feeds.active[1] = rd.u8() != 0;
    rd.u16();
    double er = rd.f32(), td = rd.f32(), h = rd.f32();
    rec.substrate = SubstrateSpec(er, td, h);
    for (auto& v : rec.layout.metal) v = rd.f32();
    for (auto& v : rec.layout.via) v = rd.f32();
    for (int c = 0; c < 4; ++c)
        for (int k = 0; k < kFreqCount; ++k) {
            double re = rd.f32(), im = rd.f32();
            rec.sparams.data[c][k] = complexd(re, im);
        }
    for (int c = 0; c < 4; ++c) rec.sparams.set_component_valid(c, rd.u8() != 0);
    return rec;
}

/// Global magnitude-dB z-score statistics over valid entries.
inline DatasetStats compute_stats(const std::vector<DatasetRecord>& records) {
    double sum = 0.0, sum2 = 0.0;
    long n = 0;
    for (const auto& rec : records)
        for (int c = 0; c < 4; ++c) {
            if (!rec.sparams.component_valid(c)) continue;
            for (int k = 0; k < kFreqCount; ++k) {
                double db = mag_db_floored(rec.sparams.data[c][k]);
                sum += db;
                sum2 += db * db;
                ++n;
            }
        }
    if (n < 2) return {};
    double mu = sum / n;
    double var = sum2 / n - mu * mu;
    return {mu, std::sqrt(std::max(var, 1e-12))};
}

struct DatasetOnDisk {
    std::vector<DatasetRecord> records;
    DatasetStats stats;
    nlohmann::json manifest;
};

/// Write shards plus manifest.json into a directory.
inline void write_dataset(const std::string& dir, const std::vector<DatasetRecord>& records,
                          std::uint64_t seed, const std::vector<std::string>& families,
                          bool augmented) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    nlohmann::json shards = nlohmann::json::array();
    for (std::size_t lo = 0; lo < records.size(); lo += kRecordsPerShard) {
        const std::size_t hi = std::min(records.size(), lo + kRecordsPerShard);
        std::string buf;
        buf.reserve((hi - lo) * kRecordBytes);
        for (std::size_t i = lo; i < hi; ++i) append_record(buf, records[i]);
        char name[32];
        std::snprintf(name, sizeof(name), "shard_%04zu.bin", lo / kRecordsPerShard);
        write_file((fs::path(dir) / name).string(), buf);
        shards.push_back({{"file", name}, {"records", hi - lo}, {"crc32", crc32_ieee(buf)}});
    }

    DatasetStats stats = compute_stats(records);
    nlohmann::json manifest{
        {"format_version", 1},
        {"grid", {{"n", kDefaultGridN}, {"pitch_mm", kDefaultPitchMM}}},
        {"frequency",
         {{"start_ghz", kFreqStartGHz}, {"step_ghz", kFreqStepGHz}, {"count", kFreqCount}}},
        {"record_size", kRecordBytes},
        {"record_count", records.size()},
        {"shards", shards},
        {"stats", {{"mu_db", stats.mu_db}, {"sigma_db", stats.sigma_db}}},
        {"seed", seed},
        {"families", families},
        {"augmented", augmented},
        {"created", ""},  // filled by the CLI; excluded from determinism checks
    };
    std::ofstream out(fs::path(dir) / "manifest.json");
    out << manifest.dump(2) << '\n';
}

inline DatasetOnDisk read_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    DatasetOnDisk ds;
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw std::runtime_error("read_dataset: missing manifest.json in " + dir);
    mf >> ds.manifest;
    if (ds.manifest.value("record_size", std::size_t(0)) != kRecordBytes)
        throw std::runtime_error("read_dataset: record size mismatch");
    ds.stats = DatasetStats(ds.manifest["stats"]["mu_db"].get<double>(),
                            ds.manifest["stats"]["sigma_db"].get<double>());
    for (const auto& sh : ds.manifest["shards"]) {
        std::string bytes = read_file((fs::path(dir) / sh["file"].get<std::string>()).string());
        if (crc32_ieee(bytes) != sh["crc32"].get<std::uint32_t>())
            throw std::runtime_error("read_dataset: CRC mismatch in " +
                                     sh["file"].get<std::string>());
        if (bytes.size() % kRecordBytes != 0)
            throw std::runtime_error("read_dataset: shard not a whole number of records");
        ByteReader rd(bytes);
        while (rd.off < rd.len) ds.records.push_back(parse_record(rd));
    }
    return ds;
}

}  // namespace rfgen
