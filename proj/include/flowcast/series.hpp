// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowcast/common.hpp"

namespace flowcast {

using json = nlohmann::json;

constexpr int kSeriesSchemaVersion = 1;

/// An ordered stack of T flow snapshots, each H x W with C physical variables.
/// Storage is float32, index order t-major then h, w, c.
struct FlowSnapshotSeries {
    std::int64_t T = 0, H = 0, W = 0, C = 0;
    std::vector<std::string> variables;  // length C, e.g. {"u","v","omega"}
    double dt_record = 0.0;              // seconds between snapshots
    std::string scenario;
    json provenance = "imported";        // solver config object, or "imported"
    std::optional<std::int64_t> seed;
    std::vector<float> data;             // size T*H*W*C

    std::size_t index(std::int64_t t, std::int64_t h, std::int64_t w, std::int64_t c) const {
        return static_cast<std::size_t>(((t * H + h) * W + w) * C + c);
    }
    float at(std::int64_t t, std::int64_t h, std::int64_t w, std::int64_t c) const {
        return data[index(t, h, w, c)];
    }
    float& at(std::int64_t t, std::int64_t h, std::int64_t w, std::int64_t c) {
        return data[index(t, h, w, c)];
    }
    std::size_t snapshot_size() const { return static_cast<std::size_t>(H * W * C); }
    const float* snapshot(std::int64_t t) const { return data.data() + t * H * W * C; }
    float* snapshot(std::int64_t t) { return data.data() + t * H * W * C; }

    void validate() const {
        if (T < 1) throw ConfigError("series must contain at least one snapshot");
        if (H < 1 || W < 1 || C < 1) throw ConfigError("series has empty spatial or channel extent");
        if (static_cast<std::int64_t>(variables.size()) != C)
            throw ConfigError(strformat("series declares %zu variables but C=%lld",
                                        variables.size(), static_cast<long long>(C)));
        if (data.size() != static_cast<std::size_t>(T * H * W * C))
            throw ConfigError("series data size does not match T*H*W*C");
    }
};

/// Writes manifest.json + snapshots.f32 into dir. Round-trips bit-exactly.
inline std::string write_series(const FlowSnapshotSeries& s, const std::string& dir) {
    s.validate();
    for (std::size_t i = 0; i < s.data.size(); ++i) {
        if (!std::isfinite(s.data[i])) {
            std::int64_t c = i % s.C, w = (i / s.C) % s.W, h = (i / (s.C * s.W)) % s.H,
                         t = i / (s.C * s.W * s.H);
            throw RuntimeFailure(strformat(
                "non-finite value in series at (t=%lld, h=%lld, w=%lld, c=%lld)",
                static_cast<long long>(t), static_cast<long long>(h),
                static_cast<long long>(w), static_cast<long long>(c)));
        }
    }
    std::filesystem::create_directories(dir);

    json m;
    m["schema_version"] = kSeriesSchemaVersion;
    m["scenario"] = s.scenario;
    m["variables"] = s.variables;
    m["T"] = s.T;
    m["H"] = s.H;
    m["W"] = s.W;
    m["C"] = s.C;
    m["dt_record"] = s.dt_record;
    m["dtype"] = "f32";
    m["byte_order"] = "little";
    if (s.seed) m["seed"] = *s.seed; else m["seed"] = nullptr;
    m["provenance"] = s.provenance;

    const std::string blob_path = dir + "/snapshots.f32";
    {
        std::ofstream blob(blob_path, std::ios::binary | std::ios::trunc);
        if (!blob) throw RuntimeFailure("cannot write " + blob_path);
        write_f32_le(blob, s.data.data(), s.data.size());
        if (!blob) throw RuntimeFailure("write failed for " + blob_path);
    }
    const std::string manifest_path = dir + "/manifest.json";
    {
        std::ofstream mf(manifest_path, std::ios::trunc);
        if (!mf) throw RuntimeFailure("cannot write " + manifest_path);
        mf << m.dump(2) << "\n";
    }
    return manifest_path;
}

/// Reads a series directory written by write_series (or any conforming importer output).
inline FlowSnapshotSeries read_series(const std::string& dir) {
    const std::string manifest_path = dir + "/manifest.json";
    std::ifstream mf(manifest_path);
    if (!mf) throw ConfigError("missing manifest: " + manifest_path);
    json m;
    try {
        mf >> m;
    } catch (const json::exception& e) {
        throw ConfigError(strformat("malformed manifest %s: %s", manifest_path.c_str(), e.what()));
    }
    if (!m.contains("schema_version") || m["schema_version"].get<int>() != kSeriesSchemaVersion)
        throw ConfigError("unknown schema_version in " + manifest_path);
    if (m.value("dtype", "") != "f32")
        throw ConfigError("unsupported dtype in " + manifest_path);
    if (m.value("byte_order", "") != "little")
        throw ConfigError("unsupported byte_order in " + manifest_path);

    FlowSnapshotSeries s;
    s.T = m.at("T").get<std::int64_t>();
    s.H = m.at("H").get<std::int64_t>();
    s.W = m.at("W").get<std::int64_t>();
    s.C = m.at("C").get<std::int64_t>();
    s.variables = m.at("variables").get<std::vector<std::string>>();
    s.dt_record = m.at("dt_record").get<double>();
    s.scenario = m.value("scenario", "");
    s.provenance = m.contains("provenance") ? m["provenance"] : json("imported");
    if (m.contains("seed") && !m["seed"].is_null()) s.seed = m["seed"].get<std::int64_t>();

    const std::string blob_path = dir + "/snapshots.f32";
    std::error_code ec;
    auto bytes = std::filesystem::file_size(blob_path, ec);
    if (ec) throw ConfigError("missing snapshot blob: " + blob_path);
    const std::uint64_t expected =
        static_cast<std::uint64_t>(s.T) * s.H * s.W * s.C * 4ULL;
    if (bytes != expected)
        throw ConfigError(strformat("snapshot blob size mismatch: have %llu bytes, manifest implies %llu",
                                    static_cast<unsigned long long>(bytes),
                                    static_cast<unsigned long long>(expected)));
    s.data.resize(static_cast<std::size_t>(s.T * s.H * s.W * s.C));
    std::ifstream blob(blob_path, std::ios::binary);
    read_f32_le(blob, s.data.data(), s.data.size());
    if (!blob) throw RuntimeFailure("read failed for " + blob_path);
    s.validate();
    return s;
}

/// Contiguous temporal train/test split.
struct SplitSpec {
    double train_fraction = 0.9;
    bool contiguous = true;  // shuffled splits are not supported
};

inline std::int64_t split_index(std::int64_t T, const SplitSpec& spec) {
    if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0)
        throw ConfigError("train_fraction must lie strictly between 0 and 1");
    if (!spec.contiguous)
        throw ConfigError("only contiguous temporal splits are supported");
    return static_cast<std::int64_t>(std::floor(static_cast<double>(T) * spec.train_fraction));
}

inline std::pair<FlowSnapshotSeries, FlowSnapshotSeries>
split_series(const FlowSnapshotSeries& s, const SplitSpec& spec = {}) {
    if (s.T < 10) throw ConfigError("series too short to split (need T >= 10)");
    const std::int64_t cut = split_index(s.T, spec);
    auto slice = [&](std::int64_t t0, std::int64_t t1) {
        FlowSnapshotSeries out = s;
        out.T = t1 - t0;
        out.data.assign(s.data.begin() + t0 * s.H * s.W * s.C,
                        s.data.begin() + t1 * s.H * s.W * s.C);
        return out;
    };
    return {slice(0, cut), slice(cut, s.T)};
}

/// Per-variable affine normalization fitted on a training split.
/// minmax maps the observed [min, max] to [-1, 1]; zscore subtracts the mean
/// and divides by the standard deviation. Degenerate variables (zero range
/// or zero variance) are passed through unchanged and flagged.
struct FieldNormalizer {
    std::string mode = "minmax";  // "minmax" | "zscore"
    std::vector<double> a, b;     // x' = (x - a) / b  (b = half-range or std)
    std::vector<bool> degenerate;

    void fit(const FlowSnapshotSeries& train) {
        train.validate();
        const std::int64_t C = train.C;
        a.assign(C, 0.0);
        b.assign(C, 1.0);
        degenerate.assign(C, false);
        const std::int64_t npts = train.T * train.H * train.W;
        for (std::int64_t c = 0; c < C; ++c) {
            if (mode == "minmax") {
                double lo = std::numeric_limits<double>::infinity(), hi = -lo;
                for (std::int64_t i = 0; i < npts; ++i) {
                    double v = train.data[i * C + c];
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                if (hi > lo) {
                    a[c] = 0.5 * (hi + lo);
                    b[c] = 0.5 * (hi - lo);
                } else {
                    degenerate[c] = true;
                    warnf(strformat("variable '%s' has zero range; normalization passes it through",
                                    train.variables[c].c_str()));
                }
            } else if (mode == "zscore") {
                double mean = 0.0;
                for (std::int64_t i = 0; i < npts; ++i) mean += train.data[i * C + c];
                mean /= static_cast<double>(npts);
                double var = 0.0;
                for (std::int64_t i = 0; i < npts; ++i) {
                    double d = train.data[i * C + c] - mean;
                    var += d * d;
                }
                var /= static_cast<double>(npts);
                if (var > 0.0) {
                    a[c] = mean;
                    b[c] = std::sqrt(var);
                } else {
                    degenerate[c] = true;
                    warnf(strformat("variable '%s' has zero variance; normalization passes it through",
                                    train.variables[c].c_str()));
                }
            } else {
                throw ConfigError("unknown normalizer mode: " + mode);
            }
        }
    }

    bool fitted() const { return !a.empty(); }

    FlowSnapshotSeries normalize(const FlowSnapshotSeries& s) const { return apply(s, false); }
    FlowSnapshotSeries denormalize(const FlowSnapshotSeries& s) const { return apply(s, true); }

    json to_json() const {
        json j;
        j["mode"] = mode;
        j["a"] = a;
        j["b"] = b;
        j["degenerate"] = std::vector<int>(degenerate.begin(), degenerate.end());
        return j;
    }
    static FieldNormalizer from_json(const json& j) {
        FieldNormalizer n;
        n.mode = j.at("mode").get<std::string>();
        n.a = j.at("a").get<std::vector<double>>();
        n.b = j.at("b").get<std::vector<double>>();
        for (int d : j.at("degenerate").get<std::vector<int>>()) n.degenerate.push_back(d != 0);
        return n;
    }

private:
    FlowSnapshotSeries apply(const FlowSnapshotSeries& s, bool inverse) const {
        if (!fitted()) throw ConfigError("normalizer has not been fitted");
        if (static_cast<std::size_t>(s.C) != a.size())
            throw ConfigError("normalizer channel count does not match series");
        FlowSnapshotSeries out = s;
        const std::int64_t C = s.C;
        const std::int64_t npts = s.T * s.H * s.W;
        for (std::int64_t c = 0; c < C; ++c) {
            if (degenerate[c]) continue;
            const float ac = static_cast<float>(a[c]), bc = static_cast<float>(b[c]);
            for (std::int64_t i = 0; i < npts; ++i) {
                float& v = out.data[i * C + c];
                v = inverse ? v * bc + ac : (v - ac) / bc;
            }
        }
        return out;
    }
};

} // namespace flowcast
