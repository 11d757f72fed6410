#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hexfuse/core.hpp"
#include "hexfuse/equations.hpp"

namespace hexfuse {

enum class Method { PlanarUnmanaged, PlanarManaged, Lines };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::PlanarUnmanaged: return "planar";
        case Method::PlanarManaged: return "planar-managed";
        case Method::Lines: return "lines";
    }
    return "?";
}

constexpr int kWarpSize = 32;
constexpr std::int64_t kMaxSharedBytes = 96 * 1024;

/// Block-group-local AoSoA offset: e_l + n*(i + j*m + k*m^2 + v*m^3).
inline std::int64_t lines_index(int e_l, int i, int j, int k, int v, int n, int p, int v_count = -1) {
    const int m = p + 1;
    if (v_count < 0) v_count = n_vars(3);
    if (n <= 0) throw std::out_of_range("lines_index: n must be positive");
    if (e_l < 0 || e_l >= n) throw std::out_of_range("lines_index: element out of range");
    if (i < 0 || i >= m || j < 0 || j >= m || k < 0 || k >= m)
        throw std::out_of_range("lines_index: point out of range");
    if (v < 0 || v >= v_count) throw std::out_of_range("lines_index: variable out of range");
    return e_l + static_cast<std::int64_t>(n) *
                     (i + static_cast<std::int64_t>(m) * j + static_cast<std::int64_t>(m) * m * k +
                      static_cast<std::int64_t>(m) * m * m * v);
}

/// Global element handled by a thread in the lines method.
inline int global_element(int thread_idx, int n, int block_idx) {
    if (n <= 0) throw std::invalid_argument("global_element: n must be positive");
    return thread_idx % n + n * block_idx;
}

/// Plane index of a thread in the planar method.
inline int planar_lane(int thread_idx, int p, int warp_size = kWarpSize) {
    if (p + 1 > warp_size) throw std::invalid_argument("planar_lane: p+1 exceeds warp size");
    return (thread_idx % warp_size) % (p + 1);
}

struct ElementConfig {
    int p = 3;
    int d = 3;
    int n_elem = 256;
    int block_threads = 128;
    Precision precision = Precision::fp32;
    Method method = Method::PlanarUnmanaged;

    int m() const { return p + 1; }
    int n_points() const { return static_cast<int>(ipow(m(), d)); }
    int nv() const { return n_vars(d); }
    int wordsize() const { return word_bytes(precision); }

    // Planar: elements never straddle a warp; trailing lanes idle.
    int planar_elems_per_warp() const { return kWarpSize / m(); }
    int warps_per_block() const { return (block_threads + kWarpSize - 1) / kWarpSize; }

    /// Elements per block: the AoSoA group size of the global layout.
    int elems_per_block() const {
        if (method == Method::Lines) {
            if (block_threads % (m() * m()) != 0)
                throw std::invalid_argument("ElementConfig: lines block must be n*(p+1)^2");
            return block_threads / (m() * m());
        }
        if (block_threads % kWarpSize != 0)
            throw std::invalid_argument("ElementConfig: planar block must be a warp multiple");
        return warps_per_block() * planar_elems_per_warp();
    }

    int n_blocks() const {
        const int g = elems_per_block();
        return (n_elem + g - 1) / g;
    }

    void validate() const {
        if (d != 2 && d != 3) throw std::invalid_argument("ElementConfig: d must be 2 or 3");
        if (p < 1 || p > 7) throw std::invalid_argument("ElementConfig: p must be in [1,7]");
        if (n_elem <= 0) throw std::invalid_argument("ElementConfig: n_elem must be positive");
        if (block_threads <= 0 || block_threads > 1024)
            throw std::invalid_argument("ElementConfig: block_threads must be in [1,1024]");
        (void)elems_per_block();
    }
};

/// Solution data for all elements in AoSoA order: elements of one block group
/// are minor, then point indices, then the variable index.
struct StateField {
    int d = 3;
    int p = 1;
    int n_elem = 0;
    int group = 1;  // AoSoA group size (elements per block)
    Precision precision = Precision::fp64;
    std::vector<double> data;

    StateField() = default;
    StateField(int d_, int p_, int n_elem_, int group_, Precision prec)
        : d(d_), p(p_), n_elem(n_elem_), group(group_), precision(prec) {
        data.assign(static_cast<std::size_t>(n_groups()) * group_words(), 0.0);
    }
    static StateField like(const ElementConfig& cfg) {
        return StateField(cfg.d, cfg.p, cfg.n_elem, cfg.elems_per_block(), cfg.precision);
    }

    int m() const { return p + 1; }
    int nv() const { return n_vars(d); }
    int n_points() const { return static_cast<int>(ipow(m(), d)); }
    int n_groups() const { return (n_elem + group - 1) / group; }
    std::int64_t group_words() const { return static_cast<std::int64_t>(group) * n_points() * nv(); }
    std::int64_t total_words() const { return static_cast<std::int64_t>(data.size()); }

    std::int64_t offset(int e, int i, int j, int k, int v) const {
        const int eg = e / group, el = e % group;
        const int mm = m();
        const std::int64_t pt = i + static_cast<std::int64_t>(mm) * j + static_cast<std::int64_t>(mm) * mm * k;
        return static_cast<std::int64_t>(eg) * group_words() + el +
               static_cast<std::int64_t>(group) * (pt + static_cast<std::int64_t>(n_points()) * v);
    }

    double& at(int e, int i, int j, int k, int v) { return data[static_cast<std::size_t>(offset(e, i, j, k, v))]; }
    double at(int e, int i, int j, int k, int v) const { return data[static_cast<std::size_t>(offset(e, i, j, k, v))]; }

    AcmHdState state_at(int e, int i, int j, int k) const {
        AcmHdState s(d);
        for (int v = 0; v < nv(); ++v) s.v[static_cast<std::size_t>(v)] = at(e, i, j, k, v);
        return s;
    }
    void set_state(int e, int i, int j, int k, const AcmHdState& s) {
        for (int v = 0; v < nv(); ++v) at(e, i, j, k, v) = s.v[static_cast<std::size_t>(v)];
    }

    /// Round every word to the storable precision.
    void quantize() {
        if (precision == Precision::fp32)
            for (auto& x : data) x = static_cast<double>(static_cast<float>(x));
    }
};

inline nlohmann::json field_sidecar(const StateField& f) {
    return {{"d", f.d},         {"p", f.p},           {"n_elem", f.n_elem},
            {"group", f.group}, {"precision", to_string(f.precision)},
            {"words", f.total_words()}, {"byte_order", "little"}};
}

/// Writes the field as a flat little-endian word blob plus a JSON sidecar at
/// <path>.json.
inline void export_blob(const StateField& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("export_blob: cannot open " + path);
    if (f.precision == Precision::fp32) {
        for (double x : f.data) {
            const float v = static_cast<float>(x);
            out.write(reinterpret_cast<const char*>(&v), sizeof v);
        }
    } else {
        out.write(reinterpret_cast<const char*>(f.data.data()),
                  static_cast<std::streamsize>(f.data.size() * sizeof(double)));
    }
    std::ofstream side(path + ".json");
    side << field_sidecar(f).dump(2) << "\n";
}

inline StateField import_blob(const std::string& path) {
    std::ifstream side(path + ".json");
    if (!side) throw std::runtime_error("import_blob: missing sidecar " + path + ".json");
    nlohmann::json j;
    side >> j;
    StateField f(j.at("d").get<int>(), j.at("p").get<int>(), j.at("n_elem").get<int>(),
                 j.at("group").get<int>(), precision_from_string(j.at("precision").get<std::string>()));
    if (f.total_words() != j.at("words").get<std::int64_t>())
        throw std::runtime_error("import_blob: sidecar word count mismatch");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("import_blob: cannot open " + path);
    if (f.precision == Precision::fp32) {
        std::vector<float> tmp(f.data.size());
        in.read(reinterpret_cast<char*>(tmp.data()), static_cast<std::streamsize>(tmp.size() * sizeof(float)));
        if (!in) throw std::runtime_error("import_blob: short read");
        for (std::size_t i = 0; i < tmp.size(); ++i) f.data[i] = static_cast<double>(tmp[i]);
    } else {
        in.read(reinterpret_cast<char*>(f.data.data()), static_cast<std::streamsize>(f.data.size() * sizeof(double)));
        if (!in) throw std::runtime_error("import_blob: short read");
    }
    return f;
}

} // namespace hexfuse
