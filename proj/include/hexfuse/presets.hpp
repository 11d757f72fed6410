#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hexfuse/codegen_lines.hpp"
#include "hexfuse/codegen_planar.hpp"
#include "hexfuse/passes.hpp"

namespace hexfuse {

/// Optimal kernel configurations per order and working precision.
struct Preset {
    std::string name;
    Method method = Method::PlanarUnmanaged;
    int p = 1;
    Precision precision = Precision::fp32;
    int block_threads = 128;
    std::int64_t smem_bytes = 0;  // 0: derived from the layout
    int lines_vars = 25;
};

inline const std::vector<Preset>& preset_table() {
    static const std::vector<Preset> table = {
        {"fp32-p1", Method::PlanarUnmanaged, 1, Precision::fp32, 128, 0, 25},
        {"fp32-p2", Method::PlanarUnmanaged, 2, Precision::fp32, 128, 0, 25},
        {"fp32-p3", Method::PlanarManaged, 3, Precision::fp32, 128, 66 * 1024, 25},
        {"fp32-p4", Method::Lines, 4, Precision::fp32, 200, 96000, 24},
        {"fp64-p1", Method::PlanarManaged, 1, Precision::fp64, 128, 42 * 1024, 25},
        {"fp64-p2", Method::PlanarManaged, 2, Precision::fp64, 128, 59 * 1024, 25},
        {"fp64-p3", Method::Lines, 3, Precision::fp64, 192, 92160, 15},
        {"fp64-p4", Method::Lines, 4, Precision::fp64, 200, 96000, 12},
    };
    return table;
}

inline const Preset& find_preset(const std::string& name) {
    for (const auto& p : preset_table())
        if (p.name == name) return p;
    throw std::invalid_argument("unknown preset: " + name);
}

/// Optimisation-option combinations 0..17 of the managed-kernel study; the
/// shipped default is case 13 (GRS + deconfliction + load hints).
inline OptionSet opt_case(int c) {
    if (c < 0 || c > 17) throw std::invalid_argument("opt_case: case must be in [0,17]");
    OptionSet o;
    o.cmem_constants = true;
    o.register_overlap = false;
    o.deconflict = false;
    o.grs = false;
    o.load_hints = false;
    o.store_hints = false;
    o.interleave_asap = false;
    o.agglomerate = false;
    switch (c) {
        case 0: break;
        case 1: o.grs = true; break;
        case 2: o.deconflict = true; break;
        case 3: o.grs = o.deconflict = true; break;
        case 4: o.deconflict = o.interleave_asap = true; break;
        case 5: o.grs = o.deconflict = o.interleave_asap = true; break;
        case 6: o.deconflict = o.interleave_asap = o.store_hints = true; break;
        case 7: o.grs = o.deconflict = o.interleave_asap = o.store_hints = true; break;
        case 8: o.deconflict = o.interleave_asap = o.load_hints = true; break;
        case 9: o.grs = o.deconflict = o.interleave_asap = o.load_hints = true; break;
        case 10: o.deconflict = o.interleave_asap = o.load_hints = o.store_hints = true; break;
        case 11: o.grs = o.deconflict = o.interleave_asap = o.load_hints = o.store_hints = true; break;
        case 12: o.deconflict = o.load_hints = true; break;
        case 13: o.grs = o.deconflict = o.load_hints = true; break;
        case 14: o.deconflict = o.agglomerate = true; break;
        case 15: o.deconflict = o.agglomerate = o.load_hints = true; break;
        case 16: o.deconflict = o.agglomerate = o.store_hints = true; break;
        case 17: o.deconflict = o.agglomerate = o.load_hints = o.store_hints = true; break;
    }
    return o;
}

/// Elements per block of the lines method. The candidates keep warps from
/// straddling the e/i/j decomposition awkwardly (n a multiple of 32, or a
/// block small enough that line reads stay under one bank sweep), which holds
/// the measured conflict rate near zero; the list is walked until the shared
/// footprint fits.
inline int default_lines_n(int p, int var_config, Precision prec) {
    const int m = p + 1;
    static const std::vector<int> candidates[8] = {
        {},
        {32, 16, 8, 4, 2, 1},      // p=1, block 128 first
        {32, 16, 10, 8, 4, 2, 1},  // p=2, block 288 first
        {8, 4, 2, 1},              // p=3, block 128 first
        {4, 3, 2, 1},              // p=4
        {4, 2, 1},                 // p=5
        {2, 1},                    // p=6
        {1},
    };
    for (int n : candidates[p]) {
        const std::int64_t foot = static_cast<std::int64_t>(n) * ipow(m, 3) * var_config * word_bytes(prec);
        if (foot <= kMaxSharedBytes && n * m * m <= 1024) return n;
    }
    return 1;
}

struct KernelRequest {
    Method method = Method::PlanarUnmanaged;
    int p = 3;
    Precision precision = Precision::fp32;
    int block_threads = 128;
    std::int64_t smem_bytes = 0;  // planar-managed: capacity; 0 elsewhere
    int lines_vars = 25;
    int n_elem = 256;
    OptionSet opts;  // defaults are case 13
    PhysParams params;
    std::array<double, 3> jac{1.0, 1.0, 1.0};
    bool fuse_source = false;

    static KernelRequest from_preset(const Preset& ps, int n_elem) {
        KernelRequest r;
        r.method = ps.method;
        r.p = ps.p;
        r.precision = ps.precision;
        r.block_threads = ps.block_threads;
        r.smem_bytes = ps.smem_bytes;
        r.lines_vars = ps.lines_vars;
        r.n_elem = n_elem;
        r.fuse_source = true;
        return r;
    }

    ElementConfig config() const {
        ElementConfig cfg;
        cfg.p = p;
        cfg.d = 3;
        cfg.n_elem = n_elem;
        cfg.block_threads = block_threads;
        cfg.precision = precision;
        cfg.method = method;
        return cfg;
    }
};

/// Generates the requested kernel and applies the selected passes.
inline KernelIR generate_kernel(const KernelRequest& req) {
    KernelIR ir;
    switch (req.method) {
        case Method::PlanarUnmanaged:
            ir = generate_planar(req.config(), req.opts, req.params, req.jac, req.fuse_source);
            break;
        case Method::PlanarManaged: {
            std::int64_t smem = req.smem_bytes;
            if (smem <= 0) smem = planar_min_shared_bytes(req.config());
            ir = generate_planar_managed(req.config(), req.opts, smem, req.params, req.jac, req.fuse_source);
            break;
        }
        case Method::Lines:
            ir = generate_lines(req.config(), req.lines_vars, req.opts, req.params, req.jac, req.fuse_source);
            break;
    }
    return apply_passes(ir);
}

} // namespace hexfuse
