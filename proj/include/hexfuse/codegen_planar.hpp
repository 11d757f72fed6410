#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "hexfuse/banks.hpp"
#include "hexfuse/codegen_util.hpp"
#include "hexfuse/ir.hpp"
#include "hexfuse/memory_manager.hpp"
#include "hexfuse/operators.hpp"

namespace hexfuse {

namespace detail {

inline std::int64_t planar_var_id(int i, int j, int v, int m, int nv) {
    return (static_cast<std::int64_t>(i) * m + j) * nv + v;
}

struct PlanarEmitter {
    ElementConfig cfg;
    OptionSet opts;
    PhysParams params;
    std::array<double, 3> jac;
    bool fuse_source;
    Matrix D;
    IrBuilder b;

    // unmanaged plane buffer
    PlanarPlaneLayout plane{};
    // managed state
    MemoryManager* mm = nullptr;
    std::map<std::int64_t, int> shared_slot;  // var id -> slot, kept in step with mm

    int m() const { return cfg.m(); }
    int nv() const { return cfg.nv(); }

    Addr gaddr(int array_i, int j, int v) const {
        // word offset of point (i, j, k=thread plane) variable v
        const int E = cfg.elems_per_block();
        const std::int64_t gw = static_cast<std::int64_t>(E) * ipow(m(), 3) * nv();
        Addr a;
        a.add(SYM_BLOCK, gw);
        a.add(SYM_EL, 1);
        a.add(SYM_KP, static_cast<std::int64_t>(E) * m() * m());
        a.add(SYM_CONST, static_cast<std::int64_t>(E) * (array_i + static_cast<std::int64_t>(m()) * j +
                                                         static_cast<std::int64_t>(m()) * m() * m() * v));
        return a;
    }

    Addr plane_addr_own(int j, int v) const {
        if (mm) {
            const int slot = shared_slot.at(planar_var_id(-1, j, v, m(), nv()));
            return Addr{}.add(SYM_CONST, static_cast<std::int64_t>(slot) * cfg.block_threads).add(SYM_TID, 1);
        }
        Addr a;
        a.add(SYM_EL, 1);
        a.add(SYM_KP, plane.sk);
        a.add(SYM_CONST, plane.sj * j + plane.sv * v);
        return a;
    }

    Addr slot_addr_own(int slot) const {
        return Addr{}.add(SYM_CONST, static_cast<std::int64_t>(slot) * cfg.block_threads).add(SYM_TID, 1);
    }

    Addr plane_addr_lane(int j, int v, int k2) const {
        if (mm) {
            const int slot = shared_slot.at(planar_var_id(-1, j, v, m(), nv()));
            return Addr{}
                .add(SYM_CONST, static_cast<std::int64_t>(slot) * cfg.block_threads + k2)
                .add(SYM_WARP, kWarpSize)
                .add(SYM_LE, m());
        }
        Addr a;
        a.add(SYM_EL, 1);
        a.add(SYM_CONST, plane.sk * k2 + plane.sj * j + plane.sv * v);
        return a;
    }

    /// Paired register copy and shared store of a freshly loaded global value.
    /// GRS writes the register copy first, GSR writes shared first; the two
    /// orderings differ only in the order of this pair.
    int paired_store(const Addr& saddr, int rg) {
        if (opts.grs) {
            const int ry = b.mov(Opnd::r(rg));
            b.store_shared(saddr, rg);
            return ry;
        }
        b.store_shared(saddr, rg);
        return b.mov(Opnd::r(rg));
    }

    KernelIR generate() {
        const int mm_ = m(), nvv = nv();
        cfg.validate();
        opts.validate();
        params.validate();
        if (cfg.d != 3) throw std::invalid_argument("generate_planar: d must be 3");

        // Thread-dependent z-row of the operator, fetched once.
        b.phase = GenPhase::Setup;
        std::vector<int> rDz(static_cast<std::size_t>(mm_));
        for (int k2 = 0; k2 < mm_; ++k2)
            rDz[static_cast<std::size_t>(k2)] = b.load_const(Addr{}.add(SYM_KP, mm_).add(SYM_CONST, k2));

        std::vector<std::vector<int>> rY(static_cast<std::size_t>(mm_),
                                         std::vector<int>(static_cast<std::size_t>(nvv), -1));

        for (int i = 0; i < mm_; ++i) {
            // Plane slice block: load the y-line states, mirror them to shared.
            b.phase = GenPhase::Plane;
            if (mm) shared_slot.clear();
            for (int j = 0; j < mm_; ++j)
                for (int v = 0; v < nvv; ++v) {
                    if (mm) {
                        const std::int64_t id = planar_var_id(-1, j, v, mm_, nvv);
                        const std::int64_t gid = planar_var_id(i, j, v, mm_, nvv);
                        auto res = mm->request(gid, Priority::High, "ry");
                        if (res.loc.space != MemSpace::Shared)
                            throw std::runtime_error("generate_planar_managed: plane slice not cacheable");
                        shared_slot[id] = res.loc.slot;
                        if (res.newly_cached) {
                            const int rg = b.load_global(gaddr(i, j, v));
                            rY[static_cast<std::size_t>(j)][static_cast<std::size_t>(v)] =
                                paired_store(slot_addr_own(res.loc.slot), rg);
                        } else {
                            rY[static_cast<std::size_t>(j)][static_cast<std::size_t>(v)] =
                                b.load_shared(slot_addr_own(res.loc.slot));
                        }
                    } else {
                        const int rg = b.load_global(gaddr(i, j, v));
                        rY[static_cast<std::size_t>(j)][static_cast<std::size_t>(v)] =
                            paired_store(plane_addr_own(j, v), rg);
                    }
                }

            const std::vector<int> rDx = preload_row(i);
            for (int j = 0; j < mm_; ++j) {
                b.phase = GenPhase::AccumXY;
                RowAccs tx(nvv), ty(nvv);
                // x line from global (or the resident y-line on the overlap)
                for (int i2 = 0; i2 < mm_; ++i2) {
                    StateRegs s;
                    if (i2 == i && opts.register_overlap) {
                        for (int v = 0; v < nvv; ++v)
                            s.set(v, rY[static_cast<std::size_t>(j)][static_cast<std::size_t>(v)]);
                    } else if (i2 == i) {
                        for (int v = 0; v < nvv; ++v) s.set(v, b.load_global(gaddr(i2, j, v)));
                    } else {
                        for (int v = 0; v < nvv; ++v) s.set(v, load_x_value(i2, j, v));
                    }
                    accumulate_flux_column(b, params, 3, 0, s, Opnd::r(rDx[static_cast<std::size_t>(i2)]), tx,
                                           [&](int row) { return !flux_structural_nonzero(3, 0, row); });
                }
                // y line from registers
                const std::vector<int> rDy = preload_row(j);
                for (int j2 = 0; j2 < mm_; ++j2) {
                    StateRegs s;
                    for (int v = 0; v < nvv; ++v)
                        s.set(v, rY[static_cast<std::size_t>(j2)][static_cast<std::size_t>(v)]);
                    accumulate_flux_column(b, params, 3, 1, s, Opnd::r(rDy[static_cast<std::size_t>(j2)]), ty,
                                           [&](int row) { return !flux_structural_nonzero(3, 1, row); });
                }
                b.barrier();
                // z line from shared
                b.phase = GenPhase::AccumZ;
                RowAccs tz(nvv);
                for (int k2 = 0; k2 < mm_; ++k2) {
                    StateRegs s;
                    for (int v = 0; v < nvv; ++v) {
                        if (!zcol_needs(v)) continue;
                        s.set(v, b.load_shared(plane_addr_lane(j, v, k2)));
                    }
                    accumulate_flux_column(b, params, 3, 2, s, Opnd::r(rDz[static_cast<std::size_t>(k2)]), tz,
                                           [&](int row) { return !flux_structural_nonzero(3, 2, row); });
                }
                b.phase = GenPhase::Output;
                for (int v = 0; v < nvv; ++v) {
                    const int div = combine_axis_partials(b, jac, {&tx, &ty, &tz}, v);
                    int out = b.neg(Opnd::r(div));
                    if (fuse_source && v >= 1 + 3) {
                        out = b.fma(Opnd::i(-1.0 / params.T),
                                    Opnd::r(rY[static_cast<std::size_t>(j)][static_cast<std::size_t>(v)]),
                                    Opnd::r(out));
                    }
                    b.store_global(gaddr(i, j, v), out);
                }
            }
            if (i + 1 < mm_) b.barrier();  // next plane overwrites the buffer
            if (mm) {
                for (int j = 0; j < mm_; ++j)
                    for (int v = 0; v < nvv; ++v)
                        mm->deescalate(planar_var_id(i, j, v, mm_, nvv), Priority::Medium);
            }
        }

        KernelIR ir = std::move(b.ir);
        ir.meta.cfg = cfg;
        ir.meta.opts = opts;
        ir.meta.params = params;
        ir.meta.jac = jac;
        ir.meta.fuse_source = fuse_source;
        ir.meta.constants = fold_constants(D);
        ir.meta.num_regs = b.next_reg;
        return ir;
    }

    /// Operator row with generation-known row index, via the constant table
    /// or as immediates.
    std::vector<int> preload_row(int row) {
        std::vector<int> regs(static_cast<std::size_t>(m()), -1);
        if (opts.cmem_constants)
            for (int c = 0; c < m(); ++c)
                regs[static_cast<std::size_t>(c)] = b.load_const(Addr::constant(row * m() + c));
        else
            for (int c = 0; c < m(); ++c)
                regs[static_cast<std::size_t>(c)] = b.mov(Opnd::i(D(row, c)));
        return regs;
    }

    static bool zcol_needs(int v) {
        // f_z needs P, the velocities and the z-column of the gradients
        return v <= 3 || (v >= 4 && (v - 4) % 3 == 2);
    }

    int load_x_value(int i2, int j, int v) {
        if (!mm) return b.load_global(gaddr(i2, j, v));
        const std::int64_t gid = planar_var_id(i2, j, v, m(), nv());
        auto res = mm->request(gid, Priority::Low, "rx");
        if (res.loc.space == MemSpace::Shared && !res.newly_cached) return b.load_shared(slot_addr_own(res.loc.slot));
        if (res.loc.space == MemSpace::Shared) {
            const int rg = b.load_global(gaddr(i2, j, v));
            return paired_store(slot_addr_own(res.loc.slot), rg);
        }
        return b.load_global(gaddr(i2, j, v));
    }
};

} // namespace detail

/// Shared bytes needed by the unmanaged plane buffer (before deconfliction).
inline std::int64_t planar_min_shared_bytes(const ElementConfig& cfg) {
    return static_cast<std::int64_t>(cfg.block_threads) * cfg.m() * cfg.nv() * cfg.wordsize();
}

/// Fully unrolled fused kernel with one thread per x-y plane.
inline KernelIR generate_planar(const ElementConfig& cfg_in, const OptionSet& opts,
                                const PhysParams& params = {},
                                const std::array<double, 3>& jac = {1.0, 1.0, 1.0},
                                bool fuse_source = false) {
    ElementConfig cfg = cfg_in;
    cfg.method = Method::PlanarUnmanaged;
    detail::PlanarEmitter g;
    g.cfg = cfg;
    g.opts = opts;
    g.params = params;
    g.jac = jac;
    g.fuse_source = fuse_source;
    g.D = derivative_matrix(gauss_legendre_points(cfg.m()));
    g.plane = PlanarPlaneLayout::natural(cfg.elems_per_block(), cfg.m(), cfg.nv(),
                                         cfg.planar_elems_per_warp(), cfg.wordsize());
    if (g.plane.size_bytes() > kMaxSharedBytes)
        throw std::runtime_error("generate_planar: plane buffer exceeds the shared-memory capacity");
    if (opts.deconflict) g.plane = deconflict_layout(g.plane, kMaxSharedBytes);
    KernelIR ir = g.generate();
    ir.meta.shared_bytes = g.plane.size_bytes();
    ir.meta.name = "fused_planar_p" + std::to_string(cfg.p) + "_" + to_string(cfg.precision);
    return ir;
}

/// Managed variant: every operand placement goes through the generation-time
/// memory manager; spare capacity caches x-line values.
inline KernelIR generate_planar_managed(const ElementConfig& cfg_in, const OptionSet& opts,
                                        std::int64_t smem_bytes, const PhysParams& params = {},
                                        const std::array<double, 3>& jac = {1.0, 1.0, 1.0},
                                        bool fuse_source = false) {
    ElementConfig cfg = cfg_in;
    cfg.method = Method::PlanarManaged;
    if (smem_bytes < planar_min_shared_bytes(cfg))
        throw std::invalid_argument("generate_planar_managed: shared memory below one plane");
    if (smem_bytes > kMaxSharedBytes)
        throw std::invalid_argument("generate_planar_managed: shared memory above the 96 KiB capacity");
    detail::PlanarEmitter g;
    g.cfg = cfg;
    g.opts = opts;
    g.params = params;
    g.jac = jac;
    g.fuse_source = fuse_source;
    g.D = derivative_matrix(gauss_legendre_points(cfg.m()));
    MemoryManager manager(smem_bytes, cfg.block_threads, cfg.wordsize());
    g.mm = &manager;
    KernelIR ir = g.generate();
    ir.meta.shared_bytes = smem_bytes;
    ir.meta.name = "fused_planar_managed_p" + std::to_string(cfg.p) + "_" + to_string(cfg.precision);
    ir.meta.manager_trace = manager.trace_jsonl();
    return ir;
}

} // namespace hexfuse
