#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hexfuse/codegen_util.hpp"
#include "hexfuse/ir.hpp"
#include "hexfuse/operators.hpp"

namespace hexfuse {

namespace detail {

/// Shared-variable slots of the lines method per configuration: velocities,
/// then the stored part of the pressure-augmented scaled gradient matrix
/// Gp(b,a) = P*delta_ab - nu*grad(b,a), then the divergence accumulators.
struct LinesVarPlan {
    int vc = 25;
    int stored = 12;       // shared state slots
    bool full_gp = true;   // all nine Gp entries stored
    bool diag_gp = false;  // only the three diagonal entries
    bool vel = true;       // velocities stored
    bool continuity_acc = true;

    static LinesVarPlan make(int vc) {
        LinesVarPlan p;
        p.vc = vc;
        switch (vc) {
            case 25: p = {25, 12, true, false, true, true}; break;
            case 24: p = {24, 12, true, false, true, false}; break;
            case 18: p = {18, 6, false, true, true, false}; break;
            case 15: p = {15, 3, false, false, true, false}; break;
            case 12: p = {12, 0, false, false, false, false}; break;
            default: throw std::invalid_argument("lines: bad var config");
        }
        return p;
    }

    int vel_slot(int b) const { return b; }
    int gp_slot(int b, int a) const {
        if (full_gp) return 3 + b * 3 + a;
        if (diag_gp && a == b) return 3 + b;
        return -1;
    }
    int acc_slot(int v) const {
        if (continuity_acc) return stored + v;
        if (v == 0) return -1;
        return stored + v - 1;
    }
    int n_acc() const { return continuity_acc ? 13 : 12; }
};

struct LinesEmitter {
    ElementConfig cfg;
    OptionSet opts;
    PhysParams params;
    std::array<double, 3> jac;
    bool fuse_source = false;
    Matrix D;
    LinesVarPlan plan;
    IrBuilder b;

    int m() const { return cfg.m(); }
    int nv() const { return cfg.nv(); }
    int n() const { return cfg.elems_per_block(); }

    // i/j/k terms: symbol id or a constant value (sym < 0).
    struct Term {
        int sym;
        int val;
        static Term s(int sy) { return {sy, 0}; }
        static Term c(int v) { return {-1, v}; }
    };

    Addr gaddr(Term i, Term j, Term k, int v) const {
        const std::int64_t mm = m();
        Addr a;
        a.add(SYM_BLOCK, static_cast<std::int64_t>(n()) * mm * mm * mm * nv());
        a.add(SYM_EL, 1);
        apply(a, i, n());
        apply(a, j, n() * mm);
        apply(a, k, n() * mm * mm);
        a.add(SYM_CONST, static_cast<std::int64_t>(n()) * mm * mm * mm * v);
        return a;
    }

    Addr saddr(Term i, Term j, Term k, int slot) const {
        const std::int64_t mm = m();
        Addr a;
        a.add(SYM_EL, 1);
        apply(a, i, n());
        apply(a, j, n() * mm);
        apply(a, k, n() * mm * mm);
        a.add(SYM_CONST, static_cast<std::int64_t>(n()) * mm * mm * mm * slot);
        return a;
    }

    static void apply(Addr& a, Term t, std::int64_t stride) {
        if (t.sym >= 0)
            a.add(t.sym, stride);
        else
            a.add(SYM_CONST, stride * t.val);
    }

    /// State registers needed for the direction-`axis` flux column of a point,
    /// drawn from shared where stored and global otherwise. `want_p_row`
    /// includes the continuity row.
    struct PointRegs {
        std::array<int, 3> vel{-1, -1, -1};
        std::array<int, 3> gp{-1, -1, -1};  // Gp(b, axis), b = 0..2
    };

    PointRegs point_state(Term i, Term j, Term k, int axis) {
        PointRegs r;
        for (int bb = 0; bb < 3; ++bb) {
            if (plan.vel)
                r.vel[static_cast<std::size_t>(bb)] = b.load_shared(saddr(i, j, k, plan.vel_slot(bb)));
            else
                r.vel[static_cast<std::size_t>(bb)] = b.load_global(gaddr(i, j, k, var_velocity(bb)));
        }
        int rp = -1;  // pressure, loaded once if any diagonal entry is rebuilt
        for (int bb = 0; bb < 3; ++bb) {
            const int slot = plan.gp_slot(bb, axis);
            if (slot >= 0) {
                r.gp[static_cast<std::size_t>(bb)] = b.load_shared(saddr(i, j, k, slot));
                continue;
            }
            const int g = b.load_global(gaddr(i, j, k, var_gradient(3, bb, axis)));
            if (bb == axis) {
                if (rp < 0) rp = b.load_global(gaddr(i, j, k, var_pressure()));
                r.gp[static_cast<std::size_t>(bb)] = b.fma(Opnd::i(-params.nu), Opnd::r(g), Opnd::r(rp));
            } else {
                r.gp[static_cast<std::size_t>(bb)] = b.mul(Opnd::i(-params.nu), Opnd::r(g));
            }
        }
        return r;
    }

    bool row_in_play(int v) const { return plan.continuity_acc || v != 0; }

    KernelIR generate() {
        cfg.validate();
        opts.validate();
        params.validate();
        if (cfg.d != 3) throw std::invalid_argument("generate_lines: d must be 3");
        const int mm = m(), nvv = nv();
        const std::int64_t footprint =
            static_cast<std::int64_t>(n()) * mm * mm * mm * plan.vc * cfg.wordsize();
        if (footprint > kMaxSharedBytes)
            throw std::runtime_error("generate_lines: shared footprint exceeds the 96 KiB capacity");

        // Thread rows of the operator.
        b.phase = GenPhase::Setup;
        std::vector<int> rDx(static_cast<std::size_t>(mm)), rDy(static_cast<std::size_t>(mm));
        for (int t = 0; t < mm; ++t)
            rDx[static_cast<std::size_t>(t)] = b.load_const(Addr{}.add(SYM_LI, mm).add(SYM_CONST, t));
        for (int t = 0; t < mm; ++t)
            rDy[static_cast<std::size_t>(t)] = b.load_const(Addr{}.add(SYM_LJ, mm).add(SYM_CONST, t));

        // First pass: store the plane, sync, accumulate x and y.
        b.loop_begin(SYM_LK, mm);
        {
            b.phase = GenPhase::Plane;
            emit_plane_store();
            b.barrier();
            b.phase = GenPhase::AccumXY;
            RowAccs tx(nvv), ty(nvv);
            for (int i2 = 0; i2 < mm; ++i2) {
                PointRegs s = point_state(Term::c(i2), Term::s(SYM_LJ), Term::s(SYM_LK), 0);
                accumulate_flux_column_gp(
                    b, params, 3, 0, s.vel, [&](int bb, int) { return s.gp[static_cast<std::size_t>(bb)]; },
                    Opnd::r(rDx[static_cast<std::size_t>(i2)]), tx,
                    [&](int row) { return !flux_structural_nonzero(3, 0, row) || !row_in_play(row); });
            }
            for (int j2 = 0; j2 < mm; ++j2) {
                PointRegs s = point_state(Term::s(SYM_LI), Term::c(j2), Term::s(SYM_LK), 1);
                accumulate_flux_column_gp(
                    b, params, 3, 1, s.vel, [&](int bb, int) { return s.gp[static_cast<std::size_t>(bb)]; },
                    Opnd::r(rDy[static_cast<std::size_t>(j2)]), ty,
                    [&](int row) { return !flux_structural_nonzero(3, 1, row) || !row_in_play(row); });
            }
            for (int v = 0; v < nvv; ++v) {
                if (!row_in_play(v)) continue;
                if (!tx.has(v) && !ty.has(v)) continue;  // z-only rows accumulate later
                const int r = combine_axis_partials(b, jac, {&tx, &ty, nullptr}, v);
                b.store_shared(saddr(Term::s(SYM_LI), Term::s(SYM_LJ), Term::s(SYM_LK), plan.acc_slot(v)), r);
            }
        }
        b.loop_end();
        b.barrier();

        // Second pass: add the z contribution and write out.
        b.loop_begin(SYM_LK, mm);
        {
            b.phase = GenPhase::AccumZ;
            std::vector<int> rDz(static_cast<std::size_t>(mm));
            for (int t = 0; t < mm; ++t)
                rDz[static_cast<std::size_t>(t)] = b.load_const(Addr{}.add(SYM_LK, mm).add(SYM_CONST, t));
            RowAccs tz(nvv);
            for (int k2 = 0; k2 < mm; ++k2) {
                PointRegs s = point_state(Term::s(SYM_LI), Term::s(SYM_LJ), Term::c(k2), 2);
                accumulate_flux_column_gp(
                    b, params, 3, 2, s.vel, [&](int bb, int) { return s.gp[static_cast<std::size_t>(bb)]; },
                    Opnd::r(rDz[static_cast<std::size_t>(k2)]), tz,
                    [&](int row) { return !flux_structural_nonzero(3, 2, row) || !row_in_play(row); });
            }
            b.phase = GenPhase::Output;
            std::vector<int> total(static_cast<std::size_t>(nvv), -1);
            for (int v = 0; v < nvv; ++v) {
                if (!row_in_play(v)) continue;
                int r = -1;
                const bool xy = flux_structural_nonzero(3, 0, v) || flux_structural_nonzero(3, 1, v);
                if (xy)
                    r = b.load_shared(saddr(Term::s(SYM_LI), Term::s(SYM_LJ), Term::s(SYM_LK), plan.acc_slot(v)));
                if (tz.has(v)) {
                    const double jz = jac[2];
                    if (r < 0)
                        r = (jz == 1.0) ? tz.at(v) : b.mul(Opnd::i(jz), Opnd::r(tz.at(v)));
                    else if (jz == 1.0)
                        r = b.add(Opnd::r(tz.at(v)), Opnd::r(r));
                    else
                        r = b.fma(Opnd::i(jz), Opnd::r(tz.at(v)), Opnd::r(r));
                }
                total[static_cast<std::size_t>(v)] = r;
            }
            if (!plan.continuity_acc) {
                // The continuity divergence is zeta*(u_x + v_y + w_z); the
                // diagonal gradient-equation rows carry those derivatives as
                // -1/T each, so div_cont = -zeta*T * (their summed rows).
                const int t4 = total[static_cast<std::size_t>(var_gradient(3, 0, 0))];
                const int t8 = total[static_cast<std::size_t>(var_gradient(3, 1, 1))];
                const int t12 = total[static_cast<std::size_t>(var_gradient(3, 2, 2))];
                const int s1 = b.add(Opnd::r(t4), Opnd::r(t8));
                const int s2 = b.add(Opnd::r(s1), Opnd::r(t12));
                total[0] = b.mul(Opnd::i(-params.zeta * params.T), Opnd::r(s2));
            }
            for (int v = 0; v < nvv; ++v) {
                int out = b.neg(Opnd::r(total[static_cast<std::size_t>(v)]));
                if (fuse_source && v >= 4) {
                    const int g = b.load_global(gaddr(Term::s(SYM_LI), Term::s(SYM_LJ), Term::s(SYM_LK), v));
                    out = b.fma(Opnd::i(-1.0 / params.T), Opnd::r(g), Opnd::r(out));
                }
                b.store_global(gaddr(Term::s(SYM_LI), Term::s(SYM_LJ), Term::s(SYM_LK), v), out);
            }
        }
        b.loop_end();

        KernelIR ir = std::move(b.ir);
        ir.meta.cfg = cfg;
        ir.meta.opts = opts;
        ir.meta.params = params;
        ir.meta.jac = jac;
        ir.meta.fuse_source = fuse_source;
        ir.meta.constants = fold_constants(D);
        ir.meta.num_regs = b.next_reg;
        ir.meta.shared_bytes = footprint;
        ir.meta.name = "fused_lines" + std::to_string(plan.vc) + "_p" + std::to_string(cfg.p) + "_" +
                       to_string(cfg.precision);
        return ir;
    }

    void emit_plane_store() {
        if (plan.stored == 0) return;
        const Term I = Term::s(SYM_LI), J = Term::s(SYM_LJ), K = Term::s(SYM_LK);
        std::array<int, 13> in{};
        in.fill(-1);
        auto own = [&](int v) {
            int& r = in[static_cast<std::size_t>(v)];
            if (r < 0) r = b.load_global(gaddr(I, J, K, v));
            return r;
        };
        for (int bb = 0; bb < 3; ++bb) b.store_shared(saddr(I, J, K, plan.vel_slot(bb)), own(var_velocity(bb)));
        for (int bb = 0; bb < 3; ++bb)
            for (int a = 0; a < 3; ++a) {
                const int slot = plan.gp_slot(bb, a);
                if (slot < 0) continue;
                const int g = own(var_gradient(3, bb, a));
                int gp;
                if (a == bb)
                    gp = b.fma(Opnd::i(-params.nu), Opnd::r(g), Opnd::r(own(var_pressure())));
                else
                    gp = b.mul(Opnd::i(-params.nu), Opnd::r(g));
                b.store_shared(saddr(I, J, K, slot), gp);
            }
    }
};

} // namespace detail

inline std::int64_t lines_shared_bytes(const ElementConfig& cfg, int var_config) {
    return static_cast<std::int64_t>(cfg.block_threads / (cfg.m() * cfg.m())) * ipow(cfg.m(), 3) *
           var_config * cfg.wordsize();
}

/// Loop-form fused kernel with one thread per z-line and a configurable
/// number of shared variables per point.
inline KernelIR generate_lines(const ElementConfig& cfg_in, int var_config, const OptionSet& opts_in,
                               const PhysParams& params = {},
                               const std::array<double, 3>& jac = {1.0, 1.0, 1.0},
                               bool fuse_source = false) {
    ElementConfig cfg = cfg_in;
    cfg.method = Method::Lines;
    OptionSet opts = opts_in;
    opts.lines_vars = var_config;
    // Runtime-indexed operator rows always come from the constant table here.
    opts.cmem_constants = true;
    detail::LinesEmitter g;
    g.cfg = cfg;
    g.opts = opts;
    g.params = params;
    g.jac = jac;
    g.fuse_source = fuse_source;
    g.D = derivative_matrix(gauss_legendre_points(cfg.m()));
    g.plan = detail::LinesVarPlan::make(var_config);
    return g.generate();
}

} // namespace hexfuse
