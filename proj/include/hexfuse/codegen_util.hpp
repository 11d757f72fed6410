#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hexfuse/equations.hpp"
#include "hexfuse/ir.hpp"
#include "hexfuse/layout.hpp"
#include "hexfuse/operators.hpp"

namespace hexfuse {

constexpr int kArrayIn = 0;
constexpr int kArrayOut = 1;

/// Incremental IR assembly with fresh virtual registers.
struct IrBuilder {
    KernelIR ir;
    int next_reg = 0;
    GenPhase phase = GenPhase::Other;

    int fresh() { return next_reg++; }

    Instr& push(Instr in) {
        in.phase = phase;
        ir.code.push_back(in);
        return ir.code.back();
    }

    int load_global(const Addr& a) {
        const int r = fresh();
        Instr in;
        in.op = Op::LoadGlobal;
        in.dst = r;
        in.addr = a;
        in.array = kArrayIn;
        in.guarded = true;
        push(in);
        return r;
    }
    void store_global(const Addr& a, int src) {
        Instr in;
        in.op = Op::StoreGlobal;
        in.addr = a;
        in.array = kArrayOut;
        in.a = Opnd::r(src);
        in.guarded = true;
        push(in);
    }
    int load_shared(const Addr& a) {
        const int r = fresh();
        Instr in;
        in.op = Op::LoadShared;
        in.dst = r;
        in.addr = a;
        in.guarded = true;
        push(in);
        return r;
    }
    void store_shared(const Addr& a, int src) {
        Instr in;
        in.op = Op::StoreShared;
        in.addr = a;
        in.a = Opnd::r(src);
        in.guarded = true;
        push(in);
    }
    int load_const(const Addr& idx) {
        const int r = fresh();
        Instr in;
        in.op = Op::LoadConst;
        in.dst = r;
        in.addr = idx;
        push(in);
        return r;
    }
    int mov(Opnd a, int dst = -1) {
        if (dst < 0) dst = fresh();
        Instr in;
        in.op = Op::Mov;
        in.dst = dst;
        in.a = a;
        push(in);
        return dst;
    }
    int add(Opnd a, Opnd b, int dst = -1) {
        if (dst < 0) dst = fresh();
        Instr in;
        in.op = Op::Add;
        in.dst = dst;
        in.a = a;
        in.b = b;
        push(in);
        return dst;
    }
    int mul(Opnd a, Opnd b, int dst = -1) {
        if (dst < 0) dst = fresh();
        Instr in;
        in.op = Op::Mul;
        in.dst = dst;
        in.a = a;
        in.b = b;
        push(in);
        return dst;
    }
    int neg(Opnd a, int dst = -1) {
        if (dst < 0) dst = fresh();
        Instr in;
        in.op = Op::Neg;
        in.dst = dst;
        in.a = a;
        push(in);
        return dst;
    }
    int fma(Opnd a, Opnd b, Opnd c, int dst = -1) {
        if (dst < 0) dst = fresh();
        Instr in;
        in.op = Op::Fma;
        in.dst = dst;
        in.a = a;
        in.b = b;
        in.c = c;
        push(in);
        return dst;
    }
    void barrier() {
        Instr in;
        in.op = Op::Barrier;
        push(in);
    }
    void loop_begin(int sym, int trip) {
        Instr in;
        in.op = Op::LoopBegin;
        in.loop_sym = static_cast<std::int8_t>(sym);
        in.trip = static_cast<std::int16_t>(trip);
        push(in);
    }
    void loop_end() {
        Instr in;
        in.op = Op::LoopEnd;
        push(in);
    }
};

/// Running accumulator per output row: initialised by the first contribution,
/// extended by fused multiply-adds after that.
struct RowAccs {
    std::vector<int> reg;
    explicit RowAccs(int nv) : reg(static_cast<std::size_t>(nv), -1) {}
    void accumulate(IrBuilder& b, int row, Opnd coef, Opnd value) {
        auto& r = reg[static_cast<std::size_t>(row)];
        if (r < 0)
            r = b.mul(coef, value);
        else
            b.fma(coef, value, Opnd::r(r), r);
    }
    bool has(int row) const { return reg[static_cast<std::size_t>(row)] >= 0; }
    int at(int row) const { return reg[static_cast<std::size_t>(row)]; }
};

/// Registers holding the state components of one point; -1 means absent.
struct StateRegs {
    std::array<int, 13> r{};
    StateRegs() { r.fill(-1); }
    int P() const { return r[0]; }
    int V(int b) const { return r[static_cast<std::size_t>(1 + b)]; }
    int G(int d, int b, int a) const { return r[static_cast<std::size_t>(var_gradient(d, b, a))]; }
    void set(int var, int reg) { r[static_cast<std::size_t>(var)] = reg; }
    int get(int var) const { return r[static_cast<std::size_t>(var)]; }
};

/// Emits the direction-a flux column for a point held in registers and folds
/// each row into the row accumulators with the given coefficient operand.
/// Rows with skip_row(v) true are left untouched.
template <typename SkipFn>
inline void accumulate_flux_column(IrBuilder& b, const PhysParams& par, int d, int axis,
                                   const StateRegs& s, Opnd coef, RowAccs& acc, SkipFn skip_row) {
    // continuity: zeta * V_a
    if (!skip_row(var_pressure())) {
        const int f = b.mul(Opnd::i(par.zeta), Opnd::r(s.V(axis)));
        acc.accumulate(b, var_pressure(), coef, Opnd::r(f));
    }
    // momentum rows: V_b*V_a + P*delta - nu*grad
    for (int bb = 0; bb < d; ++bb) {
        const int row = var_velocity(bb);
        if (skip_row(row)) continue;
        int base = -1;
        if (par.nu != 0.0) {
            if (axis == bb)
                base = b.fma(Opnd::i(-par.nu), Opnd::r(s.G(d, bb, axis)), Opnd::r(s.P()));
            else
                base = b.mul(Opnd::i(-par.nu), Opnd::r(s.G(d, bb, axis)));
        } else if (axis == bb) {
            base = s.P();
        }
        const int f = (base >= 0) ? b.fma(Opnd::r(s.V(bb)), Opnd::r(s.V(axis)), Opnd::r(base))
                                  : b.mul(Opnd::r(s.V(bb)), Opnd::r(s.V(axis)));
        acc.accumulate(b, row, coef, Opnd::r(f));
    }
    // gradient rows along this direction: -V_b/T
    for (int bb = 0; bb < d; ++bb) {
        const int row = var_gradient(d, bb, axis);
        if (skip_row(row)) continue;
        const int f = b.mul(Opnd::i(-1.0 / par.T), Opnd::r(s.V(bb)));
        acc.accumulate(b, row, coef, Opnd::r(f));
    }
}

/// Same, but the stored pressure-augmented gradient matrix replaces P and nu:
/// momentum row b = V_b*V_a + Gp(b,a) with Gp(b,a) = P*delta_ab - nu*grad(b,a).
template <typename SkipFn, typename GpFn>
inline void accumulate_flux_column_gp(IrBuilder& b, const PhysParams& par, int d, int axis,
                                      const std::array<int, 3>& vel, GpFn gp, Opnd coef,
                                      RowAccs& acc, SkipFn skip_row) {
    if (!skip_row(var_pressure())) {
        const int f = b.mul(Opnd::i(par.zeta), Opnd::r(vel[static_cast<std::size_t>(axis)]));
        acc.accumulate(b, var_pressure(), coef, Opnd::r(f));
    }
    for (int bb = 0; bb < d; ++bb) {
        const int row = var_velocity(bb);
        if (skip_row(row)) continue;
        const int f = b.fma(Opnd::r(vel[static_cast<std::size_t>(bb)]),
                            Opnd::r(vel[static_cast<std::size_t>(axis)]), Opnd::r(gp(bb, axis)));
        acc.accumulate(b, row, coef, Opnd::r(f));
    }
    for (int bb = 0; bb < d; ++bb) {
        const int row = var_gradient(d, bb, axis);
        if (skip_row(row)) continue;
        const int f = b.mul(Opnd::i(-1.0 / par.T), Opnd::r(vel[static_cast<std::size_t>(bb)]));
        acc.accumulate(b, row, coef, Opnd::r(f));
    }
}

/// jac_x*tx + jac_y*ty + jac_z*tz over whichever partials exist.
inline int combine_axis_partials(IrBuilder& b, const std::array<double, 3>& jac,
                                 const std::array<const RowAccs*, 3>& parts, int row) {
    int r = -1;
    for (int a = 0; a < 3; ++a) {
        if (!parts[static_cast<std::size_t>(a)] || !parts[static_cast<std::size_t>(a)]->has(row)) continue;
        const int t = parts[static_cast<std::size_t>(a)]->at(row);
        const double ja = jac[static_cast<std::size_t>(a)];
        if (r < 0)
            r = (ja == 1.0) ? t : b.mul(Opnd::i(ja), Opnd::r(t));
        else if (ja == 1.0)
            r = b.add(Opnd::r(t), Opnd::r(r));
        else
            r = b.fma(Opnd::i(ja), Opnd::r(t), Opnd::r(r));
    }
    if (r < 0) throw std::logic_error("combine_axis_partials: row has no contributions");
    return r;
}

} // namespace hexfuse
