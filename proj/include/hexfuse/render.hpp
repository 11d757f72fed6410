#pragma once

#include <cstdio>
#include <sstream>
#include <string>

#include "hexfuse/ir.hpp"

namespace hexfuse {

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s(buf);
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
        s += ".0";
    return s;
}

inline std::string render_addr(const Addr& a) {
    static const char* local[NSYM] = {"", "tid", "lane", "warp", "blk", "el", "le", "kp", "li", "lj", "lk"};
    std::ostringstream out;
    bool first = true;
    for (int s = 1; s < NSYM; ++s) {
        const std::int64_t c = a.c[static_cast<std::size_t>(s)];
        if (c == 0) continue;
        if (!first) out << " + ";
        if (c == 1)
            out << local[s];
        else
            out << c << "*" << local[s];
        first = false;
    }
    if (a.c[SYM_CONST] != 0 || first) {
        if (!first) out << " + ";
        out << a.c[SYM_CONST];
    }
    return out.str();
}

} // namespace detail

/// Deterministic CUDA-dialect source text for a kernel. Identical IR renders
/// byte-identical text.
inline std::string render_source(const KernelIR& ir) {
    const KernelMeta& m = ir.meta;
    const ElementConfig& cfg = m.cfg;
    const bool f32 = cfg.precision == Precision::fp32;
    const char* real = f32 ? "float" : "double";
    const char* fma_fn = f32 ? "fmaf" : "fma";
    std::ostringstream out;

    out << "// " << m.name << " : fused flux + divergence kernel\n";
    out << "// method=" << to_string(cfg.method) << " p=" << cfg.p << " precision=" << to_string(cfg.precision)
        << " block=" << cfg.block_threads << " shared_bytes=" << m.shared_bytes
        << (m.fuse_source ? " source-fused" : "") << "\n\n";
    out << "#define REAL " << real << "\n\n";

    // Operator constants: folded absolute values plus a signed index table.
    const auto& tab = m.constants;
    if (m.opts.cmem_constants)
        out << "__constant__ REAL dval[" << tab.values.size() << "] = {";
    else
        out << "static __device__ const REAL dval[" << tab.values.size() << "] = {";
    for (std::size_t i = 0; i < tab.values.size(); ++i)
        out << (i ? ", " : "") << detail::fmt_double(tab.values[i]);
    out << "};\n";
    out << "static __device__ const short didx[" << tab.signed_index.size() << "] = {";
    for (std::size_t i = 0; i < tab.signed_index.size(); ++i) out << (i ? ", " : "") << tab.signed_index[i];
    out << "};\n";
    out << "static __device__ __forceinline__ REAL ld_dc(int i) {\n"
        << "    const short t = didx[i];\n"
        << "    return t < 0 ? -dval[-t - 1] : dval[t - 1];\n"
        << "}\n\n";

    out << "extern \"C\" __global__ void " << m.name
        << "(int n_elements, const REAL* __restrict__ u, REAL* __restrict__ divf) {\n";
    if (cfg.method == Method::PlanarManaged)
        out << "    extern __shared__ REAL smem[];  // " << m.shared_bytes << " bytes, set at launch\n";
    else
        out << "    __shared__ REAL smem[" << m.shared_bytes / cfg.wordsize() << "];\n";
    out << "    const int tid = threadIdx.x;\n"
        << "    const int lane = tid % 32;\n"
        << "    const int warp = tid / 32;\n"
        << "    const int blk = blockIdx.x;\n";
    if (cfg.method == Method::Lines) {
        const int nn = cfg.elems_per_block();
        out << "    const int el = tid % " << nn << ";\n"
            << "    const int li = (tid / " << nn << ") % " << cfg.m() << ";\n"
            << "    const int lj = (tid / " << nn * cfg.m() << ") % " << cfg.m() << ";\n"
            << "    const int eg = el + " << nn << " * blk;\n"
            << "    const bool act = eg < n_elements;\n";
    } else {
        const int epw = cfg.planar_elems_per_warp();
        out << "    const int kp = (tid % 32) % " << cfg.m() << ";\n"
            << "    const int le = lane / " << cfg.m() << ";\n"
            << "    const int el = warp * " << epw << " + le;\n"
            << "    const int eg = blk * " << cfg.elems_per_block() << " + el;\n"
            << "    const bool act = le < " << epw << " && eg < n_elements;\n";
        out << "    const int li = 0; const int lj = 0;\n    (void)li; (void)lj;\n";
    }
    out << "\n";

    int indent = 1;
    auto pad = [&]() {
        for (int i = 0; i < indent; ++i) out << "    ";
    };
    auto opnd = [&](const Opnd& o) -> std::string {
        if (o.is_reg()) return "r" + std::to_string(o.reg);
        return "REAL(" + detail::fmt_double(o.imm) + ")";
    };

    for (const auto& in : ir.code) {
        switch (in.op) {
            case Op::Barrier:
                pad();
                out << "__syncthreads();\n";
                break;
            case Op::LoopBegin:
                pad();
                out << "#pragma unroll 1\n";
                pad();
                out << "for (int " << sym_name(in.loop_sym) << " = 0; " << sym_name(in.loop_sym) << " < "
                    << in.trip << "; ++" << sym_name(in.loop_sym) << ") {\n";
                ++indent;
                break;
            case Op::LoopEnd:
                --indent;
                pad();
                out << "}\n";
                break;
            case Op::LoadConst:
                pad();
                out << "const REAL r" << in.dst << " = ld_dc(" << detail::render_addr(in.addr) << ");\n";
                break;
            case Op::LoadGlobal: {
                pad();
                const std::string idx = detail::render_addr(in.addr);
                if (in.hint == MemHint::LU)
                    out << "const REAL r" << in.dst << " = act ? __ldlu(&u[" << idx << "]) : REAL(0);\n";
                else
                    out << "const REAL r" << in.dst << " = act ? u[" << idx << "] : REAL(0);\n";
                break;
            }
            case Op::StoreGlobal: {
                pad();
                const std::string idx = detail::render_addr(in.addr);
                if (in.hint == MemHint::WT)
                    out << "if (act) __stwt(&divf[" << idx << "], " << opnd(in.a) << ");\n";
                else
                    out << "if (act) divf[" << idx << "] = " << opnd(in.a) << ";\n";
                break;
            }
            case Op::LoadShared:
                pad();
                out << "const REAL r" << in.dst << " = act ? smem[" << detail::render_addr(in.addr)
                    << "] : REAL(0);\n";
                break;
            case Op::StoreShared:
                pad();
                out << "if (act) smem[" << detail::render_addr(in.addr) << "] = " << opnd(in.a) << ";\n";
                break;
            case Op::Mov:
                pad();
                out << "const REAL r" << in.dst << " = " << opnd(in.a) << ";\n";
                break;
            case Op::Neg:
                pad();
                out << "const REAL r" << in.dst << " = -" << opnd(in.a) << ";\n";
                break;
            case Op::Add:
                pad();
                out << "const REAL r" << in.dst << " = " << opnd(in.a) << " + " << opnd(in.b) << ";\n";
                break;
            case Op::Mul:
                pad();
                out << "const REAL r" << in.dst << " = " << opnd(in.a) << " * " << opnd(in.b) << ";\n";
                break;
            case Op::Fma:
                pad();
                out << "const REAL r" << in.dst << " = " << fma_fn << "(" << opnd(in.a) << ", " << opnd(in.b)
                    << ", " << opnd(in.c) << ");\n";
                break;
        }
    }
    out << "}\n";
    return out.str();
}

} // namespace hexfuse
