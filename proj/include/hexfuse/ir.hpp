#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hexfuse/core.hpp"
#include "hexfuse/equations.hpp"
#include "hexfuse/layout.hpp"
#include "hexfuse/operators.hpp"

namespace hexfuse {

enum class Op : std::uint8_t {
    LoadGlobal, StoreGlobal, LoadShared, StoreShared, LoadConst,
    Mov, Add, Mul, Neg, Fma, Barrier, LoopBegin, LoopEnd
};

inline const char* to_string(Op op) {
    switch (op) {
        case Op::LoadGlobal: return "load_global";
        case Op::StoreGlobal: return "store_global";
        case Op::LoadShared: return "load_shared";
        case Op::StoreShared: return "store_shared";
        case Op::LoadConst: return "load_const";
        case Op::Mov: return "mov";
        case Op::Add: return "add";
        case Op::Mul: return "mul";
        case Op::Neg: return "neg";
        case Op::Fma: return "fma";
        case Op::Barrier: return "barrier";
        case Op::LoopBegin: return "loop_begin";
        case Op::LoopEnd: return "loop_end";
    }
    return "?";
}

inline bool is_memory_op(Op op) {
    return op == Op::LoadGlobal || op == Op::StoreGlobal || op == Op::LoadShared ||
           op == Op::StoreShared || op == Op::LoadConst;
}

inline bool is_compute_op(Op op) {
    return op == Op::Mov || op == Op::Add || op == Op::Mul || op == Op::Neg || op == Op::Fma;
}

/// Address-expression symbols with per-thread values.
enum Sym : int {
    SYM_CONST = 0,  // 1
    SYM_TID,        // thread index within the block
    SYM_LANE,       // tid % 32
    SYM_WARP,       // tid / 32
    SYM_BLOCK,      // block index
    SYM_EL,         // block-local element
    SYM_LE,         // within-warp element (planar)
    SYM_KP,         // plane index of the thread (planar)
    SYM_LI,         // thread i (lines)
    SYM_LJ,         // thread j (lines)
    SYM_LK,         // loop counter
    NSYM
};

inline const char* sym_name(int s) {
    static const char* names[NSYM] = {"c", "tid", "lane", "warp", "blk", "el", "le", "kp", "li", "lj", "lk"};
    return names[s];
}

/// Integer affine form over the symbol set.
struct Addr {
    std::array<std::int64_t, NSYM> c{};

    static Addr constant(std::int64_t v) {
        Addr a;
        a.c[SYM_CONST] = v;
        return a;
    }
    Addr& add(int sym, std::int64_t coef) {
        c[static_cast<std::size_t>(sym)] += coef;
        return *this;
    }
    std::int64_t eval(const std::array<std::int64_t, NSYM>& syms) const {
        std::int64_t v = c[SYM_CONST];
        for (int s = 1; s < NSYM; ++s) v += c[static_cast<std::size_t>(s)] * syms[static_cast<std::size_t>(s)];
        return v;
    }
    bool operator==(const Addr& o) const { return c == o.c; }
    bool operator<(const Addr& o) const { return c < o.c; }
};

struct Opnd {
    enum class K : std::uint8_t { None, Reg, Imm };
    K kind = K::None;
    int reg = -1;
    double imm = 0.0;

    static Opnd none() { return {}; }
    static Opnd r(int id) { return {K::Reg, id, 0.0}; }
    static Opnd i(double v) { return {K::Imm, -1, v}; }
    bool is_reg() const { return kind == K::Reg; }
    bool is_imm() const { return kind == K::Imm; }
    bool operator==(const Opnd& o) const { return kind == o.kind && reg == o.reg && imm == o.imm; }
};

enum class MemHint : std::uint8_t { None, LU, WT };

enum class GenPhase : std::uint8_t { Setup, Plane, AccumXY, AccumZ, Output, Other };

struct Instr {
    Op op = Op::Barrier;
    int dst = -1;
    Opnd a, b, c;     // fma: dst = a*b + c
    Addr addr{};      // memory ops; constant-table index for LoadConst
    std::int8_t array = -1;  // 0 = input field, 1 = output field
    MemHint hint = MemHint::None;
    bool guarded = false;
    std::int16_t trip = 0;      // LoopBegin
    std::int8_t loop_sym = -1;  // LoopBegin
    GenPhase phase = GenPhase::Other;

    bool operator==(const Instr& o) const {
        return op == o.op && dst == o.dst && a == o.a && b == o.b && c == o.c && addr == o.addr &&
               array == o.array && hint == o.hint && guarded == o.guarded && trip == o.trip &&
               loop_sym == o.loop_sym;
    }
};

struct OptionSet {
    bool register_overlap = false;  // static optimisation 1
    bool deconflict = true;         // static optimisation 2
    bool cmem_constants = true;     // static optimisation 3
    bool grs = true;                // true: global->register->shared; false: GSR
    bool load_hints = true;
    bool store_hints = false;
    bool interleave_asap = false;
    bool agglomerate = false;
    int agglomerate_min_block = 13;
    int agglomerate_max_block = 64;
    int lines_vars = 25;  // 25 | 24 | 18 | 15 | 12

    void validate() const {
        if (interleave_asap && agglomerate)
            throw std::invalid_argument("OptionSet: interleave and agglomerate are mutually exclusive");
        if (lines_vars != 25 && lines_vars != 24 && lines_vars != 18 && lines_vars != 15 && lines_vars != 12)
            throw std::invalid_argument("OptionSet: lines_vars must be one of 25,24,18,15,12");
        if (agglomerate_min_block < 1 || agglomerate_max_block < agglomerate_min_block)
            throw std::invalid_argument("OptionSet: bad agglomeration block bounds");
    }
};

struct KernelMeta {
    ElementConfig cfg;
    OptionSet opts;
    PhysParams params;
    std::array<double, 3> jac{1.0, 1.0, 1.0};
    bool fuse_source = false;
    std::int64_t shared_bytes = 0;
    FoldedConstants constants;  // folded |D| values plus signed index table
    int num_regs = 0;
    std::string name;
    std::string manager_trace;  // JSON-lines request log (managed kernels)
};

struct KernelIR {
    KernelMeta meta;
    std::vector<Instr> code;
};

// ---------------------------------------------------------------------------
// JSON form (versioned)

inline nlohmann::json addr_to_json(const Addr& a) {
    nlohmann::json j = nlohmann::json::object();
    for (int s = 0; s < NSYM; ++s)
        if (a.c[static_cast<std::size_t>(s)] != 0) j[sym_name(s)] = a.c[static_cast<std::size_t>(s)];
    return j;
}

inline Addr addr_from_json(const nlohmann::json& j) {
    Addr a;
    for (int s = 0; s < NSYM; ++s) {
        if (auto it = j.find(sym_name(s)); it != j.end()) a.c[static_cast<std::size_t>(s)] = it->get<std::int64_t>();
    }
    return a;
}

inline nlohmann::json opnd_to_json(const Opnd& o) {
    switch (o.kind) {
        case Opnd::K::None: return nullptr;
        case Opnd::K::Reg: return {{"r", o.reg}};
        case Opnd::K::Imm: return {{"i", o.imm}};
    }
    return nullptr;
}

inline Opnd opnd_from_json(const nlohmann::json& j) {
    if (j.is_null()) return Opnd::none();
    if (j.contains("r")) return Opnd::r(j["r"].get<int>());
    return Opnd::i(j["i"].get<double>());
}

inline nlohmann::json ir_to_json(const KernelIR& ir) {
    nlohmann::json code = nlohmann::json::array();
    for (const auto& in : ir.code) {
        nlohmann::json j{{"op", to_string(in.op)}};
        if (in.dst >= 0) j["dst"] = in.dst;
        if (in.a.kind != Opnd::K::None) j["a"] = opnd_to_json(in.a);
        if (in.b.kind != Opnd::K::None) j["b"] = opnd_to_json(in.b);
        if (in.c.kind != Opnd::K::None) j["c"] = opnd_to_json(in.c);
        if (is_memory_op(in.op)) j["addr"] = addr_to_json(in.addr);
        if (in.array >= 0) j["array"] = in.array;
        if (in.hint == MemHint::LU) j["hint"] = "lu";
        if (in.hint == MemHint::WT) j["hint"] = "wt";
        if (in.guarded) j["guard"] = true;
        if (in.op == Op::LoopBegin) {
            j["trip"] = in.trip;
            j["sym"] = sym_name(in.loop_sym);
        }
        j["ph"] = static_cast<int>(in.phase);
        code.push_back(std::move(j));
    }
    const auto& m = ir.meta;
    nlohmann::json meta{{"method", to_string(m.cfg.method)},
                        {"p", m.cfg.p},
                        {"d", m.cfg.d},
                        {"n_elem", m.cfg.n_elem},
                        {"block_threads", m.cfg.block_threads},
                        {"precision", to_string(m.cfg.precision)},
                        {"fuse_source", m.fuse_source},
                        {"shared_bytes", m.shared_bytes},
                        {"jac", m.jac},
                        {"nu", m.params.nu},
                        {"zeta", m.params.zeta},
                        {"T", m.params.T},
                        {"num_regs", m.num_regs},
                        {"name", m.name},
                        {"const_values", m.constants.values},
                        {"const_index", m.constants.signed_index},
                        {"const_m", m.constants.m},
                        {"lines_vars", m.opts.lines_vars},
                        {"opts",
                         {{"register_overlap", m.opts.register_overlap},
                          {"deconflict", m.opts.deconflict},
                          {"cmem_constants", m.opts.cmem_constants},
                          {"grs", m.opts.grs},
                          {"load_hints", m.opts.load_hints},
                          {"store_hints", m.opts.store_hints},
                          {"interleave_asap", m.opts.interleave_asap},
                          {"agglomerate", m.opts.agglomerate}}}};
    return {{"version", 1}, {"meta", meta}, {"code", code}};
}

inline Op op_from_string(const std::string& s) {
    for (int i = 0; i <= static_cast<int>(Op::LoopEnd); ++i)
        if (s == to_string(static_cast<Op>(i))) return static_cast<Op>(i);
    throw std::invalid_argument("unknown opcode: " + s);
}

inline KernelIR ir_from_json(const nlohmann::json& j) {
    if (j.at("version").get<int>() != 1) throw std::runtime_error("ir_from_json: unsupported version");
    KernelIR ir;
    const auto& m = j.at("meta");
    ir.meta.cfg.p = m.at("p").get<int>();
    ir.meta.cfg.d = m.at("d").get<int>();
    ir.meta.cfg.n_elem = m.at("n_elem").get<int>();
    ir.meta.cfg.block_threads = m.at("block_threads").get<int>();
    ir.meta.cfg.precision = precision_from_string(m.at("precision").get<std::string>());
    const std::string method = m.at("method").get<std::string>();
    ir.meta.cfg.method = method == "lines"            ? Method::Lines
                         : method == "planar-managed" ? Method::PlanarManaged
                                                      : Method::PlanarUnmanaged;
    ir.meta.fuse_source = m.at("fuse_source").get<bool>();
    ir.meta.shared_bytes = m.at("shared_bytes").get<std::int64_t>();
    ir.meta.jac = m.at("jac").get<std::array<double, 3>>();
    ir.meta.params.nu = m.at("nu").get<double>();
    ir.meta.params.zeta = m.at("zeta").get<double>();
    ir.meta.params.T = m.at("T").get<double>();
    ir.meta.num_regs = m.at("num_regs").get<int>();
    ir.meta.name = m.at("name").get<std::string>();
    ir.meta.constants.values = m.at("const_values").get<std::vector<double>>();
    ir.meta.constants.signed_index = m.at("const_index").get<std::vector<int>>();
    ir.meta.constants.m = m.at("const_m").get<int>();
    const auto& o = m.at("opts");
    ir.meta.opts.register_overlap = o.at("register_overlap").get<bool>();
    ir.meta.opts.deconflict = o.at("deconflict").get<bool>();
    ir.meta.opts.cmem_constants = o.at("cmem_constants").get<bool>();
    ir.meta.opts.grs = o.at("grs").get<bool>();
    ir.meta.opts.load_hints = o.at("load_hints").get<bool>();
    ir.meta.opts.store_hints = o.at("store_hints").get<bool>();
    ir.meta.opts.interleave_asap = o.at("interleave_asap").get<bool>();
    ir.meta.opts.agglomerate = o.at("agglomerate").get<bool>();
    ir.meta.opts.lines_vars = m.at("lines_vars").get<int>();

    for (const auto& ij : j.at("code")) {
        Instr in;
        in.op = op_from_string(ij.at("op").get<std::string>());
        if (ij.contains("dst")) in.dst = ij["dst"].get<int>();
        if (ij.contains("a")) in.a = opnd_from_json(ij["a"]);
        if (ij.contains("b")) in.b = opnd_from_json(ij["b"]);
        if (ij.contains("c")) in.c = opnd_from_json(ij["c"]);
        if (ij.contains("addr")) in.addr = addr_from_json(ij["addr"]);
        if (ij.contains("array")) in.array = static_cast<std::int8_t>(ij["array"].get<int>());
        if (ij.contains("hint")) in.hint = ij["hint"] == "lu" ? MemHint::LU : MemHint::WT;
        if (ij.contains("guard")) in.guarded = ij["guard"].get<bool>();
        if (ij.contains("trip")) in.trip = static_cast<std::int16_t>(ij["trip"].get<int>());
        if (ij.contains("sym")) {
            const std::string sn = ij["sym"].get<std::string>();
            for (int s = 0; s < NSYM; ++s)
                if (sn == sym_name(s)) in.loop_sym = static_cast<std::int8_t>(s);
        }
        if (ij.contains("ph")) in.phase = static_cast<GenPhase>(ij["ph"].get<int>());
        ir.code.push_back(in);
    }
    return ir;
}

// ---------------------------------------------------------------------------
// Static register-pressure metric: maximum number of simultaneously live
// virtual registers, with registers used inside a loop kept live to its end.

inline int register_pressure(const KernelIR& ir) {
    const int n = static_cast<int>(ir.code.size());
    std::vector<int> first_def(static_cast<std::size_t>(ir.meta.num_regs), -1);
    std::vector<int> last_use(static_cast<std::size_t>(ir.meta.num_regs), -1);
    auto touch_use = [&](const Opnd& o, int pos) {
        if (o.is_reg()) last_use[static_cast<std::size_t>(o.reg)] = std::max(last_use[static_cast<std::size_t>(o.reg)], pos);
    };
    for (int i = 0; i < n; ++i) {
        const Instr& in = ir.code[static_cast<std::size_t>(i)];
        touch_use(in.a, i);
        touch_use(in.b, i);
        touch_use(in.c, i);
        if (in.dst >= 0) {
            if (first_def[static_cast<std::size_t>(in.dst)] < 0) first_def[static_cast<std::size_t>(in.dst)] = i;
            last_use[static_cast<std::size_t>(in.dst)] = std::max(last_use[static_cast<std::size_t>(in.dst)], i);
        }
    }
    // Extend ranges across loops.
    std::vector<std::pair<int, int>> loops;
    std::vector<int> stack;
    for (int i = 0; i < n; ++i) {
        if (ir.code[static_cast<std::size_t>(i)].op == Op::LoopBegin) stack.push_back(i);
        if (ir.code[static_cast<std::size_t>(i)].op == Op::LoopEnd && !stack.empty()) {
            loops.emplace_back(stack.back(), i);
            stack.pop_back();
        }
    }
    for (int r = 0; r < ir.meta.num_regs; ++r) {
        if (first_def[static_cast<std::size_t>(r)] < 0) continue;
        for (auto [b, e] : loops)
            if (first_def[static_cast<std::size_t>(r)] < b && last_use[static_cast<std::size_t>(r)] >= b &&
                last_use[static_cast<std::size_t>(r)] <= e)
                last_use[static_cast<std::size_t>(r)] = e;
    }
    std::vector<int> delta(static_cast<std::size_t>(n + 1), 0);
    for (int r = 0; r < ir.meta.num_regs; ++r) {
        if (first_def[static_cast<std::size_t>(r)] < 0) continue;
        ++delta[static_cast<std::size_t>(first_def[static_cast<std::size_t>(r)])];
        --delta[static_cast<std::size_t>(last_use[static_cast<std::size_t>(r)] + 1)];
    }
    int live = 0, peak = 0;
    for (int i = 0; i <= n; ++i) {
        live += delta[static_cast<std::size_t>(i)];
        peak = std::max(peak, live);
    }
    return peak;
}

} // namespace hexfuse
