#pragma once

#include <algorithm>
#include <map>
#include <stdexcept>
#include <vector>

#include "hexfuse/ir.hpp"

namespace hexfuse {

/// Instruction-level dependency graph. Barriers and loop boundaries are hard
/// walls; def-use and address-overlap dependencies are edges; accumulations
/// into the same register are mutually independent.
struct DependencyGraph {
    int n = 0;
    std::vector<std::vector<int>> succ;
    std::vector<std::vector<int>> pred;

    void add_edge(int from, int to) {
        if (from == to) return;
        succ[static_cast<std::size_t>(from)].push_back(to);
        pred[static_cast<std::size_t>(to)].push_back(from);
    }
    bool has_edge(int from, int to) const {
        for (int s : succ[static_cast<std::size_t>(from)])
            if (s == to) return true;
        return false;
    }
};

inline bool is_wall(Op op) { return op == Op::Barrier || op == Op::LoopBegin || op == Op::LoopEnd; }

/// dst also appears as a source operand: a running accumulation.
inline bool is_accumulate(const Instr& in) {
    if (in.dst < 0) return false;
    auto src = [&](const Opnd& o) { return o.is_reg() && o.reg == in.dst; };
    return src(in.a) || src(in.b) || src(in.c);
}

namespace detail {
/// Same address space and array; returns true when the two accesses can touch
/// the same word for some thread.
inline bool may_alias(const Instr& x, const Instr& y) {
    const bool xs = (x.op == Op::LoadShared || x.op == Op::StoreShared);
    const bool ys = (y.op == Op::LoadShared || y.op == Op::StoreShared);
    if (xs != ys) return false;
    if (!xs && x.array != y.array) return false;
    // Identical symbolic coefficients: overlap iff the constants match.
    bool same_shape = true;
    for (int s = 1; s < NSYM; ++s)
        if (x.addr.c[static_cast<std::size_t>(s)] != y.addr.c[static_cast<std::size_t>(s)]) same_shape = false;
    if (same_shape) return x.addr.c[SYM_CONST] == y.addr.c[SYM_CONST];
    return true;  // different shapes: assume overlap
}
} // namespace detail

inline DependencyGraph build_dependency_graph(const KernelIR& ir) {
    const int n = static_cast<int>(ir.code.size());
    DependencyGraph g;
    g.n = n;
    g.succ.resize(static_cast<std::size_t>(n));
    g.pred.resize(static_cast<std::size_t>(n));

    struct RegState {
        int def = -1;                // last non-accumulating writer
        std::vector<int> accs;       // accumulations since the last def
        std::vector<int> reads;      // plain reads since the last write
    };
    std::map<int, RegState> regs;
    std::vector<int> mem_ops;  // memory instructions in the current wall segment
    int last_wall = -1;

    for (int i = 0; i < n; ++i) {
        const Instr& in = ir.code[static_cast<std::size_t>(i)];
        if (is_wall(in.op)) {
            for (int j = last_wall + 1; j < i; ++j) g.add_edge(j, i);
            if (last_wall >= 0) g.add_edge(last_wall, i);
            last_wall = i;
            regs.clear();
            mem_ops.clear();
            continue;
        }
        if (last_wall >= 0) g.add_edge(last_wall, i);

        const bool acc = is_accumulate(in);
        auto on_read = [&](const Opnd& o) {
            if (!o.is_reg()) return;
            if (acc && o.reg == in.dst) return;  // accumulations stay mutually independent
            auto& st = regs[o.reg];
            if (st.def >= 0) g.add_edge(st.def, i);
            for (int a : st.accs) g.add_edge(a, i);
            st.reads.push_back(i);
        };
        on_read(in.a);
        on_read(in.b);
        on_read(in.c);

        if (in.dst >= 0) {
            auto& st = regs[in.dst];
            if (acc) {
                if (st.def >= 0) g.add_edge(st.def, i);
                for (int r : st.reads) g.add_edge(r, i);
                st.accs.push_back(i);
            } else {
                if (st.def >= 0) g.add_edge(st.def, i);
                for (int a : st.accs) g.add_edge(a, i);
                for (int r : st.reads) g.add_edge(r, i);
                st.def = i;
                st.accs.clear();
                st.reads.clear();
            }
        }

        if (is_memory_op(in.op) && in.op != Op::LoadConst) {
            const bool is_store = (in.op == Op::StoreGlobal || in.op == Op::StoreShared);
            for (int j : mem_ops) {
                const Instr& other = ir.code[static_cast<std::size_t>(j)];
                const bool other_store = (other.op == Op::StoreGlobal || other.op == Op::StoreShared);
                if (!is_store && !other_store) continue;
                if (detail::may_alias(in, other)) g.add_edge(j, i);
            }
            mem_ops.push_back(i);
        }
    }
    return g;
}

namespace detail {

struct Segment {
    int begin = 0, end = 0;  // [begin, end) excluding walls
};

inline std::vector<Segment> wall_segments(const KernelIR& ir) {
    std::vector<Segment> segs;
    int start = 0;
    for (int i = 0; i < static_cast<int>(ir.code.size()); ++i) {
        if (is_wall(ir.code[static_cast<std::size_t>(i)].op)) {
            if (i > start) segs.push_back({start, i});
            start = i + 1;
        }
    }
    if (start < static_cast<int>(ir.code.size())) segs.push_back({start, static_cast<int>(ir.code.size())});
    return segs;
}

template <typename PickFn>
inline KernelIR reorder_segments(const KernelIR& ir, PickFn pick) {
    DependencyGraph g = build_dependency_graph(ir);
    KernelIR out;
    out.meta = ir.meta;
    out.code.reserve(ir.code.size());
    std::vector<int> order;
    int cursor = 0;
    for (const auto& seg : wall_segments(ir)) {
        while (cursor < seg.begin) out.code.push_back(ir.code[static_cast<std::size_t>(cursor++)]);
        order.clear();
        pick(g, seg.begin, seg.end, order);
        for (int idx : order) out.code.push_back(ir.code[static_cast<std::size_t>(idx)]);
        cursor = seg.end;
    }
    while (cursor < static_cast<int>(ir.code.size())) out.code.push_back(ir.code[static_cast<std::size_t>(cursor++)]);
    return out;
}

} // namespace detail

/// Hoists computation to the earliest dependency-legal position; the relative
/// order of memory instructions is untouched.
inline KernelIR pass_interleave_asap(const KernelIR& ir) {
    return detail::reorder_segments(ir, [&](const DependencyGraph& g, int begin, int end, std::vector<int>& order) {
        std::vector<int> remaining_pred(static_cast<std::size_t>(g.n), 0);
        for (int i = begin; i < end; ++i)
            for (int p : g.pred[static_cast<std::size_t>(i)])
                if (p >= begin && p < end) ++remaining_pred[static_cast<std::size_t>(i)];
        std::vector<bool> emitted(static_cast<std::size_t>(g.n), false);
        auto release = [&](int i) {
            emitted[static_cast<std::size_t>(i)] = true;
            order.push_back(i);
            // successors inside the segment
            for (int s : g.succ[static_cast<std::size_t>(i)])
                if (s >= begin && s < end) --remaining_pred[static_cast<std::size_t>(s)];
        };
        auto ready = [&](int i) { return !emitted[static_cast<std::size_t>(i)] && remaining_pred[static_cast<std::size_t>(i)] == 0; };
        int emitted_count = 0;
        const int total = end - begin;
        int next_mem = begin;
        while (emitted_count < total) {
            bool progressed = false;
            for (int i = begin; i < end; ++i) {
                if (!is_compute_op(ir.code[static_cast<std::size_t>(i)].op)) continue;
                if (ready(i)) {
                    release(i);
                    ++emitted_count;
                    progressed = true;
                }
            }
            while (next_mem < end &&
                   (emitted[static_cast<std::size_t>(next_mem)] || is_compute_op(ir.code[static_cast<std::size_t>(next_mem)].op)))
                ++next_mem;
            if (next_mem < end && ready(next_mem)) {
                release(next_mem);
                ++emitted_count;
                progressed = true;
            }
            if (!progressed) throw std::logic_error("pass_interleave_asap: dependency cycle");
        }
    });
}

/// Groups the stream into alternating memory/compute blocks with a minimum
/// interior block length, splitting any run beyond max_block.
inline KernelIR pass_agglomerate(const KernelIR& ir, int min_block = 13, int max_block = 64) {
    return detail::reorder_segments(ir, [&](const DependencyGraph& g, int begin, int end, std::vector<int>& order) {
        std::vector<int> remaining_pred(static_cast<std::size_t>(g.n), 0);
        for (int i = begin; i < end; ++i)
            for (int p : g.pred[static_cast<std::size_t>(i)])
                if (p >= begin && p < end) ++remaining_pred[static_cast<std::size_t>(i)];
        std::vector<bool> emitted(static_cast<std::size_t>(g.n), false);
        auto release = [&](int i) {
            emitted[static_cast<std::size_t>(i)] = true;
            order.push_back(i);
            for (int s : g.succ[static_cast<std::size_t>(i)])
                if (s >= begin && s < end) --remaining_pred[static_cast<std::size_t>(s)];
        };
        auto next_ready = [&](bool want_compute) {
            for (int i = begin; i < end; ++i) {
                if (emitted[static_cast<std::size_t>(i)] || remaining_pred[static_cast<std::size_t>(i)] != 0) continue;
                if (is_compute_op(ir.code[static_cast<std::size_t>(i)].op) == want_compute) return i;
            }
            return -1;
        };
        auto ready_count = [&](bool want_compute) {
            int c = 0;
            for (int i = begin; i < end; ++i) {
                if (emitted[static_cast<std::size_t>(i)] || remaining_pred[static_cast<std::size_t>(i)] != 0) continue;
                if (is_compute_op(ir.code[static_cast<std::size_t>(i)].op) == want_compute) ++c;
            }
            return c;
        };
        const int total = end - begin;
        int emitted_count = 0;
        bool mode_compute = false;  // segments open with loads
        if (next_ready(false) < 0) mode_compute = true;
        int run = 0;
        while (emitted_count < total) {
            const int i = next_ready(mode_compute);
            // Switch when this kind is exhausted, or split once the run hits
            // max_block -- unless that would strand a sub-minimum tail.
            bool want_switch = (i < 0);
            if (!want_switch && run >= max_block) {
                const int rc = ready_count(mode_compute);
                if (rc == 0 || rc >= min_block) want_switch = true;
            }
            if (want_switch && next_ready(!mode_compute) >= 0) {
                mode_compute = !mode_compute;
                run = 0;
                continue;
            }
            if (i < 0) throw std::logic_error("pass_agglomerate: dependency cycle");
            release(i);
            ++run;
            ++emitted_count;
        }
    });
}

/// Cache hints: stores are write-through; a load gets the last-use hint when
/// it is the only or the final load of its address.
inline KernelIR pass_apply_hints(const KernelIR& ir, bool loads, bool stores) {
    KernelIR out = ir;
    if (stores) {
        for (auto& in : out.code)
            if (in.op == Op::StoreGlobal) in.hint = MemHint::WT;
    }
    if (loads) {
        std::map<std::pair<int, Addr>, int> last;  // (array, addr) -> last load index
        for (int i = 0; i < static_cast<int>(out.code.size()); ++i) {
            const Instr& in = out.code[static_cast<std::size_t>(i)];
            if (in.op == Op::LoadGlobal) last[{in.array, in.addr}] = i;
        }
        for (int i = 0; i < static_cast<int>(out.code.size()); ++i) {
            Instr& in = out.code[static_cast<std::size_t>(i)];
            if (in.op != Op::LoadGlobal) continue;
            in.hint = (last[{in.array, in.addr}] == i) ? MemHint::LU : MemHint::None;
        }
    }
    return out;
}

/// Applies the scheduling and hint passes selected in the option set.
inline KernelIR apply_passes(const KernelIR& ir) {
    KernelIR out = ir;
    const OptionSet& o = ir.meta.opts;
    if (o.interleave_asap) out = pass_interleave_asap(out);
    if (o.agglomerate) out = pass_agglomerate(out, o.agglomerate_min_block, o.agglomerate_max_block);
    if (o.load_hints || o.store_hints) out = pass_apply_hints(out, o.load_hints, o.store_hints);
    return out;
}

/// Memory/compute block lengths of each wall-free segment, in order.
inline std::vector<std::vector<int>> block_structure(const KernelIR& ir) {
    std::vector<std::vector<int>> out;
    for (const auto& seg : detail::wall_segments(ir)) {
        std::vector<int> blocks;
        int run = 0;
        bool cur = false;
        for (int i = seg.begin; i < seg.end; ++i) {
            const bool c = is_compute_op(ir.code[static_cast<std::size_t>(i)].op);
            if (run == 0 || c == cur) {
                cur = c;
                ++run;
            } else {
                blocks.push_back(run);
                cur = c;
                run = 1;
            }
        }
        if (run) blocks.push_back(run);
        out.push_back(std::move(blocks));
    }
    return out;
}

} // namespace hexfuse
