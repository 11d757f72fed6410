#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hexfuse/banks.hpp"
#include "hexfuse/ir.hpp"
#include "hexfuse/layout.hpp"

namespace hexfuse {

struct SimGrid {
    int blocks = 1;
    int threads_per_block = 128;
    int warp_size = kWarpSize;
    std::int64_t shared_bytes = 0;
    int N = 0;  // total element count

    void validate() const {
        if (threads_per_block <= 0 || threads_per_block > 1024)
            throw std::invalid_argument("SimGrid: threads_per_block must be in [1,1024]");
        if (shared_bytes < 0 || shared_bytes > kMaxSharedBytes)
            throw std::invalid_argument("SimGrid: shared_bytes must be within the 96 KiB capacity");
        if (blocks <= 0 || N < 0) throw std::invalid_argument("SimGrid: bad block or element count");
    }
};

inline SimGrid grid_for(const KernelIR& ir) {
    SimGrid g;
    g.blocks = ir.meta.cfg.n_blocks();
    g.threads_per_block = ir.meta.cfg.block_threads;
    g.shared_bytes = ir.meta.shared_bytes;
    g.N = ir.meta.cfg.n_elem;
    return g;
}

struct RaceRecord {
    int first_instr = -1;
    int second_instr = -1;
    std::int64_t word = -1;
    int epoch = -1;
};

struct SimReport {
    std::int64_t global_read_words = 0;
    std::int64_t global_write_words = 0;
    std::int64_t global_read_words_distinct = 0;
    std::int64_t global_write_words_distinct = 0;
    std::int64_t global_transactions = 0;  // 32-byte sectors after coalescing
    std::int64_t shared_read_words = 0;
    std::int64_t shared_write_words = 0;
    std::int64_t shared_transactions = 0;  // serialised passes incl. conflicts
    std::int64_t bank_conflict_extra_transactions = 0;
    std::int64_t arithmetic_issues = 0;    // warp-level compute issues
    std::vector<RaceRecord> race_flags;
    double modeled_speedup_vs_unfused = 0.0;

    void merge(const SimReport& o) {
        global_read_words += o.global_read_words;
        global_write_words += o.global_write_words;
        global_transactions += o.global_transactions;
        shared_read_words += o.shared_read_words;
        shared_write_words += o.shared_write_words;
        shared_transactions += o.shared_transactions;
        bank_conflict_extra_transactions += o.bank_conflict_extra_transactions;
        arithmetic_issues += o.arithmetic_issues;
        for (const auto& r : o.race_flags) race_flags.push_back(r);
    }
};

/// Latency-weighted issue model; a ranking heuristic, not a runtime
/// prediction.
inline std::int64_t modeled_cycles(const SimReport& r) {
    return 193 * r.global_transactions + 19 * r.shared_transactions + 4 * r.arithmetic_issues;
}

inline nlohmann::json report_to_json(const SimReport& r) {
    return {{"global_read_words", r.global_read_words},
            {"global_write_words", r.global_write_words},
            {"global_read_words_distinct", r.global_read_words_distinct},
            {"global_write_words_distinct", r.global_write_words_distinct},
            {"global_transactions", r.global_transactions},
            {"shared_read_words", r.shared_read_words},
            {"shared_write_words", r.shared_write_words},
            {"shared_transactions", r.shared_transactions},
            {"bank_conflict_extra_transactions", r.bank_conflict_extra_transactions},
            {"arithmetic_issues", r.arithmetic_issues},
            {"races", r.race_flags.size()},
            {"modeled_cycles", modeled_cycles(r)},
            {"modeled_speedup_vs_unfused", r.modeled_speedup_vs_unfused}};
}

/// Epoch-based shared-memory race rule: a word written in one barrier epoch
/// must not be read or written by a different thread in the same epoch.
struct SharedAccess {
    bool is_write = false;
    int thread = 0;
    std::int64_t word = 0;
    int epoch = 0;
    int instr = 0;
};

class RaceDetector {
public:
    explicit RaceDetector(std::int64_t words) : st_(static_cast<std::size_t>(words)) {}

    void on_access(const SharedAccess& a, std::vector<RaceRecord>& out) {
        WordState& w = st_[static_cast<std::size_t>(a.word)];
        if (a.is_write) {
            if (w.wr_epoch == a.epoch && w.wr_thread != a.thread)
                out.push_back({w.wr_instr, a.instr, a.word, a.epoch});
            if (w.rd_epoch == a.epoch && (w.rd_thread != a.thread || w.rd_other >= 0)) {
                const int other = (w.rd_thread != a.thread) ? w.rd_instr : w.rd_other;
                out.push_back({other, a.instr, a.word, a.epoch});
            }
            w.wr_epoch = a.epoch;
            w.wr_thread = a.thread;
            w.wr_instr = a.instr;
        } else {
            if (w.wr_epoch == a.epoch && w.wr_thread != a.thread)
                out.push_back({w.wr_instr, a.instr, a.word, a.epoch});
            if (w.rd_epoch == a.epoch) {
                if (w.rd_thread != a.thread && w.rd_other < 0) w.rd_other = a.instr;
            } else {
                w.rd_epoch = a.epoch;
                w.rd_thread = a.thread;
                w.rd_instr = a.instr;
                w.rd_other = -1;
            }
        }
    }

private:
    struct WordState {
        int wr_epoch = -1, wr_thread = -1, wr_instr = -1;
        int rd_epoch = -1, rd_thread = -1, rd_instr = -1, rd_other = -1;
    };
    std::vector<WordState> st_;
};

inline std::vector<RaceRecord> detect_races(const std::vector<SharedAccess>& trace) {
    std::int64_t top = 0;
    for (const auto& a : trace) top = std::max(top, a.word + 1);
    RaceDetector det(top);
    std::vector<RaceRecord> out;
    for (const auto& a : trace) det.on_access(a, out);
    return out;
}

namespace detail {

struct SparseAddr {
    std::int64_t base = 0;
    int n = 0;
    std::array<std::pair<int, std::int64_t>, 6> terms{};  // (symbol, coefficient)

    static SparseAddr from(const Addr& a) {
        SparseAddr s;
        s.base = a.c[SYM_CONST];
        for (int k = 1; k < NSYM; ++k)
            if (a.c[static_cast<std::size_t>(k)] != 0) {
                if (s.n == 6) throw std::logic_error("address expression too wide");
                s.terms[static_cast<std::size_t>(s.n++)] = {k, a.c[static_cast<std::size_t>(k)]};
            }
        return s;
    }
    std::int64_t eval(const std::int64_t* syms) const {
        std::int64_t v = base;
        for (int k = 0; k < n; ++k)
            v += terms[static_cast<std::size_t>(k)].second * syms[terms[static_cast<std::size_t>(k)].first];
        return v;
    }
};

} // namespace detail

struct ExecResult {
    StateField output;
    SimReport report;
};

/// Deterministic lockstep execution of a kernel over a simulated grid. Warps
/// run round-robin between barriers; barriers are block-wide; memory
/// instructions are predicated on the element guard.
inline ExecResult execute(const KernelIR& ir, const StateField& input, const SimGrid& grid_in) {
    SimGrid grid = grid_in;
    grid.validate();
    const ElementConfig& cfg = ir.meta.cfg;
    if (input.n_elem != cfg.n_elem || input.p != cfg.p || input.group != cfg.elems_per_block() ||
        input.precision != cfg.precision)
        throw std::invalid_argument("execute: input field does not match the kernel configuration");

    const bool f32 = cfg.precision == Precision::fp32;
    const int word_sz = cfg.wordsize();
    const int threads = grid.threads_per_block;
    const int warp_size = grid.warp_size;
    const int n_warps = (threads + warp_size - 1) / warp_size;
    const std::int64_t shared_words = grid.shared_bytes / word_sz;
    const int n = static_cast<int>(ir.code.size());

    // Decode once; registers must stay within the declared file.
    std::vector<detail::SparseAddr> addrs(static_cast<std::size_t>(n));
    int max_reg = ir.meta.num_regs - 1;
    for (int i = 0; i < n; ++i) {
        const Instr& in = ir.code[static_cast<std::size_t>(i)];
        addrs[static_cast<std::size_t>(i)] = detail::SparseAddr::from(in.addr);
        max_reg = std::max(max_reg, in.dst);
        for (const Opnd* o : {&in.a, &in.b, &in.c})
            if (o->is_reg()) max_reg = std::max(max_reg, o->reg);
    }
    const int num_regs = max_reg + 1;
    std::vector<int> loop_partner(static_cast<std::size_t>(n), -1);
    {
        std::vector<int> stack;
        for (int i = 0; i < n; ++i) {
            if (ir.code[static_cast<std::size_t>(i)].op == Op::LoopBegin) stack.push_back(i);
            if (ir.code[static_cast<std::size_t>(i)].op == Op::LoopEnd) {
                if (stack.empty()) throw std::invalid_argument("execute: unbalanced loop");
                loop_partner[static_cast<std::size_t>(i)] = stack.back();
                stack.pop_back();
            }
        }
        if (!stack.empty()) throw std::invalid_argument("execute: unbalanced loop");
    }

    ExecResult res;
    res.output = input;
    for (auto& x : res.output.data) x = 0.0;
    SimReport& rep = res.report;

    const std::vector<double>& gin = input.data;
    std::vector<double>& gout = res.output.data;
    std::vector<std::uint8_t> seen_in(gin.size(), 0), seen_out(gout.size(), 0);

    std::vector<double> regs(static_cast<std::size_t>(threads) * num_regs, 0.0);
    std::vector<std::int64_t> syms(static_cast<std::size_t>(threads) * NSYM, 0);
    std::vector<std::uint8_t> active(static_cast<std::size_t>(threads), 0);
    std::vector<double> shared(static_cast<std::size_t>(shared_words), 0.0);

    std::vector<std::int64_t> lane_words;
    lane_words.reserve(static_cast<std::size_t>(warp_size));

    for (int blk = 0; blk < grid.blocks; ++blk) {
        std::fill(regs.begin(), regs.end(), 0.0);
        std::fill(shared.begin(), shared.end(), 0.0);
        RaceDetector races(shared_words);

        // Per-thread symbols and guards.
        for (int t = 0; t < threads; ++t) {
            std::int64_t* s = &syms[static_cast<std::size_t>(t) * NSYM];
            s[SYM_CONST] = 1;
            s[SYM_TID] = t;
            s[SYM_LANE] = t % warp_size;
            s[SYM_WARP] = t / warp_size;
            s[SYM_BLOCK] = blk;
            s[SYM_LK] = 0;
            std::int64_t eg = 0;
            bool act = true;
            if (cfg.method == Method::Lines) {
                const int nn = cfg.elems_per_block();
                s[SYM_EL] = t % nn;
                s[SYM_LI] = (t / nn) % cfg.m();
                s[SYM_LJ] = (t / (nn * cfg.m())) % cfg.m();
                s[SYM_LE] = 0;
                s[SYM_KP] = 0;
                eg = global_element(t, nn, blk);
            } else {
                const int epw = cfg.planar_elems_per_warp();
                const int lane = t % warp_size;
                s[SYM_KP] = planar_lane(t, cfg.p, warp_size);
                s[SYM_LE] = lane / cfg.m();
                s[SYM_EL] = s[SYM_WARP] * epw + s[SYM_LE];
                s[SYM_LI] = s[SYM_LJ] = 0;
                if (lane / cfg.m() >= epw) act = false;
                eg = blk * static_cast<std::int64_t>(cfg.elems_per_block()) + s[SYM_EL];
            }
            if (eg >= grid.N) act = false;
            active[static_cast<std::size_t>(t)] = act ? 1 : 0;
        }

        // Warp contexts.
        struct WarpCtx {
            int pc = 0;
            bool done = false;
            std::vector<std::pair<int, int>> loops;  // (loop_begin pc, counter)
        };
        std::vector<WarpCtx> warps(static_cast<std::size_t>(n_warps));
        int epoch = 0;

        auto lane_range = [&](int w, int& lo, int& hi) {
            lo = w * warp_size;
            hi = std::min(threads, lo + warp_size);
        };

        auto run_warp = [&](int w) -> int {  // returns barrier pc or -1 when finished
            WarpCtx& ctx = warps[static_cast<std::size_t>(w)];
            int lo, hi;
            lane_range(w, lo, hi);
            while (ctx.pc < n) {
                const int i = ctx.pc;
                const Instr& in = ir.code[static_cast<std::size_t>(i)];
                const detail::SparseAddr& ad = addrs[static_cast<std::size_t>(i)];
                switch (in.op) {
                    case Op::Barrier:
                        ++ctx.pc;
                        return i;
                    case Op::LoopBegin: {
                        ctx.loops.emplace_back(i, 0);
                        for (int t = lo; t < hi; ++t) syms[static_cast<std::size_t>(t) * NSYM + in.loop_sym] = 0;
                        ++ctx.pc;
                        break;
                    }
                    case Op::LoopEnd: {
                        auto& top = ctx.loops.back();
                        const Instr& lb = ir.code[static_cast<std::size_t>(top.first)];
                        ++top.second;
                        if (top.second < lb.trip) {
                            for (int t = lo; t < hi; ++t)
                                syms[static_cast<std::size_t>(t) * NSYM + lb.loop_sym] = top.second;
                            ctx.pc = top.first + 1;
                        } else {
                            for (int t = lo; t < hi; ++t) syms[static_cast<std::size_t>(t) * NSYM + lb.loop_sym] = 0;
                            ctx.loops.pop_back();
                            ++ctx.pc;
                        }
                        break;
                    }
                    case Op::LoadConst: {
                        const auto& cons = ir.meta.constants;
                        for (int t = lo; t < hi; ++t) {
                            const std::int64_t idx = ad.eval(&syms[static_cast<std::size_t>(t) * NSYM]);
                            if (idx < 0 || idx >= static_cast<std::int64_t>(cons.signed_index.size()))
                                throw std::runtime_error("execute: constant index out of bounds at instruction " +
                                                         std::to_string(i));
                            regs[static_cast<std::size_t>(t) * num_regs + in.dst] =
                                cons.lookup(static_cast<int>(idx));
                        }
                        break;
                    }
                    case Op::LoadGlobal:
                    case Op::StoreGlobal: {
                        const bool is_load = in.op == Op::LoadGlobal;
                        std::vector<double>& arr = is_load ? const_cast<std::vector<double>&>(gin) : gout;
                        std::vector<std::uint8_t>& seen = is_load ? seen_in : seen_out;
                        lane_words.clear();
                        for (int t = lo; t < hi; ++t) {
                            if (!active[static_cast<std::size_t>(t)]) continue;
                            const std::int64_t a = ad.eval(&syms[static_cast<std::size_t>(t) * NSYM]);
                            if (a < 0 || a >= static_cast<std::int64_t>(arr.size()))
                                throw std::runtime_error("execute: global access out of bounds at instruction " +
                                                         std::to_string(i));
                            if (is_load) {
                                regs[static_cast<std::size_t>(t) * num_regs + in.dst] =
                                    arr[static_cast<std::size_t>(a)];
                                ++rep.global_read_words;
                            } else {
                                double v = in.a.is_reg() ? regs[static_cast<std::size_t>(t) * num_regs + in.a.reg] : in.a.imm;
                                if (f32) v = static_cast<double>(static_cast<float>(v));
                                arr[static_cast<std::size_t>(a)] = v;
                                ++rep.global_write_words;
                            }
                            if (!seen[static_cast<std::size_t>(a)]) {
                                seen[static_cast<std::size_t>(a)] = 1;
                                if (is_load)
                                    ++rep.global_read_words_distinct;
                                else
                                    ++rep.global_write_words_distinct;
                            }
                            lane_words.push_back(a);
                        }
                        if (!lane_words.empty()) {
                            // Coalesce into distinct 32-byte sectors.
                            std::array<std::int64_t, 64> sectors{};
                            int ns = 0;
                            for (std::int64_t wword : lane_words) {
                                const std::int64_t sec = wword * word_sz / 32;
                                bool dup = false;
                                for (int q = 0; q < ns; ++q)
                                    if (sectors[static_cast<std::size_t>(q)] == sec) { dup = true; break; }
                                if (!dup) sectors[static_cast<std::size_t>(ns++)] = sec;
                            }
                            rep.global_transactions += ns;
                        }
                        break;
                    }
                    case Op::LoadShared:
                    case Op::StoreShared: {
                        const bool is_load = in.op == Op::LoadShared;
                        lane_words.clear();
                        for (int t = lo; t < hi; ++t) {
                            if (!active[static_cast<std::size_t>(t)]) continue;
                            const std::int64_t a = ad.eval(&syms[static_cast<std::size_t>(t) * NSYM]);
                            if (a < 0 || a >= shared_words)
                                throw std::runtime_error("execute: shared access out of bounds at instruction " +
                                                         std::to_string(i));
                            if (is_load) {
                                regs[static_cast<std::size_t>(t) * num_regs + in.dst] =
                                    shared[static_cast<std::size_t>(a)];
                            } else {
                                double v = in.a.is_reg() ? regs[static_cast<std::size_t>(t) * num_regs + in.a.reg] : in.a.imm;
                                if (f32) v = static_cast<double>(static_cast<float>(v));
                                shared[static_cast<std::size_t>(a)] = v;
                            }
                            races.on_access({!is_load, t, a, epoch, i}, rep.race_flags);
                            lane_words.push_back(a);
                        }
                        if (!lane_words.empty()) {
                            // Distinct words (a broadcast counts once), then
                            // the bank histogram over the distinct set.
                            std::sort(lane_words.begin(), lane_words.end());
                            lane_words.erase(std::unique(lane_words.begin(), lane_words.end()), lane_words.end());
                            if (is_load)
                                rep.shared_read_words += static_cast<std::int64_t>(lane_words.size());
                            else
                                rep.shared_write_words += static_cast<std::int64_t>(lane_words.size());
                            int counts[kNumBanks] = {};
                            int cc = 0;
                            for (std::int64_t wd : lane_words) {
                                if (word_sz == 8) {
                                    cc = std::max(cc, ++counts[(2 * wd) % kNumBanks]);
                                    cc = std::max(cc, ++counts[(2 * wd + 1) % kNumBanks]);
                                } else {
                                    cc = std::max(cc, ++counts[wd % kNumBanks]);
                                }
                            }
                            rep.shared_transactions += cc;
                            const int min_cc = std::min(word_sz == 8 ? 2 : 1, cc);
                            rep.bank_conflict_extra_transactions += cc - min_cc;
                        }
                        break;
                    }
                    default: {  // compute
                        ++rep.arithmetic_issues;
                        for (int t = lo; t < hi; ++t) {
                            double* r = &regs[static_cast<std::size_t>(t) * num_regs];
                            auto val = [&](const Opnd& o) { return o.is_reg() ? r[o.reg] : o.imm; };
                            double v = 0.0;
                            if (f32) {
                                const float a = static_cast<float>(val(in.a));
                                switch (in.op) {
                                    case Op::Mov: v = a; break;
                                    case Op::Neg: v = -a; break;
                                    case Op::Add: v = a + static_cast<float>(val(in.b)); break;
                                    case Op::Mul: v = a * static_cast<float>(val(in.b)); break;
                                    case Op::Fma:
                                        v = std::fmaf(a, static_cast<float>(val(in.b)), static_cast<float>(val(in.c)));
                                        break;
                                    default: throw std::logic_error("execute: bad opcode");
                                }
                                v = static_cast<double>(static_cast<float>(v));
                            } else {
                                const double a = val(in.a);
                                switch (in.op) {
                                    case Op::Mov: v = a; break;
                                    case Op::Neg: v = -a; break;
                                    case Op::Add: v = a + val(in.b); break;
                                    case Op::Mul: v = a * val(in.b); break;
                                    case Op::Fma: v = std::fma(a, val(in.b), val(in.c)); break;
                                    default: throw std::logic_error("execute: bad opcode");
                                }
                            }
                            r[in.dst] = v;
                        }
                        break;
                    }
                }
                if (in.op != Op::Barrier && in.op != Op::LoopBegin && in.op != Op::LoopEnd) ++ctx.pc;
            }
            ctx.done = true;
            return -1;
        };

        // Round-robin between barriers.
        for (;;) {
            bool all_done = true;
            int barrier_pc = -2;
            bool mixed = false;
            for (int w = 0; w < n_warps; ++w) {
                if (warps[static_cast<std::size_t>(w)].done) continue;
                const int b = run_warp(w);
                if (b >= 0) all_done = false;
                if (barrier_pc == -2)
                    barrier_pc = b;
                else if (barrier_pc != b)
                    mixed = true;
            }
            if (mixed)
                throw std::runtime_error("execute: barrier divergence (threads reach different barriers)");
            if (all_done) break;
            ++epoch;
        }
    }

    return res;
}

} // namespace hexfuse
