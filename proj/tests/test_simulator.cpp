#include <doctest.h>

#include <cstring>

#include "hexfuse/codegen_planar.hpp"
#include "hexfuse/simulator.hpp"
#include "hexfuse/verify.hpp"

using namespace hexfuse;

namespace {

ElementConfig small_planar(int p, int n_elem, Precision prec) {
    ElementConfig cfg;
    cfg.p = p;
    cfg.n_elem = n_elem;
    cfg.block_threads = 128;
    cfg.precision = prec;
    cfg.method = Method::PlanarUnmanaged;
    return cfg;
}

// A two-thread shared hand-off with an optional missing barrier.
KernelIR race_ir(bool with_barrier) {
    KernelIR ir;
    ElementConfig cfg = small_planar(1, 64, Precision::fp32);
    ir.meta.cfg = cfg;
    ir.meta.shared_bytes = 4096;
    ir.meta.num_regs = 4;
    Instr st;
    st.op = Op::StoreShared;
    st.addr = Addr{}.add(SYM_TID, 1);  // word = tid
    st.a = Opnd::r(0);
    st.guarded = true;
    Instr ld;
    ld.op = Op::LoadShared;
    ld.dst = 1;
    ld.addr = Addr{}.add(SYM_TID, 1).add(SYM_CONST, 1);  // word = tid+1: the neighbour's word
    ld.guarded = true;
    Instr init;
    init.op = Op::Mov;
    init.dst = 0;
    init.a = Opnd::i(2.0);
    Instr bar;
    bar.op = Op::Barrier;
    ir.code.push_back(init);
    ir.code.push_back(st);
    if (with_barrier) ir.code.push_back(bar);
    ir.code.push_back(ld);
    return ir;
}

} // namespace

TEST_CASE("empty IR leaves the output untouched and counts nothing") {
    ElementConfig cfg = small_planar(1, 8, Precision::fp32);
    KernelIR ir;
    ir.meta.cfg = cfg;
    ir.meta.num_regs = 1;
    StateField f = random_field(cfg, 1);
    ExecResult r = execute(ir, f, grid_for(ir));
    for (double x : r.output.data) CHECK(x == 0.0);
    CHECK(r.report.global_read_words == 0);
    CHECK(r.report.global_write_words == 0);
    CHECK(r.report.shared_transactions == 0);
    CHECK(r.report.arithmetic_issues == 0);
    CHECK(r.report.race_flags.empty());
}

TEST_CASE("planar p=1 traffic counts and oracle match") {
    PhysParams par{1e-3, 2.5, 1.0};
    ElementConfig cfg = small_planar(1, 8, Precision::fp32);
    KernelIR ir = generate_planar(cfg, OptionSet{}, par, {1, 1, 1}, false);
    StateField f = random_field(cfg, 17);
    ExecResult r = execute(ir, f, grid_for(ir));
    StateField ref = oracle_divergence(f, par, {1, 1, 1}, false);
    CHECK(field_rel_error(r.output, ref) <= 1e-6);
    const std::int64_t pts = 8LL * cfg.n_points();
    CHECK(r.report.global_read_words == 13 * (cfg.p + 2) * pts);
    CHECK(r.report.global_write_words == 13 * pts);
    CHECK(r.report.global_write_words_distinct == 13 * pts);
}

TEST_CASE("deliberate race is flagged with both instructions") {
    KernelIR bad = race_ir(false);
    StateField f = random_field(bad.meta.cfg, 1);
    ExecResult r = execute(bad, f, grid_for(bad));
    REQUIRE_FALSE(r.report.race_flags.empty());
    CHECK(r.report.race_flags[0].first_instr == 1);   // the store
    CHECK(r.report.race_flags[0].second_instr == 2);  // the load
    KernelIR good = race_ir(true);
    ExecResult rg = execute(good, f, grid_for(good));
    CHECK(rg.report.race_flags.empty());
}

TEST_CASE("detect_races rule on synthetic traces") {
    SUBCASE("write then read across epochs is clean") {
        CHECK(detect_races({{true, 0, 5, 0, 1}, {false, 1, 5, 1, 2}}).empty());
    }
    SUBCASE("cross-thread same-epoch read is a race") {
        auto races = detect_races({{true, 0, 5, 0, 1}, {false, 1, 5, 0, 2}});
        REQUIRE(races.size() == 1);
        CHECK(races[0].first_instr == 1);
        CHECK(races[0].second_instr == 2);
        CHECK(races[0].word == 5);
    }
    SUBCASE("same-thread write then read in one epoch is program order") {
        CHECK(detect_races({{true, 3, 5, 0, 1}, {false, 3, 5, 0, 2}}).empty());
    }
    SUBCASE("read before a cross-thread write in one epoch is also a race") {
        auto races = detect_races({{false, 0, 5, 2, 1}, {true, 1, 5, 2, 2}});
        REQUIRE(races.size() == 1);
    }
    SUBCASE("write-write collisions count") {
        CHECK(detect_races({{true, 0, 5, 1, 1}, {true, 1, 5, 1, 2}}).size() == 1);
        CHECK(detect_races({{true, 0, 5, 1, 1}, {true, 0, 5, 1, 2}}).empty());
    }
}

TEST_CASE("modeled cycles: quoted latencies") {
    SimReport r;
    r.global_transactions = 1;
    CHECK(modeled_cycles(r) == 193);
    SimReport s;
    s.shared_transactions = 1;
    s.arithmetic_issues = 1;
    CHECK(modeled_cycles(s) == 23);
}

TEST_CASE("fused kernel is modeled strictly faster than the unfused pipeline") {
    PhysParams par{1e-3, 2.5, 1.0};
    ElementConfig cfg = small_planar(3, 16, Precision::fp32);
    KernelIR ir = generate_planar(cfg, OptionSet{}, par, {1, 1, 1}, false);
    StateField f = random_field(cfg, 3);
    ExecResult r = execute(ir, f, grid_for(ir));
    // Unfused pipeline model: the same arithmetic, stage-2+3 word traffic at
    // the same 32-byte sector width, no shared stage.
    const std::int64_t pts = 16LL * cfg.n_points();
    const std::int64_t unfused_words = io_model(3, {Stage::S2, Stage::S3}).total() * pts;
    const std::int64_t words_per_sector = 32 / cfg.wordsize();
    SimReport unfused;
    unfused.global_transactions = unfused_words / words_per_sector;
    unfused.arithmetic_issues = r.report.arithmetic_issues;
    CHECK(modeled_cycles(r.report) < modeled_cycles(unfused));
}

TEST_CASE("determinism: identical runs produce identical bits") {
    PhysParams par{1e-3, 2.5, 1.0};
    ElementConfig cfg = small_planar(2, 12, Precision::fp32);
    cfg.method = Method::PlanarManaged;
    KernelIR ir = generate_planar_managed(cfg, OptionSet{}, planar_min_shared_bytes(cfg), par, {1, 1, 1}, true);
    StateField f = random_field(cfg, 21);
    ExecResult a = execute(ir, f, grid_for(ir));
    ExecResult b = execute(ir, f, grid_for(ir));
    REQUIRE(a.output.data.size() == b.output.data.size());
    CHECK(std::memcmp(a.output.data.data(), b.output.data.data(),
                      a.output.data.size() * sizeof(double)) == 0);
    CHECK(a.report.global_read_words == b.report.global_read_words);
    CHECK(a.report.shared_transactions == b.report.shared_transactions);
    CHECK(modeled_cycles(a.report) == modeled_cycles(b.report));
}

TEST_CASE("verify(): pass, mutation failure, missing-barrier race") {
    PhysParams par{1e-3, 2.5, 1.0};
    ElementConfig cfg = small_planar(2, 16, Precision::fp32);
    KernelIR ir = generate_planar(cfg, OptionSet{}, par, {1, 1, 1}, false);
    SUBCASE("correct kernel passes") {
        KernelVerdict v = verify_kernel(ir, 3, 5);
        CHECK(v.pass);
        CHECK(v.tgv_included);
        CHECK(v.races == 0);
        CHECK(v.ratio_exact_4);
    }
    SUBCASE("a flipped operator constant fails with order-one error") {
        KernelIR bad = ir;
        bad.meta.constants.signed_index[1] = -bad.meta.constants.signed_index[1];
        KernelVerdict v = verify_kernel(bad, 2, 5);
        CHECK_FALSE(v.pass);
        CHECK(v.max_rel_error > 1e-2);
    }
    SUBCASE("a removed barrier fails with a race flag") {
        KernelIR bad = ir;
        std::size_t bar = 0;
        for (std::size_t i = 0; i < bad.code.size(); ++i)
            if (bad.code[i].op == Op::Barrier) { bar = i; break; }
        bad.code.erase(bad.code.begin() + static_cast<std::ptrdiff_t>(bar));
        KernelVerdict v = verify_kernel(bad, 1, 5);
        CHECK_FALSE(v.pass);
        CHECK(v.races > 0);
    }
}

TEST_CASE("out-of-bounds shared access names the instruction") {
    ElementConfig cfg = small_planar(1, 4, Precision::fp32);
    KernelIR ir;
    ir.meta.cfg = cfg;
    ir.meta.shared_bytes = 64;
    ir.meta.num_regs = 2;
    Instr init;
    init.op = Op::Mov;
    init.dst = 0;
    init.a = Opnd::i(1.0);
    Instr st;
    st.op = Op::StoreShared;
    st.addr = Addr::constant(4096);
    st.a = Opnd::r(0);
    st.guarded = true;
    ir.code = {init, st};
    StateField f = random_field(cfg, 2);
    CHECK_THROWS_WITH_AS(execute(ir, f, grid_for(ir)),
                         doctest::Contains("instruction 1"), std::runtime_error);
}

TEST_CASE("SimGrid validation") {
    SimGrid g;
    g.threads_per_block = 2048;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    g.threads_per_block = 128;
    g.shared_bytes = 100 * 1024;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}
