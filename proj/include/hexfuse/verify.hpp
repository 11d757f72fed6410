#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hexfuse/io_model.hpp"
#include "hexfuse/oracle.hpp"
#include "hexfuse/simulator.hpp"

namespace hexfuse {

/// max |a-b| scaled by the larger of 1 and the reference magnitude, over the
/// real (non-padding) elements.
inline double field_rel_error(const StateField& got, const StateField& ref) {
    double maxdiff = 0.0, maxref = 0.0;
    const int mk = (ref.d == 3) ? ref.m() : 1;
    for (int e = 0; e < ref.n_elem; ++e)
        for (int k = 0; k < mk; ++k)
            for (int j = 0; j < ref.m(); ++j)
                for (int i = 0; i < ref.m(); ++i)
                    for (int v = 0; v < ref.nv(); ++v) {
                        const double r = ref.at(e, i, j, k, v);
                        const double d = std::fabs(got.at(e, i, j, k, v) - r);
                        maxdiff = std::max(maxdiff, d);
                        maxref = std::max(maxref, std::fabs(r));
                    }
    return maxdiff / std::max(1.0, maxref);
}

inline double verify_tolerance(Precision p) { return p == Precision::fp32 ? 1e-5 : 1e-11; }

struct KernelVerdict {
    bool pass = false;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    int trials = 0;
    bool tgv_included = false;
    std::size_t races = 0;
    SimReport sample_report;     // one representative run
    double counted_io_ratio = 0.0;  // unfused model words / counted distinct words
    bool ratio_exact_4 = false;     // stage-2+3 model vs counted traffic, exact integers
    std::string detail;
};

inline nlohmann::json verdict_to_json(const KernelVerdict& v) {
    return {{"pass", v.pass},
            {"max_rel_error", v.max_rel_error},
            {"tolerance", v.tolerance},
            {"trials", v.trials},
            {"tgv_included", v.tgv_included},
            {"races", v.races},
            {"counted_io_ratio", v.counted_io_ratio},
            {"ratio_exact_4", v.ratio_exact_4},
            {"report", report_to_json(v.sample_report)},
            {"detail", v.detail}};
}

/// Runs the kernel on seeded random fields plus the vortex fixture and
/// compares against the reference divergence. PASS needs the per-precision
/// tolerance and zero races.
inline KernelVerdict verify_kernel(const KernelIR& ir, int trials, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("verify_kernel: trials must be >= 1");
    const ElementConfig& cfg = ir.meta.cfg;
    KernelVerdict v;
    v.tolerance = verify_tolerance(cfg.precision);
    v.trials = trials;
    const SimGrid grid = grid_for(ir);

    auto run_one = [&](const StateField& f, bool keep_report) {
        ExecResult r = execute(ir, f, grid);
        const StateField ref = oracle_divergence(f, ir.meta.params, ir.meta.jac, ir.meta.fuse_source);
        v.max_rel_error = std::max(v.max_rel_error, field_rel_error(r.output, ref));
        v.races += r.report.race_flags.size();
        if (keep_report) v.sample_report = r.report;
    };

    for (int t = 0; t < trials; ++t) run_one(random_field(cfg, seed + static_cast<std::uint64_t>(t)), t == 0);

    // Deterministic vortex fixture on unit-metric elements.
    if (ir.meta.jac == std::array<double, 3>{1.0, 1.0, 1.0} && cfg.d == 3) {
        TgvGrid grid3;
        grid3.elems = factor3(cfg.n_elem);
        grid3.width = {2.0, 2.0, 2.0};
        run_one(tgv_field(cfg, grid3, 1.4, 0.08, true), false);
        v.tgv_included = true;
    }

    // Counted distinct traffic against the unfused stage model.
    const std::int64_t points = static_cast<std::int64_t>(cfg.n_elem) * cfg.n_points();
    const std::int64_t counted =
        v.sample_report.global_read_words_distinct + v.sample_report.global_write_words_distinct;
    const std::vector<Stage> stages = ir.meta.fuse_source ? std::vector<Stage>{Stage::S2, Stage::S3, Stage::S6}
                                                          : std::vector<Stage>{Stage::S2, Stage::S3};
    const DataIO unfused = io_model(cfg.d, stages);
    if (counted > 0) {
        v.counted_io_ratio = static_cast<double>(unfused.total() * points) / static_cast<double>(counted);
        const DataIO stage23 = io_model(cfg.d, {Stage::S2, Stage::S3});
        v.ratio_exact_4 = (stage23.total() * points == 4 * counted) && !ir.meta.fuse_source;
    }
    v.sample_report.modeled_speedup_vs_unfused = v.counted_io_ratio;

    v.pass = (v.max_rel_error <= v.tolerance) && v.races == 0;
    v.detail = "max_rel_error=" + std::to_string(v.max_rel_error) + " tol=" + std::to_string(v.tolerance) +
               " races=" + std::to_string(v.races);
    return v;
}

} // namespace hexfuse
