#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hexfuse/presets.hpp"
#include "hexfuse/render.hpp"
#include "hexfuse/verify.hpp"

namespace hexfuse {

namespace cli {

inline std::int64_t parse_smem(const std::string& s) {
    std::string t = s;
    double scale = 1.0;
    const auto kib = t.find("KiB");
    if (kib != std::string::npos) {
        scale = 1024.0;
        t = t.substr(0, kib);
    }
    std::size_t pos = 0;
    const double v = std::stod(t, &pos);
    if (pos != t.size()) throw CLI::ValidationError("--smem", "cannot parse byte count: " + s);
    return static_cast<std::int64_t>(v * scale + 0.5);
}

struct CommonFlags {
    std::string preset;
    std::string method = "planar";
    int p = 3;
    int d = 3;
    std::string precision = "fp32";
    int block = 0;
    std::string smem;
    int vars = 25;
    std::string opts;
    bool fuse_source = false;
    int elems = 256;
    bool paper_scale = false;
    std::uint64_t seed = 7;
    std::string out_dir = ".";
    std::string format = "json";
    int trials = 10;
    double nu = 6.25e-4, zeta = 2.5, T = 1.0;

    void attach(CLI::App* cmd, bool with_trials) {
        cmd->add_option("--preset", preset, "named kernel configuration");
        cmd->add_option("--method", method)->check(CLI::IsMember({"planar", "planar-managed", "lines"}));
        cmd->add_option("--p", p)->check(CLI::Range(1, 6));
        cmd->add_option("--d", d)->check(CLI::IsMember({3}));
        cmd->add_option("--precision", precision)->check(CLI::IsMember({"fp32", "fp64"}));
        cmd->add_option("--block", block, "threads per block");
        cmd->add_option("--smem", smem, "shared bytes, plain or with KiB suffix");
        cmd->add_option("--vars", vars)->check(CLI::IsMember({25, 24, 18, 15, 12}));
        cmd->add_option("--opts", opts,
                        "comma list: reg-overlap,deconflict,cmem,grs,gsr,load-hints,store-hints,"
                        "interleave,agglomerate");
        cmd->add_flag("--fuse-source", fuse_source, "fuse the relaxation source term");
        cmd->add_option("--elems", elems, "element count");
        cmd->add_flag("--paper-scale", paper_scale, "verify on 1024x32 elements");
        cmd->add_option("--seed", seed);
        cmd->add_option("--out", out_dir);
        cmd->add_option("--format", format)->check(CLI::IsMember({"json", "csv"}));
        cmd->add_option("--nu", nu);
        cmd->add_option("--zeta", zeta);
        cmd->add_option("--T", T);
        if (with_trials) cmd->add_option("--trials", trials)->check(CLI::Range(1, 1000));
    }

    OptionSet parse_opts() const {
        if (opts.empty()) return OptionSet{};  // shipped default: case 13
        OptionSet o;
        o.register_overlap = o.deconflict = o.cmem_constants = o.load_hints = o.store_hints = false;
        o.interleave_asap = o.agglomerate = false;
        o.grs = false;
        std::stringstream ss(opts);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (tok == "reg-overlap") o.register_overlap = true;
            else if (tok == "deconflict") o.deconflict = true;
            else if (tok == "cmem") o.cmem_constants = true;
            else if (tok == "grs") o.grs = true;
            else if (tok == "gsr") o.grs = false;
            else if (tok == "load-hints") o.load_hints = true;
            else if (tok == "store-hints") o.store_hints = true;
            else if (tok == "interleave") o.interleave_asap = true;
            else if (tok == "agglomerate") o.agglomerate = true;
            else throw CLI::ValidationError("--opts", "unknown option token: " + tok);
        }
        o.validate();
        return o;
    }

    KernelRequest request() const {
        KernelRequest r;
        if (!preset.empty()) {
            r = KernelRequest::from_preset(find_preset(preset), elems);
        } else {
            r.method = method == "lines"            ? Method::Lines
                       : method == "planar-managed" ? Method::PlanarManaged
                                                    : Method::PlanarUnmanaged;
            r.p = p;
            r.precision = precision_from_string(precision);
            r.lines_vars = vars;
            r.n_elem = elems;
            r.fuse_source = fuse_source;
            if (r.method == Method::Lines)
                r.block_threads = default_lines_n(r.p, r.lines_vars, r.precision) * (r.p + 1) * (r.p + 1);
            else
                r.block_threads = 128;
        }
        if (block > 0) r.block_threads = block;
        if (!smem.empty()) r.smem_bytes = parse_smem(smem);
        if (!opts.empty()) r.opts = parse_opts();
        if (fuse_source) r.fuse_source = true;
        if (paper_scale) r.n_elem = 1024 * 32;
        else if (preset.empty() || elems != 256) r.n_elem = elems;
        r.params = PhysParams{nu, zeta, T};
        return r;
    }
};

inline int cmd_generate(const CommonFlags& f) {
    const KernelRequest req = f.request();
    const KernelIR ir = generate_kernel(req);
    namespace fs = std::filesystem;
    fs::create_directories(f.out_dir);
    const fs::path base = fs::path(f.out_dir) / ir.meta.name;
    {
        std::ofstream cu(base.string() + ".cu");
        cu << render_source(ir);
    }
    {
        std::ofstream js(base.string() + ".ir.json");
        js << ir_to_json(ir).dump(1) << "\n";
    }
    {
        std::ofstream log(base.string() + ".log");
        log << "kernel " << ir.meta.name << "\n"
            << "method " << to_string(ir.meta.cfg.method) << "\n"
            << "p " << ir.meta.cfg.p << "\n"
            << "precision " << to_string(ir.meta.cfg.precision) << "\n"
            << "block_threads " << ir.meta.cfg.block_threads << "\n"
            << "shared_bytes " << ir.meta.shared_bytes << "\n"
            << "lines_vars " << ir.meta.opts.lines_vars << "\n"
            << "fuse_source " << (ir.meta.fuse_source ? 1 : 0) << "\n"
            << "instructions " << ir.code.size() << "\n"
            << "register_pressure " << register_pressure(ir) << "\n";
    }
    if (!ir.meta.manager_trace.empty()) {
        std::ofstream tr(base.string() + ".trace.jsonl");
        tr << ir.meta.manager_trace;
    }
    std::cout << "generated " << base.string() << ".cu (" << ir.code.size() << " instructions, "
              << ir.meta.shared_bytes << " shared bytes, block " << ir.meta.cfg.block_threads << ")\n";
    return 0;
}

inline int cmd_verify(const CommonFlags& f, const std::string& field_path, const std::string& dump_field) {
    const KernelRequest req = f.request();
    const KernelIR ir = generate_kernel(req);
    KernelVerdict v;
    if (!field_path.empty()) {
        StateField field = import_blob(field_path);
        ExecResult r = execute(ir, field, grid_for(ir));
        const StateField ref = oracle_divergence(field, ir.meta.params, ir.meta.jac, ir.meta.fuse_source);
        v.tolerance = verify_tolerance(ir.meta.cfg.precision);
        v.max_rel_error = field_rel_error(r.output, ref);
        v.races = r.report.race_flags.size();
        v.sample_report = r.report;
        v.trials = 1;
        v.pass = v.max_rel_error <= v.tolerance && v.races == 0;
    } else {
        v = verify_kernel(ir, f.trials, f.seed);
    }
    if (!dump_field.empty()) {
        TgvGrid g3;
        g3.elems = factor3(ir.meta.cfg.n_elem);
        export_blob(tgv_field(ir.meta.cfg, g3, 1.4, 0.08, true), dump_field);
    }
    if (f.format == "json") std::cout << verdict_to_json(v).dump(1) << "\n";
    std::fprintf(stdout, "%s %s: max rel error %.3e (tol %.0e), races %zu, modeled I/O ratio %.4f\n",
                 v.pass ? "PASS" : "FAIL", ir.meta.name.c_str(), v.max_rel_error, v.tolerance, v.races,
                 v.counted_io_ratio);
    return v.pass ? 0 : 1;
}

inline const char* kSweepHeader =
    "axis,value,method,p,precision,block,smem_bytes,vars,opts_case,verdict,max_rel_error,races,"
    "io_ratio,global_read_words,global_write_words,global_transactions,shared_transactions,"
    "bank_conflict_extra,arith_issues,modeled_cycles,register_pressure\n";

inline void sweep_row(std::ostream& os, const std::string& axis, const std::string& value,
                      const KernelRequest& req, int opts_case, std::uint64_t seed) {
    const KernelIR ir = generate_kernel(req);
    const KernelVerdict v = verify_kernel(ir, 1, seed);
    os << axis << "," << value << "," << to_string(ir.meta.cfg.method) << "," << ir.meta.cfg.p << ","
       << to_string(ir.meta.cfg.precision) << "," << ir.meta.cfg.block_threads << ","
       << ir.meta.shared_bytes << "," << ir.meta.opts.lines_vars << "," << opts_case << ","
       << (v.pass ? "PASS" : "FAIL") << "," << v.max_rel_error << "," << v.races << ","
       << v.counted_io_ratio << "," << v.sample_report.global_read_words << ","
       << v.sample_report.global_write_words << "," << v.sample_report.global_transactions << ","
       << v.sample_report.shared_transactions << "," << v.sample_report.bank_conflict_extra_transactions
       << "," << v.sample_report.arithmetic_issues << "," << modeled_cycles(v.sample_report) << ","
       << register_pressure(ir) << "\n";
}

inline int cmd_sweep(const CommonFlags& f, const std::string& axis, const std::string& csv_path) {
    std::ostringstream os;
    os << kSweepHeader;
    const KernelRequest base = f.request();
    if (axis == "opts-case") {
        for (int c = 0; c <= 17; ++c) {
            KernelRequest req = base;
            if (req.method == Method::PlanarUnmanaged) req.method = Method::PlanarManaged;
            req.opts = opt_case(c);
            sweep_row(os, axis, std::to_string(c), req, c, f.seed);
        }
    } else if (axis == "vars" || axis == "var_config") {
        for (int vc : {25, 24, 18, 15, 12}) {
            KernelRequest req = base;
            req.method = Method::Lines;
            req.lines_vars = vc;
            req.block_threads = default_lines_n(req.p, vc, req.precision) * (req.p + 1) * (req.p + 1);
            sweep_row(os, axis, std::to_string(vc), req, -1, f.seed);
        }
    } else if (axis == "smem") {
        if (base.method == Method::Lines) {
            const int m = base.p + 1;
            for (int n = 1; n * m * m <= 1024; ++n) {
                const std::int64_t foot =
                    static_cast<std::int64_t>(n) * ipow(m, 3) * base.lines_vars * word_bytes(base.precision);
                if (foot > kMaxSharedBytes) break;
                KernelRequest req = base;
                req.block_threads = n * m * m;
                sweep_row(os, axis, std::to_string(foot), req, -1, f.seed);
            }
        } else {
            KernelRequest req = base;
            req.method = Method::PlanarManaged;
            const std::int64_t min = planar_min_shared_bytes(req.config());
            const std::int64_t step = static_cast<std::int64_t>(req.config().block_threads) *
                                      word_bytes(req.precision) * n_vars(3);
            for (std::int64_t s = min; s <= kMaxSharedBytes; s += step) {
                req.smem_bytes = s;
                sweep_row(os, axis, std::to_string(s), req, -1, f.seed);
            }
        }
    } else if (axis == "block") {
        for (int blk = 32; blk <= 1024; blk += 32) {
            KernelRequest req = base;
            if (req.method == Method::Lines) continue;
            req.block_threads = blk;
            if (req.method == Method::PlanarManaged) {
                req.smem_bytes = 0;  // minimum for the block size
                if (planar_min_shared_bytes(req.config()) > kMaxSharedBytes) break;
            } else if (PlanarPlaneLayout::natural(req.config().elems_per_block(), req.p + 1, n_vars(3),
                                                  req.config().planar_elems_per_warp(),
                                                  word_bytes(req.precision))
                           .size_bytes() > kMaxSharedBytes) {
                break;
            }
            sweep_row(os, axis, std::to_string(blk), req, -1, f.seed);
        }
    } else {
        throw CLI::ValidationError("--axis", "axis must be one of smem, block, vars, opts-case");
    }
    if (csv_path.empty() || csv_path == "-") {
        std::cout << os.str();
    } else {
        std::filesystem::create_directories(std::filesystem::path(csv_path).parent_path().string().empty()
                                                ? "."
                                                : std::filesystem::path(csv_path).parent_path().string());
        std::ofstream out(csv_path);
        out << os.str();
        std::cout << "wrote " << csv_path << "\n";
    }
    return 0;
}

inline int cmd_report(const CommonFlags& f) {
    const KernelRequest req = f.request();
    const KernelIR ir = generate_kernel(req);
    nlohmann::json j;
    j["kernel"] = ir.meta.name;
    j["method"] = to_string(ir.meta.cfg.method);
    j["p"] = ir.meta.cfg.p;
    j["precision"] = to_string(ir.meta.cfg.precision);
    j["block_threads"] = ir.meta.cfg.block_threads;
    j["shared_bytes"] = ir.meta.shared_bytes;
    j["instructions"] = ir.code.size();
    j["register_pressure"] = register_pressure(ir);
    const DataIO s23 = io_model(3, {Stage::S2, Stage::S3});
    const DataIO s236 = io_model(3, {Stage::S2, Stage::S3, Stage::S6});
    const DataIO fused = io_model(3, {ir.meta.fuse_source ? Stage::Fused236 : Stage::Fused23});
    j["io_model"] = {{"stage23_words_per_point", s23.total()},
                     {"stage236_words_per_point", s236.total()},
                     {"fused_words_per_point", fused.total()},
                     {"ratio_stage23", speedup_estimate(s23, fused)},
                     {"ratio_stage236", speedup_estimate(s236, fused)}};
    int counts[16] = {};
    for (const auto& in : ir.code) ++counts[static_cast<int>(in.op)];
    nlohmann::json ops;
    for (int op = 0; op <= static_cast<int>(Op::LoopEnd); ++op)
        if (counts[op]) ops[to_string(static_cast<Op>(op))] = counts[op];
    j["opcounts"] = ops;
    std::cout << j.dump(1) << "\n";
    return 0;
}

} // namespace cli

/// Entry point shared by the binary and the tests. Returns the process exit
/// code: 0 success, 1 verification failure, 2 usage error.
inline int run_cli(std::vector<std::string> args) {
    CLI::App app{"fused flux-divergence kernel generator and virtual-block verifier"};
    app.require_subcommand(1);

    cli::CommonFlags gen_f, ver_f, swp_f, rep_f;
    std::string field_path, dump_field, sweep_axis = "opts-case", csv_path;

    auto* gen = app.add_subcommand("generate", "emit kernel source, IR JSON and a generation log");
    gen_f.attach(gen, false);
    auto* ver = app.add_subcommand("verify", "execute on the virtual block executor against the reference");
    ver_f.attach(ver, true);
    ver->add_option("--field", field_path, "verify on an imported state blob");
    ver->add_option("--dump-field", dump_field, "export the vortex fixture blob");
    auto* swp = app.add_subcommand("sweep", "verify a family of configurations, one CSV row each");
    swp_f.attach(swp, false);
    swp->add_option("--axis", sweep_axis)->check(CLI::IsMember({"smem", "block", "vars", "opts-case"}));
    swp->add_option("--csv", csv_path, "output CSV path (default stdout)");
    auto* rep = app.add_subcommand("report", "print kernel metrics and the I/O model");
    rep_f.attach(rep, false);

    try {
        std::reverse(args.begin(), args.end());  // CLI11's vector overload wants reversed argv
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) return cli::cmd_generate(gen_f);
        if (ver->parsed()) return cli::cmd_verify(ver_f, field_path, dump_field);
        if (swp->parsed()) return cli::cmd_sweep(swp_f, sweep_axis, csv_path);
        if (rep->parsed()) return cli::cmd_report(rep_f);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

} // namespace hexfuse
