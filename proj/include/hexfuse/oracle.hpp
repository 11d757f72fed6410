#pragma once

#include <array>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "hexfuse/core.hpp"
#include "hexfuse/equations.hpp"
#include "hexfuse/layout.hpp"
#include "hexfuse/operators.hpp"

namespace hexfuse {

/// Reference fused result: for every point, the negated tensor-product flux
/// divergence with constant per-axis metric scalars, optionally plus the
/// relaxation source. Interface corrections are excluded; this is the
/// internal, partially corrected divergence only.
inline StateField oracle_divergence(const StateField& U, const PhysParams& params,
                                    const std::array<double, 3>& jac, bool with_source) {
    params.validate();
    const int d = U.d, m = U.m(), nv = U.nv();
    const Matrix D = derivative_matrix(gauss_legendre_points(m));

    StateField out = U;
    for (auto& x : out.data) x = 0.0;

    std::vector<FluxTensor> line(static_cast<std::size_t>(m), FluxTensor(d));
    for (int e = 0; e < U.n_elem; ++e) {
        const int mk = (d == 3) ? m : 1;
        for (int k = 0; k < mk; ++k)
            for (int j = 0; j < m; ++j)
                for (int i = 0; i < m; ++i) {
                    std::vector<double> acc(static_cast<std::size_t>(nv), 0.0);
                    for (int axis = 0; axis < d; ++axis) {
                        const int row = (axis == 0) ? i : (axis == 1) ? j : k;
                        for (int t = 0; t < m; ++t) {
                            const int ii = (axis == 0) ? t : i;
                            const int jj = (axis == 1) ? t : j;
                            const int kk = (axis == 2) ? t : k;
                            line[static_cast<std::size_t>(t)] = flux(U.state_at(e, ii, jj, kk), params);
                        }
                        for (int v = 0; v < nv; ++v) {
                            if (!flux_structural_nonzero(d, axis, v)) continue;
                            double s = 0.0;
                            for (int t = 0; t < m; ++t) s += D(row, t) * line[static_cast<std::size_t>(t)](axis, v);
                            acc[static_cast<std::size_t>(v)] += jac[static_cast<std::size_t>(axis)] * s;
                        }
                    }
                    AcmHdState st = U.state_at(e, i, j, k);
                    SourceVector src;
                    if (with_source) src = source(st, params);
                    for (int v = 0; v < nv; ++v) {
                        double o = -acc[static_cast<std::size_t>(v)];
                        if (with_source) o += src[static_cast<std::size_t>(v)];
                        out.at(e, i, j, k, v) = o;
                    }
                }
    }
    return out;
}

/// Taylor-Green vortex state at a physical point.
inline AcmHdState tgv_point(double x, double y, double z, double gamma, double mach) {
    AcmHdState s(3);
    s.pressure() = 1.0 / (gamma * mach * mach) +
                   (1.0 / 16.0) * std::cos(2.0 * z + 2.0) * (std::cos(2.0 * x) + std::cos(2.0 * y));
    s.vel(0) = std::sin(x) * std::cos(y) * std::cos(z);
    s.vel(1) = -std::cos(x) * std::sin(y) * std::cos(z);
    s.vel(2) = 0.0;
    // du
    s.grad(0, 0) = std::cos(x) * std::cos(y) * std::cos(z);
    s.grad(0, 1) = -std::sin(x) * std::sin(y) * std::cos(z);
    s.grad(0, 2) = -std::sin(x) * std::cos(y) * std::sin(z);
    // dv
    s.grad(1, 0) = std::sin(x) * std::sin(y) * std::cos(z);
    s.grad(1, 1) = -std::cos(x) * std::cos(y) * std::cos(z);
    s.grad(1, 2) = std::cos(x) * std::sin(y) * std::sin(z);
    // dw
    s.grad(2, 0) = s.grad(2, 1) = s.grad(2, 2) = 0.0;
    return s;
}

struct TgvGrid {
    std::array<int, 3> elems{1, 1, 1};       // elements per axis
    std::array<double, 3> origin{0, 0, 0};   // domain corner
    std::array<double, 3> width{2, 2, 2};    // element widths
    std::array<double, 3> jac() const { return {2.0 / width[0], 2.0 / width[1], 2.0 / width[2]}; }
    int n_elem() const { return elems[0] * elems[1] * elems[2]; }
};

/// Near-cubic factorisation of an element count into per-axis counts.
inline std::array<int, 3> factor3(int n) {
    std::array<int, 3> best{n, 1, 1};
    long best_score = 1L << 60;
    for (int a = 1; a <= n; ++a) {
        if (n % a) continue;
        const int bc = n / a;
        for (int b = 1; b <= bc; ++b) {
            if (bc % b) continue;
            const int c = bc / b;
            std::array<int, 3> f{a, b, c};
            const long score = static_cast<long>(std::max({a, b, c})) - std::min({a, b, c});
            if (score < best_score) { best_score = score; best = f; }
        }
    }
    if (best[0] < best[2]) std::swap(best[0], best[2]);
    return best;
}

/// Fills a d=3 field with the vortex initial condition; gradients are the
/// exact analytic derivatives. With zero_mean_pressure the constant
/// 1/(gamma*M^2) offset is dropped (the incompressible pressure gauge), which
/// keeps single-precision verification away from large constant offsets.
inline StateField tgv_field(const ElementConfig& cfg, const TgvGrid& grid, double gamma, double mach,
                            bool zero_mean_pressure) {
    if (cfg.d != 3) throw std::invalid_argument("tgv_field: d must be 3");
    if (grid.n_elem() != cfg.n_elem) throw std::invalid_argument("tgv_field: grid element count mismatch");
    const int m = cfg.m();
    const std::vector<double> nodes = gauss_legendre_points(m);
    StateField f = StateField::like(cfg);
    const double offset = zero_mean_pressure ? 1.0 / (gamma * mach * mach) : 0.0;

    for (int e = 0; e < cfg.n_elem; ++e) {
        const int ex = e % grid.elems[0];
        const int ey = (e / grid.elems[0]) % grid.elems[1];
        const int ez = e / (grid.elems[0] * grid.elems[1]);
        const std::array<int, 3> ecoord{ex, ey, ez};
        std::array<std::vector<double>, 3> coords;
        for (int a = 0; a < 3; ++a) {
            coords[static_cast<std::size_t>(a)].resize(static_cast<std::size_t>(m));
            const double lo = grid.origin[static_cast<std::size_t>(a)] +
                              grid.width[static_cast<std::size_t>(a)] * ecoord[static_cast<std::size_t>(a)];
            for (int t = 0; t < m; ++t)
                coords[static_cast<std::size_t>(a)][static_cast<std::size_t>(t)] =
                    lo + 0.5 * grid.width[static_cast<std::size_t>(a)] * (nodes[static_cast<std::size_t>(t)] + 1.0);
        }
        for (int k = 0; k < m; ++k)
            for (int j = 0; j < m; ++j)
                for (int i = 0; i < m; ++i) {
                    AcmHdState s = tgv_point(coords[0][static_cast<std::size_t>(i)],
                                             coords[1][static_cast<std::size_t>(j)],
                                             coords[2][static_cast<std::size_t>(k)], gamma, mach);
                    s.pressure() -= offset;
                    f.set_state(e, i, j, k, s);
                }
    }
    f.quantize();
    return f;
}

/// Seeded random field with every variable uniform in [-1, 1].
inline StateField random_field(const ElementConfig& cfg, std::uint64_t seed) {
    StateField f = StateField::like(cfg);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    const int mk = (cfg.d == 3) ? cfg.m() : 1;
    for (int e = 0; e < cfg.n_elem; ++e)
        for (int k = 0; k < mk; ++k)
            for (int j = 0; j < cfg.m(); ++j)
                for (int i = 0; i < cfg.m(); ++i)
                    for (int v = 0; v < cfg.nv(); ++v) f.at(e, i, j, k, v) = dist(rng);
    f.quantize();
    return f;
}

} // namespace hexfuse
