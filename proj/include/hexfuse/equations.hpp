#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "hexfuse/core.hpp"
#include "hexfuse/eig.hpp"

namespace hexfuse {

/// Physical parameters of the hyperbolised artificial-compressibility system.
struct PhysParams {
    double nu = 6.25e-4;  // kinematic viscosity
    double zeta = 2.5;    // artificial-compressibility parameter
    double T = 1.0;       // hyperbolic relaxation time

    void validate() const {
        if (nu < 0.0) throw std::invalid_argument("PhysParams: nu must be >= 0");
        if (zeta <= 0.0) throw std::invalid_argument("PhysParams: zeta must be > 0");
        if (T <= 0.0) throw std::invalid_argument("PhysParams: T must be > 0");
    }
};

/// Number of solved variables: pressure, d velocities, d^2 velocity gradients.
inline int n_vars(int d) {
    if (d != 2 && d != 3) throw std::invalid_argument("n_vars: dimension must be 2 or 3");
    return 1 + d + d * d;
}

// Variable ordering is fixed as P, velocity, then gradient rows (one row per
// velocity component); every other module indexes against this.
inline int var_pressure() { return 0; }
inline int var_velocity(int b) { return 1 + b; }
inline int var_gradient(int d, int b, int a) { return 1 + d + b * d + a; }

/// Solved state at one solution point.
struct AcmHdState {
    int d = 3;
    std::vector<double> v;  // length n_vars(d)

    AcmHdState() : v(static_cast<std::size_t>(n_vars(3)), 0.0) {}
    explicit AcmHdState(int dim) : d(dim), v(static_cast<std::size_t>(n_vars(dim)), 0.0) {}

    double pressure() const { return v[0]; }
    double vel(int b) const { return v[static_cast<std::size_t>(var_velocity(b))]; }
    double grad(int b, int a) const { return v[static_cast<std::size_t>(var_gradient(d, b, a))]; }

    double& pressure() { return v[0]; }
    double& vel(int b) { return v[static_cast<std::size_t>(var_velocity(b))]; }
    double& grad(int b, int a) { return v[static_cast<std::size_t>(var_gradient(d, b, a))]; }
};

/// Flux values for all variables in each coordinate direction; column a is
/// the flux in direction a.
struct FluxTensor {
    int d = 3;
    std::vector<double> col;  // [a * n_vars + row]

    explicit FluxTensor(int dim) : d(dim), col(static_cast<std::size_t>(dim) * n_vars(dim), 0.0) {}
    double operator()(int a, int row) const { return col[static_cast<std::size_t>(a) * n_vars(d) + row]; }
    double& operator()(int a, int row) { return col[static_cast<std::size_t>(a) * n_vars(d) + row]; }
};

using SourceVector = std::vector<double>;

/// Pointwise flux tensor. Direction-a column: [zeta*V_a; V_b*V_a + P*delta_ab
/// - nu*grad(b,a); -V_b/T on the (b,a) gradient slot, zero elsewhere].
inline FluxTensor flux(const AcmHdState& s, const PhysParams& p) {
    const int d = s.d;
    FluxTensor f(d);
    for (int a = 0; a < d; ++a) {
        f(a, var_pressure()) = p.zeta * s.vel(a);
        for (int b = 0; b < d; ++b) {
            double m = s.vel(b) * s.vel(a) - p.nu * s.grad(b, a);
            if (a == b) m += s.pressure();
            f(a, var_velocity(b)) = m;
            f(a, var_gradient(d, b, a)) = -s.vel(b) / p.T;
        }
    }
    return f;
}

/// Relaxation source: zero on pressure and velocity slots, -g/T on each
/// gradient slot.
inline SourceVector source(const AcmHdState& s, const PhysParams& p) {
    const int d = s.d;
    SourceVector out(static_cast<std::size_t>(n_vars(d)), 0.0);
    for (int b = 0; b < d; ++b)
        for (int a = 0; a < d; ++a)
            out[static_cast<std::size_t>(var_gradient(d, b, a))] = -s.grad(b, a) / p.T;
    return out;
}

/// Structural zero/nonzero pattern of the flux column in direction a.
inline bool flux_structural_nonzero(int d, int a, int row) {
    if (row == var_pressure()) return true;
    if (row >= 1 && row <= d) return true;
    for (int b = 0; b < d; ++b)
        if (row == var_gradient(d, b, a)) return true;
    return false;
}

/// Fraction of structurally zero entries in a flux column: 1 - (1+2d)/(1+d+d^2).
inline Fraction sparsity(int d) {
    const int nv = n_vars(d);
    return Fraction{static_cast<std::int64_t>(nv - (1 + 2 * d)), static_cast<std::int64_t>(nv)};
}

/// Analytic Jacobian of the directional flux dir.F at a state.
inline Matrix flux_jacobian(const AcmHdState& s, const PhysParams& p, const std::vector<double>& dir) {
    const int d = s.d;
    if (static_cast<int>(dir.size()) != d) throw std::invalid_argument("flux_jacobian: direction size mismatch");
    const int nv = n_vars(d);
    Matrix J(nv, nv);
    for (int a = 0; a < d; ++a) {
        const double da = dir[static_cast<std::size_t>(a)];
        if (da == 0.0) continue;
        J(var_pressure(), var_velocity(a)) += da * p.zeta;
        for (int b = 0; b < d; ++b) {
            J(var_velocity(b), var_velocity(b)) += da * s.vel(a);
            J(var_velocity(b), var_velocity(a)) += da * s.vel(b);
            J(var_velocity(b), var_gradient(d, b, a)) += da * -p.nu;
            if (a == b) J(var_velocity(b), var_pressure()) += da;
            J(var_gradient(d, b, a), var_velocity(b)) += da * (-1.0 / p.T);
        }
    }
    return J;
}

struct HyperbolicityReport {
    double max_abs_imag = 0.0;
    bool solver_ok = true;
    std::string diagnostic;
    double tolerance = 1e-8;
    int samples = 0;
    bool pass() const { return solver_ok && max_abs_imag < tolerance; }
};

/// Checks that the directional flux Jacobian has a real spectrum at each
/// sample state. The direction must have unit length.
inline HyperbolicityReport hyperbolicity_check(const PhysParams& p, const std::vector<double>& dir,
                                               const std::vector<AcmHdState>& states) {
    double len2 = 0.0;
    for (double c : dir) len2 += c * c;
    if (std::fabs(len2 - 1.0) > 1e-12)
        throw std::invalid_argument("hyperbolicity_check: direction must have unit length");

    HyperbolicityReport rep;
    for (const auto& s : states) {
        Matrix J = flux_jacobian(s, p, dir);
        try {
            for (const auto& ev : eigenvalues(J))
                rep.max_abs_imag = std::max(rep.max_abs_imag, std::fabs(ev.imag()));
        } catch (const std::exception& e) {
            rep.solver_ok = false;
            rep.diagnostic = e.what();
            return rep;
        }
        ++rep.samples;
    }
    return rep;
}

} // namespace hexfuse
