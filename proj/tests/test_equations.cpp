#include <doctest.h>

#include <cmath>
#include <random>

#include "hexfuse/equations.hpp"

using namespace hexfuse;

namespace {

// Literal per-entry transcription of the 3D flux bracket, kept independent of
// the library implementation. Variables: P,u,v,w,qx,qy,qz,rx,ry,rz,sx,sy,sz.
void flux3d_transcription(const double* U, double nu, double zeta, double T, double out[3][13]) {
    const double P = U[0], u = U[1], v = U[2], w = U[3];
    const double qx = U[4], qy = U[5], qz = U[6];
    const double rx = U[7], ry = U[8], rz = U[9];
    const double sx = U[10], sy = U[11], sz = U[12];
    for (int a = 0; a < 3; ++a)
        for (int r = 0; r < 13; ++r) out[a][r] = 0.0;
    // x column
    out[0][0] = zeta * u;
    out[0][1] = u * u + P - nu * qx;
    out[0][2] = u * v - nu * rx;
    out[0][3] = u * w - nu * sx;
    out[0][4] = -u / T;
    out[0][7] = -v / T;
    out[0][10] = -w / T;
    // y column
    out[1][0] = zeta * v;
    out[1][1] = u * v - nu * qy;
    out[1][2] = v * v + P - nu * ry;
    out[1][3] = v * w - nu * sy;
    out[1][5] = -u / T;
    out[1][8] = -v / T;
    out[1][11] = -w / T;
    // z column
    out[2][0] = zeta * w;
    out[2][1] = u * w - nu * qz;
    out[2][2] = v * w - nu * rz;
    out[2][3] = w * w + P - nu * sz;
    out[2][6] = -u / T;
    out[2][9] = -v / T;
    out[2][12] = -w / T;
}

AcmHdState random_state(int d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    AcmHdState s(d);
    for (auto& x : s.v) x = dist(rng);
    return s;
}

// Directional Jacobian by central differences; the flux is quadratic, so
// these are exact up to rounding.
Matrix fd_jacobian(const AcmHdState& s, const PhysParams& p, const std::vector<double>& dir) {
    const int nv = n_vars(s.d);
    Matrix J(nv, nv);
    const double h = 1e-5;
    for (int c = 0; c < nv; ++c) {
        AcmHdState hi = s, lo = s;
        hi.v[static_cast<std::size_t>(c)] += h;
        lo.v[static_cast<std::size_t>(c)] -= h;
        const FluxTensor fh = flux(hi, p), fl = flux(lo, p);
        for (int r = 0; r < nv; ++r) {
            double dh = 0.0, dl = 0.0;
            for (int a = 0; a < s.d; ++a) {
                dh += dir[static_cast<std::size_t>(a)] * fh(a, r);
                dl += dir[static_cast<std::size_t>(a)] * fl(a, r);
            }
            J(r, c) = (dh - dl) / (2.0 * h);
        }
    }
    return J;
}

} // namespace

TEST_CASE("n_vars per dimension") {
    CHECK(n_vars(3) == 13);
    CHECK(n_vars(2) == 7);
    CHECK_THROWS_AS(n_vars(1), std::invalid_argument);
    CHECK_THROWS_AS(n_vars(4), std::invalid_argument);
}

TEST_CASE("flux of the zero state is zero") {
    PhysParams p;
    for (int d : {2, 3}) {
        AcmHdState s(d);
        FluxTensor f = flux(s, p);
        for (int a = 0; a < d; ++a)
            for (int r = 0; r < n_vars(d); ++r) CHECK(f(a, r) == 0.0);
    }
}

TEST_CASE("2D pressure-only state hits the momentum diagonal") {
    PhysParams p;
    AcmHdState s(2);
    s.pressure() = 1.0;
    FluxTensor f = flux(s, p);
    const double x_col[7] = {0, 1, 0, 0, 0, 0, 0};
    const double y_col[7] = {0, 0, 1, 0, 0, 0, 0};
    for (int r = 0; r < 7; ++r) {
        CHECK(f(0, r) == doctest::Approx(x_col[r]));
        CHECK(f(1, r) == doctest::Approx(y_col[r]));
    }
}

TEST_CASE("3D flux matches the literal transcription on random states") {
    PhysParams p{1.7e-3, 2.5, 0.8};
    std::mt19937_64 rng(42);
    for (int t = 0; t < 50; ++t) {
        AcmHdState s = random_state(3, rng);
        FluxTensor f = flux(s, p);
        double ref[3][13];
        flux3d_transcription(s.v.data(), p.nu, p.zeta, p.T, ref);
        for (int a = 0; a < 3; ++a)
            for (int r = 0; r < 13; ++r) CHECK(f(a, r) == doctest::Approx(ref[a][r]).epsilon(1e-14));
    }
}

TEST_CASE("flux zero pattern is state independent") {
    PhysParams p{1e-2, 2.5, 1.0};
    std::mt19937_64 rng(7);
    for (int d : {2, 3}) {
        for (int t = 0; t < 1000; ++t) {
            AcmHdState s = random_state(d, rng);
            // keep entries away from zero so structural zeros are decisive
            for (auto& x : s.v) x = (x >= 0 ? x + 0.25 : x - 0.25);
            FluxTensor f = flux(s, p);
            for (int a = 0; a < d; ++a)
                for (int r = 0; r < n_vars(d); ++r) {
                    if (flux_structural_nonzero(d, a, r))
                        CHECK(f(a, r) != 0.0);
                    else
                        CHECK(f(a, r) == 0.0);
                }
        }
    }
}

TEST_CASE("source term") {
    PhysParams p;
    SUBCASE("zero gradients give the zero vector") {
        AcmHdState s(3);
        s.pressure() = 2.0;
        s.vel(0) = 1.0;
        for (double x : source(s, p)) CHECK(x == 0.0);
    }
    SUBCASE("d=3, T=1: q slots carry -q") {
        PhysParams p1{0.0, 2.5, 1.0};
        AcmHdState s(3);
        s.grad(0, 0) = 1.0;
        s.grad(0, 1) = 2.0;
        s.grad(0, 2) = 3.0;
        SourceVector src = source(s, p1);
        CHECK(src[4] == doctest::Approx(-1.0));
        CHECK(src[5] == doctest::Approx(-2.0));
        CHECK(src[6] == doctest::Approx(-3.0));
        for (int i : {0, 1, 2, 3, 7, 8, 9, 10, 11, 12}) CHECK(src[static_cast<std::size_t>(i)] == 0.0);
    }
    SUBCASE("d=2, T=0.5, qx=4 gives -8") {
        PhysParams p2{0.0, 2.5, 0.5};
        AcmHdState s(2);
        s.grad(0, 0) = 4.0;
        CHECK(source(s, p2)[3] == doctest::Approx(-8.0));
    }
    SUBCASE("linearity in the gradient block") {
        std::mt19937_64 rng(3);
        AcmHdState a = random_state(3, rng), b = random_state(3, rng);
        AcmHdState sum(3);
        for (int i = 0; i < 13; ++i)
            sum.v[static_cast<std::size_t>(i)] =
                a.v[static_cast<std::size_t>(i)] + b.v[static_cast<std::size_t>(i)];
        SourceVector sa = source(a, p), sb = source(b, p), ss = source(sum, p);
        for (int i = 0; i < 13; ++i)
            CHECK(ss[static_cast<std::size_t>(i)] ==
                  doctest::Approx(sa[static_cast<std::size_t>(i)] + sb[static_cast<std::size_t>(i)]));
    }
}

TEST_CASE("sparsity fractions") {
    CHECK(sparsity(3).num == 6);
    CHECK(sparsity(3).den == 13);
    CHECK(sparsity(2).num == 2);
    CHECK(sparsity(2).den == 7);
    CHECK(sparsity(3).value() == doctest::Approx(0.4615).epsilon(1e-3));

    // Brute-force count of structurally nonzero flux entries.
    PhysParams p{1e-3, 2.5, 1.0};
    std::mt19937_64 rng(11);
    for (int d : {2, 3}) {
        AcmHdState s = random_state(d, rng);
        for (auto& x : s.v) x = (x >= 0 ? x + 0.5 : x - 0.5);
        FluxTensor f = flux(s, p);
        int nonzero = 0;
        for (int a = 0; a < d; ++a)
            for (int r = 0; r < n_vars(d); ++r)
                if (f(a, r) != 0.0) ++nonzero;
        const Fraction sp = sparsity(d);
        const std::int64_t total = static_cast<std::int64_t>(d) * n_vars(d);
        CHECK(nonzero == total - sp.num * total / sp.den);
        CHECK(sp.num * total % sp.den == 0);  // exact split
    }
}

TEST_CASE("hyperbolicity: spectra are real") {
    PhysParams p{1e-2, 2.5, 1.0};
    SUBCASE("zero state, x direction") {
        std::vector<AcmHdState> states{AcmHdState(3)};
        auto rep = hyperbolicity_check(p, {1.0, 0.0, 0.0}, states);
        CHECK(rep.solver_ok);
        CHECK(rep.max_abs_imag < 1e-8);
        CHECK(rep.pass());
    }
    SUBCASE("random states, every axis direction") {
        std::mt19937_64 rng(5);
        std::vector<AcmHdState> states;
        for (int i = 0; i < 20; ++i) states.push_back(random_state(3, rng));
        for (int axis = 0; axis < 3; ++axis) {
            std::vector<double> dir(3, 0.0);
            dir[static_cast<std::size_t>(axis)] = 1.0;
            auto rep = hyperbolicity_check(p, dir, states);
            CHECK(rep.solver_ok);
            CHECK(rep.max_abs_imag < 1e-8);
        }
    }
    SUBCASE("2D states as well") {
        std::mt19937_64 rng(9);
        std::vector<AcmHdState> states;
        for (int i = 0; i < 10; ++i) states.push_back(random_state(2, rng));
        auto rep = hyperbolicity_check(p, {0.0, 1.0}, states);
        CHECK(rep.pass());
    }
    SUBCASE("non-unit direction is rejected") {
        std::vector<AcmHdState> states{AcmHdState(3)};
        CHECK_THROWS_AS(hyperbolicity_check(p, {1.0, 1.0, 0.0}, states), std::invalid_argument);
    }
}

TEST_CASE("analytic Jacobian agrees with finite differences") {
    PhysParams p{2e-3, 2.5, 0.7};
    std::mt19937_64 rng(17);
    const std::vector<double> dir{1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0)};
    for (int t = 0; t < 5; ++t) {
        AcmHdState s = random_state(3, rng);
        Matrix a = flux_jacobian(s, p, dir);
        Matrix f = fd_jacobian(s, p, dir);
        for (int r = 0; r < 13; ++r)
            for (int c = 0; c < 13; ++c) CHECK(a(r, c) == doctest::Approx(f(r, c)).epsilon(1e-7));
    }
}

TEST_CASE("PhysParams validation") {
    const PhysParams bad_nu{-1.0, 2.5, 1.0};
    const PhysParams bad_zeta{0.0, 0.0, 1.0};
    const PhysParams bad_T{0.0, 2.5, 0.0};
    CHECK_THROWS_AS(bad_nu.validate(), std::invalid_argument);
    CHECK_THROWS_AS(bad_zeta.validate(), std::invalid_argument);
    CHECK_THROWS_AS(bad_T.validate(), std::invalid_argument);
}

TEST_CASE("eigensolver on matrices with known spectra") {
    SUBCASE("diagonal") {
        Matrix A(3, 3);
        A(0, 0) = 2.0;
        A(1, 1) = -1.0;
        A(2, 2) = 0.5;
        auto w = eigenvalues(A);
        std::vector<double> re;
        for (auto& e : w) {
            CHECK(std::fabs(e.imag()) < 1e-14);
            re.push_back(e.real());
        }
        std::sort(re.begin(), re.end());
        CHECK(re[0] == doctest::Approx(-1.0));
        CHECK(re[1] == doctest::Approx(0.5));
        CHECK(re[2] == doctest::Approx(2.0));
    }
    SUBCASE("rotation block has the exact complex pair") {
        Matrix A(2, 2);
        A(0, 1) = -1.0;
        A(1, 0) = 1.0;
        auto w = eigenvalues(A);
        CHECK(std::fabs(w[0].real()) < 1e-14);
        CHECK(std::fabs(std::fabs(w[0].imag()) - 1.0) < 1e-14);
        CHECK(w[0] == std::conj(w[1]));
    }
    SUBCASE("companion matrix of (x-1)(x-2)(x-3)(x-4)") {
        // x^4 - 10x^3 + 35x^2 - 50x + 24
        Matrix A(4, 4);
        A(0, 0) = 10.0;
        A(0, 1) = -35.0;
        A(0, 2) = 50.0;
        A(0, 3) = -24.0;
        A(1, 0) = A(2, 1) = A(3, 2) = 1.0;
        auto w = eigenvalues(A);
        std::vector<double> re;
        for (auto& e : w) {
            CHECK(std::fabs(e.imag()) < 1e-10);
            re.push_back(e.real());
        }
        std::sort(re.begin(), re.end());
        for (int i = 0; i < 4; ++i) CHECK(re[static_cast<std::size_t>(i)] == doctest::Approx(i + 1.0).epsilon(1e-9));
    }
    SUBCASE("trace and determinant are preserved on a random matrix") {
        std::mt19937_64 rng(12);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        Matrix A(6, 6);
        for (auto& x : A.a) x = dist(rng);
        double tr = 0.0;
        for (int i = 0; i < 6; ++i) tr += A(i, i);
        auto w = eigenvalues(A);
        std::complex<double> sum{0, 0};
        for (auto& e : w) sum += e;
        CHECK(sum.real() == doctest::Approx(tr).epsilon(1e-10));
        CHECK(std::fabs(sum.imag()) < 1e-10);
    }
}
