#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "hexfuse/core.hpp"

namespace hexfuse {

/// Eigenvalues of a general real square matrix: balance, reduce to upper
/// Hessenberg form, then Francis double-shift QR iteration. Throws
/// std::runtime_error if the QR iteration fails to converge.
inline std::vector<std::complex<double>> eigenvalues(Matrix A) {
    if (A.rows != A.cols) throw std::invalid_argument("eigenvalues: matrix not square");
    const int n = A.rows;
    std::vector<std::complex<double>> w(n);
    if (n == 0) return w;
    if (n == 1) { w[0] = {A(0, 0), 0.0}; return w; }

    // Balance (Osborne): scale rows/columns by powers of 2 to equalise norms.
    const double radix = 2.0;
    for (bool done = false; !done;) {
        done = true;
        for (int i = 0; i < n; ++i) {
            double r = 0.0, c = 0.0;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                c += std::fabs(A(j, i));
                r += std::fabs(A(i, j));
            }
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix, f = 1.0;
            const double s = c + r;
            while (c < g) { f *= radix; c *= radix * radix; }
            g = r * radix;
            while (c > g) { f /= radix; c /= radix * radix; }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                const double ginv = 1.0 / f;
                for (int j = 0; j < n; ++j) A(i, j) *= ginv;
                for (int j = 0; j < n; ++j) A(j, i) *= f;
            }
        }
    }

    // Hessenberg reduction by stabilised elementary transforms.
    for (int m = 1; m < n - 1; ++m) {
        double x = 0.0;
        int piv = m;
        for (int j = m; j < n; ++j) {
            if (std::fabs(A(j, m - 1)) > std::fabs(x)) { x = A(j, m - 1); piv = j; }
        }
        if (piv != m) {
            for (int j = m - 1; j < n; ++j) std::swap(A(piv, j), A(m, j));
            for (int j = 0; j < n; ++j) std::swap(A(j, piv), A(j, m));
        }
        if (x != 0.0) {
            for (int i = m + 1; i < n; ++i) {
                double y = A(i, m - 1);
                if (y == 0.0) continue;
                y /= x;
                A(i, m - 1) = y;
                for (int j = m; j < n; ++j) A(i, j) -= y * A(m, j);
                for (int j = 0; j < n; ++j) A(j, m) += y * A(j, i);
            }
        }
    }
    for (int i = 2; i < n; ++i)
        for (int j = 0; j < i - 1; ++j) A(i, j) = 0.0;

    // Francis double-shift QR (classic hqr).
    double anorm = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::fabs(A(i, j));
    if (anorm == 0.0) anorm = 1.0;

    int nn = n - 1;
    double t = 0.0;
    while (nn >= 0) {
        int its = 0;
        int l = 0;
        do {
            for (l = nn; l >= 1; --l) {
                double s = std::fabs(A(l - 1, l - 1)) + std::fabs(A(l, l));
                if (s == 0.0) s = anorm;
                if (std::fabs(A(l, l - 1)) + s == s) { A(l, l - 1) = 0.0; break; }
            }
            double x = A(nn, nn);
            if (l == nn) {
                w[nn--] = {x + t, 0.0};
            } else {
                double y = A(nn - 1, nn - 1);
                double v = A(nn, nn - 1) * A(nn - 1, nn);
                if (l == nn - 1) {
                    const double pp = 0.5 * (y - x);
                    const double q = pp * pp + v;
                    double z = std::sqrt(std::fabs(q));
                    x += t;
                    if (q >= 0.0) {
                        z = pp + (pp >= 0.0 ? z : -z);
                        w[nn - 1] = w[nn] = {x + z, 0.0};
                        if (z != 0.0) w[nn] = {x - v / z, 0.0};
                    } else {
                        w[nn - 1] = {x + pp, z};
                        w[nn] = {x + pp, -z};
                    }
                    nn -= 2;
                } else {
                    if (its == 30) throw std::runtime_error("eigenvalues: QR iteration did not converge");
                    double pp = 0.0, q = 0.0, r = 0.0, z = 0.0, s;
                    if (its == 10 || its == 20) {
                        t += x;
                        for (int i = 0; i <= nn; ++i) A(i, i) -= x;
                        s = std::fabs(A(nn, nn - 1)) + std::fabs(A(nn - 1, nn - 2));
                        y = x = 0.75 * s;
                        v = -0.4375 * s * s;
                    }
                    ++its;
                    int m;
                    for (m = nn - 2; m >= l; --m) {
                        z = A(m, m);
                        r = x - z;
                        s = y - z;
                        pp = (r * s - v) / A(m + 1, m) + A(m, m + 1);
                        q = A(m + 1, m + 1) - z - r - s;
                        r = A(m + 2, m + 1);
                        s = std::fabs(pp) + std::fabs(q) + std::fabs(r);
                        pp /= s; q /= s; r /= s;
                        if (m == l) break;
                        const double u = std::fabs(A(m, m - 1)) * (std::fabs(q) + std::fabs(r));
                        const double vv = std::fabs(pp) *
                            (std::fabs(A(m - 1, m - 1)) + std::fabs(z) + std::fabs(A(m + 1, m + 1)));
                        if (u + vv == vv) break;
                    }
                    for (int i = m + 2; i <= nn; ++i) {
                        A(i, i - 2) = 0.0;
                        if (i != m + 2) A(i, i - 3) = 0.0;
                    }
                    for (int k = m; k <= nn - 1; ++k) {
                        if (k != m) {
                            pp = A(k, k - 1);
                            q = A(k + 1, k - 1);
                            r = (k != nn - 1) ? A(k + 2, k - 1) : 0.0;
                            x = std::fabs(pp) + std::fabs(q) + std::fabs(r);
                            if (x != 0.0) { pp /= x; q /= x; r /= x; }
                        }
                        s = std::sqrt(pp * pp + q * q + r * r);
                        if (pp < 0.0) s = -s;
                        if (s == 0.0) continue;
                        if (k == m) {
                            if (l != m) A(k, k - 1) = -A(k, k - 1);
                        } else {
                            A(k, k - 1) = -s * x;
                        }
                        pp += s;
                        x = pp / s;
                        y = q / s;
                        z = r / s;
                        q /= pp;
                        r /= pp;
                        for (int j = k; j <= nn; ++j) {
                            pp = A(k, j) + q * A(k + 1, j);
                            if (k != nn - 1) {
                                pp += r * A(k + 2, j);
                                A(k + 2, j) -= pp * z;
                            }
                            A(k + 1, j) -= pp * y;
                            A(k, j) -= pp * x;
                        }
                        const int mmin = (nn < k + 3) ? nn : k + 3;
                        for (int i = l; i <= mmin; ++i) {
                            pp = x * A(i, k) + y * A(i, k + 1);
                            if (k != nn - 1) {
                                pp += z * A(i, k + 2);
                                A(i, k + 2) -= pp * r;
                            }
                            A(i, k + 1) -= pp * q;
                            A(i, k) -= pp;
                        }
                    }
                }
            }
        } while (l < nn - 1);
    }
    return w;
}

} // namespace hexfuse
