#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "hexfuse/core.hpp"

namespace hexfuse {

/// Roots of the Legendre polynomial P_m on (-1,1), ascending. Newton iteration
/// from Chebyshev initial guesses.
inline std::vector<double> gauss_legendre_points(int m) {
    if (m < 2 || m > 8) throw std::invalid_argument("gauss_legendre_points: m must be in [2,8]");
    std::vector<double> x(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        // Guess for the i-th largest root, then refine.
        double z = std::cos(M_PI * (i + 0.75) / (m + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < m; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            const double dp = m * (z * p0 - p1) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p0 / dp;
            if (std::fabs(z - z1) < 1e-15) break;
        }
        x[static_cast<std::size_t>(m - 1 - i)] = z;
    }
    // Symmetrise about zero exactly.
    for (int i = 0; i < m / 2; ++i) {
        const double v = 0.5 * (x[static_cast<std::size_t>(m - 1 - i)] - x[static_cast<std::size_t>(i)]);
        x[static_cast<std::size_t>(i)] = -v;
        x[static_cast<std::size_t>(m - 1 - i)] = v;
    }
    if (m % 2 == 1) x[static_cast<std::size_t>(m / 2)] = 0.0;
    return x;
}

/// Lagrange derivative matrix on a node set: D(j,k) = l_k'(x_j), via
/// barycentric weights. Diagonal chosen so rows sum to zero exactly.
inline Matrix derivative_matrix(const std::vector<double>& nodes) {
    const int m = static_cast<int>(nodes.size());
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            if (nodes[static_cast<std::size_t>(i)] == nodes[static_cast<std::size_t>(j)])
                throw std::invalid_argument("derivative_matrix: duplicate nodes");

    std::vector<double> wb(static_cast<std::size_t>(m), 1.0);
    for (int k = 0; k < m; ++k)
        for (int j = 0; j < m; ++j)
            if (j != k) wb[static_cast<std::size_t>(k)] /= (nodes[static_cast<std::size_t>(k)] - nodes[static_cast<std::size_t>(j)]);

    Matrix D(m, m);
    for (int j = 0; j < m; ++j) {
        double diag = 0.0;
        for (int k = 0; k < m; ++k) {
            if (k == j) continue;
            const double v = (wb[static_cast<std::size_t>(k)] / wb[static_cast<std::size_t>(j)]) /
                             (nodes[static_cast<std::size_t>(j)] - nodes[static_cast<std::size_t>(k)]);
            D(j, k) = v;
            diag -= v;
        }
        D(j, j) = diag;
    }
    return D;
}

namespace detail {
/// Key with 12 significant digits; entries closer than that are one constant.
inline std::string sig12(double v) {
    if (v == 0.0) v = 0.0;  // normalise -0
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.11e", v);
    return buf;
}
} // namespace detail

struct UniqueConstants {
    int raw = 0;
    int sign_folded = 0;
};

/// Distinct entries of D, and distinct absolute values.
inline UniqueConstants unique_constants(const Matrix& D) {
    std::set<std::string> raw, folded;
    for (double v : D.a) {
        raw.insert(detail::sig12(v));
        folded.insert(detail::sig12(std::fabs(v)));
    }
    return {static_cast<int>(raw.size()), static_cast<int>(folded.size())};
}

/// Folded constant table: sorted distinct |D| values plus a signed index per
/// entry (positive index i+1 means +table[i], negative means -table[i]).
struct FoldedConstants {
    std::vector<double> values;        // distinct absolute values
    std::vector<int> signed_index;     // row-major over D, size m*m
    int m = 0;

    double lookup(int flat) const {
        const int si = signed_index[static_cast<std::size_t>(flat)];
        const double v = values[static_cast<std::size_t>(std::abs(si) - 1)];
        return si < 0 ? -v : v;
    }
};

inline FoldedConstants fold_constants(const Matrix& D) {
    FoldedConstants f;
    f.m = D.rows;
    // The 12-digit key only groups equal-magnitude entries; the stored value
    // is the exact double of the first occurrence.
    std::map<std::string, int> pos;
    f.signed_index.resize(D.a.size());
    for (std::size_t i = 0; i < D.a.size(); ++i) {
        const double av = std::fabs(D.a[i]);
        const std::string k = detail::sig12(av);
        auto [it, fresh] = pos.emplace(k, static_cast<int>(f.values.size()));
        if (fresh) f.values.push_back(av);
        f.signed_index[i] = (D.a[i] < 0.0) ? -(it->second + 1) : (it->second + 1);
    }
    return f;
}

} // namespace hexfuse
