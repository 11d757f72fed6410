#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hexfuse {

enum class Precision { fp32, fp64 };

inline int word_bytes(Precision p) { return p == Precision::fp32 ? 4 : 8; }

inline const char* to_string(Precision p) { return p == Precision::fp32 ? "fp32" : "fp64"; }

inline Precision precision_from_string(const std::string& s) {
    if (s == "fp32") return Precision::fp32;
    if (s == "fp64") return Precision::fp64;
    throw std::invalid_argument("unknown precision: " + s);
}

inline std::int64_t ipow(std::int64_t base, int exp) {
    std::int64_t r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

/// Exact rational value, used where an integer ratio must stay exact.
struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool operator==(const Fraction& o) const { return num * o.den == o.num * den; }
};

/// Small dense row-major matrix.
struct Matrix {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
};

} // namespace hexfuse
