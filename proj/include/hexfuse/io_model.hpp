#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <vector>

#include "hexfuse/core.hpp"
#include "hexfuse/equations.hpp"

namespace hexfuse {

/// Global-memory words moved per solution point per element.
struct DataIO {
    std::int64_t reads = 0;
    std::int64_t writes = 0;
    std::int64_t total() const { return reads + writes; }
};

enum class Stage { S2, S3, S6, Fused23, Fused236 };

/// Per-point word counts of the flux pipeline stages. Stage 2 reads the
/// state and writes the d flux columns; stage 3 reads them back and writes
/// the divergence; stage 6 rereads the divergence plus the gradient subset of
/// the state and writes the final result. Fused kernels read the state once
/// and write the result once.
inline DataIO io_model(int d, const std::vector<Stage>& stages) {
    const std::int64_t nv = n_vars(d);
    DataIO io;
    for (Stage s : stages) {
        switch (s) {
            case Stage::S2: io.reads += nv; io.writes += d * nv; break;
            case Stage::S3: io.reads += d * nv; io.writes += nv; break;
            case Stage::S6: io.reads += nv + d * d; io.writes += nv; break;
            case Stage::Fused23: io.reads += nv; io.writes += nv; break;
            case Stage::Fused236: io.reads += nv; io.writes += nv; break;
        }
    }
    return io;
}

inline double speedup_estimate(const DataIO& old_io, const DataIO& new_io) {
    if (new_io.total() <= 0) throw std::invalid_argument("speedup_estimate: new I/O total must be positive");
    return static_cast<double>(old_io.total()) / static_cast<double>(new_io.total());
}

/// Shared-memory bytes needed to hold entire elements for a block:
/// N_t*(1+d+d^2)*m^d/N_et words.
inline std::int64_t shared_bytes_full_element(int N_t, int m, int N_et, int d, Precision prec) {
    if (N_et <= 0 || N_t % N_et != 0)
        throw std::invalid_argument("shared_bytes_full_element: N_et must divide N_t");
    const std::int64_t entries = static_cast<std::int64_t>(N_t) * n_vars(d) * ipow(m, d) / N_et;
    return entries * word_bytes(prec);
}

} // namespace hexfuse
