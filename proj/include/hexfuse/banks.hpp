#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "hexfuse/core.hpp"
#include "hexfuse/layout.hpp"

namespace hexfuse {

constexpr int kNumBanks = 32;

/// Shared-memory bank of a 4-byte-aligned byte address: mod(addr/4, 32).
inline int bank_of(std::int64_t byte_addr) {
    if (byte_addr % 4 != 0) throw std::invalid_argument("bank_of: address not 4-byte aligned");
    return static_cast<int>((byte_addr / 4) % kNumBanks);
}

/// Serialised transactions for one warp access: max over banks of the number
/// of distinct 4-byte words mapping to that bank. A word broadcast to many
/// lanes counts once.
inline int conflict_count(std::span<const std::int64_t> byte_addrs) {
    std::array<std::vector<std::int64_t>, kNumBanks> seen{};
    int worst = 0;
    for (std::int64_t addr : byte_addrs) {
        const int b = bank_of(addr);
        const std::int64_t word = addr / 4;
        auto& bucket = seen[static_cast<std::size_t>(b)];
        bool dup = false;
        for (std::int64_t w : bucket)
            if (w == word) { dup = true; break; }
        if (!dup) {
            bucket.push_back(word);
            if (static_cast<int>(bucket.size()) > worst) worst = static_cast<int>(bucket.size());
        }
    }
    if (worst == 0 && !byte_addrs.empty()) worst = 1;
    return worst;
}

/// Warp access over word addresses of the given width; an 8-byte word counts
/// as two consecutive 4-byte touches.
inline int warp_conflict_count(std::span<const std::int64_t> word_addrs, int word_sz) {
    std::vector<std::int64_t> bytes;
    bytes.reserve(word_addrs.size() * (word_sz == 8 ? 2u : 1u));
    for (std::int64_t w : word_addrs) {
        bytes.push_back(w * word_sz);
        if (word_sz == 8) bytes.push_back(w * word_sz + 4);
    }
    return conflict_count(bytes);
}

/// Plane buffer of the unmanaged planar kernel: word address
/// e_l + sk*k + sj*j + sv*v for a block of E elements. The natural strides
/// are sk=E, sj=sk*m, sv=sj*m.
struct PlanarPlaneLayout {
    int E = 0;          // elements per block
    int m = 0;          // points per line
    int n_v = 0;        // variables per point
    int epw = 0;        // elements per warp
    int word_sz = 4;
    std::int64_t sk = 0, sj = 0, sv = 0;

    static PlanarPlaneLayout natural(int E, int m, int n_v, int epw, int word_sz) {
        PlanarPlaneLayout l;
        l.E = E; l.m = m; l.n_v = n_v; l.epw = epw; l.word_sz = word_sz;
        l.sk = E;
        l.sj = l.sk * m;
        l.sv = l.sj * m;
        return l;
    }

    std::int64_t addr(int e_l, int k, int j, int v) const { return e_l + sk * k + sj * j + sv * v; }
    std::int64_t size_words() const { return sv * n_v; }
    std::int64_t size_bytes() const { return size_words() * word_sz; }

    /// Warp access patterns the generated kernel performs on this buffer.
    /// Store: lane (le,k) writes its own point of slice j. Read: lane (le,k)
    /// fetches the k2 entry of its element's z-line.
    std::vector<std::vector<std::int64_t>> planned_accesses() const {
        std::vector<std::vector<std::int64_t>> out;
        std::vector<std::int64_t> store;
        for (int le = 0; le < epw; ++le)
            for (int k = 0; k < m; ++k) store.push_back(addr(le, k, 0, 0));
        out.push_back(store);
        for (int k2 = 0; k2 < m; ++k2) {
            std::vector<std::int64_t> read;
            for (int le = 0; le < epw; ++le)
                for (int k = 0; k < m; ++k) read.push_back(addr(le, k2, 0, 0));
            out.push_back(read);
        }
        return out;
    }

    int worst_conflict() const {
        int worst = 0;
        for (const auto& acc : planned_accesses())
            worst = std::max(worst, warp_conflict_count(acc, word_sz));
        return worst;
    }

    int min_conflict_target() const { return word_sz == 8 ? 2 : 1; }
};

/// Pads the k-stride until every planned warp access is free of avoidable
/// conflicts; throws if no padded layout fits the capacity.
inline PlanarPlaneLayout deconflict_layout(const PlanarPlaneLayout& in, std::int64_t capacity_bytes) {
    for (int pad = 0; pad <= kNumBanks * 2; ++pad) {
        PlanarPlaneLayout l = in;
        l.sk = in.E + pad;
        l.sj = l.sk * in.m;
        l.sv = l.sj * in.m;
        if (l.size_bytes() > capacity_bytes) continue;
        if (l.worst_conflict() <= l.min_conflict_target()) return l;
    }
    throw std::runtime_error("deconflict_layout: no conflict-free layout fits the shared capacity");
}

} // namespace hexfuse
