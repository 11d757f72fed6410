#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hexfuse/core.hpp"

namespace hexfuse {

enum class MemSpace { Register, Shared, Global, Constant };

inline const char* to_string(MemSpace s) {
    switch (s) {
        case MemSpace::Register: return "register";
        case MemSpace::Shared: return "shared";
        case MemSpace::Global: return "global";
        case MemSpace::Constant: return "constant";
    }
    return "?";
}

enum class Priority : int { Low = 0, Medium = 1, High = 2 };

inline const char* to_string(Priority p) {
    switch (p) {
        case Priority::Low: return "low";
        case Priority::Medium: return "medium";
        case Priority::High: return "high";
    }
    return "?";
}

struct Location {
    MemSpace space = MemSpace::Global;
    int slot = -1;             // shared slot or register id
    bool per_thread = true;    // one word per thread in the slot
    std::int64_t byte_offset = -1;  // shared only
};

struct RequestResult {
    Location loc;
    bool newly_cached = false;  // this request moved the variable into shared
};

/// Generation-time placement of variables across registers, shared memory and
/// global memory. Shared memory is a pool of uniform slots (one word per
/// thread) split into low/medium/high priority stacks plus a free stack, and
/// requests prefer registers over shared over global. Caching into shared
/// requires a free slot or an evictable strictly-lower-priority entry;
/// eviction pops the most recently pushed entry of the lowest such stack.
class MemoryManager {
public:
    MemoryManager(std::int64_t smem_bytes, int block_threads, int word_sz)
        : slot_words_(block_threads), word_bytes_(word_sz) {
        n_slots_ = static_cast<int>(smem_bytes / (static_cast<std::int64_t>(slot_words_) * word_bytes_));
        for (int s = n_slots_ - 1; s >= 0; --s) free_.push_back(s);
    }

    int n_slots() const { return n_slots_; }
    int slot_words() const { return slot_words_; }

    void declare_register(std::int64_t var, int reg) { reg_home_[var] = reg; }

    RequestResult request(std::int64_t var, Priority prio, const std::string& via_reg = {}) {
        RequestResult r;
        if (auto it = reg_home_.find(var); it != reg_home_.end()) {
            r.loc = {MemSpace::Register, it->second, true, -1};
            log_request(var, prio, r, via_reg);
            return r;
        }
        if (auto it = resident_.find(var); it != resident_.end()) {
            if (static_cast<int>(prio) > static_cast<int>(it->second.prio)) move_entry(var, prio);
            r.loc = shared_loc(resident_.at(var).slot);
            log_request(var, prio, r, via_reg);
            return r;
        }
        int slot = -1;
        if (!free_.empty()) {
            slot = free_.back();
            free_.pop_back();
        } else {
            // Free space from a strictly lower priority stack, lowest first.
            for (int s = 0; s < static_cast<int>(prio); ++s) {
                auto& st = stacks_[s];
                if (!st.empty()) {
                    const std::int64_t victim = st.back();
                    slot = resident_.at(victim).slot;
                    log_evict(victim, static_cast<Priority>(s), slot);
                    st.pop_back();
                    resident_.erase(victim);
                    break;
                }
            }
        }
        if (slot < 0) {
            r.loc = {MemSpace::Global, -1, false, -1};
            log_request(var, prio, r, via_reg);
            return r;
        }
        stacks_[static_cast<int>(prio)].push_back(var);
        resident_[var] = {prio, slot};
        r.loc = shared_loc(slot);
        r.newly_cached = true;
        log_request(var, prio, r, via_reg);
        return r;
    }

    void escalate(std::int64_t var, Priority prio) { reprioritise(var, prio, "escalate"); }
    void deescalate(std::int64_t var, Priority prio) { reprioritise(var, prio, "deescalate"); }

    bool resident_shared(std::int64_t var) const { return resident_.count(var) != 0; }

    Priority priority_of(std::int64_t var) const {
        auto it = resident_.find(var);
        if (it == resident_.end()) throw std::invalid_argument("priority_of: variable not in shared");
        return it->second.prio;
    }

    /// Variables of one priority stack, bottom first.
    std::vector<std::int64_t> stack_contents(Priority p) const { return stacks_[static_cast<int>(p)]; }

    int used_slots() const { return n_slots_ - static_cast<int>(free_.size()); }

    const std::vector<nlohmann::json>& log() const { return log_; }

    std::string trace_jsonl() const {
        std::ostringstream out;
        for (const auto& e : log_) out << e.dump() << "\n";
        return out.str();
    }

private:
    struct Entry {
        Priority prio;
        int slot;
    };

    Location shared_loc(int slot) const {
        return {MemSpace::Shared, slot, true,
                static_cast<std::int64_t>(slot) * slot_words_ * word_bytes_};
    }

    void move_entry(std::int64_t var, Priority prio) {
        auto& e = resident_.at(var);
        auto& from = stacks_[static_cast<int>(e.prio)];
        for (std::size_t i = 0; i < from.size(); ++i)
            if (from[i] == var) { from.erase(from.begin() + static_cast<std::ptrdiff_t>(i)); break; }
        stacks_[static_cast<int>(prio)].push_back(var);
        e.prio = prio;
    }

    void reprioritise(std::int64_t var, Priority prio, const char* op) {
        auto it = resident_.find(var);
        if (it == resident_.end())
            throw std::invalid_argument(std::string(op) + ": variable not resident in shared");
        log_.push_back({{"op", op}, {"var", var}, {"priority", to_string(prio)}});
        if (it->second.prio == prio) return;
        move_entry(var, prio);
    }

    void log_request(std::int64_t var, Priority prio, const RequestResult& r, const std::string& via) {
        nlohmann::json j{{"op", "request"},
                         {"var", var},
                         {"priority", to_string(prio)},
                         {"space", to_string(r.loc.space)},
                         {"slot", r.loc.slot},
                         {"cached", r.newly_cached}};
        // Global data reaches shared through an intermediate register.
        if (r.newly_cached) j["via_register"] = via.empty() ? "rx" : via;
        log_.push_back(std::move(j));
    }

    void log_evict(std::int64_t var, Priority prio, int slot) {
        log_.push_back({{"op", "evict"}, {"var", var}, {"priority", to_string(prio)}, {"slot", slot}});
    }

    int slot_words_;
    int word_bytes_;
    int n_slots_ = 0;
    std::vector<int> free_;
    std::vector<std::int64_t> stacks_[3];
    std::map<std::int64_t, Entry> resident_;
    std::map<std::int64_t, int> reg_home_;
    std::vector<nlohmann::json> log_;
};

} // namespace hexfuse
