#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "sdfap/pattern.hpp"
#include "sdfap/shapes.hpp"

namespace sdfap {

enum class ReadinessMode { Conservative, Eager };

inline const char* to_string(ReadinessMode m) {
    return m == ReadinessMode::Conservative ? "conservative" : "eager";
}

// Node controller: Idle or Firing(phase). A started firing always runs to
// completion; at the last phase the node may refire back-to-back.
struct NodeControllerState {
    bool firing = false;
    std::int64_t phase = 0;

    static NodeControllerState idle() { return {}; }
    static NodeControllerState at(std::int64_t p) { return {true, p}; }
    bool operator==(const NodeControllerState& o) const {
        return firing == o.firing && (!firing || phase == o.phase);
    }
};

// One synchronous step of the node controller. `all_inputs_ready` is the
// conjunction of every input FIFO's readiness flag.
inline NodeControllerState node_controller_step(NodeControllerState nc, bool all_inputs_ready,
                                                std::int64_t latency) {
    if (!nc.firing)
        return all_inputs_ready ? NodeControllerState::at(0) : NodeControllerState::idle();
    if (nc.phase + 1 < latency) return NodeControllerState::at(nc.phase + 1);
    // Last phase: refire immediately when the inputs allow it.
    return all_inputs_ready ? NodeControllerState::at(0) : NodeControllerState::idle();
}

// FIFO controller state: occupancy plus committed arrivals from the
// producer's in-progress firing. pending_writes[k] holds the scalars that
// will have arrived k+1 cycles from now (only guaranteed writes).
struct FifoControllerState {
    std::int64_t occupancy = 0;
    std::vector<std::int64_t> pending_writes;

    std::int64_t committed_by(std::int64_t k) const {
        std::int64_t sum = 0;
        for (std::int64_t i = 0; i < k && i < static_cast<std::int64_t>(pending_writes.size()); ++i)
            sum += pending_writes[static_cast<std::size_t>(i)];
        return sum;
    }
};

// Readiness of a consumer firing whose per-phase scalar needs are
// `read_widths`. Conservative demands the whole firing's tokens up front;
// Eager starts as soon as every phase is covered by occupancy plus
// committed arrivals.
inline bool fifo_ready(const FifoControllerState& f, const std::vector<std::int64_t>& read_widths,
                       ReadinessMode mode) {
    std::int64_t total = std::accumulate(read_widths.begin(), read_widths.end(), std::int64_t{0});
    if (mode == ReadinessMode::Conservative) return f.occupancy >= total;
    std::int64_t need = 0;
    for (std::size_t k = 0; k < read_widths.size(); ++k) {
        need += read_widths[k];
        if (f.occupancy + f.committed_by(static_cast<std::int64_t>(k)) < need) return false;
    }
    return true;
}

// Write-then-read FIFO update for one cycle. The capacity bound is checked
// after the write; reads only touch data registered in earlier cycles.
// Returns the new occupancy; faults are signalled through the flags.
struct FifoStepResult {
    std::int64_t occupancy = 0;
    bool overflow = false;
    bool underflow = false;
};

inline FifoStepResult fifo_step(std::int64_t occupancy, std::int64_t writes, std::int64_t reads,
                                std::int64_t capacity) {
    FifoStepResult r;
    r.underflow = reads > occupancy;
    r.overflow = capacity >= 0 && occupancy + writes > capacity;
    r.occupancy = occupancy + writes - reads;
    return r;
}

// ---------------------------------------------------------------------------
// Reshape plans and FIFO specifications
// ---------------------------------------------------------------------------

// Describes how a producer's write layout is regrouped into the consumer's
// read layout, in scalar units.
struct ReshapePlan {
    bool identity = false;
    std::vector<std::int64_t> write_widths;     // scalars per producer phase (one firing)
    std::vector<std::int64_t> read_widths;      // scalars per consumer phase (one firing)
    std::vector<std::int64_t> producer_grouping; // per-level lane counts, then scalars per lane
    std::vector<std::int64_t> consumer_grouping;

    std::string str() const {
        auto fmt = [](const std::vector<std::int64_t>& g) {
            std::string s;
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (i) s += "x";
                s += std::to_string(g[i]);
            }
            return s;
        };
        return fmt(producer_grouping) + " -> " + fmt(consumer_grouping);
    }
};

// Regrouping plan between a producer pattern and a consumer pattern moving
// the same number of scalars per graph iteration.
inline ReshapePlan reshape_spec(const Pattern& pp, const Pattern& cp, const Shape& element_shape) {
    std::int64_t scalars_per_token = element_shape.total_scalars();
    std::int64_t produced = pp.tokens_per_firing() * scalars_per_token;
    std::int64_t consumed = cp.tokens_per_firing() * scalars_per_token;
    // Some edges need several consumer firings per producer firing (or the
    // reverse); token conservation demands one side divides the other.
    if (produced != consumed) {
        std::int64_t lo = std::min(produced, consumed), hi = std::max(produced, consumed);
        if (lo == 0 || hi % lo != 0)
            throw CompileError("reshape token mismatch: producer moves " + std::to_string(produced) +
                               " scalars per firing, consumer " + std::to_string(consumed));
    }

    ReshapePlan plan;
    plan.identity = pp == cp;
    for (std::int64_t k = 0; k < pp.firing_latency(); ++k)
        plan.write_widths.push_back(pp.phase_tokens(k) * scalars_per_token);
    for (std::int64_t k = 0; k < cp.firing_latency(); ++k)
        plan.read_widths.push_back(cp.phase_tokens(k) * scalars_per_token);

    auto grouping = [&](const Pattern& p, std::int64_t total) {
        std::vector<std::int64_t> g;
        for (const auto& lvl : p.levels())
            g.push_back(*std::max_element(lvl.begin(), lvl.end()));
        std::int64_t lanes = p.max_parallel();
        g.push_back(lanes == 0 ? 0 : total / lanes);
        // Drop a trailing x1 when the lanes already cover everything.
        if (g.back() == 1 && g.size() > 1) g.pop_back();
        return g;
    };
    std::int64_t common = std::max(produced, consumed);
    plan.producer_grouping = grouping(pp, common);
    plan.consumer_grouping = grouping(cp, common);
    return plan;
}

// Parameterized buffer descriptor for one edge: the runtime realization of
// the generated wrapper's buffer parameters.
struct FifoSpec {
    std::string edge;                       // label "producer->consumer"
    Shape element_shape;
    std::vector<std::int64_t> write_widths; // scalars per producer phase
    std::vector<std::int64_t> read_widths;  // scalars per consumer phase
    std::int64_t capacity = 0;              // scalar slots
    ReshapePlan reshape;
};

} // namespace sdfap
