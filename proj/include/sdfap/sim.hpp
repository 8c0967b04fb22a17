#pragma once

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sdfap/compiler.hpp"

namespace sdfap {

struct SimOutcome {
    Value output;
    std::int64_t latency = 0;
    EngineResult raw;
};

// Cycle-accurate execution of a compiled design against concrete inputs,
// with the capacities computed by the static schedule enforced.
inline SimOutcome simulate(const CompiledDesign& c, const std::vector<Value>& inputs,
                           std::int64_t max_cycles = -1, bool record_trace = false) {
    EngineOptions opt;
    opt.mode = c.mode;
    opt.width = c.width;
    opt.max_cycles = max_cycles;
    opt.track_values = true;
    opt.enforce_capacity = true;
    opt.record_trace = record_trace;
    Engine eng(*c.prog, c.design, opt);
    SimOutcome out;
    out.raw = eng.run(inputs);
    out.output = out.raw.output;
    out.latency = out.raw.latency;
    return out;
}

// ---------------------------------------------------------------------------
// Golden-model equivalence
// ---------------------------------------------------------------------------

struct EquivalenceCase {
    bool passed = false;
    std::string note;      // first divergence path or fault description
    std::int64_t latency = 0;
};

struct EquivalenceReport {
    std::vector<EquivalenceCase> cases;
    bool all_passed() const {
        for (const auto& c : cases)
            if (!c.passed) return false;
        return !cases.empty();
    }
    int passed_count() const {
        int n = 0;
        for (const auto& c : cases) n += c.passed ? 1 : 0;
        return n;
    }
};

// Finds the first position where two values diverge, as an index path.
inline std::string first_divergence(const Value& a, const Value& b, std::string path = "$") {
    if (a.is_scalar() != b.is_scalar()) return path + ": shape mismatch";
    if (a.is_scalar())
        return a.scalar() == b.scalar()
                   ? std::string{}
                   : path + ": golden " + std::to_string(a.scalar()) + " vs simulated " +
                         std::to_string(b.scalar());
    if (a.size() != b.size()) return path + ": length mismatch";
    for (std::size_t i = 0; i < a.size(); ++i) {
        std::string d = first_divergence(a[i], b[i], path + "[" + std::to_string(i) + "]");
        if (!d.empty()) return d;
    }
    return {};
}

inline Value random_value(const Shape& shape, std::mt19937_64& rng, std::int64_t lo,
                          std::int64_t hi) {
    std::uniform_int_distribution<std::int64_t> dist(lo, hi);
    std::vector<std::int64_t> flat(static_cast<std::size_t>(shape.total_scalars()));
    for (auto& x : flat) x = dist(rng);
    return Value::from_flat(shape, flat);
}

inline EquivalenceCase verify_one(const CompiledDesign& c, const std::vector<Value>& inputs) {
    EquivalenceCase r;
    Value golden;
    try {
        golden = golden_eval(*c.prog, c.entry, inputs, c.width);
    } catch (const EvalError& e) {
        r.passed = false;
        r.note = std::string("golden evaluation failed: ") + e.what();
        return r;
    }
    try {
        SimOutcome sim = simulate(c, inputs);
        r.latency = sim.latency;
        std::string d = first_divergence(golden, sim.output);
        r.passed = d.empty();
        r.note = d;
    } catch (const SimFault& f) {
        r.passed = false;
        r.note = std::string("simulation fault: ") + f.what();
    }
    return r;
}

// Equivalence of the simulated design against the golden model on explicit
// inputs.
inline EquivalenceReport verify_equivalence(const CompiledDesign& c,
                                            const std::vector<std::vector<Value>>& input_sets) {
    EquivalenceReport rep;
    for (const auto& inputs : input_sets) rep.cases.push_back(verify_one(c, inputs));
    return rep;
}

// Seeded random sweep. Inputs whose golden evaluation fails (division by
// zero) are redrawn; the draw sequence is deterministic for a given seed.
inline EquivalenceReport verify_random(const CompiledDesign& c, int count, std::uint64_t seed,
                                       std::int64_t lo = -100, std::int64_t hi = 100) {
    EquivalenceReport rep;
    std::mt19937_64 rng(seed);
    int guard = 0;
    while (static_cast<int>(rep.cases.size()) < count && guard < count * 50 + 100) {
        ++guard;
        std::vector<Value> inputs;
        for (const auto& s : c.input_shapes) inputs.push_back(random_value(s, rng, lo, hi));
        try {
            golden_eval(*c.prog, c.entry, inputs, c.width);
        } catch (const EvalError&) {
            continue; // undefined reference output; redraw
        }
        rep.cases.push_back(verify_one(c, inputs));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Pipeline measurement
// ---------------------------------------------------------------------------

struct PipelineFigures {
    std::int64_t latency = 0;             // first frame completion
    std::int64_t initiation_interval = 0; // steady-state gap between frames
    std::vector<std::int64_t> frame_latency;
};

// Streams k back-to-back input frames through a fresh expansion of the same
// program and reports first-frame latency and the steady-state initiation
// interval. Buffers are resized for streaming by the k-frame schedule.
inline PipelineFigures measure_pipeline(const CompiledDesign& c, int k,
                                        const std::vector<std::vector<Value>>& frames) {
    if (k < 2) throw CompileError("measure_pipeline needs at least 2 frames");
    CompileOptions opt;
    opt.input_shapes = c.input_shapes;
    opt.mode = c.mode;
    opt.width = c.width;
    opt.frames = k;
    CompiledDesign streamed = compile_program(Program(*c.prog), c.entry, opt);

    // Concatenate per-frame inputs: parameter i becomes Vec k of frames.
    std::vector<Value> inputs;
    for (std::size_t i = 0; i < c.input_shapes.size(); ++i) {
        std::vector<Value> per;
        for (int f = 0; f < k; ++f) per.push_back(frames[static_cast<std::size_t>(f)][i]);
        inputs.push_back(Value(std::move(per)));
    }
    SimOutcome out = simulate(streamed, inputs);
    PipelineFigures fig;
    fig.frame_latency = out.raw.frame_latency;
    fig.latency = fig.frame_latency.front();
    fig.initiation_interval =
        fig.frame_latency[static_cast<std::size_t>(k - 1)] -
        fig.frame_latency[static_cast<std::size_t>(k - 2)];
    return fig;
}

// ---------------------------------------------------------------------------
// Trace rendering
// ---------------------------------------------------------------------------

inline std::string trace_text(const CompiledDesign& c, const EngineResult& r) {
    std::ostringstream os;
    for (const auto& row : r.trace) {
        os << "t=" << row.cycle << " |";
        for (std::size_t i = 0; i < row.nodes.size(); ++i) {
            const Inst& inst = c.design.insts[i];
            if (inst.kind == InstKind::Source || inst.kind == InstKind::Sink) continue;
            os << " " << inst.label << ":";
            if (row.nodes[i].firing) os << "F" << row.nodes[i].phase;
            else os << "I";
        }
        os << " |";
        for (std::size_t f = 0; f < row.occupancy.size(); ++f) {
            if (row.occupancy[f] == 0) continue;
            os << " " << c.design.fifos[f].label << "=" << row.occupancy[f];
        }
        os << " | sink=" << row.sink_arrivals << "\n";
    }
    return os.str();
}

} // namespace sdfap
