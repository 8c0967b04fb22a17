#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sdfap/engine.hpp"
#include "sdfap/expand.hpp"
#include "sdfap/parser.hpp"

namespace sdfap {

// Earliest-start firing schedule computed by the token-level engine run
// (same controllers as the simulator, no values, no capacity bounds).
struct StaticSchedule {
    std::vector<std::vector<std::int64_t>> starts; // per instance
    std::vector<std::int64_t> peak;                // per fifo
    std::vector<std::int64_t> max_write;
    std::vector<std::int64_t> min_firing_need;
    std::int64_t latency = 0;
    std::vector<std::int64_t> frame_latency;
    std::int64_t cycles = 0;
};

struct CompileOptions {
    std::optional<std::vector<Shape>> input_shapes; // inferred when absent
    ReadinessMode mode = ReadinessMode::Eager;
    int width = 32;
    int frames = 1;
};

struct CompiledDesign {
    std::shared_ptr<const Program> prog; // stable home for Definition pointers
    std::string entry;
    std::map<std::string, Classification> classes;
    std::vector<Shape> input_shapes;
    AppDag dag;
    ExpandedDesign design;
    StaticSchedule sched;
    ReadinessMode mode = ReadinessMode::Eager;
    int width = 32;
};

inline StaticSchedule run_schedule(const Program& prog, const ExpandedDesign& d,
                                   ReadinessMode mode, int width) {
    EngineOptions opt;
    opt.mode = mode;
    opt.width = width;
    opt.track_values = false;
    opt.enforce_capacity = false;
    Engine eng(prog, d, opt);
    EngineResult r = eng.run({});
    StaticSchedule s;
    s.starts = std::move(r.firing_starts);
    s.peak = std::move(r.peak);
    s.max_write = std::move(r.max_write);
    s.min_firing_need = std::move(r.min_firing_need);
    s.latency = r.latency;
    s.frame_latency = std::move(r.frame_latency);
    s.cycles = r.cycles_run;
    return s;
}

// Buffer capacity for one edge: the schedule's peak occupancy, at least one
// full consumer firing, rounded up to whole producer-write words.
inline std::int64_t size_buffer(std::int64_t peak, std::int64_t min_firing_need,
                                std::int64_t max_write) {
    std::int64_t need = std::max<std::int64_t>({peak, min_firing_need, 1});
    std::int64_t word = std::max<std::int64_t>(max_write, 1);
    return (need + word - 1) / word * word;
}

inline void apply_capacities(ExpandedDesign& d, const StaticSchedule& s) {
    for (auto& f : d.fifos)
        f.capacity = size_buffer(s.peak[static_cast<std::size_t>(f.id)],
                                 s.min_firing_need[static_cast<std::size_t>(f.id)],
                                 s.max_write[static_cast<std::size_t>(f.id)]);
}

// FifoSpec for one catalogued edge (the parameterized-buffer descriptor).
inline FifoSpec derive_fifo(const ExpandedDesign& d, const EdgeCatalogEntry& e) {
    FifoSpec spec;
    spec.edge = e.from + "->" + e.to;
    spec.element_shape = e.token_shape;
    // A consumer instance's buffer is the union of its per-producer queues.
    std::map<std::pair<int, int>, std::int64_t> per_consumer;
    for (const auto& f : d.fifos)
        if (f.edge_tag == e.tag) per_consumer[{f.consumer, f.consumer_slot}] += f.capacity;
    std::int64_t cap = 0;
    for (const auto& [k, v] : per_consumer) cap = std::max(cap, v);
    spec.capacity = cap;
    if (e.pp && e.cp) {
        auto scale_innermost = [](const Pattern& p, std::int64_t s) {
            if (s == 1 || p.empty()) return p;
            auto levels = p.levels();
            for (auto& entry : levels.back()) entry *= s;
            Pattern out = Pattern::flat(levels.back());
            for (auto it = levels.rbegin() + 1; it != levels.rend(); ++it)
                out = Pattern::hier(*it, out);
            return out;
        };
        // Scale both sides so that one cycle's counts are scalars, then plan
        // the regrouping between them.
        std::int64_t frame = e.value_shape.total_scalars();
        Pattern pp = *e.pp, cp = *e.cp;
        std::int64_t ppt = pp.tokens_per_firing();
        std::int64_t cpt = cp.tokens_per_firing();
        std::int64_t iterations_p = ppt > 0 ? std::max<std::int64_t>(frame / ppt, 1) : 1;
        std::int64_t iterations_c = cpt > 0 ? std::max<std::int64_t>(frame / cpt, 1) : 1;
        pp = scale_innermost(pp, frame / (ppt * iterations_p));
        cp = scale_innermost(cp, frame / (cpt * iterations_c));
        spec.reshape = reshape_spec(pp, cp, Shape::scalar());
        spec.write_widths = spec.reshape.write_widths;
        spec.read_widths = spec.reshape.read_widths;
    }
    return spec;
}

inline CompiledDesign compile_program(Program resolved, const std::string& entry,
                                      const CompileOptions& opt = {}) {
    CompiledDesign c;
    c.prog = std::make_shared<Program>(std::move(resolved));
    c.entry = entry;
    c.mode = opt.mode;
    c.width = opt.width;
    c.classes = classify_definitions(*c.prog);

    const Definition* d = c.prog->find(entry);
    if (!d) throw CompileError("no definition named '" + entry + "'");
    if (opt.input_shapes) {
        c.input_shapes = *opt.input_shapes;
    } else {
        auto inferred = infer_entry_shapes(*c.prog, entry);
        if (!inferred)
            throw CompileError(d->pos, "cannot infer the input shape of '" + entry +
                                           "' from its patterns; pass --shape");
        c.input_shapes = *inferred;
    }
    check_shapes(*c.prog, entry, c.input_shapes);

    c.dag = build_dag(*c.prog, c.classes, entry, c.input_shapes);
    Expander ex(*c.prog, c.classes);
    c.design = ex.run(c.dag, c.input_shapes, opt.frames);
    c.sched = run_schedule(*c.prog, c.design, opt.mode, opt.width);
    apply_capacities(c.design, c.sched);
    return c;
}

inline CompiledDesign compile_source(const std::string& source, const std::string& entry,
                                     const CompileOptions& opt = {}) {
    return compile_program(resolve(parse_program_text(source)), entry, opt);
}

} // namespace sdfap
