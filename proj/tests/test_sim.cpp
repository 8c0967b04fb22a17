#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <random>

#include "sdfap/json_export.hpp"
#include "sdfap/resources.hpp"
#include "sdfap/sim.hpp"

using namespace sdfap;

namespace {

std::string corpus(const std::string& name) {
    std::ifstream in(std::string(SDFAP_CORPUS_DIR) + "/" + name);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Value filled(const Shape& s, std::int64_t x) {
    std::vector<std::int64_t> flat(static_cast<std::size_t>(s.total_scalars()), x);
    return Value::from_flat(s, flat);
}

Value vec(std::vector<std::int64_t> xs) {
    std::vector<Value> vs;
    for (auto x : xs) vs.emplace_back(x);
    return Value(std::move(vs));
}

CompileOptions with_mode(ReadinessMode m) {
    CompileOptions opt;
    opt.mode = m;
    return opt;
}

} // namespace

TEST_CASE("single node trace: fires at cycle 0, outputs visible at cycle 1") {
    CompiledDesign c = compile_source(corpus("c_node.sdf"), "c");
    SimOutcome out = simulate(c, {vec({1, 2, 3})}, -1, true);
    CHECK(out.output == vec({6, 6}));
    CHECK(out.latency == 1);
    REQUIRE(out.raw.firing_starts.size() == c.design.insts.size());
    for (std::size_t i = 0; i < c.design.insts.size(); ++i)
        if (c.design.insts[i].kind == InstKind::Def)
            CHECK(out.raw.firing_starts[i] == std::vector<std::int64_t>{0});
    // Trace: input edge holds 3 tokens at cycle 0; output edge shows the 2
    // produced tokens at cycle 1.
    REQUIRE(out.raw.trace.size() >= 2);
    int sink_fifo = -1, src_fifo = -1;
    for (const auto& f : c.design.fifos) {
        if (f.consumer == c.design.sink_inst) sink_fifo = f.id;
        if (c.design.inst(f.producer).kind == InstKind::Source) src_fifo = f.id;
    }
    REQUIRE(sink_fifo >= 0);
    REQUIRE(src_fifo >= 0);
    CHECK(out.raw.trace[0].occupancy[static_cast<std::size_t>(src_fifo)] == 3);
    CHECK(out.raw.trace[1].occupancy[static_cast<std::size_t>(sink_fifo)] == 2);
}

TEST_CASE("fully parallel maps finish in one cycle") {
    CompiledDesign c = compile_source(corpus("maps.sdf"), "maps6844");
    Value in = filled(parse_shape("6x8x4x4"), 2);
    SimOutcome out = simulate(c, {in});
    CHECK(out.latency == 1);
    CHECK(out.output == filled(parse_shape("6x8x4x4"), 4));
}

TEST_CASE("fully sequential maps take 768 cycles") {
    CompiledDesign c = compile_source(corpus("maps.sdf"), "maps1111");
    Value in = filled(parse_shape("6x8x4x4"), 3);
    SimOutcome out = simulate(c, {in});
    CHECK(out.latency == 768);
    CHECK(out.output == filled(parse_shape("6x8x4x4"), 9));
}

TEST_CASE("golden equivalence over corpus programs with random inputs") {
    struct Case {
        const char* file;
        const char* entry;
        std::int64_t lo, hi;
        int n;
    };
    const Case cases[] = {
        {"c_node.sdf", "c", -50, 50, 25},
        {"map3f.sdf", "g", -50, 50, 25},
        {"foldl3.sdf", "accsq", -20, 20, 25},
        {"compose.sdf", "pipeline", -50, 50, 25},
        {"hier.sdf", "foo", -50, 50, 25},
        {"com.sdf", "com", 0, 255, 15},
    };
    for (const auto& k : cases) {
        CompiledDesign c = compile_source(corpus(k.file), k.entry);
        EquivalenceReport rep = verify_random(c, k.n, 42, k.lo, k.hi);
        INFO(k.file << " " << k.entry);
        CHECK(rep.cases.size() == static_cast<std::size_t>(k.n));
        CHECK(rep.all_passed());
    }
}

TEST_CASE("corrupted capacity surfaces as an overflow fault in the report") {
    CompiledDesign c = compile_source(corpus("compose.sdf"), "pipeline");
    // Shrink one real buffer below its computed capacity.
    for (auto& f : c.design.fifos) {
        if (fifo_is_buffer(c.design, f) && f.capacity > 1) {
            f.capacity -= 1;
            break;
        }
    }
    EquivalenceReport rep = verify_random(c, 3, 9, -5, 5);
    CHECK_FALSE(rep.all_passed());
    bool mentions_fault = false;
    for (const auto& e : rep.cases)
        if (e.note.find("overflow") != std::string::npos) mentions_fault = true;
    CHECK(mentions_fault);
}

TEST_CASE("conservative latency dominates eager latency with identical outputs") {
    struct Case {
        const char* file;
        const char* entry;
        std::int64_t lo, hi;
    };
    const Case cases[] = {
        {"c_node.sdf", "c", -9, 9},       {"map3f.sdf", "g", -9, 9},
        {"foldl3.sdf", "accsq", -9, 9},   {"compose.sdf", "pipeline", -9, 9},
        {"maps.sdf", "maps3422", -9, 9},  {"com.sdf", "com", 0, 255},
    };
    for (const auto& k : cases) {
        CompiledDesign eager = compile_source(corpus(k.file), k.entry);
        CompiledDesign cons =
            compile_source(corpus(k.file), k.entry, with_mode(ReadinessMode::Conservative));
        std::mt19937_64 rng(13);
        for (int i = 0; i < 5; ++i) {
            std::vector<Value> inputs;
            for (const auto& s : eager.input_shapes)
                inputs.push_back(random_value(s, rng, k.lo, k.hi));
            SimOutcome oe = simulate(eager, inputs);
            SimOutcome oc = simulate(cons, inputs);
            INFO(k.file << " " << k.entry);
            CHECK(oc.latency >= oe.latency);
            CHECK(oe.output == oc.output);
        }
    }
}

TEST_CASE("identical runs produce byte-identical traces and outputs") {
    CompiledDesign a = compile_source(corpus("compose.sdf"), "pipeline");
    CompiledDesign b = compile_source(corpus("compose.sdf"), "pipeline");
    std::mt19937_64 r1(7), r2(7);
    std::vector<Value> i1{random_value(a.input_shapes[0], r1, -9, 9)};
    std::vector<Value> i2{random_value(b.input_shapes[0], r2, -9, 9)};
    SimOutcome o1 = simulate(a, i1, -1, true);
    SimOutcome o2 = simulate(b, i2, -1, true);
    CHECK(trace_jsonl(a, o1.raw) == trace_jsonl(b, o2.raw));
    CHECK(value_to_json(o1.output).dump() == value_to_json(o2.output).dump());
}

TEST_CASE("latency never beats the critical path in firing latencies") {
    // The chain a -> b has two 1-cycle firings in sequence.
    CompiledDesign c = compile_source(
        "a ([1], x) = ([1], o)\n  where\n    o = 2 * x\n"
        "b ([1], y) = ([1], z)\n  where\n    z = y + 1\n"
        "top x = b (a x)\n",
        "top");
    SimOutcome out = simulate(c, {Value(5)});
    CHECK(out.latency >= 2);
    CHECK(out.output == Value(11));
}

TEST_CASE("max-cycles bound aborts the run") {
    CompiledDesign c = compile_source(corpus("maps.sdf"), "maps1111");
    Value in = filled(parse_shape("6x8x4x4"), 1);
    CHECK_THROWS_AS(simulate(c, {in}, 10), SimFault);
}

TEST_CASE("missing input data is diagnosed as a deadlock") {
    CompiledDesign c = compile_source(corpus("map3f.sdf"), "g");
    // Starve the design: drop the source's scheduled emissions.
    for (auto& inst : c.design.insts)
        if (inst.kind == InstKind::Source) inst.source_sched.clear();
    try {
        simulate(c, {vec({1, 2, 3})});
        FAIL("expected a deadlock fault");
    } catch (const SimFault& f) {
        CHECK(f.kind() == SimFault::Kind::Deadlock);
        CHECK(std::string(f.what()).find("waiting on edge") != std::string::npos);
    }
}

TEST_CASE("pipeline measurement") {
    SECTION("combinational-only program: latency 1, interval 1") {
        CompileOptions opt;
        opt.input_shapes = {Shape::scalar(), Shape::scalar()};
        CompiledDesign c = compile_source(corpus("comb_only.sdf"), "addmul", opt);
        std::vector<std::vector<Value>> frames;
        for (int f = 0; f < 3; ++f) frames.push_back({Value(f + 1), Value(f + 2)});
        PipelineFigures fig = measure_pipeline(c, 3, frames);
        CHECK(fig.latency == 1);
        CHECK(fig.initiation_interval == 1);
    }
    SECTION("unit-rate node streams back-to-back") {
        CompiledDesign c = compile_source(corpus("map3f.sdf"), "g");
        std::vector<std::vector<Value>> frames;
        for (int f = 0; f < 4; ++f) frames.push_back({vec({f, f + 1, f + 2})});
        PipelineFigures fig = measure_pipeline(c, 4, frames);
        CHECK(fig.latency == 1);
        CHECK(fig.initiation_interval == 1);
    }
}

TEST_CASE("imap indices reach the simulated hardware") {
    CompiledDesign c = compile_source("w xs = imap [4] (\\i a -> (i + 1) * a) xs\n", "w");
    SimOutcome out = simulate(c, {vec({10, 10, 10, 10})});
    CHECK(out.output == vec({10, 20, 30, 40}));
}

TEST_CASE("transpose flows through the buffered pipeline") {
    CompiledDesign c = compile_source(corpus("com.sdf"), "com");
    // A single bright pixel at (2, 6): row coordinate 3, column 7.
    std::vector<std::int64_t> flat(64, 0);
    flat[2 * 8 + 6] = 5;
    SimOutcome out = simulate(c, {Value::from_flat(parse_shape("8x8"), flat)});
    CHECK(out.output == vec({3, 7}));
}

TEST_CASE("refire waits for the next firing's own tokens") {
    // b emits 2 tokens every second cycle; a consumes 2 per one-cycle firing.
    // a must fire at 2, 4, 6, ... and never refire speculatively.
    CompiledDesign c = compile_source(
        "b ([1,1], y) = ([0,2], o)\n  where\n    o = [fold (+) y, fold (*) y]\n"
        "a ([2], x) = ([1], z)\n  where\n    z = fold (+) x\n"
        "top ys = w\n  where\n    w = map [1,1,1] a p\n    p = b3 ys\n"
        "    b3 = map [1,1,1] bb\n    bb zs = b zs\n",
        "top", CompileOptions{{{parse_shape("3x2")}}, {}, 32, 1});
    std::mt19937_64 rng(41);
    std::vector<Value> inputs{random_value(c.input_shapes[0], rng, -9, 9)};
    SimOutcome out = simulate(c, inputs);
    CHECK(out.output == golden_eval(*c.prog, c.entry, inputs));
    // The a-instance fires only when both tokens of a firing are present.
    for (std::size_t i = 0; i < c.design.insts.size(); ++i) {
        const Inst& inst = c.design.insts[i];
        if (inst.kind == InstKind::Def && inst.def->name == "a") {
            REQUIRE(out.raw.firing_starts[i].size() == 3);
            CHECK(out.raw.firing_starts[i][1] - out.raw.firing_starts[i][0] >= 2);
        }
    }
}
