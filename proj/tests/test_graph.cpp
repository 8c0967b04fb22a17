#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "sdfap/dot.hpp"
#include "sdfap/json_export.hpp"
#include "sdfap/sim.hpp"

using namespace sdfap;

namespace {

Program parsed(const std::string& src) { return resolve(parse_program_text(src)); }

AppDag dag_for(const Program& p, const std::string& entry, const std::vector<Shape>& shapes) {
    auto cls = classify_definitions(p);
    return build_dag(p, cls, entry, shapes);
}

int count_kind(const AppDag& d, DagKind k) {
    int n = 0;
    for (const auto& node : d.nodes) n += node.kind == k ? 1 : 0;
    return n;
}

int count_insts(const ExpandedDesign& d, InstKind k) {
    int n = 0;
    for (const auto& i : d.insts) n += i.kind == k ? 1 : 0;
    return n;
}

CompileOptions with_shapes(std::vector<Shape> shapes) {
    CompileOptions opt;
    opt.input_shapes = std::move(shapes);
    return opt;
}

} // namespace

TEST_CASE("application with four arguments becomes one node with four in-edges") {
    Program p = parsed("f a b c d = a * b + c * d\ntop a b c d = f a b c d\n");
    AppDag d = dag_for(p, "top",
                       {Shape::scalar(), Shape::scalar(), Shape::scalar(), Shape::scalar()});
    REQUIRE(d.source_nodes.size() == 4);
    CHECK(count_kind(d, DagKind::Comb) == 1);
    const DagNode* f = nullptr;
    for (const auto& n : d.nodes)
        if (n.kind == DagKind::Comb) f = &n;
    REQUIRE(f != nullptr);
    CHECK(f->in_edges.size() == 4);
}

TEST_CASE("nested calls of an annotated node become distinct instances") {
    Program p = parsed("g ([1], x) = ([1], o)\n  where\n    o = x + 1\ntop x = g (g x)\n");
    AppDag d = dag_for(p, "top", {Shape::scalar()});
    CHECK(count_kind(d, DagKind::SdfCall) == 2);
    std::set<std::string> labels;
    for (const auto& n : d.nodes)
        if (n.kind == DagKind::SdfCall) labels.insert(n.label);
    CHECK(labels.size() == 2);
}

TEST_CASE("identity program connects source to sink without compute nodes") {
    Program p = parsed("idp x = o\n  where\n    o = x\n");
    AppDag d = dag_for(p, "idp", {parse_shape("4")});
    CHECK(count_kind(d, DagKind::Comb) == 0);
    CHECK(count_kind(d, DagKind::SdfCall) == 0);
    const DagEdge& se = d.edge(d.node(d.sink_node).in_edges.at(0));
    CHECK(d.node(se.from).kind == DagKind::Source);
}

TEST_CASE("map over an SDF-AP node expands to max(q) instances") {
    CompiledDesign c = compile_source(
        "f ([1], x) = ([1], o)\n  where\n    o = x * x\ng xs = map [3] f xs\n", "g");
    CHECK(count_insts(c.design, InstKind::Def) == 3);
    bool found = false;
    for (const auto& e : c.design.edge_catalog)
        if (e.cp && e.cp->display() == "([3]|[1])") found = true;
    CHECK(found);
}

TEST_CASE("time-multiplexed map instantiates max(q) physical instances") {
    CompiledDesign c = compile_source(
        "f ([1], x) = ([1], o)\n  where\n    o = x * x\ng xs = map [3,3] f xs\n", "g");
    CHECK(count_insts(c.design, InstKind::Def) == 3); // not 6
}

TEST_CASE("foldl expands into a chain with dependency edges") {
    CompiledDesign c = compile_source(
        "n ([1], a) ([1], x) = ([1], o)\n  where\n    o = a + x\n"
        "top s xs = foldl [3] n s xs\n",
        "top");
    CHECK(count_insts(c.design, InstKind::Def) == 3);
    int chain = 0;
    for (const auto& f : c.design.fifos) {
        const Inst& from = c.design.inst(f.producer);
        const Inst& to = c.design.inst(f.consumer);
        if (from.kind == InstKind::Def && to.kind == InstKind::Def) chain++;
    }
    CHECK(chain == 2);
}

TEST_CASE("annotated HoF over combinational logic coalesces into one node") {
    CompiledDesign c = compile_source("top xss = map [8] (fold (+)) xss\n", "top",
                                      with_shapes({parse_shape("8x5")}));
    CHECK(count_insts(c.design, InstKind::MapHof) == 1);
    CHECK(count_insts(c.design, InstKind::Def) == 0);
}

TEST_CASE("nested maps expand the full hierarchy") {
    CompiledDesign c = compile_source(
        "square x = x * x\n"
        "m xs = os\n  where\n    os = map [3,3] maps422 xs\n    maps422 = map [4,4] maps22\n"
        "    maps22 = map [2,2] maps2\n    maps2 = map [2,2] square\n",
        "m");
    CHECK(count_insts(c.design, InstKind::MapHof) == 24); // 3*4*2
    REQUIRE(c.design.top_groups.size() == 1);
    const GroupInfo& top = c.design.groups[static_cast<std::size_t>(c.design.top_groups[0])];
    CHECK(top.subgroups.size() == 3);
}

TEST_CASE("pattern propagation reaches the sink edge") {
    CompiledDesign c = compile_source(
        "c ([3], i) = ([2], o)\n  where\n    o = [fold (+) i, fold (*) i]\n", "c");
    bool found = false;
    for (const auto& e : c.design.edge_catalog)
        if (e.to.rfind("out", 0) == 0 && e.pp && e.pp->display() == "[2]") found = true;
    CHECK(found);
}

TEST_CASE("conflicting producer patterns at a combinational node are rejected") {
    // One producer delivers 2 scalars in one cycle, the other 1+1 over two
    // cycles; a combinational adder cannot unify them.
    std::string src =
        "a ([1], x) = ([2], o)\n  where\n    o = [x, x + 1]\n"
        "b ([1,0], x) = ([1,1], o)\n  where\n    o = [x, x + 2]\n"
        "top x = w\n  where\n    p = a x\n    q = b x\n    w = fold (+) p - fold (+) q\n";
    CHECK_THROWS_WITH(compile_source(src, "top", with_shapes({Shape::scalar()})),
                      Catch::Matchers::ContainsSubstring("pattern conflict"));
}

TEST_CASE("unannotated HoF over SDF-AP content is rejected") {
    CHECK_THROWS_WITH(
        compile_source("f ([1], x) = ([1], o)\n  where\n    o = x + 1\ntop xs = map f xs\n", "top",
                       with_shapes({parse_shape("3")})),
        Catch::Matchers::ContainsSubstring("must carry a pattern"));
}

TEST_CASE("reshape plans") {
    SECTION("producer 4 into consumer 2+2") {
        ReshapePlan plan =
            reshape_spec(parse_pattern("[4]"), parse_pattern("[2,2]"), Shape::scalar());
        CHECK(plan.write_widths == std::vector<std::int64_t>{4});
        CHECK(plan.read_widths == std::vector<std::int64_t>{2, 2});
        CHECK_FALSE(plan.identity);
        CHECK(plan.str() == "4 -> 2x2");
    }
    SECTION("matching patterns need no conversion") {
        ReshapePlan plan =
            reshape_spec(parse_pattern("[2,2]"), parse_pattern("[2,2]"), Shape::scalar());
        CHECK(plan.identity);
    }
    SECTION("token mismatch is an error") {
        CHECK_THROWS_AS(reshape_spec(parse_pattern("[4]"), parse_pattern("[3]"), Shape::scalar()),
                        CompileError);
    }
    SECTION("composition regroups 6x3 into 2x1x9") {
        CompiledDesign c = compile_source(
            "f x = x + 1\ng x = 2 * x\n"
            "pipeline xs = ws\n  where\n    os = map [6] (map [3] f) xs\n"
            "    ws = map [2,2,2] (map [1,1,1] g) os\n",
            "pipeline");
        bool found = false;
        for (const auto& e : c.design.edge_catalog) {
            if (!e.pp || !e.cp) continue;
            FifoSpec spec = derive_fifo(c.design, e);
            if (spec.reshape.str() == "6x3 -> 2x1x9") {
                found = true;
                CHECK(spec.capacity == 9);
            }
        }
        CHECK(found);
    }
}

TEST_CASE("DOT export structure") {
    SECTION("map group renders one cluster") {
        CompiledDesign c = compile_source(
            "f ([1], x) = ([1], o)\n  where\n    o = x * x\ng xs = map [3] f xs\n", "g");
        std::string dot = emit_dot(c);
        std::size_t clusters = 0, pos = 0;
        while ((pos = dot.find("subgraph cluster_", pos)) != std::string::npos) {
            clusters++;
            pos += 1;
        }
        CHECK(clusters == 1);
        CHECK(dot.find("([3]|[1])") != std::string::npos);
    }
    SECTION("composition renders two top-level groups") {
        CompiledDesign c = compile_source(
            "f x = x + 1\ng x = 2 * x\n"
            "pipeline xs = ws\n  where\n    os = map [6] (map [3] f) xs\n"
            "    ws = map [2,2,2] (map [1,1,1] g) os\n",
            "pipeline");
        CHECK(c.design.top_groups.size() == 2);
    }
    SECTION("empty-ish graph stays valid DOT") {
        CompiledDesign c = compile_source("idp x = o\n  where\n    o = x\n", "idp",
                                          with_shapes({parse_shape("4")}));
        std::string dot = emit_dot(c);
        CHECK(dot.rfind("digraph", 0) == 0);
        CHECK(dot.find("}\n") != std::string::npos);
    }
}

TEST_CASE("token conservation on every edge of compiled programs") {
    const char* sources[] = {
        "c ([3], i) = ([2], o)\n  where\n    o = [fold (+) i, fold (*) i]\n",
        "f ([1], x) = ([1], o)\n  where\n    o = x * x\ng xs = map [3] f xs\n",
        "f x = x + 1\ng x = 2 * x\npipeline xs = ws\n  where\n    os = map [6] (map [3] f) xs\n"
        "    ws = map [2,2,2] (map [1,1,1] g) os\n",
    };
    const char* entries[] = {"c", "g", "pipeline"};
    for (int i = 0; i < 3; ++i) {
        CompiledDesign c = compile_source(sources[i], entries[i]);
        std::vector<Value> inputs;
        std::mt19937_64 rng(3);
        for (const auto& s : c.input_shapes) inputs.push_back(random_value(s, rng, -9, 9));
        SimOutcome out = simulate(c, inputs);
        for (std::size_t f = 0; f < c.design.fifos.size(); ++f) {
            CHECK(out.raw.written[f] - out.raw.read[f] == out.raw.final_occupancy[f]);
            CHECK(out.raw.written[f] == c.design.fifos[f].total);
        }
    }
}

TEST_CASE("combinational-only program has zero SDF-AP nodes and zero buffers") {
    CompiledDesign c = compile_source("addmul a b = a * b + a + b\n", "addmul",
                                      with_shapes({Shape::scalar(), Shape::scalar()}));
    CHECK(count_insts(c.design, InstKind::Def) == 0);
    CHECK(count_insts(c.design, InstKind::MapHof) == 0);
    CHECK(count_insts(c.design, InstKind::FoldHof) == 0);
    for (const auto& f : c.design.fifos) CHECK_FALSE(fifo_is_buffer(c.design, f));
}

TEST_CASE("compiling twice yields byte-identical exports") {
    const char* src =
        "square x = x * x\n"
        "m xs = os\n  where\n    os = map [3,3] inner xs\n    inner = map [2,2] square\n";
    CompiledDesign a = compile_source(src, "m");
    CompiledDesign b = compile_source(src, "m");
    CHECK(graph_json(a).dump(2) == graph_json(b).dump(2));
    CHECK(emit_dot(a) == emit_dot(b));
}
