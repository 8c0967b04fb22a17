#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sdfap/parser.hpp"
#include "sdfap/sema.hpp"
#include "sdfap/shapes.hpp"

using namespace sdfap;

namespace {

Program parsed(const std::string& src) { return resolve(parse_program_text(src)); }

const char* kComRows = R"(comRows xss = div sumMR sumM
  where
    m = map [8] (fold (+)) xss
    mr = imap [8] (\i a -> (i + 1) * a) m
    sumM = fold [8] (+) m
    sumMR = fold [8] (+) mr
)";

} // namespace

TEST_CASE("parse annotated definition") {
    Program p = parsed("c ([3], i) = ([2], o)\n  where\n    o = [fold (+) i, fold (*) i]\n");
    REQUIRE(p.defs.size() == 1);
    const Definition& c = p.defs[0];
    CHECK(c.name == "c");
    REQUIRE(c.params.size() == 1);
    CHECK(c.params[0].annotation == std::vector<std::int64_t>{3});
    CHECK(c.output_annotation == std::vector<std::int64_t>{2});
    CHECK(c.bindings.size() == 1);
    CHECK(c.annotated());
}

TEST_CASE("parse unannotated HoF definition") {
    Program p = parsed("g xs = os\n  where\n    os = map [3] f xs\nf ([1], x) = ([1], o)\n  where\n    o = x * x\n");
    const Definition* g = p.find("g");
    REQUIRE(g != nullptr);
    CHECK_FALSE(g->annotated());
    REQUIRE(g->bindings.size() == 1);
    const ExprPtr& os = g->bindings[0].body;
    REQUIRE(os->kind == ExprKind::HofApply);
    CHECK(os->hof == HofKind::Map);
    CHECK(os->hof_pattern == std::vector<std::int64_t>{3});
}

TEST_CASE("empty file is an error") {
    CHECK_THROWS_AS(parse_program_text(""), CompileError);
    CHECK_THROWS_AS(parse_program_text("-- only a comment\n"), CompileError);
}

TEST_CASE("errors carry line and column") {
    try {
        parse_program_text("f x = x +\n");
        FAIL("expected error");
    } catch (const CompileError& e) {
        CHECK(e.pos().line == 1);
        CHECK(std::string(e.what()).find("1:") == 0);
    }
}

TEST_CASE("duplicate definitions rejected") {
    CHECK_THROWS_WITH(parsed("f x = x\nf y = y\n"), Catch::Matchers::ContainsSubstring("duplicate"));
}

TEST_CASE("unresolved names rejected") {
    CHECK_THROWS_WITH(parsed("f x = ghost x\n"), Catch::Matchers::ContainsSubstring("unresolved"));
}

TEST_CASE("recursive definitions rejected") {
    CHECK_THROWS_WITH(parsed("f x = g x\ng x = f x\n"),
                      Catch::Matchers::ContainsSubstring("recursive"));
}

TEST_CASE("mixed annotation rejected") {
    CHECK_THROWS_WITH(parsed("c ([3], i) j = ([2], o)\n  where\n    o = [fold (+) i, j]\n"),
                      Catch::Matchers::ContainsSubstring("mixes"));
    CHECK_THROWS_WITH(parsed("c ([3], i) = o\n  where\n    o = i\n"),
                      Catch::Matchers::ContainsSubstring("mixes"));
}

TEST_CASE("pattern length mismatch between param and output rejected") {
    CHECK_THROWS_WITH(parsed("c ([1,1], i) = ([2], o)\n  where\n    o = [fold (+) i, 1]\n"),
                      Catch::Matchers::ContainsSubstring("pattern length"));
}

TEST_CASE("pretty-print round trip") {
    const char* sources[] = {
        "c ([3], i) = ([2], o)\n  where\n    o = [fold (+) i, fold (*) i]\n",
        kComRows,
        "square x = x * x\nmaps6844 xs = os\n  where\n    os = map [6] maps844 xs\n"
        "    maps844 = map [8] maps44\n    maps44 = map [4] maps4\n    maps4 = map [4] square\n",
        "f a b = a * b\ntop a b = f a b - 2 * a + 1\n",
        "weird x = div (x + 1) (x - 1)\n",
        "neg x = 0 - x + (0 - 3)\n",
        "foo xss = oss\n  where\n    oss = map [2,2] bar xss\n    bar xs = map [1,1,1] f xs\n"
        "    f x = x + 3\n",
    };
    for (const char* src : sources) {
        Program p1 = parse_program_text(src);
        Program p2 = parse_program_text(print_program(p1));
        CHECK(equal(p1, p2));
    }
}

TEST_CASE("classification of definitions") {
    std::string src = std::string("sq x = x * x\n") +
                      "c ([3], i) = ([2], o)\n  where\n    o = [fold (+) i, fold (*) i]\n" + kComRows;
    Program p = parsed(src);
    auto cls = classify_definitions(p);
    CHECK(cls.at("c").cls == DefClass::SdfapNode);
    CHECK(cls.at("sq").cls == DefClass::Combinational);
    CHECK_FALSE(cls.at("sq").contains_sdfap_descendants);
    CHECK(cls.at("comRows").cls == DefClass::Combinational);
    CHECK(cls.at("comRows").contains_sdfap_descendants);

    auto cls2 = classify_definitions(p);
    CHECK(cls.size() == cls2.size());
    for (const auto& [k, v] : cls) {
        CHECK(cls2.at(k).cls == v.cls);
        CHECK(cls2.at(k).contains_sdfap_descendants == v.contains_sdfap_descendants);
    }
}

TEST_CASE("transitive descendants through helper calls") {
    std::string src = std::string("f ([1], x) = ([1], o)\n  where\n    o = x * x\n") +
                      "useF xs = map [3] f xs\n" + "outer xs = useF xs\n";
    Program p = parsed(src);
    auto cls = classify_definitions(p);
    CHECK(cls.at("useF").contains_sdfap_descendants);
    CHECK(cls.at("outer").contains_sdfap_descendants);
}

TEST_CASE("point-free bindings are eta-expanded") {
    Program p = parsed("square x = x * x\nmaps44 xs = os\n  where\n    os = map [4] maps4 xs\n"
                       "    maps4 = map [4] square\n");
    const Definition* d = p.find("maps44");
    REQUIRE(d != nullptr);
    const Binding* maps4 = nullptr;
    for (const auto& b : d->bindings)
        if (b.name == "maps4") maps4 = &b;
    REQUIRE(maps4 != nullptr);
    REQUIRE(maps4->params.size() == 1);
    REQUIRE(maps4->body->kind == ExprKind::HofApply);
    CHECK(maps4->body->args.size() == 1);
}

TEST_CASE("shape checking accepts matching patterns") {
    Program p = parsed("h xs = fold (+) xs\ntop xs = os\n  where\n    os = map [6] h xs\n");
    ShapeReport rep = check_shapes(p, "top", {parse_shape("6x3")});
    CHECK(rep.output == parse_shape("6"));
}

TEST_CASE("shape checking rejects pattern sum mismatch") {
    Program p = parsed("f x = x * x\ntop xs = os\n  where\n    os = map [2,2] f xs\n");
    CHECK_THROWS_WITH(check_shapes(p, "top", {parse_shape("5")}),
                      Catch::Matchers::ContainsSubstring("sums to 4"));
}

TEST_CASE("transpose shape") {
    Program p = parsed("t im = transpose im\n");
    CHECK(check_shapes(p, "t", {parse_shape("8x8")}).output == parse_shape("8x8"));
    CHECK(check_shapes(p, "t", {parse_shape("2x5")}).output == parse_shape("5x2"));
    CHECK_THROWS_AS(check_shapes(p, "t", {parse_shape("8")}), CompileError);
}

TEST_CASE("annotated definition consumption shape") {
    Program p = parsed("c ([3], i) = ([2], o)\n  where\n    o = [fold (+) i, fold (*) i]\n");
    CHECK(check_shapes(p, "c", {parse_shape("3")}).output == parse_shape("2"));
    CHECK_THROWS_AS(check_shapes(p, "c", {parse_shape("4")}), CompileError);
}

TEST_CASE("shape inference from patterns") {
    SECTION("maps6844") {
        Program p = parsed(
            "square x = x * x\n"
            "maps6844 xs = os\n  where\n    os = map [6] maps844 xs\n    maps844 = map [8] maps44\n"
            "    maps44 = map [4] maps4\n    maps4 = map [4] square\n");
        auto shapes = infer_entry_shapes(p, "maps6844");
        REQUIRE(shapes.has_value());
        REQUIRE(shapes->size() == 1);
        CHECK((*shapes)[0] == parse_shape("6x8x4x4"));
    }
    SECTION("com 8x8 via transpose") {
        std::string src = std::string(kComRows) +
                          "com im = o\n  where\n    x = comRows im\n    y = comRows (transpose im)\n"
                          "    o = [x, y]\n";
        Program p = parsed(src);
        auto shapes = infer_entry_shapes(p, "com");
        REQUIRE(shapes.has_value());
        CHECK((*shapes)[0] == parse_shape("8x8"));
    }
    SECTION("annotated node") {
        Program p = parsed("c ([3], i) = ([2], o)\n  where\n    o = [fold (+) i, fold (*) i]\n");
        auto shapes = infer_entry_shapes(p, "c");
        REQUIRE(shapes.has_value());
        CHECK((*shapes)[0] == parse_shape("3"));
    }
    SECTION("unconstrained dimension stays unknown") {
        Program p = parsed("s xs = fold (+) xs\n");
        CHECK_FALSE(infer_entry_shapes(p, "s").has_value());
    }
}

TEST_CASE("random shape perturbation is rejected exactly when sums mismatch") {
    std::mt19937_64 rng(7);
    for (int iter = 0; iter < 100; ++iter) {
        int n = 1 + static_cast<int>(rng() % 7);
        int delta = static_cast<int>(rng() % 3); // 0 = consistent
        std::string src = "f x = x + 1\ntop xs = os\n  where\n    os = map [" +
                          std::to_string(n) + "] f xs\n";
        Program p = parsed(src);
        Shape in = parse_shape(std::to_string(n + delta));
        if (delta == 0) {
            CHECK_NOTHROW(check_shapes(p, "top", {in}));
        } else {
            CHECK_THROWS_AS(check_shapes(p, "top", {in}), CompileError);
        }
    }
}
