#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sdfap/golden.hpp"
#include "sdfap/parser.hpp"
#include "sdfap/sema.hpp"

using namespace sdfap;

namespace {

Program parsed(const std::string& src) { return resolve(parse_program_text(src)); }

Value vec(std::vector<std::int64_t> xs) {
    std::vector<Value> vs;
    for (auto x : xs) vs.emplace_back(x);
    return Value(std::move(vs));
}

Value filled(const Shape& shape, std::int64_t x) {
    std::vector<std::int64_t> flat(static_cast<std::size_t>(shape.total_scalars()), x);
    return Value::from_flat(shape, flat);
}

const char* kCom = R"(coms ims = map [64,64,64,64] com ims

com im = o
  where
    x = comRows im
    y = comRows (transpose im)
    o = [x, y]

comRows xss = div sumMR sumM
  where
    m = map [8] (fold (+)) xss
    mr = imap [8] (\i a -> (i + 1) * a) m
    sumM = fold [8] (+) m
    sumMR = fold [8] (+) mr
)";

} // namespace

TEST_CASE("elementwise square over a 3x6x4 input of all 2s") {
    Program p = parsed("square x = x * x\ncube xs = map [3] (map [6] (map [4] square)) xs\n");
    Value in = filled(parse_shape("3x6x4"), 2);
    Value out = golden_eval(p, "cube", {in});
    CHECK(out == filled(parse_shape("3x6x4"), 4));
}

TEST_CASE("fold (+) over 1..8") {
    Program p = parsed("s xs = fold (+) xs\n");
    CHECK(golden_eval(p, "s", {vec({1, 2, 3, 4, 5, 6, 7, 8})}) == Value(36));
}

TEST_CASE("foldl with initial accumulator") {
    Program p = parsed("acc s xs = foldl [3] n s xs\nn ([1], a) ([1], x) = ([1], o)\n"
                       "  where\n    o = a + x * x\n");
    CHECK(golden_eval(p, "acc", {Value(10), vec({1, 2, 3})}) == Value(10 + 1 + 4 + 9));
}

TEST_CASE("imap passes the element index") {
    Program p = parsed("w xs = imap (\\i a -> (i + 1) * a) xs\n");
    CHECK(golden_eval(p, "w", {vec({5, 5, 5})}) == vec({5, 10, 15}));
}

TEST_CASE("transpose swaps the outer dimensions") {
    Program p = parsed("t im = transpose im\n");
    Value in = Value(std::vector<Value>{vec({1, 2, 3}), vec({4, 5, 6})});
    Value out = golden_eval(p, "t", {in});
    CHECK(out == Value(std::vector<Value>{vec({1, 4}), vec({2, 5}), vec({3, 6})}));
}

TEST_CASE("div truncates toward zero and rejects zero divisors") {
    Program p = parsed("q a b = div a b\n");
    CHECK(golden_eval(p, "q", {Value(7), Value(2)}) == Value(3));
    CHECK(golden_eval(p, "q", {Value(-7), Value(2)}) == Value(-3));
    CHECK(golden_eval(p, "q", {Value(7), Value(-2)}) == Value(-3));
    CHECK_THROWS_AS(golden_eval(p, "q", {Value(1), Value(0)}), EvalError);
}

TEST_CASE("scalar width wraps arithmetic") {
    Program p = parsed("m a b = a * b\n");
    // 2^20 * 2^20 overflows 32 bits: wraps to 0 at width 32, exact at 64.
    Value big(1 << 20);
    CHECK(golden_eval(p, "m", {big, big}, 32) == Value(0));
    CHECK(golden_eval(p, "m", {big, big}, 64) == Value(std::int64_t{1} << 40));
    // 8-bit: 100*3 = 300 wraps to 44.
    CHECK(golden_eval(p, "m", {Value(100), Value(3)}, 8) == Value(44));
}

// Independent oracle: for a single nonzero pixel of mass m at (r, c), the
// row-coordinate center of mass is div(sum((i+1)*row_i), sum(row_i)) = r+1
// and the column coordinate is c+1. Brute-forced over all pixel positions.
TEST_CASE("center of mass golden oracle over single-pixel images") {
    Program p = parsed(kCom);
    for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 8; ++c) {
            std::vector<std::int64_t> flat(64, 0);
            flat[static_cast<std::size_t>(r * 8 + c)] = 7; // any positive mass
            Value im = Value::from_flat(parse_shape("8x8"), flat);
            Value out = golden_eval(p, "com", {im});
            REQUIRE(out.size() == 2);
            CHECK(out[0] == Value(r + 1));
            CHECK(out[1] == Value(c + 1));
        }
    }
}

TEST_CASE("comRows matches a directly computed mass formula on random images") {
    Program p = parsed(kCom);
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::int64_t> pix(0, 255);
    for (int iter = 0; iter < 50; ++iter) {
        std::vector<std::int64_t> flat(64);
        for (auto& x : flat) x = pix(rng);
        Value im = Value::from_flat(parse_shape("8x8"), flat);

        std::int64_t sumM = 0, sumMR = 0;
        for (int r = 0; r < 8; ++r) {
            std::int64_t row = 0;
            for (int c = 0; c < 8; ++c) row += flat[static_cast<std::size_t>(r * 8 + c)];
            sumM += row;
            sumMR += (r + 1) * row;
        }
        if (sumM == 0) continue;
        Value out = golden_eval(p, "comRows", {im});
        CHECK(out == Value(sumMR / sumM));
    }
}

TEST_CASE("coms maps com over 256 blocks") {
    Program p = parsed(kCom);
    std::vector<std::int64_t> flat(256 * 64, 0);
    // every block gets a single pixel at (3, 5)
    for (int b = 0; b < 256; ++b) flat[static_cast<std::size_t>(b * 64 + 3 * 8 + 5)] = 9;
    Value ims = Value::from_flat(parse_shape("256x8x8"), flat);
    Value out = golden_eval(p, "coms", {ims});
    REQUIRE(out.size() == 256);
    for (int b = 0; b < 256; ++b) CHECK(out[static_cast<std::size_t>(b)] == vec({4, 6}));
}

TEST_CASE("evaluation errors name the problem") {
    Program p = parsed("f xs = fold (+) xs\n");
    CHECK_THROWS_AS(golden_eval(p, "f", {Value(3)}), EvalError);           // scalar, not vector
    CHECK_THROWS_AS(golden_eval(p, "f", {Value(3), Value(4)}), EvalError); // arity
}
