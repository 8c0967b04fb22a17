#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sdfap/pattern.hpp"

using namespace sdfap;

namespace {

Pattern pat(const std::string& s) { return parse_pattern(s); }

// Random pattern up to the given depth, levels of 1..4 entries in 0..4 with
// at least one positive entry.
Pattern random_pattern(std::mt19937_64& rng, int depth) {
    std::uniform_int_distribution<int> len_dist(1, 4);
    std::uniform_int_distribution<std::int64_t> entry_dist(0, 4);
    auto level = [&] {
        std::vector<std::int64_t> entries(static_cast<std::size_t>(len_dist(rng)));
        bool positive = false;
        for (auto& e : entries) {
            e = entry_dist(rng);
            positive = positive || e > 0;
        }
        if (!positive) entries[0] = 1;
        return entries;
    };
    Pattern p = Pattern::flat(level());
    for (int i = 1; i < depth; ++i) p = Pattern::hier(level(), p);
    return p;
}

} // namespace

TEST_CASE("firing latency") {
    CHECK(pat("[2]").firing_latency() == 1);
    CHECK(pat("([1,1,1]|[6]|[4])").firing_latency() == 3);
    CHECK(pat("([1,1,1]|[3,3]|[2,2])").firing_latency() == 12);
    CHECK(pat("[2,2]").firing_latency() == 2);
    CHECK(pat("([3]|[6]|[4])").firing_latency() == 1);
}

TEST_CASE("tokens per firing") {
    CHECK(pat("[3]").tokens_per_firing() == 3);
    CHECK(pat("([3]|[1])").tokens_per_firing() == 3);
    CHECK(pat("[0,0,1]").tokens_per_firing() == 1);
    CHECK(pat("([3]|[6]|[4])").tokens_per_firing() == 72);
}

TEST_CASE("max parallel") {
    CHECK(pat("([3]|[6]|[4])").max_parallel() == 72);
    CHECK(pat("([1,1,1]|[6]|[4])").max_parallel() == 24);
    CHECK(pat("([1,1,1]|[3,3]|[2,2])").max_parallel() == 6);
}

TEST_CASE("display notation") {
    CHECK(Pattern::hier({2, 2}, Pattern::flat({1, 1, 1})).display() == "([2,2]|[1,1,1])");
    CHECK(Pattern::flat({3}).display() == "[3]");
    CHECK(Pattern::hier({3}, Pattern::hier({6}, Pattern::flat({4}))).display() == "([3]|[6]|[4])");
}

TEST_CASE("phase tokens") {
    CHECK(pat("[2,2]").phase_tokens(1) == 2);
    // Brute-force phase table of ([2]|[1,1]): one outer phase of 2 spanning
    // two inner cycles of 1 token each: 2*1 = 2 tokens in each cycle.
    CHECK(pat("([2]|[1,1])").phase_tokens(0) == 2);
    CHECK(pat("([2]|[1,1])").phase_tokens(1) == 2);
    CHECK(pat("[3]").phase_tokens(0) == 3);
    CHECK_THROWS_AS(pat("[3]").phase_tokens(1), CompileError);
    CHECK_THROWS_AS(pat("[3]").phase_tokens(-1), CompileError);

    // ([1,1,1]|[3,3]|[2,2]) has 12 phases of 6 tokens each.
    Pattern p = pat("([1,1,1]|[3,3]|[2,2])");
    for (std::int64_t c = 0; c < 12; ++c) CHECK(p.phase_tokens(c) == 6);
}

TEST_CASE("pattern invariants rejected") {
    CHECK_THROWS_AS(Pattern::flat({}), CompileError);
    CHECK_THROWS_AS(Pattern::flat({0, 0}), CompileError);
    CHECK_THROWS_AS(Pattern::flat({-1, 2}), CompileError);
    CHECK_NOTHROW(Pattern::flat({0, 1}));
}

TEST_CASE("pattern properties over random patterns") {
    std::mt19937_64 rng(42);
    for (int iter = 0; iter < 500; ++iter) {
        Pattern p = random_pattern(rng, 1 + static_cast<int>(rng() % 4));

        std::int64_t total = 0;
        for (std::int64_t c = 0; c < p.firing_latency(); ++c) total += p.phase_tokens(c);
        CHECK(total == p.tokens_per_firing());

        std::int64_t lat = p.firing_latency();
        CHECK(p.max_parallel() >= (p.tokens_per_firing() + lat - 1) / lat);

        CHECK(parse_pattern(p.display()) == p);
    }
}

TEST_CASE("pattern parse errors") {
    CHECK_THROWS_AS(parse_pattern(""), CompileError);
    CHECK_THROWS_AS(parse_pattern("[]"), CompileError);
    CHECK_THROWS_AS(parse_pattern("[1]|[2]"), CompileError);
    CHECK_THROWS_AS(parse_pattern("([1]|[2]"), CompileError);
    CHECK_THROWS_AS(parse_pattern("[1,2] junk"), CompileError);
}
