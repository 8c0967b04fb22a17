#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sdfap/diagnostics.hpp"

namespace sdfap {

// An access pattern: per-cycle token counts during one firing of a node.
// A flat pattern has depth 1. A hierarchical pattern ([a,b]|inner) sequences
// one full inner firing per outer entry; each outer phase lasts as many
// cycles as the inner pattern. Stored as levels, outermost first.
class Pattern {
public:
    Pattern() = default;

    static Pattern flat(std::vector<std::int64_t> entries) {
        Pattern p;
        p.push_level(std::move(entries));
        return p;
    }

    static Pattern hier(std::vector<std::int64_t> entries, const Pattern& inner) {
        Pattern p;
        p.push_level(std::move(entries));
        for (const auto& lvl : inner.levels_) p.levels_.push_back(lvl);
        return p;
    }

    bool empty() const { return levels_.empty(); }
    int depth() const { return static_cast<int>(levels_.size()); }
    const std::vector<std::vector<std::int64_t>>& levels() const { return levels_; }
    const std::vector<std::int64_t>& outer() const { return levels_.front(); }

    // Pattern for one level deeper; precondition depth() > 1.
    Pattern inner() const {
        Pattern p;
        p.levels_.assign(levels_.begin() + 1, levels_.end());
        return p;
    }

    // Number of clock cycles one firing takes: the flattened phase count.
    std::int64_t firing_latency() const {
        std::int64_t n = 1;
        for (const auto& lvl : levels_) n *= static_cast<std::int64_t>(lvl.size());
        return n;
    }

    // Tokens moved over one complete firing.
    std::int64_t tokens_per_firing() const {
        std::int64_t n = 1;
        for (const auto& lvl : levels_)
            n *= std::accumulate(lvl.begin(), lvl.end(), std::int64_t{0});
        return n;
    }

    // Widest per-cycle transfer: product of per-level maxima. This is the
    // number of parallel hardware lanes the pattern demands.
    std::int64_t max_parallel() const {
        std::int64_t n = 1;
        for (const auto& lvl : levels_)
            n *= *std::max_element(lvl.begin(), lvl.end());
        return n;
    }

    // Tokens moved in one specific cycle of a firing, 0 <= cycle < firing_latency().
    std::int64_t phase_tokens(std::int64_t cycle) const {
        if (cycle < 0 || cycle >= firing_latency())
            throw CompileError("pattern phase index " + std::to_string(cycle) + " out of range");
        std::int64_t n = 1;
        std::int64_t rem = cycle;
        std::int64_t span = firing_latency();
        for (const auto& lvl : levels_) {
            span /= static_cast<std::int64_t>(lvl.size());
            n *= lvl[static_cast<std::size_t>(rem / span)];
            rem %= span;
        }
        return n;
    }

    // "[a,b]" for flat patterns, "([a]|[b]|...)" for hierarchical ones.
    std::string display() const {
        std::ostringstream os;
        if (depth() > 1) os << "(";
        for (std::size_t i = 0; i < levels_.size(); ++i) {
            if (i) os << "|";
            os << level_str(levels_[i]);
        }
        if (depth() > 1) os << ")";
        return os.str();
    }

    bool operator==(const Pattern& o) const { return levels_ == o.levels_; }
    bool operator!=(const Pattern& o) const { return !(*this == o); }

private:
    static std::string level_str(const std::vector<std::int64_t>& lvl) {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < lvl.size(); ++i) {
            if (i) os << ",";
            os << lvl[i];
        }
        os << "]";
        return os.str();
    }

    void push_level(std::vector<std::int64_t> entries) {
        validate_level(entries);
        levels_.insert(levels_.begin(), std::move(entries));
    }

    static void validate_level(const std::vector<std::int64_t>& entries) {
        if (entries.empty())
            throw CompileError("pattern level must be non-empty");
        bool positive = false;
        for (auto e : entries) {
            if (e < 0) throw CompileError("pattern entries must be nonnegative");
            if (e > 0) positive = true;
        }
        if (!positive)
            throw CompileError("pattern must contain at least one positive entry");
    }

    std::vector<std::vector<std::int64_t>> levels_;
};

// Parses the display notation back into a pattern: "[1,2]" or "([2,2]|[1,1,1])".
inline Pattern parse_pattern(const std::string& text) {
    std::size_t i = 0;
    auto fail = [&](const std::string& why) -> void {
        throw CompileError("invalid pattern '" + text + "': " + why);
    };
    auto skip_ws = [&] {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    };
    auto parse_level = [&]() -> std::vector<std::int64_t> {
        skip_ws();
        if (i >= text.size() || text[i] != '[') fail("expected '['");
        ++i;
        std::vector<std::int64_t> entries;
        while (true) {
            skip_ws();
            std::size_t start = i;
            while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
            if (i == start) fail("expected integer");
            entries.push_back(std::stoll(text.substr(start, i - start)));
            skip_ws();
            if (i < text.size() && text[i] == ',') { ++i; continue; }
            break;
        }
        if (i >= text.size() || text[i] != ']') fail("expected ']'");
        ++i;
        return entries;
    };

    skip_ws();
    std::vector<std::vector<std::int64_t>> levels;
    bool parenthesized = i < text.size() && text[i] == '(';
    if (parenthesized) ++i;
    levels.push_back(parse_level());
    skip_ws();
    while (i < text.size() && text[i] == '|') {
        ++i;
        levels.push_back(parse_level());
        skip_ws();
    }
    if (parenthesized) {
        if (i >= text.size() || text[i] != ')') fail("expected ')'");
        ++i;
    }
    skip_ws();
    if (i != text.size()) fail("trailing characters");
    if (levels.size() > 1 && !parenthesized) fail("hierarchical pattern needs parentheses");

    Pattern p = Pattern::flat(levels.back());
    for (auto it = levels.rbegin() + 1; it != levels.rend(); ++it)
        p = Pattern::hier(*it, p);
    return p;
}

} // namespace sdfap
