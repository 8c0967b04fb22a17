#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sdfap {

// Position inside a DSL source file. Lines and columns are 1-based.
struct SourcePos {
    int line = 0;
    int col = 0;
};

inline std::string to_string(const SourcePos& p) {
    return std::to_string(p.line) + ":" + std::to_string(p.col);
}

// Any error detected while compiling a program: lexical, syntactic,
// classification, shape or graph construction problems. Carries the
// position so the CLI can print "file:line:col: message".
class CompileError : public std::runtime_error {
public:
    CompileError(SourcePos pos, const std::string& msg)
        : std::runtime_error(to_string(pos) + ": " + msg), pos_(pos), msg_(msg) {}

    explicit CompileError(const std::string& msg)
        : std::runtime_error(msg), pos_{0, 0}, msg_(msg) {}

    const SourcePos& pos() const { return pos_; }
    const std::string& message() const { return msg_; }

private:
    SourcePos pos_;
    std::string msg_;
};

// Runtime fault raised by the cycle-accurate simulator. Overflow and
// underflow indicate a buffer-sizing bug; they are hard faults, not stalls.
class SimFault : public std::runtime_error {
public:
    enum class Kind { Overflow, Underflow, Deadlock, MaxCyclesExceeded, Eval };

    SimFault(Kind kind, std::string where, long cycle, const std::string& msg)
        : std::runtime_error("cycle " + std::to_string(cycle) + ", " + where + ": " + msg),
          kind_(kind), where_(std::move(where)), cycle_(cycle) {}

    Kind kind() const { return kind_; }
    const std::string& where() const { return where_; }
    long cycle() const { return cycle_; }

private:
    Kind kind_;
    std::string where_;
    long cycle_;
};

} // namespace sdfap
