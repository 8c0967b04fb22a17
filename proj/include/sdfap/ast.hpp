#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sdfap/diagnostics.hpp"

namespace sdfap {

enum class ExprKind {
    Var,       // name
    IntLit,    // value
    BinOp,     // op, args[0], args[1]
    Apply,     // fn, args (callee is an expression, usually Var)
    HofApply,  // hof, hof_pattern?, fn, args
    VecLit,    // args
    Tuple,     // args
    Lambda,    // lambda_params, args[0] = body
    Transpose, // args[0]
};

enum class BinOpKind { Add, Sub, Mul, Div };

enum class HofKind { Map, Imap, Foldl, Fold };

inline const char* to_string(HofKind k) {
    switch (k) {
        case HofKind::Map: return "map";
        case HofKind::Imap: return "imap";
        case HofKind::Foldl: return "foldl";
        case HofKind::Fold: return "fold";
    }
    return "?";
}

inline const char* to_string(BinOpKind k) {
    switch (k) {
        case BinOpKind::Add: return "+";
        case BinOpKind::Sub: return "-";
        case BinOpKind::Mul: return "*";
        case BinOpKind::Div: return "div";
    }
    return "?";
}

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    ExprKind kind;
    SourcePos pos;

    std::string name;                              // Var
    std::int64_t value = 0;                        // IntLit
    BinOpKind op = BinOpKind::Add;                 // BinOp
    HofKind hof = HofKind::Map;                    // HofApply
    std::optional<std::vector<std::int64_t>> hof_pattern; // HofApply
    ExprPtr fn;                                    // Apply callee / HofApply function
    std::vector<ExprPtr> args;
    std::vector<std::string> lambda_params;        // Lambda

    static ExprPtr var(std::string n, SourcePos p = {}) {
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::Var;
        e->name = std::move(n);
        e->pos = p;
        return e;
    }
    static ExprPtr lit(std::int64_t v, SourcePos p = {}) {
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::IntLit;
        e->value = v;
        e->pos = p;
        return e;
    }
    static ExprPtr binop(BinOpKind op, ExprPtr a, ExprPtr b, SourcePos p = {}) {
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::BinOp;
        e->op = op;
        e->args = {std::move(a), std::move(b)};
        e->pos = p;
        return e;
    }
    static ExprPtr apply(ExprPtr fn, std::vector<ExprPtr> args, SourcePos p = {}) {
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::Apply;
        e->fn = std::move(fn);
        e->args = std::move(args);
        e->pos = p;
        return e;
    }
    static ExprPtr hofapply(HofKind k, std::optional<std::vector<std::int64_t>> pat, ExprPtr fn,
                       std::vector<ExprPtr> args, SourcePos p = {}) {
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::HofApply;
        e->hof = k;
        e->hof_pattern = std::move(pat);
        e->fn = std::move(fn);
        e->args = std::move(args);
        e->pos = p;
        return e;
    }
    static ExprPtr veclit(std::vector<ExprPtr> elems, SourcePos p = {}) {
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::VecLit;
        e->args = std::move(elems);
        e->pos = p;
        return e;
    }
    static ExprPtr tuple(std::vector<ExprPtr> elems, SourcePos p = {}) {
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::Tuple;
        e->args = std::move(elems);
        e->pos = p;
        return e;
    }
    static ExprPtr lambda(std::vector<std::string> params, ExprPtr body, SourcePos p = {}) {
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::Lambda;
        e->lambda_params = std::move(params);
        e->args = {std::move(body)};
        e->pos = p;
        return e;
    }
    static ExprPtr transpose(ExprPtr arg, SourcePos p = {}) {
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::Transpose;
        e->args = {std::move(arg)};
        e->pos = p;
        return e;
    }
};

struct Param {
    std::string name;
    std::optional<std::vector<std::int64_t>> annotation; // flat pattern
    SourcePos pos;
};

// A where-binding. Bindings with parameters are local function definitions.
struct Binding {
    std::string name;
    std::vector<Param> params;
    ExprPtr body;
    SourcePos pos;
};

struct Definition {
    std::string name;
    std::vector<Param> params;
    std::optional<std::vector<std::int64_t>> output_annotation;
    ExprPtr body;
    std::vector<Binding> bindings;
    SourcePos pos;

    bool annotated() const { return output_annotation.has_value(); }
};

struct Program {
    std::vector<Definition> defs;

    const Definition* find(const std::string& name) const {
        for (const auto& d : defs)
            if (d.name == name) return &d;
        return nullptr;
    }
};

// ---------------------------------------------------------------------------
// Structural equality (used by the parse/print round-trip tests)
// ---------------------------------------------------------------------------

inline bool equal(const ExprPtr& a, const ExprPtr& b) {
    if (!a || !b) return a == b;
    if (a->kind != b->kind) return false;
    switch (a->kind) {
        case ExprKind::Var: return a->name == b->name;
        case ExprKind::IntLit: return a->value == b->value;
        case ExprKind::BinOp:
            if (a->op != b->op) return false;
            break;
        case ExprKind::HofApply:
            if (a->hof != b->hof || a->hof_pattern != b->hof_pattern || !equal(a->fn, b->fn))
                return false;
            break;
        case ExprKind::Apply:
            if (!equal(a->fn, b->fn)) return false;
            break;
        case ExprKind::Lambda:
            if (a->lambda_params != b->lambda_params) return false;
            break;
        default: break;
    }
    if (a->args.size() != b->args.size()) return false;
    for (std::size_t i = 0; i < a->args.size(); ++i)
        if (!equal(a->args[i], b->args[i])) return false;
    return true;
}

inline bool equal(const Param& a, const Param& b) {
    return a.name == b.name && a.annotation == b.annotation;
}

inline bool equal(const Definition& a, const Definition& b) {
    if (a.name != b.name || a.output_annotation != b.output_annotation) return false;
    if (a.params.size() != b.params.size() || a.bindings.size() != b.bindings.size()) return false;
    for (std::size_t i = 0; i < a.params.size(); ++i)
        if (!equal(a.params[i], b.params[i])) return false;
    if (!equal(a.body, b.body)) return false;
    for (std::size_t i = 0; i < a.bindings.size(); ++i) {
        if (a.bindings[i].name != b.bindings[i].name) return false;
        if (a.bindings[i].params.size() != b.bindings[i].params.size()) return false;
        for (std::size_t j = 0; j < a.bindings[i].params.size(); ++j)
            if (!equal(a.bindings[i].params[j], b.bindings[i].params[j])) return false;
        if (!equal(a.bindings[i].body, b.bindings[i].body)) return false;
    }
    return true;
}

inline bool equal(const Program& a, const Program& b) {
    if (a.defs.size() != b.defs.size()) return false;
    for (std::size_t i = 0; i < a.defs.size(); ++i)
        if (!equal(a.defs[i], b.defs[i])) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Pretty printer. parse(print(p)) == p structurally for every valid program.
// ---------------------------------------------------------------------------

namespace detail {

inline void print_flat_pattern(std::ostringstream& os, const std::vector<std::int64_t>& pat) {
    os << "[";
    for (std::size_t i = 0; i < pat.size(); ++i) {
        if (i) os << ",";
        os << pat[i];
    }
    os << "]";
}

// Precedence: 0 additive, 1 multiplicative, 2 application, 3 atom.
inline void print_expr(std::ostringstream& os, const ExprPtr& e, int parent_prec);

inline void print_arg(std::ostringstream& os, const ExprPtr& e) {
    print_expr(os, e, 3);
}

inline void print_expr(std::ostringstream& os, const ExprPtr& e, int parent_prec) {
    auto parens = [&](int prec, auto&& body) {
        bool need = prec < parent_prec;
        if (need) os << "(";
        body();
        if (need) os << ")";
    };
    switch (e->kind) {
        case ExprKind::Var: os << e->name; break;
        case ExprKind::IntLit:
            if (e->value < 0 && parent_prec >= 2) os << "(" << e->value << ")";
            else os << e->value;
            break;
        case ExprKind::BinOp: {
            if (e->op == BinOpKind::Div) {
                parens(2, [&] {
                    os << "div ";
                    print_arg(os, e->args[0]);
                    os << " ";
                    print_arg(os, e->args[1]);
                });
                break;
            }
            int prec = (e->op == BinOpKind::Mul) ? 1 : 0;
            parens(prec, [&] {
                print_expr(os, e->args[0], prec);
                os << " " << to_string(e->op) << " ";
                print_expr(os, e->args[1], prec + 1);
            });
            break;
        }
        case ExprKind::Apply:
            parens(2, [&] {
                print_expr(os, e->fn, 3);
                for (const auto& a : e->args) {
                    os << " ";
                    print_arg(os, a);
                }
            });
            break;
        case ExprKind::HofApply:
            parens(2, [&] {
                os << to_string(e->hof);
                if (e->hof_pattern) {
                    os << " ";
                    print_flat_pattern(os, *e->hof_pattern);
                }
                os << " ";
                print_arg(os, e->fn);
                for (const auto& a : e->args) {
                    os << " ";
                    print_arg(os, a);
                }
            });
            break;
        case ExprKind::VecLit:
            os << "[";
            for (std::size_t i = 0; i < e->args.size(); ++i) {
                if (i) os << ", ";
                print_expr(os, e->args[i], 0);
            }
            os << "]";
            break;
        case ExprKind::Tuple:
            os << "(";
            for (std::size_t i = 0; i < e->args.size(); ++i) {
                if (i) os << ", ";
                print_expr(os, e->args[i], 0);
            }
            os << ")";
            break;
        case ExprKind::Lambda:
            os << "(\\";
            for (std::size_t i = 0; i < e->lambda_params.size(); ++i) {
                if (i) os << " ";
                os << e->lambda_params[i];
            }
            os << " -> ";
            print_expr(os, e->args[0], 0);
            os << ")";
            break;
        case ExprKind::Transpose:
            parens(2, [&] {
                os << "transpose ";
                print_arg(os, e->args[0]);
            });
            break;
    }
}

inline void print_param(std::ostringstream& os, const Param& p) {
    if (p.annotation) {
        os << "(";
        print_flat_pattern(os, *p.annotation);
        os << ", " << p.name << ")";
    } else {
        os << p.name;
    }
}

} // namespace detail

inline std::string print_expr(const ExprPtr& e) {
    std::ostringstream os;
    detail::print_expr(os, e, 0);
    return os.str();
}

inline std::string print_program(const Program& prog) {
    std::ostringstream os;
    bool first = true;
    for (const auto& d : prog.defs) {
        if (!first) os << "\n";
        first = false;
        os << d.name;
        for (const auto& p : d.params) {
            os << " ";
            detail::print_param(os, p);
        }
        os << " = ";
        if (d.output_annotation) {
            os << "(";
            detail::print_flat_pattern(os, *d.output_annotation);
            os << ", ";
            detail::print_expr(os, d.body, 0);
            os << ")";
        } else {
            detail::print_expr(os, d.body, 0);
        }
        os << "\n";
        if (!d.bindings.empty()) {
            os << "  where\n";
            for (const auto& b : d.bindings) {
                os << "    " << b.name;
                for (const auto& p : b.params) {
                    os << " ";
                    detail::print_param(os, p);
                }
                os << " = ";
                detail::print_expr(os, b.body, 0);
                os << "\n";
            }
        }
    }
    return os.str();
}

} // namespace sdfap
