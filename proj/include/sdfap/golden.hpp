#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sdfap/ast.hpp"
#include "sdfap/value.hpp"

namespace sdfap {

// Buffer-free denotational evaluator: the golden model. Patterns are ignored
// entirely; map/imap apply elementwise, foldl/fold reduce left-to-right,
// transpose swaps the outer two dimensions. Also used by the simulator to
// evaluate node bodies and combinational regions.
class Evaluator {
public:
    explicit Evaluator(const Program& prog, int width = 32) : prog_(prog), width_(width) {}

    int width() const { return width_; }

    Value call(const std::string& name, const std::vector<Value>& args) const {
        const Definition* d = prog_.find(name);
        if (!d) throw EvalError("no definition named '" + name + "'");
        return call(*d, args);
    }

    Value call(const Definition& def, const std::vector<Value>& args) const {
        if (args.size() != def.params.size())
            throw EvalError("'" + def.name + "' expects " + std::to_string(def.params.size()) +
                            " arguments, got " + std::to_string(args.size()));
        Env env;
        env.def = &def;
        for (std::size_t i = 0; i < args.size(); ++i)
            env.values[def.params[i].name] = args[i];
        return eval(def.body, env);
    }

    // Applies a function-position expression (named def, local function
    // binding, lambda, builtin, partial HoF) to argument values. `context`
    // is the definition whose where-block the expression appeared in; it
    // provides local function bindings.
    Value apply_function(const Definition* context, const ExprPtr& fn,
                         const std::vector<Value>& args) const {
        Env env;
        env.def = context;
        return apply_fn(fn, env, args);
    }

private:
    struct Env {
        const Definition* def = nullptr;
        std::map<std::string, Value> values;
        std::map<std::string, Value> memo;
        std::vector<std::string> in_progress;
    };

    std::int64_t wrap(std::int64_t v) const { return wrap_width(v, width_); }

    const Binding* find_binding(const Env& env, const std::string& n) const {
        if (!env.def) return nullptr;
        for (const auto& b : env.def->bindings)
            if (b.name == n) return &b;
        return nullptr;
    }

    Value apply_fn(const ExprPtr& fn, Env& env, const std::vector<Value>& args) const {
        switch (fn->kind) {
            case ExprKind::Var: {
                const std::string& n = fn->name;
                if (const Definition* d = prog_.find(n)) return call(*d, args);
                if (const Binding* b = find_binding(env, n); b && !b->params.empty()) {
                    if (args.size() != b->params.size())
                        throw EvalError("'" + n + "' expects " + std::to_string(b->params.size()) +
                                        " arguments");
                    Env local;
                    local.def = env.def;
                    for (std::size_t i = 0; i < args.size(); ++i)
                        local.values[b->params[i].name] = args[i];
                    return eval(b->body, local);
                }
                if (n == "div") {
                    if (args.size() != 2) throw EvalError("div expects 2 arguments");
                    return Value(divide(args[0].scalar(), args[1].scalar()));
                }
                if (n == "transpose") {
                    if (args.size() != 1) throw EvalError("transpose expects 1 argument");
                    return transpose(args[0]);
                }
                throw EvalError("'" + n + "' is not a function");
            }
            case ExprKind::Lambda: {
                if (args.size() != fn->lambda_params.size())
                    throw EvalError("lambda expects " + std::to_string(fn->lambda_params.size()) +
                                    " arguments, got " + std::to_string(args.size()));
                Env local = env;
                for (std::size_t i = 0; i < args.size(); ++i)
                    local.values[fn->lambda_params[i]] = args[i];
                return eval(fn->args[0], local);
            }
            case ExprKind::HofApply: {
                // Partial HoF completed by `args`.
                std::vector<Value> given;
                for (const auto& a : fn->args) given.push_back(eval(a, env));
                given.insert(given.end(), args.begin(), args.end());
                return eval_hof(*fn, given, env);
            }
            case ExprKind::Apply: {
                std::vector<Value> given;
                for (const auto& a : fn->args) given.push_back(eval(a, env));
                given.insert(given.end(), args.begin(), args.end());
                return apply_fn(fn->fn, env, given);
            }
            default:
                throw EvalError("expression is not a function");
        }
    }

    std::int64_t divide(std::int64_t a, std::int64_t b) const {
        if (b == 0) throw EvalError("division by zero");
        if (width_ >= 64 && a == INT64_MIN && b == -1) return a; // wraps
        return wrap(a / b); // C++ integer division truncates toward zero
    }

    static Value transpose(const Value& v) {
        const auto& rows = v.elems();
        if (rows.empty() || rows[0].is_scalar())
            throw EvalError("transpose needs a 2-D vector");
        std::size_t ncols = rows[0].size();
        std::vector<Value> cols;
        cols.reserve(ncols);
        for (std::size_t c = 0; c < ncols; ++c) {
            std::vector<Value> col;
            col.reserve(rows.size());
            for (const auto& row : rows) {
                if (row.size() != ncols) throw EvalError("ragged matrix in transpose");
                col.push_back(row[c]);
            }
            cols.push_back(Value(std::move(col)));
        }
        return Value(std::move(cols));
    }

    Value eval_hof(const Expr& e, const std::vector<Value>& given, Env& env) const {
        switch (e.hof) {
            case HofKind::Map: {
                if (given.size() != 1) throw EvalError("map expects one vector");
                const auto& xs = given[0].elems();
                std::vector<Value> out;
                out.reserve(xs.size());
                for (const auto& x : xs) out.push_back(apply_fn(e.fn, env, {x}));
                return Value(std::move(out));
            }
            case HofKind::Imap: {
                if (given.size() != 1) throw EvalError("imap expects one vector");
                const auto& xs = given[0].elems();
                std::vector<Value> out;
                out.reserve(xs.size());
                for (std::size_t i = 0; i < xs.size(); ++i)
                    out.push_back(apply_fn(e.fn, env, {Value(static_cast<std::int64_t>(i)), xs[i]}));
                return Value(std::move(out));
            }
            case HofKind::Fold: {
                if (given.size() != 1) throw EvalError("fold expects one vector");
                const auto& xs = given[0].elems();
                if (xs.empty()) throw EvalError("fold of an empty vector");
                Value acc = xs[0];
                for (std::size_t i = 1; i < xs.size(); ++i)
                    acc = apply_fn(e.fn, env, {acc, xs[i]});
                return acc;
            }
            case HofKind::Foldl: {
                if (given.size() != 2) throw EvalError("foldl expects an initial value and a vector");
                Value acc = given[0];
                for (const auto& x : given[1].elems())
                    acc = apply_fn(e.fn, env, {acc, x});
                return acc;
            }
        }
        throw EvalError("unknown HoF");
    }

    Value eval(const ExprPtr& ep, Env& env) const {
        const Expr& e = *ep;
        switch (e.kind) {
            case ExprKind::IntLit:
                return Value(wrap(e.value));
            case ExprKind::Var: {
                auto it = env.values.find(e.name);
                if (it != env.values.end()) return it->second;
                if (const Binding* b = find_binding(env, e.name)) {
                    if (!b->params.empty())
                        throw EvalError("'" + e.name + "' is a function, not a value");
                    auto mt = env.memo.find(e.name);
                    if (mt != env.memo.end()) return mt->second;
                    for (const auto& n : env.in_progress)
                        if (n == e.name) throw EvalError("cyclic binding '" + e.name + "'");
                    env.in_progress.push_back(e.name);
                    Value v = eval(b->body, env);
                    env.in_progress.pop_back();
                    env.memo[e.name] = v;
                    return v;
                }
                if (const Definition* d = prog_.find(e.name); d && d->params.empty())
                    return call(*d, {});
                throw EvalError("cannot use '" + e.name + "' as a value");
            }
            case ExprKind::BinOp: {
                std::int64_t a = eval(e.args[0], env).scalar();
                std::int64_t b = eval(e.args[1], env).scalar();
                switch (e.op) {
                    case BinOpKind::Add:
                        return Value(wrap(static_cast<std::int64_t>(
                            static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b))));
                    case BinOpKind::Sub:
                        return Value(wrap(static_cast<std::int64_t>(
                            static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b))));
                    case BinOpKind::Mul:
                        return Value(wrap(static_cast<std::int64_t>(
                            static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b))));
                    case BinOpKind::Div:
                        return Value(divide(a, b));
                }
                throw EvalError("unknown operator");
            }
            case ExprKind::Apply: {
                std::vector<Value> args;
                for (const auto& a : e.args) args.push_back(eval(a, env));
                return apply_fn(e.fn, env, args);
            }
            case ExprKind::HofApply: {
                std::vector<Value> given;
                for (const auto& a : e.args) given.push_back(eval(a, env));
                return eval_hof(e, given, env);
            }
            case ExprKind::VecLit:
            case ExprKind::Tuple: {
                std::vector<Value> elems;
                elems.reserve(e.args.size());
                for (const auto& a : e.args) elems.push_back(eval(a, env));
                return Value(std::move(elems));
            }
            case ExprKind::Lambda:
                throw EvalError("lambda used as a value");
            case ExprKind::Transpose:
                return transpose(eval(e.args[0], env));
        }
        throw EvalError("unreachable expression kind");
    }

    const Program& prog_;
    int width_;
};

// golden_eval: pure reference semantics for an entry definition.
inline Value golden_eval(const Program& prog, const std::string& entry,
                         const std::vector<Value>& inputs, int width = 32) {
    return Evaluator(prog, width).call(entry, inputs);
}

} // namespace sdfap
