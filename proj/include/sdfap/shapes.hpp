#pragma once

#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sdfap/ast.hpp"
#include "sdfap/sema.hpp"

namespace sdfap {

// Shape of a value: nested vector dimensions, innermost element a scalar.
// An empty dims list is a scalar.
struct Shape {
    std::vector<std::int64_t> dims;

    static Shape scalar() { return Shape{}; }
    static Shape vec(std::int64_t n, const Shape& elem) {
        Shape s;
        s.dims.reserve(elem.dims.size() + 1);
        s.dims.push_back(n);
        s.dims.insert(s.dims.end(), elem.dims.begin(), elem.dims.end());
        return s;
    }

    bool is_scalar() const { return dims.empty(); }
    std::int64_t outer() const { return dims.front(); }
    Shape element() const {
        Shape s;
        s.dims.assign(dims.begin() + 1, dims.end());
        return s;
    }
    std::int64_t total_scalars() const {
        return std::accumulate(dims.begin(), dims.end(), std::int64_t{1},
                               [](std::int64_t a, std::int64_t b) { return a * b; });
    }
    std::string str() const {
        if (dims.empty()) return "scalar";
        std::ostringstream os;
        for (std::size_t i = 0; i < dims.size(); ++i) {
            if (i) os << "x";
            os << dims[i];
        }
        return os.str();
    }
    bool operator==(const Shape& o) const { return dims == o.dims; }
    bool operator!=(const Shape& o) const { return dims != o.dims; }
};

// Parses "6x8x4x4" or "scalar".
inline Shape parse_shape(const std::string& text) {
    if (text == "scalar" || text.empty()) return Shape::scalar();
    Shape s;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t start = i;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
        if (i == start) throw CompileError("invalid shape '" + text + "'");
        s.dims.push_back(std::stoll(text.substr(start, i - start)));
        if (i < text.size()) {
            if (text[i] != 'x') throw CompileError("invalid shape '" + text + "'");
            ++i;
        }
    }
    for (auto d : s.dims)
        if (d < 1) throw CompileError("shape dimensions must be >= 1");
    return s;
}

// ---------------------------------------------------------------------------
// Shape checking: walks the entry definition with concrete input shapes and
// validates every pattern sum against the corresponding vector dimension.
// ---------------------------------------------------------------------------

class ShapeChecker {
public:
    ShapeChecker(const Program& prog, std::map<const Expr*, Shape>* record = nullptr)
        : prog_(prog), record_(record) {}

    // Shape of calling `def` with the given argument shapes.
    Shape check_call(const Definition& def, const std::vector<Shape>& args) {
        if (args.size() != def.params.size())
            throw CompileError(def.pos, "'" + def.name + "' expects " +
                                            std::to_string(def.params.size()) + " arguments, got " +
                                            std::to_string(args.size()));
        Env env;
        for (std::size_t i = 0; i < args.size(); ++i) {
            const Param& p = def.params[i];
            if (p.annotation) {
                // A pattern summing to 1 moves one token per firing: the
                // parameter is the token itself, whatever its shape.
                std::int64_t need = sum(*p.annotation);
                if (need != 1 && (args[i].is_scalar() || args[i].outer() != need))
                    throw CompileError(p.pos, "parameter '" + p.name + "' of '" + def.name +
                                                  "' consumes " + std::to_string(need) +
                                                  " tokens but receives shape " + args[i].str());
            }
            env.values[p.name] = args[i];
        }
        env.def = &def;
        Shape out = check_expr(def.body, env);
        if (def.output_annotation) {
            std::int64_t need = sum(*def.output_annotation);
            if (need != 1 && (out.is_scalar() || out.outer() != need))
                throw CompileError(def.pos, "'" + def.name + "' produces " +
                                                std::to_string(need) +
                                                " tokens but its body has shape " + out.str());
        }
        return out;
    }

    // Shape of an expression with explicit variable shapes (used for the
    // comb-node templates built during graph lowering).
    Shape check_expr_with(const Definition* context, const ExprPtr& e,
                          const std::map<std::string, Shape>& vars) {
        Env env;
        env.def = context;
        env.values = vars;
        return check_expr(e, env);
    }

    // Result shape of applying a function-position expression to arguments.
    Shape apply_fn(const Definition* context, const ExprPtr& fn, const std::vector<Shape>& args) {
        Env env;
        env.def = context;
        FnShape f = fn_of(fn, env);
        if (static_cast<int>(args.size()) != f.arity)
            throw CompileError(fn->pos, "function expects " + std::to_string(f.arity) +
                                            " arguments, got " + std::to_string(args.size()));
        return f.apply(args, fn->pos);
    }

    // Result shape of a HoF application whose argument shapes are known.
    Shape hof_result(const Definition* context, const Expr& hofExpr, const std::vector<Shape>& given) {
        Env env;
        env.def = context;
        return check_hof_with_shapes(hofExpr, given, env);
    }

private:
    struct Env {
        const Definition* def = nullptr;
        std::map<std::string, Shape> values;           // params, value bindings, lambda params
        std::map<std::string, Shape> memo;             // computed value bindings
        std::vector<std::string> in_progress;
    };

    static std::int64_t sum(const std::vector<std::int64_t>& v) {
        return std::accumulate(v.begin(), v.end(), std::int64_t{0});
    }

    const Binding* find_binding(const Env& env, const std::string& n) const {
        if (!env.def) return nullptr;
        for (const auto& b : env.def->bindings)
            if (b.name == n) return &b;
        return nullptr;
    }

    Shape record(const Expr* e, Shape s) {
        if (record_) (*record_)[e] = s;
        return s;
    }

    // A function value: something applicable to argument shapes.
    struct FnShape {
        std::function<Shape(const std::vector<Shape>&, SourcePos)> apply;
        int arity = 0;
    };

    FnShape fn_of(const ExprPtr& e, Env& env) {
        switch (e->kind) {
            case ExprKind::Var: {
                const std::string n = e->name;
                if (const Definition* d = prog_.find(n)) {
                    return FnShape{[this, d](const std::vector<Shape>& as, SourcePos) {
                                       return check_call(*d, as);
                                   },
                                   static_cast<int>(d->params.size())};
                }
                if (const Binding* b = find_binding(env, n); b && !b->params.empty()) {
                    Env* envp = &env;
                    return FnShape{[this, b, envp](const std::vector<Shape>& as, SourcePos pos) {
                                       if (as.size() != b->params.size())
                                           throw CompileError(pos, "'" + b->name + "' expects " +
                                                                       std::to_string(b->params.size()) +
                                                                       " arguments");
                                       Env local = *envp;
                                       for (std::size_t i = 0; i < as.size(); ++i)
                                           local.values[b->params[i].name] = as[i];
                                       return check_expr(b->body, local);
                                   },
                                   static_cast<int>(b->params.size())};
                }
                if (n == "div") {
                    return FnShape{[](const std::vector<Shape>& as, SourcePos pos) {
                                       if (as.size() != 2 || !as[0].is_scalar() || !as[1].is_scalar())
                                           throw CompileError(pos, "div needs two scalars");
                                       return Shape::scalar();
                                   },
                                   2};
                }
                if (n == "transpose") {
                    return FnShape{[](const std::vector<Shape>& as, SourcePos pos) {
                                       if (as.size() != 1 || as[0].dims.size() < 2)
                                           throw CompileError(pos, "transpose needs a 2-D vector");
                                       Shape s = as[0];
                                       std::swap(s.dims[0], s.dims[1]);
                                       return s;
                                   },
                                   1};
                }
                throw CompileError(e->pos, "'" + n + "' is not a function");
            }
            case ExprKind::Lambda: {
                Env captured = env;
                ExprPtr body = e->args[0];
                auto params = e->lambda_params;
                return FnShape{[this, captured, body, params](const std::vector<Shape>& as,
                                                              SourcePos pos) mutable {
                                   if (as.size() != params.size())
                                       throw CompileError(pos, "lambda expects " +
                                                                   std::to_string(params.size()) +
                                                                   " arguments");
                                   Env local = captured;
                                   for (std::size_t i = 0; i < as.size(); ++i)
                                       local.values[params[i]] = as[i];
                                   return check_expr(body, local);
                               },
                               static_cast<int>(params.size())};
            }
            case ExprKind::HofApply: {
                // A partially applied HoF used as a function value:
                // map [4] square, fold (+), foldl n s ...
                int needed = (e->hof == HofKind::Foldl ? 2 : 1) - static_cast<int>(e->args.size());
                if (needed <= 0)
                    throw CompileError(e->pos, "expression is not a function");
                ExprPtr self = std::make_shared<Expr>(*e);
                Env* envp = &env;
                return FnShape{[this, self, envp](const std::vector<Shape>& as, SourcePos pos) {
                                   Expr full = *self;
                                   (void)pos;
                                   for (const auto& s : as) {
                                       (void)s;
                                       full.args.push_back(nullptr); // placeholder, shapes passed aside
                                   }
                                   return check_hof_with_shapes(*self, as, *envp);
                               },
                               needed};
            }
            default:
                throw CompileError(e->pos, "expression is not a function");
        }
    }

    Shape check_hof(const Expr& e, Env& env) {
        std::vector<Shape> extra;
        for (const auto& a : e.args) extra.push_back(check_expr(a, env));
        return check_hof_with_shapes(e, extra, env);
    }

    // `given` are the shapes of e.args (possibly completed by a partial
    // application's final arguments).
    Shape check_hof_with_shapes(const Expr& e, const std::vector<Shape>& given, Env& env) {
        Env& ev = env;
        FnShape f = fn_of(e.fn, ev);
        switch (e.hof) {
            case HofKind::Map:
            case HofKind::Imap: {
                if (given.size() != 1)
                    throw CompileError(e.pos, std::string(to_string(e.hof)) + " expects one vector");
                const Shape& xs = given[0];
                if (xs.is_scalar())
                    throw CompileError(e.pos, std::string(to_string(e.hof)) + " over a scalar");
                check_pattern_sum(e, xs.outer());
                std::vector<Shape> fargs;
                if (e.hof == HofKind::Imap) fargs.push_back(Shape::scalar());
                fargs.push_back(xs.element());
                Shape relem = f.apply(fargs, e.pos);
                return Shape::vec(xs.outer(), relem);
            }
            case HofKind::Fold: {
                if (given.size() != 1)
                    throw CompileError(e.pos, "fold expects one vector");
                const Shape& xs = given[0];
                if (xs.is_scalar() || xs.outer() < 1)
                    throw CompileError(e.pos, "fold over a scalar");
                check_pattern_sum(e, xs.outer());
                Shape acc = xs.element();
                Shape r = f.apply({acc, xs.element()}, e.pos);
                if (r != acc)
                    throw CompileError(e.pos, "fold function must preserve the element shape");
                return acc;
            }
            case HofKind::Foldl: {
                if (given.size() != 2)
                    throw CompileError(e.pos, "foldl expects an initial value and a vector");
                const Shape& init = given[0];
                const Shape& xs = given[1];
                if (xs.is_scalar())
                    throw CompileError(e.pos, "foldl over a scalar");
                check_pattern_sum(e, xs.outer());
                Shape r = f.apply({init, xs.element()}, e.pos);
                if (r != init)
                    throw CompileError(e.pos, "foldl function must preserve the accumulator shape");
                return init;
            }
        }
        throw CompileError(e.pos, "unknown HoF");
    }

    void check_pattern_sum(const Expr& e, std::int64_t dim) {
        if (!e.hof_pattern) return;
        std::int64_t s = sum(*e.hof_pattern);
        if (s != dim)
            throw CompileError(e.pos, std::string(to_string(e.hof)) + " pattern " +
                                          Pattern::flat(*e.hof_pattern).display() + " sums to " +
                                          std::to_string(s) + " but the vector dimension is " +
                                          std::to_string(dim));
    }

    Shape check_expr(const ExprPtr& ep, Env& env) {
        const Expr& e = *ep;
        switch (e.kind) {
            case ExprKind::IntLit:
                return record(&e, Shape::scalar());
            case ExprKind::Var: {
                auto it = env.values.find(e.name);
                if (it != env.values.end()) return record(&e, it->second);
                if (const Binding* b = find_binding(env, e.name)) {
                    if (!b->params.empty())
                        throw CompileError(e.pos, "'" + e.name + "' is a function, not a value");
                    auto mt = env.memo.find(e.name);
                    if (mt != env.memo.end()) return record(&e, mt->second);
                    for (const auto& n : env.in_progress)
                        if (n == e.name)
                            throw CompileError(e.pos, "cyclic binding '" + e.name + "'");
                    env.in_progress.push_back(e.name);
                    Shape s = check_expr(b->body, env);
                    env.in_progress.pop_back();
                    env.memo[e.name] = s;
                    return record(&e, s);
                }
                if (const Definition* d = prog_.find(e.name); d && d->params.empty())
                    return record(&e, check_call(*d, {}));
                throw CompileError(e.pos, "cannot use function '" + e.name + "' as a value");
            }
            case ExprKind::BinOp: {
                Shape a = check_expr(e.args[0], env);
                Shape b = check_expr(e.args[1], env);
                if (!a.is_scalar() || !b.is_scalar())
                    throw CompileError(e.pos, std::string("operator '") + to_string(e.op) +
                                                  "' needs scalar operands, got " + a.str() +
                                                  " and " + b.str());
                return record(&e, Shape::scalar());
            }
            case ExprKind::Apply: {
                FnShape f = fn_of(e.fn, env);
                std::vector<Shape> args;
                for (const auto& a : e.args) args.push_back(check_expr(a, env));
                if (static_cast<int>(args.size()) != f.arity)
                    throw CompileError(e.pos, "expected " + std::to_string(f.arity) +
                                                  " arguments, got " + std::to_string(args.size()));
                return record(&e, f.apply(args, e.pos));
            }
            case ExprKind::HofApply:
                return record(&e, check_hof(e, env));
            case ExprKind::VecLit: {
                if (e.args.empty())
                    throw CompileError(e.pos, "empty vector literal");
                Shape elem = check_expr(e.args[0], env);
                for (std::size_t i = 1; i < e.args.size(); ++i) {
                    Shape s = check_expr(e.args[i], env);
                    if (s != elem)
                        throw CompileError(e.args[i]->pos,
                                           "vector elements differ in shape: " + elem.str() +
                                               " vs " + s.str());
                }
                return record(&e, Shape::vec(static_cast<std::int64_t>(e.args.size()), elem));
            }
            case ExprKind::Tuple: {
                // Homogeneous tuples are vector sugar; heterogeneous tuples
                // have no runtime representation.
                Shape elem = check_expr(e.args[0], env);
                for (std::size_t i = 1; i < e.args.size(); ++i) {
                    Shape s = check_expr(e.args[i], env);
                    if (s != elem)
                        throw CompileError(e.pos, "heterogeneous tuple is not supported");
                }
                return record(&e, Shape::vec(static_cast<std::int64_t>(e.args.size()), elem));
            }
            case ExprKind::Lambda:
                throw CompileError(e.pos, "lambda used as a value");
            case ExprKind::Transpose: {
                Shape s = check_expr(e.args[0], env);
                if (s.dims.size() < 2)
                    throw CompileError(e.pos, "transpose needs a 2-D vector, got " + s.str());
                std::swap(s.dims[0], s.dims[1]);
                return record(&e, s);
            }
        }
        throw CompileError(e.pos, "unreachable expression kind");
    }

    const Program& prog_;
    std::map<const Expr*, Shape>* record_;
};

// check_shapes: validates the entry definition against concrete input shapes
// and returns the shape of every expression visited (last visit wins when a
// helper is instantiated more than once).
struct ShapeReport {
    Shape output;
    std::map<const Expr*, Shape> shapes;
};

inline ShapeReport check_shapes(const Program& prog, const std::string& entry,
                                const std::vector<Shape>& inputs) {
    const Definition* d = prog.find(entry);
    if (!d) throw CompileError("no definition named '" + entry + "'");
    ShapeReport rep;
    ShapeChecker checker(prog, &rep.shapes);
    rep.output = checker.check_call(*d, inputs);
    return rep;
}


// ---------------------------------------------------------------------------
// Entry shape inference. Derives input shapes from pattern annotations by a
// demand analysis; dimensions the patterns do not pin down stay unknown and
// must be supplied on the command line.
// ---------------------------------------------------------------------------

namespace detail {

// A partial shape: depth may be open (tail_open) and dims may be unknown.
struct PartialShape {
    std::vector<std::optional<std::int64_t>> dims;
    bool tail_open = true;

    static PartialShape unknown() { return PartialShape{}; }
    static PartialShape closed_scalar() { return PartialShape{{}, false}; }

    bool concrete() const {
        if (tail_open) return false;
        for (const auto& d : dims)
            if (!d) return false;
        return true;
    }
    Shape to_shape() const {
        Shape s;
        for (const auto& d : dims) s.dims.push_back(*d);
        return s;
    }
};

// Meet of two partial shapes; returns whether `into` gained information.
// Conflicting information is ignored here; the later shape check reports it
// against the concrete input.
inline bool merge_soft(PartialShape& into, const PartialShape& from) {
    bool changed = false;
    std::size_t common = std::min(into.dims.size(), from.dims.size());
    for (std::size_t i = 0; i < common; ++i) {
        if (from.dims[i] && !into.dims[i]) {
            into.dims[i] = from.dims[i];
            changed = true;
        }
    }
    if (from.dims.size() > into.dims.size() && into.tail_open) {
        for (std::size_t i = into.dims.size(); i < from.dims.size(); ++i)
            into.dims.push_back(from.dims[i]);
        changed = true;
    }
    if (!from.tail_open && into.tail_open && into.dims.size() >= from.dims.size()) {
        into.tail_open = false;
        changed = true;
    }
    return changed;
}

inline PartialShape swap_outer2(PartialShape p) {
    if (p.dims.size() >= 2) std::swap(p.dims[0], p.dims[1]);
    return p;
}

} // namespace detail

class ShapeInfer {
public:
    explicit ShapeInfer(const Program& prog) : prog_(prog) {}

    // Best effort: concrete input shapes for `entry` when the annotations pin
    // every dimension, std::nullopt otherwise.
    std::optional<std::vector<Shape>> infer(const std::string& entry) {
        const Definition* d = prog_.find(entry);
        if (!d) throw CompileError("no definition named '" + entry + "'");
        std::vector<Shape> out;
        for (std::size_t i = 0; i < d->params.size(); ++i) {
            detail::PartialShape p = infer_param(*d, i, 0);
            if (!p.concrete()) return std::nullopt;
            out.push_back(p.to_shape());
        }
        return out;
    }

    // Demand placed on parameter `idx` of `def` by the definition's own body.
    detail::PartialShape infer_param(const Definition& def, std::size_t idx, int depth) {
        if (depth > kMaxDepth) return detail::PartialShape::unknown();
        std::string key = def.name + "#" + std::to_string(idx);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        memo_[key] = detail::PartialShape::unknown(); // cycle guard

        detail::PartialShape result = demands_in_def(def, def.params[idx], depth);
        memo_[key] = result;
        return result;
    }

private:
    static constexpr int kMaxDepth = 32;

    // Runs the demand fixpoint over a definition and returns the accumulated
    // demand on the given parameter. Demands flow through value bindings:
    // uses of a binding narrow the binding, which narrows its defining
    // expression, which may narrow the parameter.
    detail::PartialShape demands_in_def(const Definition& def, const Param& param, int depth) {
        using detail::PartialShape;
        std::map<std::string, PartialShape> demands; // params and value bindings
        for (const auto& p : def.params) {
            PartialShape seed = PartialShape::unknown();
            if (p.annotation) {
                std::int64_t sum = std::accumulate(p.annotation->begin(), p.annotation->end(),
                                                   std::int64_t{0});
                if (sum != 1) seed.dims.push_back(sum);
            }
            demands[p.name] = seed;
        }
        for (const auto& b : def.bindings)
            if (b.params.empty()) demands[b.name] = PartialShape::unknown();

        auto note = [&](const std::string& name, const PartialShape& want) {
            auto it = demands.find(name);
            if (it == demands.end()) return false;
            return detail::merge_soft(it->second, want);
        };

        for (int pass = 0; pass < 8; ++pass) {
            bool changed = false;
            PartialShape body_want = PartialShape::unknown();
            if (def.output_annotation) {
                body_want.dims.push_back(std::accumulate(def.output_annotation->begin(),
                                                         def.output_annotation->end(),
                                                         std::int64_t{0}));
            }
            changed |= demand_walk(def, def.body, body_want, note, depth);
            for (const auto& b : def.bindings) {
                PartialShape want =
                    b.params.empty() ? demands[b.name] : PartialShape::unknown();
                changed |= demand_walk(def, b.body, want, note, depth);
            }
            if (!changed) break;
        }
        return demands[param.name];
    }

    // Walks an expression that is demanded to have shape `want`, narrowing
    // every named variable it can. Returns whether any demand changed.
    template <typename Note>
    bool demand_walk(const Definition& def, const ExprPtr& e, const detail::PartialShape& want,
                     Note&& note, int depth) {
        using detail::PartialShape;
        if (depth > kMaxDepth) return false;
        bool changed = false;
        switch (e->kind) {
            case ExprKind::Var:
                changed |= note(e->name, want);
                break;
            case ExprKind::IntLit:
                break;
            case ExprKind::BinOp:
                changed |= demand_walk(def, e->args[0], PartialShape::closed_scalar(), note, depth);
                changed |= demand_walk(def, e->args[1], PartialShape::closed_scalar(), note, depth);
                break;
            case ExprKind::HofApply: {
                PartialShape varg;
                if (e->hof_pattern) {
                    varg.dims.push_back(std::accumulate(e->hof_pattern->begin(),
                                                        e->hof_pattern->end(), std::int64_t{0}));
                } else {
                    varg.dims.push_back(std::nullopt);
                }
                PartialShape elem = fn_param_demand(def, e->fn, depth + 1);
                varg.dims.insert(varg.dims.end(), elem.dims.begin(), elem.dims.end());
                varg.tail_open = elem.tail_open;
                if (e->hof == HofKind::Foldl) {
                    if (!e->args.empty())
                        changed |= demand_walk(def, e->args[0], fn_acc_demand(def, e->fn, depth + 1),
                                               note, depth);
                    if (e->args.size() >= 2)
                        changed |= demand_walk(def, e->args[1], varg, note, depth);
                } else if (!e->args.empty()) {
                    changed |= demand_walk(def, e->args[0], varg, note, depth);
                }
                break;
            }
            case ExprKind::Apply: {
                if (e->fn->kind == ExprKind::Var) {
                    const std::string& n = e->fn->name;
                    if (const Definition* callee = prog_.find(n)) {
                        for (std::size_t i = 0; i < e->args.size() && i < callee->params.size(); ++i)
                            changed |= demand_walk(def, e->args[i],
                                                   infer_param(*callee, i, depth + 1), note, depth);
                        break;
                    }
                    if (const Binding* b = find_fn_binding(def, n)) {
                        for (std::size_t i = 0; i < e->args.size() && i < b->params.size(); ++i)
                            changed |= demand_walk(def, e->args[i],
                                                   binding_param_demand(def, *b, i, depth + 1), note,
                                                   depth);
                        break;
                    }
                }
                for (const auto& a : e->args)
                    changed |= demand_walk(def, a, PartialShape::unknown(), note, depth);
                break;
            }
            case ExprKind::Transpose:
                changed |= demand_walk(def, e->args[0], detail::swap_outer2(want), note, depth);
                break;
            case ExprKind::VecLit:
            case ExprKind::Tuple: {
                PartialShape ew = want;
                if (!ew.dims.empty()) ew.dims.erase(ew.dims.begin());
                else ew = PartialShape::unknown();
                for (const auto& a : e->args) changed |= demand_walk(def, a, ew, note, depth);
                break;
            }
            case ExprKind::Lambda:
                changed |= demand_walk(def, e->args[0], PartialShape::unknown(), note, depth);
                break;
        }
        return changed;
    }

    const Binding* find_fn_binding(const Definition& def, const std::string& n) const {
        for (const auto& b : def.bindings)
            if (b.name == n && !b.params.empty()) return &b;
        return nullptr;
    }

    // Demand a local function binding places on its parameter `idx`.
    detail::PartialShape binding_param_demand(const Definition& def, const Binding& b,
                                              std::size_t idx, int depth) {
        using detail::PartialShape;
        if (depth > kMaxDepth) return PartialShape::unknown();
        PartialShape acc = PartialShape::unknown();
        auto note = [&](const std::string& name, const PartialShape& want) {
            if (name != b.params[idx].name) return false;
            return detail::merge_soft(acc, want);
        };
        for (int pass = 0; pass < 4; ++pass)
            if (!demand_walk(def, b.body, PartialShape::unknown(), note, depth)) break;
        return acc;
    }

    // Demand a function value places on its last (element) parameter.
    detail::PartialShape fn_param_demand(const Definition& def, const ExprPtr& fn, int depth) {
        using detail::PartialShape;
        if (depth > kMaxDepth) return PartialShape::unknown();
        switch (fn->kind) {
            case ExprKind::Var: {
                const std::string& n = fn->name;
                if (const Definition* d = prog_.find(n)) {
                    if (d->params.empty()) return PartialShape::unknown();
                    return infer_param(*d, d->params.size() - 1, depth);
                }
                if (const Binding* b = find_fn_binding(def, n))
                    return binding_param_demand(def, *b, b->params.size() - 1, depth);
                if (n == "div") return PartialShape::closed_scalar();
                return PartialShape::unknown();
            }
            case ExprKind::Lambda: {
                const std::string& last = fn->lambda_params.back();
                PartialShape acc = PartialShape::unknown();
                auto note = [&](const std::string& name, const PartialShape& want) {
                    if (name != last) return false;
                    return detail::merge_soft(acc, want);
                };
                for (int pass = 0; pass < 4; ++pass)
                    if (!demand_walk(def, fn->args[0], PartialShape::unknown(), note, depth)) break;
                return acc;
            }
            case ExprKind::HofApply: {
                // A partial HoF as function value: map [4] f demands a vector
                // of sum-of-pattern elements shaped by f's own demand.
                PartialShape p;
                if (fn->hof_pattern) {
                    p.dims.push_back(std::accumulate(fn->hof_pattern->begin(),
                                                     fn->hof_pattern->end(), std::int64_t{0}));
                } else {
                    p.dims.push_back(std::nullopt);
                }
                PartialShape elem = fn_param_demand(def, fn->fn, depth + 1);
                p.dims.insert(p.dims.end(), elem.dims.begin(), elem.dims.end());
                p.tail_open = elem.tail_open;
                return p;
            }
            default:
                return PartialShape::unknown();
        }
    }

    detail::PartialShape fn_acc_demand(const Definition& def, const ExprPtr& fn, int depth) {
        if (fn->kind == ExprKind::Var) {
            if (const Definition* d = prog_.find(fn->name); d && d->params.size() >= 2)
                return infer_param(*d, 0, depth);
            if (const Binding* b = find_fn_binding(def, fn->name); b && b->params.size() >= 2)
                return binding_param_demand(def, *b, 0, depth);
        }
        return detail::PartialShape::unknown();
    }

    const Program& prog_;
    std::map<std::string, detail::PartialShape> memo_;
};

inline std::optional<std::vector<Shape>> infer_entry_shapes(const Program& prog,
                                                            const std::string& entry) {
    return ShapeInfer(prog).infer(entry);
}

} // namespace sdfap
