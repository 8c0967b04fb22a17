#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sdfap/ast.hpp"
#include "sdfap/sema.hpp"
#include "sdfap/shapes.hpp"

namespace sdfap {

enum class DagKind {
    Source,   // entry parameter (or a fragment's element input)
    Sink,     // entry output
    SdfCall,  // call of an annotated definition: one SDF-AP node
    SdfHof,   // annotated HoF over combinational logic: one coalesced SDF-AP node
    HofGroup, // annotated HoF over SDF-AP content: expands into instances
    Comb,     // one combinational application (operator, call, comb HoF, ...)
};

inline const char* to_string(DagKind k) {
    switch (k) {
        case DagKind::Source: return "source";
        case DagKind::Sink: return "sink";
        case DagKind::SdfCall: return "sdfap-node";
        case DagKind::SdfHof: return "sdfap-hof";
        case DagKind::HofGroup: return "hof-group";
        case DagKind::Comb: return "comb";
    }
    return "?";
}

struct DagEdge {
    int id = -1;
    int from = -1;
    int to = -1;
    int to_slot = 0;
    Shape shape; // shape of the value the edge carries per graph iteration
};

struct DagNode {
    int id = -1;
    DagKind kind{};
    std::string label;
    SourcePos pos;

    const Definition* def = nullptr; // SdfCall
    // SdfHof / HofGroup payload
    HofKind hof{};
    std::vector<std::int64_t> hof_pattern;
    ExprPtr fn;
    // Comb payload: expression over placeholder variables $0..$k-1
    ExprPtr templ;
    // Scope that resolves local function bindings referenced by fn/templ.
    const Definition* context = nullptr;

    Shape out_shape;
    std::vector<int> in_edges; // ordered by slot
    std::vector<int> out_edges;
    int param_index = -1; // Source
};

struct AppDag {
    std::vector<DagNode> nodes;
    std::vector<DagEdge> edges;
    std::vector<int> source_nodes;
    int sink_node = -1;

    const DagNode& node(int id) const { return nodes[static_cast<std::size_t>(id)]; }
    const DagEdge& edge(int id) const { return edges[static_cast<std::size_t>(id)]; }
};

// ---------------------------------------------------------------------------
// SDF-AP content detection for HoF function arguments
// ---------------------------------------------------------------------------

inline bool fn_contains_sdfap(const Program& prog, const std::map<std::string, Classification>& cls,
                              const Definition* context, const ExprPtr& e) {
    if (!e) return false;
    if (e->kind == ExprKind::HofApply && e->hof_pattern) return true;
    if (e->kind == ExprKind::Var) {
        if (const Definition* d = prog.find(e->name)) {
            const auto& c = cls.at(d->name);
            return c.cls == DefClass::SdfapNode || c.contains_sdfap_descendants;
        }
        if (context) {
            for (const auto& b : context->bindings)
                if (b.name == e->name && !b.params.empty())
                    return fn_contains_sdfap(prog, cls, context, b.body);
        }
        return false;
    }
    if (e->fn && fn_contains_sdfap(prog, cls, context, e->fn)) return true;
    for (const auto& a : e->args)
        if (fn_contains_sdfap(prog, cls, context, a)) return true;
    return false;
}

// ---------------------------------------------------------------------------
// AST to DAG lowering: one node per function application, depth-first with a
// monotone label counter so node labels are reproducible.
// ---------------------------------------------------------------------------

class DagBuilder {
public:
    DagBuilder(const Program& prog, const std::map<std::string, Classification>& cls)
        : prog_(prog), cls_(cls), checker_(prog) {}

    AppDag build_entry(const Definition& entry, const std::vector<Shape>& inputs) {
        if (inputs.size() != entry.params.size())
            throw CompileError(entry.pos, "'" + entry.name + "' expects " +
                                              std::to_string(entry.params.size()) +
                                              " input shapes, got " + std::to_string(inputs.size()));
        dag_ = AppDag{};
        Scope sc;
        sc.context = &entry;
        std::vector<Wire> args;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            int n = add_node(DagKind::Source, entry.params[i].name, entry.pos);
            dag_.nodes[static_cast<std::size_t>(n)].param_index = static_cast<int>(i);
            dag_.nodes[static_cast<std::size_t>(n)].out_shape = inputs[i];
            dag_.source_nodes.push_back(n);
            validate_param(entry.params[i], inputs[i], entry.name);
            args.push_back(Wire{n, nullptr, inputs[i]});
            sc.values[entry.params[i].name] = args.back();
        }
        Wire out;
        if (entry.annotated()) {
            // An annotated entry is itself one SDF-AP node.
            out = apply_def(entry, args, entry.pos);
        } else {
            out = lower_def_body(entry, sc);
        }
        finish(out);
        return std::move(dag_);
    }

    // Fragment for a function value applied to formal inputs (used when a
    // HoF group's function argument is itself a subgraph).
    AppDag build_fn_fragment(const ExprPtr& fn, const Definition* context,
                             const std::vector<Shape>& arg_shapes) {
        dag_ = AppDag{};
        std::vector<Wire> args;
        for (std::size_t i = 0; i < arg_shapes.size(); ++i) {
            int n = add_node(DagKind::Source, "arg" + std::to_string(i), fn->pos);
            dag_.nodes[static_cast<std::size_t>(n)].param_index = static_cast<int>(i);
            dag_.nodes[static_cast<std::size_t>(n)].out_shape = arg_shapes[i];
            dag_.source_nodes.push_back(n);
            args.push_back(Wire{n, nullptr, arg_shapes[i]});
        }
        Scope sc;
        sc.context = context;
        Wire out = apply_fn_wire(fn, sc, args, fn->pos);
        finish(out);
        return std::move(dag_);
    }

private:
    struct Wire {
        int node = -1;      // producing node, or -1 for a compile-time constant
        ExprPtr cexpr;      // constant expression when node < 0
        Shape shape;
        bool is_const() const { return node < 0; }
    };

    struct Scope {
        const Definition* context = nullptr;   // provides local function bindings
        std::map<std::string, Wire> values;    // params and lowered value bindings
        std::set<std::string> lowering;        // cycle guard for bindings
    };

    int add_node(DagKind kind, const std::string& what, SourcePos pos) {
        DagNode n;
        n.id = static_cast<int>(dag_.nodes.size());
        n.kind = kind;
        n.label = what + "#" + std::to_string(n.id);
        n.pos = pos;
        dag_.nodes.push_back(std::move(n));
        return dag_.nodes.back().id;
    }

    void connect(const Wire& w, int to, int slot) {
        DagEdge e;
        e.id = static_cast<int>(dag_.edges.size());
        e.from = w.node;
        e.to = to;
        e.to_slot = slot;
        e.shape = w.shape;
        dag_.edges.push_back(e);
        dag_.nodes[static_cast<std::size_t>(w.node)].out_edges.push_back(e.id);
        auto& in = dag_.nodes[static_cast<std::size_t>(to)].in_edges;
        if (static_cast<int>(in.size()) <= slot) in.resize(static_cast<std::size_t>(slot) + 1, -1);
        in[static_cast<std::size_t>(slot)] = e.id;
    }

    // A pattern summing to 1 moves one token per firing and the parameter is
    // that token itself; larger sums make the parameter a vector of tokens.
    void validate_param(const Param& p, const Shape& got, const std::string& defname) {
        if (!p.annotation) return;
        std::int64_t need = std::accumulate(p.annotation->begin(), p.annotation->end(),
                                            std::int64_t{0});
        if (need == 1) return;
        if (got.is_scalar() || got.outer() != need)
            throw CompileError(p.pos, "parameter '" + p.name + "' of '" + defname + "' consumes " +
                                          std::to_string(need) + " tokens but receives shape " +
                                          got.str());
    }

    void finish(const Wire& out) {
        Wire w = materialize(out);
        int sink = add_node(DagKind::Sink, "out", SourcePos{});
        dag_.sink_node = sink;
        dag_.nodes[static_cast<std::size_t>(sink)].out_shape = w.shape;
        connect(w, sink, 0);
        check_reachable();
    }

    // A constant wire consumed by a node becomes a zero-input comb node.
    Wire materialize(const Wire& w) {
        if (!w.is_const()) return w;
        int n = add_node(DagKind::Comb, "const", w.cexpr ? w.cexpr->pos : SourcePos{});
        DagNode& node = dag_.nodes[static_cast<std::size_t>(n)];
        node.templ = w.cexpr;
        node.out_shape = w.shape;
        return Wire{n, nullptr, w.shape};
    }

    void check_reachable() {
        std::vector<bool> seen(dag_.nodes.size(), false);
        std::vector<int> work = dag_.source_nodes;
        for (const auto& n : dag_.nodes)
            if (n.kind == DagKind::Comb && n.in_edges.empty()) work.push_back(n.id);
        for (std::size_t i = 0; i < work.size(); ++i) {
            int id = work[i];
            if (seen[static_cast<std::size_t>(id)]) continue;
            seen[static_cast<std::size_t>(id)] = true;
            for (int e : dag_.nodes[static_cast<std::size_t>(id)].out_edges)
                work.push_back(dag_.edges[static_cast<std::size_t>(e)].to);
        }
        for (const auto& n : dag_.nodes)
            if (!seen[static_cast<std::size_t>(n.id)])
                throw CompileError(n.pos, "node '" + n.label + "' is not reachable from any input");
    }

    // --- comb template assembly ---------------------------------------------

    struct TemplateCtx {
        std::vector<Wire> inputs;            // distinct node wires, slot order
        std::map<int, std::string> names;    // node id -> placeholder
        ExprPtr use(const Wire& w) {
            if (w.is_const()) return w.cexpr;
            auto it = names.find(w.node);
            if (it == names.end()) {
                std::string n = "$" + std::to_string(inputs.size());
                it = names.emplace(w.node, n).first;
                inputs.push_back(w);
            }
            return Expr::var(it->second);
        }
    };

    Wire make_comb(const std::string& what, ExprPtr templ, TemplateCtx& ctx, Scope& sc,
                   SourcePos pos) {
        if (ctx.inputs.empty()) {
            // No hardware inputs: a compile-time constant subtree.
            std::map<std::string, Shape> none;
            Shape s = checker_.check_expr_with(sc.context, templ, none);
            return Wire{-1, templ, s};
        }
        std::map<std::string, Shape> vars;
        for (std::size_t i = 0; i < ctx.inputs.size(); ++i)
            vars["$" + std::to_string(i)] = ctx.inputs[i].shape;
        Shape s = checker_.check_expr_with(sc.context, templ, vars);
        int n = add_node(DagKind::Comb, what, pos);
        DagNode& node = dag_.nodes[static_cast<std::size_t>(n)];
        node.templ = templ;
        node.context = sc.context;
        node.out_shape = s;
        for (std::size_t i = 0; i < ctx.inputs.size(); ++i)
            connect(ctx.inputs[i], n, static_cast<int>(i));
        return Wire{n, nullptr, s};
    }

    // --- function application ------------------------------------------------

    Wire lower_def_body(const Definition& def, Scope& sc) { return lower(def.body, sc); }

    Wire apply_def(const Definition& def, std::vector<Wire> args, SourcePos pos) {
        if (args.size() != def.params.size())
            throw CompileError(pos, "'" + def.name + "' expects " +
                                        std::to_string(def.params.size()) + " arguments");
        const auto& c = cls_.at(def.name);
        if (c.cls == DefClass::SdfapNode) {
            std::vector<Shape> shapes;
            for (std::size_t i = 0; i < args.size(); ++i) {
                args[i] = materialize(args[i]);
                validate_param(def.params[i], args[i].shape, def.name);
                shapes.push_back(args[i].shape);
            }
            Shape out = checker_.check_call(def, shapes);
            int n = add_node(DagKind::SdfCall, def.name, pos);
            DagNode& node = dag_.nodes[static_cast<std::size_t>(n)];
            node.def = &def;
            node.context = &def;
            node.out_shape = out;
            for (std::size_t i = 0; i < args.size(); ++i)
                connect(args[i], n, static_cast<int>(i));
            return Wire{n, nullptr, out};
        }
        if (c.contains_sdfap_descendants) {
            // Inline: the body contains SDF-AP nodes that must appear in the graph.
            Scope inner;
            inner.context = &def;
            for (std::size_t i = 0; i < args.size(); ++i)
                inner.values[def.params[i].name] = args[i];
            return lower(def.body, inner);
        }
        // Pure combinational call: keep it as a single application node.
        TemplateCtx ctx;
        std::vector<ExprPtr> targs;
        for (const auto& a : args) targs.push_back(ctx.use(a));
        ExprPtr templ = Expr::apply(Expr::var(def.name, pos), std::move(targs), pos);
        Scope defsc;
        defsc.context = nullptr; // top-level name; no local scope needed
        return make_comb(def.name, templ, ctx, defsc, pos);
    }

    Wire apply_fn_wire(const ExprPtr& fn, Scope& sc, std::vector<Wire> args, SourcePos pos) {
        switch (fn->kind) {
            case ExprKind::Var: {
                const std::string& n = fn->name;
                if (const Definition* d = prog_.find(n)) return apply_def(*d, std::move(args), pos);
                if (sc.context) {
                    for (const auto& b : sc.context->bindings) {
                        if (b.name == n && !b.params.empty()) {
                            if (args.size() != b.params.size())
                                throw CompileError(pos, "'" + n + "' expects " +
                                                            std::to_string(b.params.size()) +
                                                            " arguments");
                            if (fn_contains_sdfap(prog_, cls_, sc.context, b.body)) {
                                Scope inner;
                                inner.context = sc.context;
                                inner.values = sc.values; // sibling bindings stay visible
                                for (std::size_t i = 0; i < args.size(); ++i)
                                    inner.values[b.params[i].name] = args[i];
                                return lower(b.body, inner);
                            }
                            TemplateCtx ctx;
                            std::vector<ExprPtr> targs;
                            for (const auto& a : args) targs.push_back(ctx.use(a));
                            ExprPtr templ =
                                Expr::apply(Expr::var(n, pos), std::move(targs), pos);
                            return make_comb(n, templ, ctx, sc, pos);
                        }
                    }
                }
                if (n == "div") {
                    TemplateCtx ctx;
                    ExprPtr templ = Expr::binop(BinOpKind::Div, ctx.use(args.at(0)),
                                                ctx.use(args.at(1)), pos);
                    return make_comb("div", templ, ctx, sc, pos);
                }
                if (n == "transpose") {
                    TemplateCtx ctx;
                    ExprPtr templ = Expr::transpose(ctx.use(args.at(0)), pos);
                    return make_comb("transpose", templ, ctx, sc, pos);
                }
                throw CompileError(pos, "'" + n + "' is not a function");
            }
            case ExprKind::Lambda: {
                if (fn_contains_sdfap(prog_, cls_, sc.context, fn->args[0])) {
                    if (args.size() != fn->lambda_params.size())
                        throw CompileError(pos, "lambda arity mismatch");
                    Scope inner;
                    inner.context = sc.context;
                    inner.values = sc.values;
                    for (std::size_t i = 0; i < args.size(); ++i)
                        inner.values[fn->lambda_params[i]] = args[i];
                    return lower(fn->args[0], inner);
                }
                TemplateCtx ctx;
                std::vector<ExprPtr> targs;
                for (const auto& a : args) targs.push_back(ctx.use(a));
                check_captures(fn, sc);
                ExprPtr templ = Expr::apply(fn, std::move(targs), pos);
                return make_comb("lambda", templ, ctx, sc, pos);
            }
            case ExprKind::HofApply: {
                // Partial HoF completed by `args`.
                Expr full = *fn;
                std::vector<Wire> given;
                for (const auto& a : fn->args) given.push_back(lower(a, sc));
                given.insert(given.end(), args.begin(), args.end());
                return lower_hof(full, std::move(given), sc);
            }
            default:
                throw CompileError(pos, "expression is not a function");
        }
    }

    // The function argument of a HoF must not capture hardware values: the
    // expansion bakes no per-instance environments beyond element indices.
    void check_captures(const ExprPtr& fn, Scope& sc) {
        std::function<void(const ExprPtr&, std::set<std::string>)> go =
            [&](const ExprPtr& e, std::set<std::string> bound) {
                if (!e) return;
                if (e->kind == ExprKind::Var) {
                    if (bound.count(e->name) || prog_.find(e->name)) return;
                    if (e->name == "div" || e->name == "transpose") return;
                    if (sc.context) {
                        for (const auto& b : sc.context->bindings)
                            if (b.name == e->name && !b.params.empty()) return;
                    }
                    if (sc.values.count(e->name))
                        throw CompileError(e->pos, "function argument captures value '" + e->name +
                                                       "'; only element inputs are supported");
                    return;
                }
                if (e->kind == ExprKind::Lambda) {
                    for (const auto& p : e->lambda_params) bound.insert(p);
                    go(e->args[0], bound);
                    return;
                }
                if (e->fn) go(e->fn, bound);
                for (const auto& a : e->args) go(a, bound);
            };
        go(fn, {});
    }

    Wire lower_hof(const Expr& e, std::vector<Wire> given, Scope& sc) {
        bool contains = fn_contains_sdfap(prog_, cls_, sc.context, e.fn);
        std::size_t needed = e.hof == HofKind::Foldl ? 2 : 1;
        if (given.size() != needed)
            throw CompileError(e.pos, std::string(to_string(e.hof)) + " arity mismatch");

        if (!e.hof_pattern) {
            if (contains)
                throw CompileError(e.pos, std::string(to_string(e.hof)) +
                                              " contains SDF-AP content and must carry a pattern");
            // Plain combinational HoF: part of the surrounding comb logic.
            TemplateCtx ctx;
            std::vector<ExprPtr> targs;
            for (const auto& a : given) targs.push_back(ctx.use(a));
            check_captures(e.fn, sc);
            ExprPtr templ = Expr::hofapply(e.hof, std::nullopt, e.fn, std::move(targs), e.pos);
            return make_comb(to_string(e.hof), templ, ctx, sc, e.pos);
        }

        // Annotated HoF: a coalesced node (comb content) or an expansion group.
        Pattern::flat(*e.hof_pattern); // validates entries
        check_captures(e.fn, sc);
        std::vector<Shape> shapes;
        for (auto& a : given) {
            a = materialize(a);
            shapes.push_back(a.shape);
        }
        Shape out = checker_.hof_result(sc.context, e, shapes);

        const Shape& xs = shapes.back();
        std::int64_t psum = std::accumulate(e.hof_pattern->begin(), e.hof_pattern->end(),
                                            std::int64_t{0});
        if (xs.is_scalar() || xs.outer() != psum)
            throw CompileError(e.pos, std::string(to_string(e.hof)) + " pattern " +
                                          Pattern::flat(*e.hof_pattern).display() + " sums to " +
                                          std::to_string(psum) + " but the vector dimension is " +
                                          (xs.is_scalar() ? std::string("scalar") : std::to_string(xs.outer())));

        int n = add_node(contains ? DagKind::HofGroup : DagKind::SdfHof, to_string(e.hof), e.pos);
        DagNode& node = dag_.nodes[static_cast<std::size_t>(n)];
        node.hof = e.hof;
        node.hof_pattern = *e.hof_pattern;
        node.fn = e.fn;
        node.context = sc.context;
        node.out_shape = out;
        for (std::size_t i = 0; i < given.size(); ++i)
            connect(given[i], n, static_cast<int>(i));
        return Wire{n, nullptr, out};
    }

    // --- expression lowering --------------------------------------------------

    Wire lower(const ExprPtr& ep, Scope& sc) {
        const Expr& e = *ep;
        switch (e.kind) {
            case ExprKind::IntLit:
                return Wire{-1, ep, Shape::scalar()};
            case ExprKind::Var: {
                auto it = sc.values.find(e.name);
                if (it != sc.values.end()) return it->second;
                if (sc.context) {
                    for (const auto& b : sc.context->bindings) {
                        if (b.name != e.name) continue;
                        if (!b.params.empty())
                            throw CompileError(e.pos, "'" + e.name + "' is a function, not a value");
                        if (sc.lowering.count(e.name))
                            throw CompileError(e.pos, "cyclic binding '" + e.name + "'");
                        sc.lowering.insert(e.name);
                        Wire w = lower(b.body, sc);
                        sc.lowering.erase(e.name);
                        sc.values[e.name] = w;
                        return w;
                    }
                }
                if (const Definition* d = prog_.find(e.name); d && d->params.empty())
                    return apply_def(*d, {}, e.pos);
                throw CompileError(e.pos, "cannot use '" + e.name + "' as a value");
            }
            case ExprKind::BinOp: {
                Wire a = lower(e.args[0], sc);
                Wire b = lower(e.args[1], sc);
                TemplateCtx ctx;
                ExprPtr templ = Expr::binop(e.op, ctx.use(a), ctx.use(b), e.pos);
                return make_comb(to_string(e.op) == std::string("div") ? "div" : "op", templ, ctx,
                                 sc, e.pos);
            }
            case ExprKind::Apply: {
                std::vector<Wire> args;
                for (const auto& a : e.args) args.push_back(lower(a, sc));
                return apply_fn_wire(e.fn, sc, std::move(args), e.pos);
            }
            case ExprKind::HofApply: {
                std::vector<Wire> given;
                for (const auto& a : e.args) given.push_back(lower(a, sc));
                return lower_hof(e, std::move(given), sc);
            }
            case ExprKind::VecLit:
            case ExprKind::Tuple: {
                if (e.args.empty()) throw CompileError(e.pos, "empty vector literal");
                std::vector<Wire> elems;
                for (const auto& a : e.args) elems.push_back(lower(a, sc));
                TemplateCtx ctx;
                std::vector<ExprPtr> telems;
                for (const auto& w : elems) telems.push_back(ctx.use(w));
                ExprPtr templ = Expr::veclit(std::move(telems), e.pos);
                return make_comb("vec", templ, ctx, sc, e.pos);
            }
            case ExprKind::Transpose: {
                Wire a = lower(e.args[0], sc);
                TemplateCtx ctx;
                ExprPtr templ = Expr::transpose(ctx.use(a), e.pos);
                return make_comb("transpose", templ, ctx, sc, e.pos);
            }
            case ExprKind::Lambda:
                throw CompileError(e.pos, "lambda used as a value");
        }
        throw CompileError(e.pos, "unreachable expression kind");
    }

    const Program& prog_;
    const std::map<std::string, Classification>& cls_;
    ShapeChecker checker_;
    AppDag dag_;
};

inline AppDag build_dag(const Program& prog, const std::map<std::string, Classification>& cls,
                        const std::string& entry, const std::vector<Shape>& inputs) {
    const Definition* d = prog.find(entry);
    if (!d) throw CompileError("no definition named '" + entry + "'");
    return DagBuilder(prog, cls).build_entry(*d, inputs);
}

} // namespace sdfap
