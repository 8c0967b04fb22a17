#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sdfap/ast.hpp"
#include "sdfap/pattern.hpp"

namespace sdfap {

enum class DefClass { SdfapNode, Combinational };

struct Classification {
    DefClass cls = DefClass::Combinational;
    // True for combinational definitions whose body (or bindings) contain an
    // annotated HoF or a call to an SDF-AP node, directly or transitively.
    bool contains_sdfap_descendants = false;
};

namespace detail {

inline bool is_builtin(const std::string& n) { return n == "div" || n == "transpose"; }

template <typename F>
void walk_exprs(const ExprPtr& e, F&& f) {
    if (!e) return;
    f(e);
    if (e->fn) walk_exprs(e->fn, f);
    for (const auto& a : e->args) walk_exprs(a, f);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Name resolution, acyclicity, eta-expansion of point-free bindings.
// Produces a program in which every definition and binding body is fully
// applied (arity deficit zero).
// ---------------------------------------------------------------------------
class Resolver {
public:
    explicit Resolver(Program prog) : prog_(std::move(prog)) {}

    Program run() {
        check_duplicates();
        order_ = topo_order_defs();
        for (const std::string& name : order_) {
            Definition& d = *find_mut(name);
            resolve_definition(d);
        }
        return std::move(prog_);
    }

private:
    struct LocalInfo {
        int arity = 0; // post-eta arity of a binding or definition
    };

    Definition* find_mut(const std::string& n) {
        for (auto& d : prog_.defs)
            if (d.name == n) return &d;
        return nullptr;
    }

    void check_duplicates() {
        std::set<std::string> seen;
        for (const auto& d : prog_.defs) {
            if (!seen.insert(d.name).second)
                throw CompileError(d.pos, "duplicate definition '" + d.name + "'");
            if (detail::is_builtin(d.name) || d.name == "map" || d.name == "imap" ||
                d.name == "foldl" || d.name == "fold")
                throw CompileError(d.pos, "'" + d.name + "' is a builtin name");
        }
    }

    // References from one top-level definition to another.
    std::set<std::string> def_refs(const Definition& d) const {
        std::set<std::string> local;
        for (const auto& p : d.params) local.insert(p.name);
        for (const auto& b : d.bindings) local.insert(b.name);
        std::set<std::string> out;
        auto visit = [&](const ExprPtr& e) {
            if (e->kind == ExprKind::Var && !local.count(e->name) && prog_.find(e->name))
                out.insert(e->name);
        };
        detail::walk_exprs(d.body, visit);
        for (const auto& b : d.bindings) detail::walk_exprs(b.body, visit);
        return out;
    }

    std::vector<std::string> topo_order_defs() {
        std::map<std::string, int> state; // 0 unseen, 1 visiting, 2 done
        std::vector<std::string> order;
        std::function<void(const Definition&)> visit = [&](const Definition& d) {
            int& s = state[d.name];
            if (s == 2) return;
            if (s == 1)
                throw CompileError(d.pos, "recursive definition '" + d.name + "'");
            s = 1;
            for (const auto& ref : def_refs(d)) visit(*prog_.find(ref));
            s = 2;
            order.push_back(d.name);
        };
        for (const auto& d : prog_.defs) visit(d);
        return order;
    }

    void resolve_definition(Definition& d) {
        std::set<std::string> params;
        for (const auto& p : d.params) {
            if (!params.insert(p.name).second)
                throw CompileError(p.pos, "duplicate parameter '" + p.name + "'");
        }
        std::set<std::string> bindings;
        for (const auto& b : d.bindings) {
            if (!bindings.insert(b.name).second)
                throw CompileError(b.pos, "duplicate binding '" + b.name + "'");
            if (params.count(b.name))
                throw CompileError(b.pos, "binding '" + b.name + "' shadows a parameter");
        }

        // Bindings may reference each other in any order but not cyclically.
        std::map<std::string, const Binding*> bmap;
        for (const auto& b : d.bindings) bmap[b.name] = &b;
        std::map<std::string, int> state;
        std::vector<std::string> border;
        std::function<void(const Binding&)> visit = [&](const Binding& b) {
            int& s = state[b.name];
            if (s == 2) return;
            if (s == 1)
                throw CompileError(b.pos, "cyclic binding '" + b.name + "' in '" + d.name + "'");
            s = 1;
            std::set<std::string> shadow(b.params.size() ? std::set<std::string>{} : std::set<std::string>{});
            for (const auto& p : b.params) shadow.insert(p.name);
            detail::walk_exprs(b.body, [&](const ExprPtr& e) {
                if (e->kind == ExprKind::Var && bmap.count(e->name) && !shadow.count(e->name))
                    visit(*bmap.at(e->name));
            });
            s = 2;
            border.push_back(b.name);
        };
        for (const auto& b : d.bindings) visit(b);

        // Scope check: every Var resolves to a parameter, binding, top-level
        // definition, builtin, or an enclosing lambda parameter.
        auto check_scope = [&](const ExprPtr& root, std::set<std::string> scope) {
            std::function<void(const ExprPtr&, std::set<std::string>&)> go =
                [&](const ExprPtr& e, std::set<std::string>& sc) {
                    if (!e) return;
                    if (e->kind == ExprKind::Var) {
                        if (!sc.count(e->name) && !prog_.find(e->name) && !detail::is_builtin(e->name))
                            throw CompileError(e->pos, "unresolved name '" + e->name + "'");
                        return;
                    }
                    if (e->kind == ExprKind::Lambda) {
                        auto sc2 = sc;
                        for (const auto& p : e->lambda_params) sc2.insert(p);
                        go(e->args[0], sc2);
                        return;
                    }
                    if (e->fn) go(e->fn, sc);
                    for (const auto& a : e->args) go(a, sc);
                };
            go(root, scope);
        };
        std::set<std::string> scope = params;
        scope.insert(bindings.begin(), bindings.end());
        check_scope(d.body, scope);
        for (const auto& b : d.bindings) {
            auto sc = scope;
            for (const auto& p : b.params) sc.insert(p.name);
            check_scope(b.body, sc);
        }

        // Eta-expand point-free bindings in dependency order, then the
        // definition itself: "maps4 = map [4] square" gets a fresh argument.
        for (const auto& name : border) {
            Binding& b = *const_cast<Binding*>(bmap.at(name));
            eta_expand(d, b.params, b.body, b.name);
            locals_[d.name][b.name] = LocalInfo{static_cast<int>(b.params.size())};
        }
        eta_expand(d, d.params, d.body, d.name);
        arity_[d.name] = static_cast<int>(d.params.size());

        validate_annotations(d);
    }

    // Arity still missing from an expression used as a value.
    int arity_deficit(const Definition& d, const ExprPtr& e) {
        switch (e->kind) {
            case ExprKind::Var: {
                if (auto it = locals_.find(d.name); it != locals_.end()) {
                    auto jt = it->second.find(e->name);
                    if (jt != it->second.end()) return jt->second.arity;
                }
                if (prog_.find(e->name)) {
                    auto it = arity_.find(e->name);
                    return it != arity_.end() ? it->second : 0;
                }
                if (e->name == "div") return 2;
                if (e->name == "transpose") return 1;
                return 0; // parameters and lambda parameters are plain values
            }
            case ExprKind::Lambda:
                return static_cast<int>(e->lambda_params.size());
            case ExprKind::Apply: {
                int a = arity_deficit(d, e->fn) - static_cast<int>(e->args.size());
                if (a < 0)
                    throw CompileError(e->pos, "too many arguments in application");
                return a;
            }
            case ExprKind::HofApply: {
                int needed = e->hof == HofKind::Foldl ? 2 : 1;
                int a = needed - static_cast<int>(e->args.size());
                if (a < 0)
                    throw CompileError(e->pos, std::string(to_string(e->hof)) + " applied to too many arguments");
                return a;
            }
            default:
                return 0;
        }
    }

    void eta_expand(const Definition& d, std::vector<Param>& params, ExprPtr& body,
                    const std::string& what) {
        int deficit = arity_deficit(d, body);
        if (deficit == 0) return;
        std::vector<ExprPtr> fresh;
        for (int i = 0; i < deficit; ++i) {
            std::string n = "eta" + std::string(1, static_cast<char>('A' + i));
            while (prog_.find(n)) n += "x";
            params.push_back(Param{n, std::nullopt, body->pos});
            fresh.push_back(Expr::var(n, body->pos));
        }
        if (body->kind == ExprKind::HofApply) {
            auto args = body->args;
            args.insert(args.end(), fresh.begin(), fresh.end());
            body = Expr::hofapply(body->hof, body->hof_pattern, body->fn, std::move(args), body->pos);
        } else if (body->kind == ExprKind::Apply) {
            auto args = body->args;
            args.insert(args.end(), fresh.begin(), fresh.end());
            body = Expr::apply(body->fn, std::move(args), body->pos);
        } else {
            body = Expr::apply(body, std::move(fresh), body->pos);
        }
        (void)what;
    }

    void validate_annotations(const Definition& d) {
        bool any_param = false, all_params = !d.params.empty();
        for (const auto& p : d.params) {
            if (p.annotation) any_param = true;
            else all_params = false;
        }
        bool out = d.output_annotation.has_value();
        if ((any_param || out) && !(all_params && out && any_param)) {
            throw CompileError(d.pos, "definition '" + d.name +
                                          "' mixes annotated and unannotated parameters/output");
        }
        if (!out) return;

        auto check_pat = [&](const std::vector<std::int64_t>& pat, const std::string& what) {
            Pattern::flat(pat); // validates non-empty / nonnegative / not all-zero
            (void)what;
        };
        check_pat(*d.output_annotation, "output");
        for (const auto& p : d.params) {
            check_pat(*p.annotation, p.name);
            if (p.annotation->size() != d.output_annotation->size())
                throw CompileError(p.pos, "pattern length of parameter '" + p.name + "' (" +
                                              std::to_string(p.annotation->size()) +
                                              ") differs from output pattern length (" +
                                              std::to_string(d.output_annotation->size()) +
                                              ") in '" + d.name + "'");
        }

        // An SDF-AP node body is the combinational logic inside the wrapper;
        // it cannot contain further annotated constructs.
        auto reject_sdfap = [&](const ExprPtr& e) {
            if (e->kind == ExprKind::HofApply && e->hof_pattern)
                throw CompileError(e->pos, "annotated HoF inside SDF-AP node '" + d.name + "'");
            if (e->kind == ExprKind::Var) {
                const Definition* callee = prog_.find(e->name);
                if (callee && callee->annotated())
                    throw CompileError(e->pos, "SDF-AP node '" + d.name + "' calls SDF-AP node '" +
                                                   e->name + "'; node bodies must be combinational");
            }
        };
        detail::walk_exprs(d.body, reject_sdfap);
        for (const auto& b : d.bindings) detail::walk_exprs(b.body, reject_sdfap);
    }

    Program prog_;
    std::vector<std::string> order_;
    std::map<std::string, int> arity_;
    std::map<std::string, std::map<std::string, LocalInfo>> locals_;
};

inline Program resolve(Program prog) { return Resolver(std::move(prog)).run(); }

// ---------------------------------------------------------------------------
// Definition classification. Total and deterministic.
// ---------------------------------------------------------------------------
inline std::map<std::string, Classification> classify_definitions(const Program& prog) {
    std::map<std::string, Classification> out;

    // Process in dependency order so transitive descendants are known.
    std::function<const Classification&(const Definition&)> get = [&](const Definition& d)
        -> const Classification& {
        auto it = out.find(d.name);
        if (it != out.end()) return it->second;
        Classification c;
        if (d.annotated()) {
            c.cls = DefClass::SdfapNode;
        } else {
            c.cls = DefClass::Combinational;
            bool desc = false;
            auto visit = [&](const ExprPtr& e) {
                if (e->kind == ExprKind::HofApply && e->hof_pattern) desc = true;
                if (e->kind == ExprKind::Var) {
                    const Definition* callee = prog.find(e->name);
                    if (callee && callee->name != d.name) {
                        const Classification& cc = get(*callee);
                        if (cc.cls == DefClass::SdfapNode || cc.contains_sdfap_descendants)
                            desc = true;
                    }
                }
            };
            detail::walk_exprs(d.body, visit);
            for (const auto& b : d.bindings) detail::walk_exprs(b.body, visit);
            c.contains_sdfap_descendants = desc;
        }
        return out.emplace(d.name, c).first->second;
    };
    for (const auto& d : prog.defs) get(d);
    return out;
}

} // namespace sdfap
