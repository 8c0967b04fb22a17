#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sdfap/control.hpp"
#include "sdfap/graph.hpp"

namespace sdfap {

enum class InstKind { Source, Sink, Def, MapHof, FoldHof, Comb };

inline const char* to_string(InstKind k) {
    switch (k) {
        case InstKind::Source: return "source";
        case InstKind::Sink: return "sink";
        case InstKind::Def: return "node";
        case InstKind::MapHof: return "map-node";
        case InstKind::FoldHof: return "fold-node";
        case InstKind::Comb: return "comb";
    }
    return "?";
}

// A physical instance of the expanded design: an SDF-AP node, a coalesced
// HoF node, a combinational region, the environment source or the sink.
struct Inst {
    int id = -1;
    InstKind kind{};
    std::string label;

    // One firing: per input slot, scalars consumed per phase; per output
    // port, scalars emitted per phase. latency = number of phases.
    std::vector<std::vector<std::int64_t>> reads;
    std::vector<std::vector<std::int64_t>> port_writes;
    std::int64_t latency = 1;
    std::int64_t firings = 0; // over the whole run

    // Body.
    const Definition* def = nullptr; // Def
    HofKind hof{};                   // MapHof / FoldHof
    ExprPtr fn;
    bool with_index = false;                // imap
    std::vector<ExprPtr> templates;         // Comb: one per output port
    const Definition* context = nullptr;
    bool pointwise = false;                 // Comb with latency > 1

    // Shapes.
    std::vector<Shape> in_firing_shapes; // per slot: value consumed per firing
    std::vector<Shape> port_firing_shapes;

    // Connectivity.
    std::vector<std::vector<int>> read_route;               // [slot][position] -> fifo
    std::vector<std::vector<std::vector<int>>> write_route; // [port][position] -> fifos

    // Source payload: per cycle, the (fifo, flat index) emissions.
    std::vector<std::vector<std::pair<int, std::int64_t>>> source_sched;
    int param_index = -1;

    // Display patterns (token units, per firing); empty when not meaningful.
    Pattern cp_display, pp_display;
};

struct Fifo {
    int id = -1;
    int producer = -1, consumer = -1;
    int producer_port = 0, consumer_slot = 0;
    std::int64_t total = 0; // scalars over the run
    std::int64_t capacity = -1;
    int edge_tag = -1;

    std::vector<std::vector<std::int64_t>> in_counts;   // [producer firing][phase]
    std::vector<std::vector<std::int64_t>> read_counts; // [consumer firing][phase]
    std::vector<std::int64_t> src_prefix; // source-fed: cumulative arrivals by cycle

    std::string label;
};

struct GroupInfo {
    int id = -1;
    std::string label;
    std::string pattern;
    std::vector<int> insts;
    std::vector<int> subgroups;
};

// One logical (DAG-level) edge; physical fifos reference it by tag.
struct EdgeCatalogEntry {
    int tag = -1;
    std::string from, to;
    std::optional<Pattern> pp, cp;
    Shape value_shape;   // value carried per application
    Shape token_shape;   // consumer token granularity
};

// True for fifos that are hardware buffers: edges touching an SDF-AP node
// instance. Edges between the environment and pure combinational logic are
// wires, and the sink side belongs to the testbench.
struct ExpandedDesign;
inline bool fifo_is_buffer(const ExpandedDesign& d, const Fifo& f);

struct ExpandedDesign {
    std::vector<Inst> insts;
    std::vector<Fifo> fifos;
    std::vector<GroupInfo> groups;
    std::vector<int> top_groups;
    std::vector<int> loose_insts; // instances outside every group
    std::vector<int> source_insts;
    int sink_inst = -1;

    Shape out_shape;
    std::int64_t out_scalars_per_frame = 0;
    int frames = 1;
    std::int64_t frame_window = 1;
    std::vector<Shape> input_shapes;
    std::vector<EdgeCatalogEntry> edge_catalog;

    const Inst& inst(int id) const { return insts[static_cast<std::size_t>(id)]; }
    const Fifo& fifo(int id) const { return fifos[static_cast<std::size_t>(id)]; }
};

inline bool fifo_is_buffer(const ExpandedDesign& d, const Fifo& f) {
    if (f.consumer == d.sink_inst) return false;
    auto sdf = [](InstKind k) {
        return k == InstKind::Def || k == InstKind::MapHof || k == InstKind::FoldHof;
    };
    return sdf(d.inst(f.producer).kind) || sdf(d.inst(f.consumer).kind);
}

// ---------------------------------------------------------------------------
// Expander
// ---------------------------------------------------------------------------

class Expander {
public:
    Expander(const Program& prog, const std::map<std::string, Classification>& cls)
        : prog_(prog), cls_(cls), builder_(prog, cls) {}

    ExpandedDesign run(const AppDag& top, const std::vector<Shape>& inputs, int frames) {
        design_ = ExpandedDesign{};
        design_.frames = frames;
        design_.input_shapes = inputs;
        design_.out_shape = top.node(top.sink_node).out_shape;
        design_.out_scalars_per_frame = design_.out_shape.total_scalars();
        design_.frame_window = dag_window(top);

        std::vector<App> apps;
        for (int f = 0; f < frames; ++f)
            apps.push_back(App{{}, f, f * design_.frame_window});

        DagExpansion ex = expand_dag(top, apps, "");
        design_.top_groups = ex.groups;
        design_.loose_insts = ex.loose;

        // Environment sources.
        for (std::size_t s = 0; s < top.source_nodes.size(); ++s) {
            const DagNode& sn = top.node(top.source_nodes[s]);
            int inst = add_inst(InstKind::Source, sn.label);
            at(inst).param_index = sn.param_index;
            at(inst).firings = 1;
            for (int eid : sn.out_edges) {
                const DagEdge& edge = top.edge(eid);
                if (edge.to == top.sink_node) continue; // identity path, handled below
                route_source_edge(top, ex, edge, inst);
            }
            design_.source_insts.push_back(inst);
        }

        // Sink.
        {
            int sink = add_inst(InstKind::Sink, "out");
            design_.sink_inst = sink;
            const DagEdge& se = top.edge(top.node(top.sink_node).in_edges.at(0));
            Bind consumer{sink, 0, {}};
            consumer.runs.push_back(Run{0, se.shape.total_scalars() * frames, 0});
            const DagNode& from = top.node(se.from);
            if (from.kind == DagKind::Source) {
                // Identity program: the source feeds the sink directly.
                int src = design_.source_insts.at(static_cast<std::size_t>(from.param_index));
                Bind prod{src, 0, {}};
                prod.runs.push_back(Run{0, se.shape.total_scalars() * frames, 0});
                std::size_t first = source_emissions_.size();
                make_fifos_for_space({prod}, {consumer}, catalog_edge(top, se));
                for (std::size_t i = first; i < source_emissions_.size(); ++i)
                    source_emissions_[i].cycle =
                        (source_emissions_[i].flat / se.shape.total_scalars()) *
                        design_.frame_window;
            } else {
                auto pit = ex.producers.find(se.from);
                if (pit == ex.producers.end())
                    throw CompileError(from.pos, "entry output has no producer");
                make_fifos_for_space(pit->second, {consumer}, catalog_edge(top, se));
            }
        }

        finalize_tables();
        return std::move(design_);
    }

    // Boundary patterns for export (per dag edge consumer side).
    std::optional<Pattern> boundary_cp(const AppDag& dag, const DagEdge& edge) {
        const DagNode& c = dag.node(edge.to);
        switch (c.kind) {
            case DagKind::SdfCall:
                return Pattern::flat(
                    *c.def->params[static_cast<std::size_t>(edge.to_slot)].annotation);
            case DagKind::SdfHof:
                return Pattern::flat(c.hof_pattern);
            case DagKind::HofGroup: {
                auto inner = fn_in_pattern(c.fn, c.context);
                if (inner) return Pattern::hier(c.hof_pattern, *inner);
                return Pattern::flat(c.hof_pattern);
            }
            default:
                return std::nullopt;
        }
    }

    std::optional<Pattern> boundary_pp(const AppDag& dag, const DagEdge& edge) {
        const DagNode& p = dag.node(edge.from);
        switch (p.kind) {
            case DagKind::SdfCall:
                return Pattern::flat(*p.def->output_annotation);
            case DagKind::SdfHof: {
                Expr h;
                h.kind = ExprKind::HofApply;
                h.hof = p.hof;
                h.hof_pattern = p.hof_pattern;
                h.fn = p.fn;
                return hof_out_pattern(h, p.context);
            }
            case DagKind::HofGroup: {
                Expr h;
                h.kind = ExprKind::HofApply;
                h.hof = p.hof;
                h.hof_pattern = p.hof_pattern;
                h.fn = p.fn;
                return hof_out_pattern(h, p.context);
            }
            case DagKind::Source:
                return boundary_cp(dag, edge); // injection mirrors consumption
            default:
                return std::nullopt;
        }
    }

private:
    // One application of a function value. slot_elem[i] is the element index
    // of argument i inside the parent edge space; out_elem the index of the
    // result in the output space; base_cycle the ideal input arrival cycle.
    struct App {
        std::vector<std::int64_t> slot_elem;
        std::int64_t out_elem = 0;
        std::int64_t base_cycle = 0;

        std::int64_t elem(std::size_t slot) const {
            return slot < slot_elem.size() ? slot_elem[slot]
                                           : (slot_elem.empty() ? out_elem : slot_elem.back());
        }
    };

    // One firing's worth of one slot: a contiguous scalar range plus the
    // ideal cycle the firing starts at in a stall-free schedule.
    struct Run {
        std::int64_t start = 0, len = 0, base = 0;
    };

    struct Bind {
        int inst = -1;
        int port = 0;
        std::vector<Run> runs;
    };

    // A fan-out branch: one independent copy of the data, with its own
    // consumer binds partitioning the space.
    using Branch = std::vector<Bind>;

    struct DagExpansion {
        std::map<int, std::vector<Bind>> producers;
        std::map<std::pair<int, int>, std::vector<Branch>> consumers;
        std::vector<int> groups;
        std::vector<int> loose;
    };

    struct SubResult {
        std::vector<std::vector<Branch>> arg_binds; // per slot: fan-out branches
        std::vector<Bind> out_binds;
        std::int64_t in_window = 1;
        std::optional<Pattern> in_pattern, out_pattern;
        std::vector<int> groups;
        std::vector<int> loose;
    };

    Inst& at(int id) { return design_.insts[static_cast<std::size_t>(id)]; }

    int add_inst(InstKind kind, const std::string& label) {
        Inst i;
        i.id = static_cast<int>(design_.insts.size());
        i.kind = kind;
        i.label = label;
        design_.insts.push_back(std::move(i));
        return design_.insts.back().id;
    }

    int add_group(const std::string& label, const std::string& pattern) {
        GroupInfo g;
        g.id = static_cast<int>(design_.groups.size());
        g.label = label;
        g.pattern = pattern;
        design_.groups.push_back(std::move(g));
        return design_.groups.back().id;
    }

    // ----- windows and boundary patterns ----------------------------------------

    std::int64_t fn_window(const ExprPtr& fn, const Definition* context) {
        switch (fn->kind) {
            case ExprKind::Var: {
                if (const Definition* d = prog_.find(fn->name)) {
                    if (d->annotated())
                        return static_cast<std::int64_t>(d->output_annotation->size());
                    return def_window(*d);
                }
                if (context) {
                    for (const auto& b : context->bindings)
                        if (b.name == fn->name && !b.params.empty())
                            return expr_window(b.body, context);
                }
                return 1;
            }
            case ExprKind::Lambda:
                return expr_window(fn->args[0], context);
            case ExprKind::HofApply: {
                const Expr& h = *fn;
                if (!h.hof_pattern) return 1;
                std::int64_t L = static_cast<std::int64_t>(h.hof_pattern->size());
                if (!fn_contains_sdfap(prog_, cls_, context, h.fn)) return L;
                return L * fn_window(h.fn, context);
            }
            default:
                return 1;
        }
    }

    // Longest input-consumption window of an expression's subgraph.
    std::int64_t expr_window(const ExprPtr& e, const Definition* context) {
        if (!e) return 1;
        std::int64_t w = 1;
        if (e->kind == ExprKind::HofApply && e->hof_pattern) {
            std::int64_t L = static_cast<std::int64_t>(e->hof_pattern->size());
            w = fn_contains_sdfap(prog_, cls_, context, e->fn) ? L * fn_window(e->fn, context) : L;
        } else if (e->kind == ExprKind::Apply && e->fn->kind == ExprKind::Var) {
            if (const Definition* d = prog_.find(e->fn->name)) {
                w = d->annotated() ? static_cast<std::int64_t>(d->output_annotation->size())
                                   : def_window(*d);
            }
        }
        if (e->fn) w = std::max(w, expr_window(e->fn, context));
        for (const auto& a : e->args) w = std::max(w, expr_window(a, context));
        return w;
    }

    std::int64_t def_window(const Definition& d) {
        std::int64_t w = expr_window(d.body, &d);
        for (const auto& b : d.bindings) w = std::max(w, expr_window(b.body, &d));
        return w;
    }

    std::int64_t dag_window(const AppDag& dag) {
        std::int64_t w = 1;
        for (int s : dag.source_nodes) {
            for (int eid : dag.node(s).out_edges) {
                const DagNode& c = dag.node(dag.edge(eid).to);
                switch (c.kind) {
                    case DagKind::SdfCall:
                        w = std::max(w, static_cast<std::int64_t>(
                                            c.def->params[static_cast<std::size_t>(
                                                               dag.edge(eid).to_slot)]
                                                .annotation->size()));
                        break;
                    case DagKind::SdfHof:
                        w = std::max(w, static_cast<std::int64_t>(c.hof_pattern.size()));
                        break;
                    case DagKind::HofGroup: {
                        std::int64_t inner = fn_window(c.fn, c.context);
                        w = std::max(w, static_cast<std::int64_t>(c.hof_pattern.size()) * inner);
                        break;
                    }
                    default:
                        break; // comb and sink impose no pacing
                }
            }
        }
        return w;
    }

    std::optional<Pattern> fn_in_pattern(const ExprPtr& fn, const Definition* context) {
        switch (fn->kind) {
            case ExprKind::Var: {
                if (const Definition* d = prog_.find(fn->name)) {
                    if (d->annotated()) return Pattern::flat(*d->params.back().annotation);
                    return std::nullopt;
                }
                if (context) {
                    for (const auto& b : context->bindings)
                        if (b.name == fn->name && !b.params.empty() &&
                            b.body->kind == ExprKind::HofApply)
                            return hof_in_pattern(*b.body, context);
                }
                return std::nullopt;
            }
            case ExprKind::HofApply:
                return hof_in_pattern(*fn, context);
            default:
                return std::nullopt;
        }
    }

    std::optional<Pattern> hof_in_pattern(const Expr& e, const Definition* context) {
        if (!e.hof_pattern) return std::nullopt;
        if (!fn_contains_sdfap(prog_, cls_, context, e.fn))
            return Pattern::flat(*e.hof_pattern);
        auto inner = fn_in_pattern(e.fn, context);
        if (!inner) return Pattern::flat(*e.hof_pattern);
        return Pattern::hier(*e.hof_pattern, *inner);
    }

    std::optional<Pattern> fn_out_pattern(const ExprPtr& fn, const Definition* context) {
        switch (fn->kind) {
            case ExprKind::Var: {
                if (const Definition* d = prog_.find(fn->name)) {
                    if (d->annotated()) return Pattern::flat(*d->output_annotation);
                    return std::nullopt;
                }
                if (context) {
                    for (const auto& b : context->bindings)
                        if (b.name == fn->name && !b.params.empty() &&
                            b.body->kind == ExprKind::HofApply)
                            return hof_out_pattern(*b.body, context);
                }
                return std::nullopt;
            }
            case ExprKind::HofApply:
                return hof_out_pattern(*fn, context);
            default:
                return std::nullopt;
        }
    }

    std::optional<Pattern> hof_out_pattern(const Expr& e, const Definition* context) {
        if (!e.hof_pattern) return std::nullopt;
        if (!fn_contains_sdfap(prog_, cls_, context, e.fn)) {
            if (e.hof == HofKind::Fold || e.hof == HofKind::Foldl) {
                std::vector<std::int64_t> v(e.hof_pattern->size(), 0);
                v.back() = 1;
                return Pattern::flat(v);
            }
            return Pattern::flat(*e.hof_pattern);
        }
        auto inner = fn_out_pattern(e.fn, context);
        if (!inner) return Pattern::flat(*e.hof_pattern);
        return Pattern::hier(*e.hof_pattern, *inner);
    }

    // ----- leaf instances --------------------------------------------------------

    SubResult make_def_inst(const Definition& def, const std::vector<App>& apps,
                            const std::vector<Shape>& arg_shapes, const std::string& label) {
        int id = add_inst(InstKind::Def, label + def.name);
        Inst& inst = at(id);
        inst.def = &def;
        inst.context = &def;
        inst.firings = static_cast<std::int64_t>(apps.size());
        inst.latency = static_cast<std::int64_t>(def.output_annotation->size());

        SubResult r;
        r.arg_binds.resize(def.params.size());
        std::int64_t input_done = 0;
        for (std::size_t i = 0; i < def.params.size(); ++i) {
            const Shape& s = arg_shapes[i];
            std::int64_t psum = std::accumulate(def.params[i].annotation->begin(),
                                                def.params[i].annotation->end(), std::int64_t{0});
            Shape tok = (psum == 1 || s.is_scalar()) ? s : s.element();
            std::int64_t tok_scal = tok.total_scalars();
            std::vector<std::int64_t> phases;
            for (auto a : *def.params[i].annotation) phases.push_back(a * tok_scal);
            for (std::size_t p = 0; p < phases.size(); ++p)
                if (phases[p] > 0) input_done = std::max(input_done, static_cast<std::int64_t>(p));
            inst.reads.push_back(phases);
            inst.in_firing_shapes.push_back(s);
            Bind b{id, static_cast<int>(i), {}};
            std::int64_t sz = s.total_scalars();
            for (const auto& app : apps)
                b.runs.push_back(Run{app.elem(i) * sz, sz, app.base_cycle});
            r.arg_binds[i].push_back(Branch{std::move(b)});
        }
        ShapeChecker local(prog_);
        Shape out = local.check_call(def, arg_shapes);
        std::int64_t osum = std::accumulate(def.output_annotation->begin(),
                                            def.output_annotation->end(), std::int64_t{0});
        Shape otok = (osum == 1 || out.is_scalar()) ? out : out.element();
        std::vector<std::int64_t> wphases;
        std::int64_t first_emit = -1;
        for (std::size_t p = 0; p < def.output_annotation->size(); ++p) {
            wphases.push_back((*def.output_annotation)[p] * otok.total_scalars());
            if (wphases.back() > 0 && first_emit < 0) first_emit = static_cast<std::int64_t>(p);
        }
        if (first_emit >= 0 && first_emit < input_done)
            throw CompileError(def.pos, "node '" + def.name +
                                            "' emits output before its inputs are complete; "
                                            "this pattern pair is non-causal for an opaque body");
        inst.port_writes.push_back(wphases);
        inst.port_firing_shapes.push_back(out);
        inst.cp_display = Pattern::flat(*def.params.back().annotation);
        inst.pp_display = Pattern::flat(*def.output_annotation);

        Bind ob{id, 0, {}};
        std::int64_t osz = out.total_scalars();
        for (const auto& app : apps)
            ob.runs.push_back(Run{app.out_elem * osz, osz, app.base_cycle});
        r.out_binds.push_back(std::move(ob));
        r.in_window = inst.latency;
        r.in_pattern = inst.cp_display;
        r.out_pattern = inst.pp_display;
        r.loose.push_back(id);
        return r;
    }

    SubResult make_hof_inst(const Expr& hofExpr, const Definition* context,
                            const std::vector<Shape>& arg_shapes, const std::vector<App>& apps,
                            const std::string& label) {
        const auto& q = *hofExpr.hof_pattern;
        bool folds = hofExpr.hof == HofKind::Fold || hofExpr.hof == HofKind::Foldl;
        int id = add_inst(folds ? InstKind::FoldHof : InstKind::MapHof,
                          label + to_string(hofExpr.hof));
        Inst& inst = at(id);
        inst.hof = hofExpr.hof;
        inst.fn = hofExpr.fn;
        inst.context = context;
        inst.with_index = hofExpr.hof == HofKind::Imap;
        inst.firings = static_cast<std::int64_t>(apps.size());
        inst.latency = static_cast<std::int64_t>(q.size());

        SubResult r;
        const Shape& xs = arg_shapes.back();
        Shape elem = xs.element();
        std::int64_t elem_scal = elem.total_scalars();

        if (hofExpr.hof == HofKind::Foldl) {
            const Shape& init = arg_shapes[0];
            std::vector<std::int64_t> iphases(q.size(), 0);
            iphases[0] = init.total_scalars();
            inst.reads.push_back(iphases);
            inst.in_firing_shapes.push_back(init);
            r.arg_binds.emplace_back();
            Bind b{id, 0, {}};
            std::int64_t sz = init.total_scalars();
            for (const auto& app : apps)
                b.runs.push_back(Run{app.elem(0) * sz, sz, app.base_cycle});
            r.arg_binds.back().push_back(Branch{std::move(b)});
        }
        {
            std::vector<std::int64_t> phases;
            for (auto a : q) phases.push_back(a * elem_scal);
            inst.reads.push_back(phases);
            inst.in_firing_shapes.push_back(xs);
            r.arg_binds.emplace_back();
            int slot = static_cast<int>(inst.reads.size()) - 1;
            Bind b{id, slot, {}};
            std::int64_t sz = xs.total_scalars();
            for (const auto& app : apps)
                b.runs.push_back(Run{app.elem(static_cast<std::size_t>(slot)) * sz, sz,
                                     app.base_cycle});
            r.arg_binds.back().push_back(Branch{std::move(b)});
        }

        ShapeChecker local(prog_);
        Shape out = local.hof_result(context, hofExpr, arg_shapes);
        inst.port_firing_shapes.push_back(out);
        std::vector<std::int64_t> wphases;
        if (folds) {
            wphases.assign(q.size(), 0);
            wphases.back() = out.total_scalars();
            std::vector<std::int64_t> disp(q.size(), 0);
            disp.back() = 1;
            inst.pp_display = Pattern::flat(disp);
        } else {
            Shape oelem = out.element();
            for (auto a : q) wphases.push_back(a * oelem.total_scalars());
            inst.pp_display = Pattern::flat(q);
        }
        inst.port_writes.push_back(wphases);
        inst.cp_display = Pattern::flat(q);

        Bind ob{id, 0, {}};
        std::int64_t osz = out.total_scalars();
        for (const auto& app : apps)
            ob.runs.push_back(Run{app.out_elem * osz, osz, app.base_cycle});
        r.out_binds.push_back(std::move(ob));
        r.in_window = inst.latency;
        r.in_pattern = inst.cp_display;
        r.out_pattern = inst.pp_display;
        r.loose.push_back(id);
        return r;
    }

    // ----- function expansion -----------------------------------------------------

    SubResult expand_fn(const ExprPtr& fn, const Definition* context,
                        const std::vector<Shape>& arg_shapes, const std::vector<App>& apps,
                        const std::string& label) {
        switch (fn->kind) {
            case ExprKind::Var: {
                if (const Definition* d = prog_.find(fn->name)) {
                    if (d->annotated()) return make_def_inst(*d, apps, arg_shapes, label);
                    return expand_fragment(fn, context, arg_shapes, apps,
                                           label + d->name + ".");
                }
                if (context) {
                    for (const auto& b : context->bindings)
                        if (b.name == fn->name && !b.params.empty())
                            return expand_fragment(fn, context, arg_shapes, apps,
                                                   label + b.name + ".");
                }
                throw CompileError(fn->pos, "'" + fn->name + "' is not expandable");
            }
            case ExprKind::Lambda:
                return expand_fragment(fn, context, arg_shapes, apps, label + "fn.");
            case ExprKind::HofApply: {
                const Expr& h = *fn;
                if (!h.args.empty())
                    throw CompileError(h.pos,
                                       "partially applied HoF with extra arguments is not "
                                       "supported as a function value");
                if (!h.hof_pattern)
                    throw CompileError(h.pos, std::string(to_string(h.hof)) +
                                                  " needs a pattern here");
                if (!fn_contains_sdfap(prog_, cls_, context, h.fn))
                    return make_hof_inst(h, context, arg_shapes, apps, label);
                if (h.hof == HofKind::Imap)
                    throw CompileError(h.pos, "imap over SDF-AP content is not supported");
                if (h.hof == HofKind::Fold || h.hof == HofKind::Foldl)
                    throw CompileError(h.pos, "fold/foldl over SDF-AP content is only supported "
                                              "as a full application, not as a function value");
                return expand_map_group(h, context, arg_shapes.back(), apps, label);
            }
            default:
                throw CompileError(fn->pos, "unsupported function value in HoF expansion");
        }
    }

    SubResult expand_map_group(const Expr& h, const Definition* context, const Shape& xs,
                               const std::vector<App>& apps, const std::string& label) {
        const auto& q = *h.hof_pattern;
        std::int64_t n = std::accumulate(q.begin(), q.end(), std::int64_t{0});
        std::int64_t maxq = *std::max_element(q.begin(), q.end());
        if (xs.is_scalar() || xs.outer() != n)
            throw CompileError(h.pos, "map pattern/dimension mismatch");
        Shape elem = xs.element();
        std::int64_t child_window = fn_window(h.fn, context);

        std::vector<std::vector<App>> slot_apps(static_cast<std::size_t>(maxq));
        for (const auto& app : apps) {
            std::int64_t e = 0;
            for (std::size_t p = 0; p < q.size(); ++p) {
                for (std::int64_t s = 0; s < q[p]; ++s, ++e) {
                    std::int64_t ge = app.elem(0) * n + e;
                    slot_apps[static_cast<std::size_t>(s)].push_back(
                        App{{ge}, ge,
                            app.base_cycle + static_cast<std::int64_t>(p) * child_window});
                }
            }
        }

        Pattern group_pat = hof_in_pattern(h, context).value_or(Pattern::flat(q));
        int gid = add_group(label + "map", group_pat.display());

        SubResult r;
        for (std::int64_t s = 0; s < maxq; ++s) {
            SubResult child =
                expand_fn(h.fn, context, {elem}, slot_apps[static_cast<std::size_t>(s)],
                          label + "map[" + std::to_string(s) + "].");
            if (r.arg_binds.empty()) {
                r.arg_binds.resize(child.arg_binds.size());
                for (std::size_t slot = 0; slot < child.arg_binds.size(); ++slot)
                    r.arg_binds[slot].resize(child.arg_binds[slot].size());
            }
            for (std::size_t slot = 0; slot < child.arg_binds.size(); ++slot)
                for (std::size_t br = 0; br < child.arg_binds[slot].size(); ++br)
                    for (auto& b : child.arg_binds[slot][br])
                        r.arg_binds[slot][br].push_back(std::move(b));
            for (auto& b : child.out_binds) r.out_binds.push_back(std::move(b));
            auto& g = design_.groups[static_cast<std::size_t>(gid)];
            for (int cg : child.groups) g.subgroups.push_back(cg);
            for (int ci : child.loose) g.insts.push_back(ci);
            if (s == 0) {
                r.in_window = static_cast<std::int64_t>(q.size()) * child_window;
                r.in_pattern = child.in_pattern ? Pattern::hier(q, *child.in_pattern)
                                                : Pattern::flat(q);
                r.out_pattern = child.out_pattern ? Pattern::hier(q, *child.out_pattern)
                                                  : Pattern::flat(q);
            }
        }
        r.groups.push_back(gid);
        return r;
    }

    SubResult expand_foldl_group(const DagNode& node, const Shape& init_shape, const Shape& xs,
                                 const std::vector<App>& apps, const std::string& label) {
        const auto& q = node.hof_pattern;
        std::int64_t k = std::accumulate(q.begin(), q.end(), std::int64_t{0});
        Shape elem = xs.element();
        std::int64_t child_window = fn_window(node.fn, node.context);

        int gid = add_group(label + "foldl", Pattern::flat(q).display());

        std::vector<std::int64_t> elem_phase(static_cast<std::size_t>(k));
        {
            std::int64_t e = 0;
            for (std::size_t p = 0; p < q.size(); ++p)
                for (std::int64_t s = 0; s < q[p]; ++s, ++e)
                    elem_phase[static_cast<std::size_t>(e)] = static_cast<std::int64_t>(p);
        }

        SubResult r;
        r.arg_binds.resize(2);
        std::vector<SubResult> chain;
        for (std::int64_t j = 0; j < k; ++j) {
            std::vector<App> japps;
            for (const auto& app : apps) {
                std::int64_t ge = app.elem(1) * k + j;
                japps.push_back(App{{app.elem(0), ge}, app.out_elem,
                                    app.base_cycle +
                                        elem_phase[static_cast<std::size_t>(j)] * child_window});
            }
            chain.push_back(expand_fn(node.fn, node.context, {init_shape, elem}, japps,
                                      label + "foldl[" + std::to_string(j) + "]."));
            SubResult& c = chain.back();
            if (c.arg_binds.size() != 2)
                throw CompileError(node.pos, "foldl function must take two arguments");
            auto& g = design_.groups[static_cast<std::size_t>(gid)];
            for (int cg : c.groups) g.subgroups.push_back(cg);
            for (int ci : c.loose) g.insts.push_back(ci);
            if (r.arg_binds[1].size() < c.arg_binds[1].size())
                r.arg_binds[1].resize(c.arg_binds[1].size());
            for (std::size_t br = 0; br < c.arg_binds[1].size(); ++br)
                for (auto& b : c.arg_binds[1][br]) r.arg_binds[1][br].push_back(std::move(b));
        }
        r.arg_binds[0] = chain[0].arg_binds[0];
        for (std::int64_t j = 1; j < k; ++j) {
            // Accumulator space between consecutive chain instances is
            // app-position indexed on both sides.
            const auto& pb = chain[static_cast<std::size_t>(j - 1)].out_binds;
            for (const auto& branch : chain[static_cast<std::size_t>(j)].arg_binds[0]) {
                int tag = catalog_internal(
                    design_.insts[static_cast<std::size_t>(pb.at(0).inst)].label,
                    design_.insts[static_cast<std::size_t>(branch.at(0).inst)].label, init_shape);
                make_fifos_for_space(pb, branch, tag);
            }
        }
        r.out_binds = std::move(chain.back().out_binds);
        r.in_window = static_cast<std::int64_t>(q.size()) * child_window;
        auto ip = fn_in_pattern(node.fn, node.context);
        r.in_pattern = ip ? Pattern::hier(q, *ip) : Pattern::flat(q);
        r.out_pattern = chain.back().out_pattern;
        r.groups.push_back(gid);
        return r;
    }

    // Caveat: the chain fifo spaces above are indexed by app.out_elem on the
    // producer side and app.elem(0) on the consumer side; both are the group
    // app position, so they agree.

    SubResult expand_fragment(const ExprPtr& fn, const Definition* context,
                              const std::vector<Shape>& arg_shapes, const std::vector<App>& apps,
                              const std::string& label) {
        AppDag frag = builder_.build_fn_fragment(fn, context, arg_shapes);
        std::vector<App> pos_apps;
        for (std::size_t a = 0; a < apps.size(); ++a)
            pos_apps.push_back(App{{}, static_cast<std::int64_t>(a), apps[a].base_cycle});
        DagExpansion ex = expand_dag(frag, pos_apps, label);

        SubResult r;
        r.arg_binds.resize(arg_shapes.size());
        for (int snid : frag.source_nodes) {
            const DagNode& sn = frag.node(snid);
            std::int64_t per_app = sn.out_shape.total_scalars();
            for (int eid : sn.out_edges) {
                const DagEdge& edge = frag.edge(eid);
                if (edge.to == frag.sink_node)
                    throw CompileError(fn->pos,
                                       "identity function arguments are not supported in HoF "
                                       "expansion");
                auto it = ex.consumers.find({edge.to, edge.to_slot});
                if (it == ex.consumers.end())
                    throw CompileError(sn.pos, "fragment input is not consumed");
                for (const Branch& inner : it->second) {
                    Branch remapped;
                    for (Bind b : inner) {
                        for (auto& run : b.runs) {
                            std::int64_t a = run.start / per_app;
                            std::int64_t local = run.start - a * per_app;
                            run.start =
                                apps[static_cast<std::size_t>(a)].elem(
                                    static_cast<std::size_t>(sn.param_index)) *
                                    per_app +
                                local;
                        }
                        remapped.push_back(std::move(b));
                    }
                    r.arg_binds[static_cast<std::size_t>(sn.param_index)].push_back(
                        std::move(remapped));
                }
            }
        }
        {
            const DagEdge& se = frag.edge(frag.node(frag.sink_node).in_edges.at(0));
            std::int64_t per_app = se.shape.total_scalars();
            auto it = ex.producers.find(se.from);
            if (it == ex.producers.end())
                throw CompileError(fn->pos, "fragment output has no producer");
            for (Bind b : it->second) {
                for (auto& run : b.runs) {
                    std::int64_t a = run.start / per_app;
                    std::int64_t local = run.start - a * per_app;
                    run.start = apps[static_cast<std::size_t>(a)].out_elem * per_app + local;
                }
                r.out_binds.push_back(std::move(b));
            }
        }
        r.in_window = dag_window(frag);
        r.groups = std::move(ex.groups);
        r.loose = std::move(ex.loose);
        return r;
    }

    // ----- whole-DAG expansion -----------------------------------------------------

    DagExpansion expand_dag(const AppDag& dag, const std::vector<App>& apps,
                            const std::string& label) {
        DagExpansion ex;

        for (const auto& node : dag.nodes) {
            SubResult r;
            switch (node.kind) {
                case DagKind::Source:
                case DagKind::Sink:
                case DagKind::Comb:
                    continue;
                case DagKind::SdfCall: {
                    std::vector<Shape> shapes;
                    for (int eid : node.in_edges) shapes.push_back(dag.edge(eid).shape);
                    r = make_def_inst(*node.def, apps, shapes, label);
                    break;
                }
                case DagKind::SdfHof: {
                    std::vector<Shape> shapes;
                    for (int eid : node.in_edges) shapes.push_back(dag.edge(eid).shape);
                    Expr h;
                    h.kind = ExprKind::HofApply;
                    h.hof = node.hof;
                    h.hof_pattern = node.hof_pattern;
                    h.fn = node.fn;
                    h.pos = node.pos;
                    r = make_hof_inst(h, node.context, shapes, apps, label);
                    break;
                }
                case DagKind::HofGroup: {
                    std::vector<Shape> shapes;
                    for (int eid : node.in_edges) shapes.push_back(dag.edge(eid).shape);
                    if (node.hof == HofKind::Foldl) {
                        r = expand_foldl_group(node, shapes[0], shapes[1], apps, label);
                    } else if (node.hof == HofKind::Fold) {
                        throw CompileError(node.pos,
                                           "fold over SDF-AP content is not supported; use foldl");
                    } else if (node.hof == HofKind::Imap) {
                        throw CompileError(node.pos, "imap over SDF-AP content is not supported");
                    } else {
                        Expr h;
                        h.kind = ExprKind::HofApply;
                        h.hof = node.hof;
                        h.hof_pattern = node.hof_pattern;
                        h.fn = node.fn;
                        h.pos = node.pos;
                        r = expand_map_group(h, node.context, shapes[0], apps, label);
                    }
                    break;
                }
            }
            for (std::size_t i = 0; i < node.in_edges.size(); ++i)
                ex.consumers[{node.id, static_cast<int>(i)}] = r.arg_binds.at(i);
            ex.producers[node.id] = r.out_binds;
            for (int g : r.groups) ex.groups.push_back(g);
            for (int li : r.loose) ex.loose.push_back(li);
        }

        // Combinational regions after the nodes they adopt pacing from.
        std::map<int, int> region_of;
        for (const auto& members : comb_components(dag, region_of))
            expand_comb_region(dag, ex, members, apps, label);

        // Internal edges.
        for (const auto& edge : dag.edges) {
            if (dag.node(edge.from).kind == DagKind::Source) continue;
            if (edge.to == dag.sink_node) continue;
            if (dag.node(edge.from).kind == DagKind::Comb &&
                dag.node(edge.to).kind == DagKind::Comb)
                continue; // internal to a coalesced region

            auto pit = ex.producers.find(edge.from);
            auto cit = ex.consumers.find({edge.to, edge.to_slot});
            if (pit == ex.producers.end() || cit == ex.consumers.end())
                throw CompileError(dag.node(edge.to).pos, "edge endpoints failed to expand");
            int tag = catalog_edge(dag, edge);
            for (const Branch& branch : cit->second)
                make_fifos_for_space(pit->second, branch, tag);
        }
        return ex;
    }

    // ----- combinational regions ----------------------------------------------------

    std::vector<std::vector<int>> comb_components(const AppDag& dag, std::map<int, int>& region_of) {
        std::vector<std::vector<int>> out;
        std::set<int> seen;
        for (const auto& n : dag.nodes) {
            if (n.kind != DagKind::Comb || seen.count(n.id)) continue;
            std::vector<int> comp, work{n.id};
            seen.insert(n.id);
            while (!work.empty()) {
                int id = work.back();
                work.pop_back();
                comp.push_back(id);
                const DagNode& cur = dag.node(id);
                auto consider = [&](int other) {
                    if (dag.node(other).kind == DagKind::Comb && !seen.count(other)) {
                        seen.insert(other);
                        work.push_back(other);
                    }
                };
                for (int e : cur.in_edges)
                    if (e >= 0) consider(dag.edge(e).from);
                for (int e : cur.out_edges) consider(dag.edge(e).to);
            }
            std::sort(comp.begin(), comp.end());
            for (int id : comp) region_of[id] = static_cast<int>(out.size());
            out.push_back(std::move(comp));
        }
        return out;
    }

    static ExprPtr subst(const ExprPtr& e, const std::map<std::string, ExprPtr>& repl) {
        if (!e) return e;
        if (e->kind == ExprKind::Var) {
            auto it = repl.find(e->name);
            return it != repl.end() ? it->second : e;
        }
        auto copy = std::make_shared<Expr>(*e);
        if (copy->fn) copy->fn = subst(copy->fn, repl);
        for (auto& a : copy->args) a = subst(a, repl);
        return copy;
    }

    void expand_comb_region(const AppDag& dag, DagExpansion& ex, const std::vector<int>& members,
                            const std::vector<App>& apps, const std::string& label) {
        std::set<int> member_set(members.begin(), members.end());

        std::vector<const DagEdge*> ext_in;
        for (int id : members)
            for (int e : dag.node(id).in_edges)
                if (e >= 0 && !member_set.count(dag.edge(e).from)) ext_in.push_back(&dag.edge(e));
        std::sort(ext_in.begin(), ext_in.end(),
                  [](const DagEdge* a, const DagEdge* b) { return a->id < b->id; });

        std::vector<int> port_nodes;
        for (int id : members) {
            bool external = false;
            for (int e : dag.node(id).out_edges)
                if (!member_set.count(dag.edge(e).to)) external = true;
            if (external) port_nodes.push_back(id);
        }
        if (port_nodes.empty())
            throw CompileError(dag.node(members.front()).pos,
                               "combinational region has no consumers");

        int inst_id = add_inst(InstKind::Comb, label + "comb" + std::to_string(members.front()));
        ex.loose.push_back(inst_id);

        // Compose the member templates in topological (id) order.
        std::map<int, ExprPtr> composed;
        const Definition* context = nullptr;
        {
            Inst& inst = at(inst_id);
            for (int id : members) {
                const DagNode& n = dag.node(id);
                std::map<std::string, ExprPtr> repl;
                for (std::size_t slot = 0; slot < n.in_edges.size(); ++slot) {
                    const DagEdge& e = dag.edge(n.in_edges[slot]);
                    std::string ph = "$" + std::to_string(slot);
                    if (member_set.count(e.from)) {
                        repl[ph] = composed.at(e.from);
                    } else {
                        auto it = std::find_if(ext_in.begin(), ext_in.end(),
                                               [&](const DagEdge* x) { return x->id == e.id; });
                        repl[ph] = Expr::var(
                            "$" + std::to_string(std::distance(ext_in.begin(), it)));
                    }
                }
                composed[id] = repl.empty() ? n.templ : subst(n.templ, repl);
                if (n.context && needs_context(n.templ)) {
                    if (context && context != n.context)
                        throw CompileError(n.pos, "combinational region spans definitions with "
                                                  "different local scopes");
                    context = n.context;
                }
            }
            inst.context = context;
            for (int pn : port_nodes) {
                inst.templates.push_back(composed.at(pn));
                inst.port_firing_shapes.push_back(dag.node(pn).out_shape);
            }
        }

        // Adopted pacing: all producers must deliver the same window.
        std::vector<std::int64_t> window;
        std::int64_t firings = static_cast<std::int64_t>(apps.size());
        bool have = false;
        std::string first_desc;
        for (const DagEdge* e : ext_in) {
            const DagNode& p = dag.node(e->from);
            std::vector<std::int64_t> w;
            std::int64_t f = firings;
            std::string desc;
            if (p.kind == DagKind::Source) {
                w = {e->shape.total_scalars()};
                desc = "[" + std::to_string(e->shape.total_scalars()) + "]";
            } else {
                auto pit = ex.producers.find(e->from);
                if (pit == ex.producers.end() || pit->second.size() != 1)
                    throw CompileError(p.pos, "combinational region input from '" + p.label +
                                                  "' must come from a single instance");
                const Inst& pi = design_.insts[static_cast<std::size_t>(pit->second[0].inst)];
                w = pi.port_writes.at(static_cast<std::size_t>(pit->second[0].port));
                f = pi.firings;
                desc = pi.pp_display.empty() ? "?" : pi.pp_display.display();
            }
            // Leading/trailing idle phases collapse: the region consumes when
            // the data is present and emits the same cycle.
            while (w.size() > 1 && w.front() == 0) w.erase(w.begin());
            while (w.size() > 1 && w.back() == 0) w.pop_back();
            if (!have) {
                window = w;
                firings = f;
                have = true;
                first_desc = desc;
            } else if (window != w || firings != f) {
                throw CompileError(p.pos,
                                   "pattern conflict at combinational node: producers deliver " +
                                       first_desc + " vs " + desc);
            }
        }
        if (!have) window = {0};

        Inst& inst = at(inst_id);
        inst.latency = static_cast<std::int64_t>(window.size());
        inst.firings = firings;
        if (static_cast<std::int64_t>(apps.size()) != firings &&
            firings % static_cast<std::int64_t>(apps.size()) != 0)
            throw CompileError(dag.node(members.front()).pos,
                               "combinational region firing count does not align with its "
                               "applications");

        if (inst.latency > 1) {
            // Pointwise streaming: every input and output must move the same
            // scalar counts per phase.
            inst.pointwise = true;
            for (const DagEdge* e : ext_in) {
                std::int64_t per_firing = e->shape.total_scalars() *
                                          static_cast<std::int64_t>(apps.size()) / firings;
                std::int64_t wsum =
                    std::accumulate(window.begin(), window.end(), std::int64_t{0});
                if (per_firing != wsum)
                    throw CompileError(dag.node(members.front()).pos,
                                       "multi-phase combinational region requires pointwise "
                                       "scalar streams");
            }
            for (const auto& s : inst.port_firing_shapes) {
                std::int64_t per_firing =
                    s.total_scalars() * static_cast<std::int64_t>(apps.size()) / firings;
                std::int64_t wsum =
                    std::accumulate(window.begin(), window.end(), std::int64_t{0});
                if (per_firing != wsum)
                    throw CompileError(dag.node(members.front()).pos,
                                       "multi-phase combinational region requires pointwise "
                                       "scalar streams");
            }
        }

        for (std::size_t slot = 0; slot < ext_in.size(); ++slot) {
            const DagEdge* e = ext_in[slot];
            std::int64_t per_firing =
                e->shape.total_scalars() * static_cast<std::int64_t>(apps.size()) /
                std::max<std::int64_t>(firings, 1);
            std::vector<std::int64_t> phases;
            if (inst.pointwise) {
                phases = window;
            } else {
                phases.assign(static_cast<std::size_t>(inst.latency), 0);
                phases[0] = per_firing;
            }
            inst.reads.push_back(phases);
            inst.in_firing_shapes.push_back(e->shape);

            Bind b{inst_id, static_cast<int>(slot), {}};
            std::int64_t sz = e->shape.total_scalars();
            std::int64_t fpa = firings / static_cast<std::int64_t>(apps.size());
            for (const auto& app : apps) {
                // One run per firing inside the application.
                std::int64_t chunk = sz / fpa;
                for (std::int64_t g = 0; g < fpa; ++g)
                    b.runs.push_back(Run{app.elem(0) * sz + g * chunk, chunk, app.base_cycle});
            }
            ex.consumers[{e->to, e->to_slot}].push_back(Branch{std::move(b)});
        }

        for (std::size_t port = 0; port < port_nodes.size(); ++port) {
            const DagNode& pn = dag.node(port_nodes[port]);
            std::int64_t per_firing =
                pn.out_shape.total_scalars() * static_cast<std::int64_t>(apps.size()) /
                std::max<std::int64_t>(firings, 1);
            std::vector<std::int64_t> phases;
            if (inst.pointwise) {
                phases = window;
            } else {
                phases.assign(static_cast<std::size_t>(inst.latency), 0);
                phases.back() = per_firing;
            }
            inst.port_writes.push_back(phases);

            Bind b{inst_id, static_cast<int>(port), {}};
            std::int64_t sz = pn.out_shape.total_scalars();
            std::int64_t fpa = firings / static_cast<std::int64_t>(apps.size());
            for (const auto& app : apps) {
                std::int64_t chunk = sz / fpa;
                for (std::int64_t g = 0; g < fpa; ++g)
                    b.runs.push_back(Run{app.out_elem * sz + g * chunk, chunk, app.base_cycle});
            }
            ex.producers[pn.id].push_back(std::move(b));
        }
        bool positive = false;
        for (auto w : window) positive = positive || w > 0;
        if (positive) {
            inst.cp_display = Pattern::flat(window);
            inst.pp_display = Pattern::flat(window);
        }
    }

    static bool needs_context(const ExprPtr& e) {
        if (!e) return false;
        if (e->kind == ExprKind::Var)
            return !e->name.empty() && e->name[0] != '$';
        if (e->fn && needs_context(e->fn)) return true;
        for (const auto& a : e->args)
            if (needs_context(a)) return true;
        return false;
    }


    // ----- edge catalog -----------------------------------------------------------

    int catalog_edge(const AppDag& dag, const DagEdge& edge) {
        EdgeCatalogEntry e;
        e.tag = static_cast<int>(design_.edge_catalog.size());
        e.from = dag.node(edge.from).label;
        e.to = dag.node(edge.to).label;
        e.pp = boundary_pp(dag, edge);
        e.cp = boundary_cp(dag, edge);
        e.value_shape = edge.shape;
        e.token_shape = edge.shape.is_scalar() ? Shape::scalar() : edge.shape.element();
        design_.edge_catalog.push_back(std::move(e));
        return design_.edge_catalog.back().tag;
    }

    int catalog_internal(const std::string& from, const std::string& to, const Shape& value) {
        EdgeCatalogEntry e;
        e.tag = static_cast<int>(design_.edge_catalog.size());
        e.from = from;
        e.to = to;
        e.value_shape = value;
        e.token_shape = value;
        design_.edge_catalog.push_back(std::move(e));
        return design_.edge_catalog.back().tag;
    }

    // ----- fifo construction ----------------------------------------------------------

    void make_fifos_for_space(const std::vector<Bind>& producers,
                              const std::vector<Bind>& consumers, int edge_tag) {
        std::int64_t space = 0;
        for (const auto& b : producers)
            for (const auto& r : b.runs) space = std::max(space, r.start + r.len);
        for (const auto& b : consumers)
            for (const auto& r : b.runs) space = std::max(space, r.start + r.len);

        std::vector<int> cowner(static_cast<std::size_t>(space), -1);
        for (std::size_t ci = 0; ci < consumers.size(); ++ci)
            for (const auto& r : consumers[ci].runs)
                for (std::int64_t k = 0; k < r.len; ++k) {
                    auto& slot = cowner[static_cast<std::size_t>(r.start + k)];
                    if (slot != -1) throw CompileError("overlapping consumer assignment in routing");
                    slot = static_cast<int>(ci);
                }
        std::vector<int> powner(static_cast<std::size_t>(space), -1);
        for (std::size_t pi = 0; pi < producers.size(); ++pi)
            for (const auto& r : producers[pi].runs)
                for (std::int64_t k = 0; k < r.len; ++k)
                    powner[static_cast<std::size_t>(r.start + k)] = static_cast<int>(pi);

        std::map<std::pair<int, int>, int> fifo_of;
        auto fifo_for = [&](int pb, int cb) {
            auto key = std::make_pair(pb, cb);
            auto it = fifo_of.find(key);
            if (it != fifo_of.end()) return it->second;
            Fifo f;
            f.id = static_cast<int>(design_.fifos.size());
            f.producer = producers[static_cast<std::size_t>(pb)].inst;
            f.producer_port = producers[static_cast<std::size_t>(pb)].port;
            f.consumer = consumers[static_cast<std::size_t>(cb)].inst;
            f.consumer_slot = consumers[static_cast<std::size_t>(cb)].port;
            f.edge_tag = edge_tag;
            f.label = design_.insts[static_cast<std::size_t>(f.producer)].label + "->" +
                      design_.insts[static_cast<std::size_t>(f.consumer)].label;
            design_.fifos.push_back(std::move(f));
            fifo_of[key] = design_.fifos.back().id;
            return design_.fifos.back().id;
        };

        for (std::size_t pb = 0; pb < producers.size(); ++pb) {
            const Bind& b = producers[pb];
            Inst& pi = design_.insts[static_cast<std::size_t>(b.inst)];
            if (pi.kind == InstKind::Source) {
                for (const auto& r : b.runs) {
                    for (std::int64_t k = 0; k < r.len; ++k) {
                        std::int64_t flat = r.start + k;
                        int cb = cowner[static_cast<std::size_t>(flat)];
                        if (cb < 0) throw CompileError("unconsumed input scalar in routing");
                        int f = fifo_for(static_cast<int>(pb), cb);
                        design_.fifos[static_cast<std::size_t>(f)].total++;
                        source_emissions_.push_back(SourceEmission{b.inst, f, flat, 0});
                    }
                }
                continue;
            }
            auto& route = pi.write_route;
            if (route.size() <= static_cast<std::size_t>(b.port))
                route.resize(static_cast<std::size_t>(b.port) + 1);
            auto& port_route = route[static_cast<std::size_t>(b.port)];
            bool fresh = port_route.empty();
            std::size_t pos = 0;
            for (const auto& r : b.runs) {
                for (std::int64_t k = 0; k < r.len; ++k, ++pos) {
                    std::int64_t flat = r.start + k;
                    int cb = cowner[static_cast<std::size_t>(flat)];
                    if (cb < 0)
                        throw CompileError("unconsumed scalar in routing from '" + pi.label + "'");
                    int f = fifo_for(static_cast<int>(pb), cb);
                    design_.fifos[static_cast<std::size_t>(f)].total++;
                    if (fresh) port_route.push_back({f});
                    else port_route[pos].push_back(f);
                }
            }
        }

        for (std::size_t cb = 0; cb < consumers.size(); ++cb) {
            const Bind& b = consumers[cb];
            Inst& ci = design_.insts[static_cast<std::size_t>(b.inst)];
            auto& route = ci.read_route;
            if (route.size() <= static_cast<std::size_t>(b.port))
                route.resize(static_cast<std::size_t>(b.port) + 1);
            auto& slot_route = route[static_cast<std::size_t>(b.port)];
            for (const auto& r : b.runs) {
                for (std::int64_t k = 0; k < r.len; ++k) {
                    std::int64_t flat = r.start + k;
                    int pb = powner[static_cast<std::size_t>(flat)];
                    if (pb < 0)
                        throw CompileError("scalar with no producer in routing into '" + ci.label +
                                           "'");
                    slot_route.push_back(fifo_of.at({pb, static_cast<int>(cb)}));
                }
            }
        }
    }

    struct SourceEmission {
        int inst;
        int fifo;
        std::int64_t flat;
        std::int64_t cycle;
    };

    void route_source_edge(const AppDag& dag, DagExpansion& ex, const DagEdge& edge, int src_inst) {
        auto cit = ex.consumers.find({edge.to, edge.to_slot});
        if (cit == ex.consumers.end())
            throw CompileError(dag.node(edge.to).pos, "entry input is not consumed");
        int tag = catalog_edge(dag, edge);
        for (const Branch& branch : cit->second) {
            Bind prod{src_inst, 0, {}};
            prod.runs.push_back(Run{0, edge.shape.total_scalars() * design_.frames, 0});
            std::size_t first = source_emissions_.size();
            make_fifos_for_space({prod}, branch, tag);

            // Just-in-time delivery cycles derived from the branch's pacing:
            // every run is one firing; scalar k of a firing arrives at the
            // cycle of the phase that consumes it.
            std::vector<std::int64_t> cycle_of(
                static_cast<std::size_t>(edge.shape.total_scalars() * design_.frames), 0);
            for (const Bind& b : branch) {
                const Inst& ci = design_.insts[static_cast<std::size_t>(b.inst)];
                const auto& phases = ci.reads.at(static_cast<std::size_t>(b.port));
                for (const auto& r : b.runs) {
                    std::int64_t pos = 0;
                    for (std::size_t p = 0; p < phases.size(); ++p)
                        for (std::int64_t k = 0; k < phases[p]; ++k, ++pos)
                            cycle_of[static_cast<std::size_t>(r.start + pos)] =
                                r.base + static_cast<std::int64_t>(p);
                    if (pos != r.len)
                        throw CompileError("source pacing does not cover a firing of '" +
                                           ci.label + "'");
                }
            }
            for (std::size_t i = first; i < source_emissions_.size(); ++i)
                source_emissions_[i].cycle =
                    cycle_of[static_cast<std::size_t>(source_emissions_[i].flat)];
        }
    }

    void finalize_tables() {
        for (Inst& inst : design_.insts) {
            if (inst.kind == InstKind::Source) continue;
            for (std::size_t port = 0; port < inst.write_route.size(); ++port) {
                const auto& phases = inst.port_writes.at(port);
                std::int64_t pos = 0;
                for (std::int64_t g = 0; g < inst.firings; ++g) {
                    for (std::size_t p = 0; p < phases.size(); ++p) {
                        for (std::int64_t k = 0; k < phases[p]; ++k, ++pos) {
                            for (int fid : inst.write_route[port][static_cast<std::size_t>(pos)]) {
                                Fifo& fifo = design_.fifos[static_cast<std::size_t>(fid)];
                                if (fifo.in_counts.empty())
                                    fifo.in_counts.assign(
                                        static_cast<std::size_t>(inst.firings),
                                        std::vector<std::int64_t>(phases.size(), 0));
                                fifo.in_counts[static_cast<std::size_t>(g)][p]++;
                            }
                        }
                    }
                }
            }
            if (inst.kind == InstKind::Sink) continue;
            for (std::size_t slot = 0; slot < inst.read_route.size(); ++slot) {
                const auto& phases = inst.reads.at(slot);
                std::int64_t pos = 0;
                for (std::int64_t g = 0; g < inst.firings; ++g) {
                    for (std::size_t p = 0; p < phases.size(); ++p) {
                        for (std::int64_t k = 0; k < phases[p]; ++k, ++pos) {
                            int fid = inst.read_route[slot][static_cast<std::size_t>(pos)];
                            Fifo& fifo = design_.fifos[static_cast<std::size_t>(fid)];
                            if (fifo.read_counts.empty())
                                fifo.read_counts.assign(
                                    static_cast<std::size_t>(inst.firings),
                                    std::vector<std::int64_t>(phases.size(), 0));
                            fifo.read_counts[static_cast<std::size_t>(g)][p]++;
                        }
                    }
                }
            }
        }

        std::int64_t horizon = 1;
        for (const auto& e : source_emissions_) horizon = std::max(horizon, e.cycle + 1);
        for (int s : design_.source_insts)
            at(s).source_sched.assign(static_cast<std::size_t>(horizon), {});
        for (const auto& e : source_emissions_)
            at(e.inst).source_sched[static_cast<std::size_t>(e.cycle)].push_back({e.fifo, e.flat});

        for (Fifo& f : design_.fifos) {
            if (design_.insts[static_cast<std::size_t>(f.producer)].kind != InstKind::Source)
                continue;
            f.src_prefix.assign(static_cast<std::size_t>(horizon) + 1, 0);
        }
        for (const auto& e : source_emissions_)
            design_.fifos[static_cast<std::size_t>(e.fifo)]
                .src_prefix[static_cast<std::size_t>(e.cycle) + 1]++;
        for (Fifo& f : design_.fifos)
            for (std::size_t i = 1; i < f.src_prefix.size(); ++i)
                f.src_prefix[i] += f.src_prefix[i - 1];
    }

    const Program& prog_;
    const std::map<std::string, Classification>& cls_;
    DagBuilder builder_;
    ExpandedDesign design_;
    std::vector<SourceEmission> source_emissions_;
};

} // namespace sdfap
